"""Radial profiles, their moment integrals and the derived SDE parameters.

A profile is a nonnegative, rapidly decreasing radial function f.  The width
equation only sees f through the moments

    c[m, n, p] = 2*pi * integral_0^r_max  r**m * f(r)**n * f'(r)**p  dr

which are computed here by composite Gauss-Legendre quadrature.
"""

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import InvalidPhysicalInput, NonpositiveDivisorCoefficient, NonpositiveWidth, ProfileError

TRUNCATION_TOL = 1e-12
DIVISOR_TOL = 1e-14
PANEL_NODES = 16

# (m, n, p) for each stored coefficient
COEFFICIENT_INDEX = {
    "c120": (1, 2, 0),
    "c320": (3, 2, 0),
    "c102": (1, 0, 2),
    "c140": (1, 4, 0),
    "c322": (3, 2, 2),
}


@dataclass(frozen=True)
class ProfileSpec:
    f: Callable[[np.ndarray], np.ndarray]
    f_prime: Optional[Callable[[np.ndarray], np.ndarray]] = None
    r_max: float = 12.0
    quad_n: int = 512
    name: str = "custom"

    def __post_init__(self):
        if self.quad_n < PANEL_NODES:
            raise ProfileError(f"quad_n must be >= {PANEL_NODES}, got {self.quad_n}")
        if not self.r_max > 0:
            raise ProfileError("r_max must be positive")

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        if self.f_prime is not None:
            return self.f_prime(r)
        h = 1e-6 * np.maximum(1.0, np.abs(r))
        return (self.f(r + h) - self.f(r - h)) / (2.0 * h)

    def with_quad_n(self, quad_n):
        return ProfileSpec(self.f, self.f_prime, self.r_max, quad_n, self.name)

    def scaled(self, a):
        """Profile a*f (derivative scales too)."""
        fp = None if self.f_prime is None else (lambda r, g=self.f_prime: a * g(r))
        return ProfileSpec(lambda r, g=self.f: a * g(r), fp, self.r_max, self.quad_n, f"{a}*{self.name}")

    def check(self, n_sample=257):
        r = np.linspace(0.0, self.r_max, n_sample)
        fr = np.asarray(self.f(r), dtype=float)
        if np.any(fr < 0):
            raise ProfileError(f"profile {self.name!r} takes negative values")
        tail_f = abs(float(self.f(np.array([self.r_max]))[0]))
        tail_df = abs(float(self.derivative(np.array([self.r_max]))[0]))
        if tail_f > TRUNCATION_TOL or tail_df > TRUNCATION_TOL:
            raise ProfileError(
                f"profile {self.name!r} not truncated at r_max={self.r_max}: "
                f"|f|={tail_f:.3g}, |f'|={tail_df:.3g} (tolerance {TRUNCATION_TOL:g})"
            )


@dataclass(frozen=True)
class ShapeCoefficients:
    c120: float
    c320: float
    c102: float
    c140: float
    c322: float
    error: dict = field(default_factory=dict, compare=False)

    def as_dict(self):
        return {k: getattr(self, k) for k in COEFFICIENT_INDEX}


@dataclass(frozen=True)
class PhysicalInputs:
    lam: float
    d_r: float
    mass: float

    @classmethod
    def from_mass_sq(cls, lam, d_r, mass_sq):
        if not mass_sq > 0:
            raise InvalidPhysicalInput(f"mass_sq must be positive, got {mass_sq}")
        return cls(lam, d_r, math.sqrt(mass_sq))


@dataclass(frozen=True)
class SdeParams:
    delta: float
    gamma: float
    d: float
    amp: float

    def __post_init__(self):
        for name in ("gamma", "d", "amp"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise InvalidPhysicalInput(f"{name} must be positive and finite, got {v}")
        if not math.isfinite(self.delta):
            raise InvalidPhysicalInput("delta must be finite")

    def as_dict(self):
        return {"delta": self.delta, "gamma": self.gamma, "d": self.d, "amp": self.amp}


# --- quadrature -----------------------------------------------------------------


def _gl_nodes(r_max, quad_n):
    """Composite Gauss-Legendre nodes/weights on [0, r_max] with quad_n nodes total."""
    panels = max(1, quad_n // PANEL_NODES)
    x, w = np.polynomial.legendre.leggauss(PANEL_NODES)
    edges = np.linspace(0.0, r_max, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _moments(profile, quad_n):
    r, w = _gl_nodes(profile.r_max, quad_n)
    fr = np.asarray(profile.f(r), dtype=float)
    dfr = np.asarray(profile.derivative(r), dtype=float)
    out = {}
    for key, (m, n, p) in COEFFICIENT_INDEX.items():
        out[key] = 2.0 * math.pi * float(np.sum(w * r**m * fr**n * dfr**p))
    return out


def shape_coefficients(profile: ProfileSpec) -> ShapeCoefficients:
    """Moment integrals of ``profile``.

    The error estimate for each coefficient is the change against the same
    rule with half as many nodes, padded by a round-off floor.
    """
    profile.check()
    fine = _moments(profile, profile.quad_n)
    coarse = _moments(profile, max(PANEL_NODES, profile.quad_n // 2))
    err = {k: abs(fine[k] - coarse[k]) + 64 * np.finfo(float).eps * max(abs(fine[k]), 1e-300) for k in fine}
    for key in ("c120", "c320"):
        if not fine[key] > DIVISOR_TOL:
            raise NonpositiveDivisorCoefficient(f"{key}={fine[key]:.3g} <= {DIVISOR_TOL:g}; profile is degenerate")
    return ShapeCoefficients(error=err, **fine)


def derive_params(coeffs: ShapeCoefficients, phys: PhysicalInputs) -> SdeParams:
    for key in ("c120", "c320"):
        if not getattr(coeffs, key) > DIVISOR_TOL:
            raise NonpositiveDivisorCoefficient(f"{key} must be positive")
    for name in ("lam", "d_r", "mass"):
        v = getattr(phys, name)
        if not (v > 0 and math.isfinite(v)):
            raise InvalidPhysicalInput(f"{name} must be positive and finite, got {v}")
    m2 = phys.mass**2
    c = coeffs
    delta = (4.0 / c.c320) * (c.c102 - m2 * c.c140 / (2.0 * c.c120))
    gamma = 8.0 * phys.lam * m2 * c.c322 / (c.c120 * c.c320)
    d = 32.0 * math.pi**2 * phys.d_r * c.c322 / c.c320**2
    amp = phys.mass / math.sqrt(c.c120)
    return SdeParams(delta=delta, gamma=gamma, d=d, amp=amp)


def trial_wave(profile: ProfileSpec, amp, x, xdot, u_norm):
    """Trial wave function (amp/x) f(|u|/x) exp(i xdot |u|^2 / (4x))."""
    if not x > 0:
        raise NonpositiveWidth(f"width must be positive, got {x}")
    u = np.asarray(u_norm, dtype=float)
    modulus = (amp / x) * np.asarray(profile.f(u / x), dtype=float)
    val = modulus * np.exp(1j * xdot * u**2 / (4.0 * x))
    return val if val.ndim else complex(val)


def l2_mass(profile: ProfileSpec, amp):
    r, w = _gl_nodes(profile.r_max, profile.quad_n)
    return 2.0 * math.pi * amp**2 * float(np.sum(w * r * np.asarray(profile.f(r), dtype=float) ** 2))


# --- built-in and tabulated profiles ---------------------------------------------


def gaussian(r_max=12.0, quad_n=512):
    return ProfileSpec(
        f=lambda r: np.exp(-0.5 * np.asarray(r, dtype=float) ** 2),
        f_prime=lambda r: -np.asarray(r, dtype=float) * np.exp(-0.5 * np.asarray(r, dtype=float) ** 2),
        r_max=r_max,
        quad_n=quad_n,
        name="gaussian",
    )


def sech2(r_max=16.0, quad_n=512):
    def f(r):
        return 1.0 / np.cosh(np.asarray(r, dtype=float)) ** 2

    def fp(r):
        r = np.asarray(r, dtype=float)
        return -2.0 * np.tanh(r) / np.cosh(r) ** 2

    return ProfileSpec(f=f, f_prime=fp, r_max=r_max, quad_n=quad_n, name="sech2")


def zero_profile(r_max=12.0, quad_n=512):
    return ProfileSpec(f=lambda r: np.zeros_like(np.asarray(r, dtype=float)), f_prime=None, r_max=r_max,
                       quad_n=quad_n, name="zero")


BUILTIN = {"gaussian": gaussian, "sech2": sech2}


def from_table(r, fr, quad_n=512, name="table"):
    """Cubic-spline profile through samples (r, f(r)); zero beyond the last node."""
    r = np.asarray(r, dtype=float)
    fr = np.asarray(fr, dtype=float)
    if r.ndim != 1 or r.shape != fr.shape or r.size < 4:
        raise ProfileError("tabulated profile needs matching 1-D columns with at least 4 rows")
    if np.any(np.diff(r) <= 0):
        raise ProfileError("radius column must be strictly increasing")
    spline = CubicSpline(r, fr, bc_type=((1, 0.0), "natural"))
    r_lo, r_hi = r[0], r[-1]

    def f(x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= r_lo) & (x <= r_hi), spline(np.clip(x, r_lo, r_hi)), 0.0)

    def fp(x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= r_lo) & (x <= r_hi), spline(np.clip(x, r_lo, r_hi), 1), 0.0)

    return ProfileSpec(f=f, f_prime=fp, r_max=float(r_hi), quad_n=quad_n, name=name)


def read_profile_csv(path, quad_n=512):
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except ValueError:
                if rows:
                    raise ProfileError(f"bad row in {path}: {row}")
                continue  # header
    arr = np.array(rows)
    return from_table(arr[:, 0], arr[:, 1], quad_n=quad_n, name=str(path))


def load_profile(source, quad_n=512):
    """Built-in name or path to a two-column CSV."""
    if source in BUILTIN:
        return BUILTIN[source](quad_n=quad_n)
    return read_profile_csv(source, quad_n=quad_n)


def params_report(profile: ProfileSpec, phys: PhysicalInputs):
    """Flat dict with the five coefficients and the four parameters."""
    coeffs = shape_coefficients(profile)
    params = derive_params(coeffs, phys)
    out = coeffs.as_dict()
    out.update(params.as_dict())
    return out
