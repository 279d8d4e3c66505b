"""Smooth controls steering the deterministic transformed system between points.

The controlled system is

    z1' = -z1^4 z2
    z2' = delta z1 + 2 z1^3 z2^2 - gamma z1^4 z2 + u(t).

Writing z1 = p^(-1/3) turns the first equation into z2 = p'/3, so any positive
p with the right endpoint values and slopes gives a trajectory, and the second
equation then defines u.
"""

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConfigError, PositivityViolated
from .integrate import rk4_arrays
from .model import SdeParamsRef

POSITIVITY_MARGIN = 1e-8
N_GRID = 10001  # u samples land on the RK4 nodes at dt = 1e-4
KINDS = ("cubic_polynomial", "raised_polynomial", "exp_cubic")


@dataclass(frozen=True)
class Endpoints:
    xi0: float
    eta0: float
    z1: float
    z2: float

    def __post_init__(self):
        if not (self.xi0 > 0 and self.z1 > 0):
            raise ConfigError("xi0 and z1 must be positive")


def _hermite_coeffs(v0, v1, d0, d1):
    """Monomial coefficients (ascending) of the cubic with the given values and slopes on [0, 1]."""
    a2 = 3.0 * (v1 - v0) - 2.0 * d0 - d1
    a3 = 2.0 * (v0 - v1) + d0 + d1
    return np.array([v0, d0, a2, a3])


def _cubic_min(c):
    """Minimum of the cubic with ascending coefficients ``c`` on [0, 1]."""
    cand = [0.0, 1.0]
    crit = np.roots([3.0 * c[3], 2.0 * c[2], c[1]]) if np.any(c[1:] != 0) else []
    for r in crit:
        if abs(r.imag) < 1e-14 and 0.0 < r.real < 1.0:
            cand.append(r.real)
    t = np.array(cand)
    return float(np.min(np.polynomial.polynomial.polyval(t, c)))


@dataclass
class ControlSolution:
    interpolant_kind: str  # one of KINDS
    p_data: np.ndarray  # ascending coefficients of p or log p; (v0, v1, d0, d1, k) for raised_polynomial
    endpoints: Endpoints
    min_p: float
    u_grid: np.ndarray = field(default=None)
    t_grid: np.ndarray = field(default=None)
    residual: float = float("nan")

    def derivatives(self, t):
        """p, p', p'' at ``t`` from the interpolant."""
        if self.interpolant_kind == "raised_polynomial":
            return _raised_eval(self.p_data, t)
        P = np.polynomial.Polynomial(self.p_data)
        q, q1, q2 = P(t), P.deriv(1)(t), P.deriv(2)(t)
        if self.interpolant_kind == "cubic_polynomial":
            return q, q1, q2
        e = np.exp(q)
        return e, e * q1, e * (q2 + q1 * q1)

    def trajectory(self, t):
        """Analytic trajectory z1 = p^(-1/3), z2 = p'/3."""
        p0, p1, _ = self.derivatives(t)
        return p0 ** (-1.0 / 3.0), p1 / 3.0

    def to_csv(self, path):
        if self.u_grid is None:
            raise ConfigError("control not synthesized")
        p0, _, _ = self.derivatives(self.t_grid)
        np.savetxt(path, np.column_stack([self.t_grid, p0, self.u_grid]), delimiter=",", header="t,p,u",
                   comments="", fmt="%.17g")


def _bump_max(k):
    """max of t (1-t)^k on [0, 1]."""
    return (k / (k + 1.0)) ** k / (k + 1.0)


def _raised_eval(data, t):
    """S(t) + d0 t (1-t)^k - d1 (1-t) t^k with S the smoothstep between v0 and v1.

    Evaluated in product form; the power basis loses everything to cancellation
    once k is in the tens.
    """
    v0, v1, d0, d1, k = data
    t = np.asarray(t, dtype=float)
    s = 1.0 - t

    def b(x, y):  # x y^k and its first two derivatives in x, with y = 1 - x
        return x * y**k, y ** (k - 1) * (1.0 - (k + 1) * x), -k * y ** (k - 2) * (2.0 - (k + 1) * x)

    a0, a1, a2 = b(t, s)
    c0, c1, c2 = b(s, t)
    dv = v1 - v0
    p0 = v0 + dv * t * t * (3.0 - 2.0 * t) + d0 * a0 - d1 * c0
    p1 = 6.0 * dv * t * s + d0 * a1 + d1 * c1
    p2 = 6.0 * dv * (1.0 - 2.0 * t) + d0 * a2 - d1 * c2
    return p0, p1, p2


def _raised(v0, v1, d0, d1):
    """Degree-raised Hermite polynomial with min p >= min(v0, v1) / 2.

    The slope terms t (1-t)^k and (1-t) t^k vanish with their derivatives at
    the opposite end, so the Hermite data hold for any k >= 2; k is the
    smallest value keeping their combined dip below half the smaller value.
    """
    m = min(v0, v1)
    k = 2
    while (abs(d0) + abs(d1)) * _bump_max(k) > 0.5 * m:
        k += 1
    return np.array([v0, v1, d0, d1, float(k)])


def hermite_positive(e: Endpoints, fallback="raised_polynomial") -> ControlSolution:
    """Positive interpolant with p(0)=xi0^-3, p(1)=z1^-3, p'(0)=3 eta0, p'(1)=3 z2.

    The cubic Hermite polynomial is used when its minimum on [0, 1] clears the
    positivity margin.  Otherwise ``fallback`` picks the repair: a
    degree-raised polynomial (default) or exp of the cubic Hermite interpolant
    of log p.
    """
    v0, v1 = e.xi0**-3, e.z1**-3
    d0, d1 = 3.0 * e.eta0, 3.0 * e.z2
    c = _hermite_coeffs(v0, v1, d0, d1)
    m = _cubic_min(c)
    if m > POSITIVITY_MARGIN:
        return ControlSolution("cubic_polynomial", c, e, m)
    if fallback == "raised_polynomial":
        data = _raised(v0, v1, d0, d1)
    elif fallback == "exp_cubic":
        # log p: values log v, slopes p'/p
        data = _hermite_coeffs(math.log(v0), math.log(v1), d0 / v0, d1 / v1)
    else:
        raise ConfigError(f"unknown fallback {fallback!r}")
    sol = ControlSolution(fallback, data, e, 0.0)
    t = np.linspace(0.0, 1.0, 8193)
    sol.min_p = float(np.min(sol.derivatives(t)[0]))
    return sol


def control_values(sol: ControlSolution, p: SdeParamsRef, t):
    """u(t) = p''/3 - delta p^(-1/3) - (2/9) p'^2/p + (gamma/3) p^(-4/3) p'."""
    q, q1, q2 = sol.derivatives(np.asarray(t, dtype=float))
    return q2 / 3.0 - p.delta * q ** (-1.0 / 3.0) - (2.0 / 9.0) * q1 * q1 / q + (p.gamma / 3.0) * q ** (-4.0 / 3.0) * q1


def synthesize_control(sol: ControlSolution, p: SdeParamsRef, n_grid=N_GRID) -> ControlSolution:
    if n_grid < 4:
        raise ConfigError("n_grid must be at least 4")
    t = np.linspace(0.0, 1.0, n_grid)
    return replace(sol, t_grid=t, u_grid=control_values(sol, p, t))


def closed_loop_defect(sol: ControlSolution, p: SdeParamsRef, t):
    """z2' - (drift + u) along the analytic trajectory; zero up to rounding."""
    z1, z2 = sol.trajectory(t)
    _, _, q2 = sol.derivatives(t)
    dz2 = q2 / 3.0
    return dz2 - (p.delta * z1 + 2.0 * z1**3 * z2**2 - p.gamma * z1**4 * z2 + control_values(sol, p, t))


@dataclass
class ReachabilityReport:
    branch: str
    residual_z1: float
    residual_z2: float
    min_z1: float
    min_p: float
    dt: float

    @property
    def residual(self):
        return max(self.residual_z1, self.residual_z2)

    def as_dict(self):
        return {"branch": self.branch, "residual_z1": self.residual_z1, "residual_z2": self.residual_z2,
                "residual": self.residual, "min_z1": self.min_z1, "min_p": self.min_p, "dt": self.dt}

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.as_dict(), fh, indent=2)


def _control_field(p: SdeParamsRef, u):
    def f(t, z):
        z1, z2 = z[0], z[1]
        z14 = z1**4
        return np.array([-z14 * z2, p.delta * z1 + 2.0 * z1**3 * z2 * z2 - p.gamma * z14 * z2 + u(t)])

    return f


def verify_reachability(e: Endpoints, p: SdeParamsRef, dt=1e-4, n_grid=N_GRID, sol=None,
                        fallback="raised_polynomial") -> ReachabilityReport:
    """Steer (xi0, eta0) with the synthesized control by RK4 and report endpoint errors.

    The control is interpolated from its samples on the uniform grid by a
    not-a-knot cubic spline.
    """
    if not (0 < dt <= 1e-3):
        raise ConfigError("dt must be in (0, 1e-3]")
    if sol is None:
        sol = synthesize_control(hermite_positive(e, fallback), p, n_grid)
    elif sol.u_grid is None:
        sol = synthesize_control(sol, p, n_grid)
    u = CubicSpline(sol.t_grid, sol.u_grid)
    n = int(round(1.0 / dt))
    t, z = rk4_arrays(_control_field(p, u), np.array([e.xi0, e.eta0]), 1.0, 1.0 / n)
    bad = np.nonzero(~(z[:, 0] > 0))[0]
    if bad.size:
        raise PositivityViolated(f"z1 <= 0 at t={t[bad[0]]:.6g}")
    return ReachabilityReport(sol.interpolant_kind, float(abs(z[-1, 0] - e.z1)), float(abs(z[-1, 1] - e.z2)),
                              float(z[:, 0].min()), sol.min_p, 1.0 / n)


def verify_batch(endpoints, p: SdeParamsRef, dt=1e-4, n_grid=N_GRID, fallback="raised_polynomial"):
    """Vectorized RK4 over many endpoint pairs; returns a list of reports."""
    sols = [synthesize_control(hermite_positive(e, fallback), p, n_grid) for e in endpoints]
    us = [CubicSpline(s.t_grid, s.u_grid) for s in sols]
    n = int(round(1.0 / dt))
    h = 1.0 / n
    half = np.arange(2 * n + 1) * (0.5 * h)
    table = np.array([u(half) for u in us])  # (m, 2n+1)
    z = np.array([[e.xi0, e.eta0] for e in endpoints], dtype=float)
    zmin = z[:, 0].copy()

    def f(z, uu):
        z1, z2 = z[:, 0], z[:, 1]
        z14 = z1**4
        return np.column_stack([-z14 * z2, p.delta * z1 + 2.0 * z1**3 * z2 * z2 - p.gamma * z14 * z2 + uu])

    for k in range(n):
        u0, um, u1 = table[:, 2 * k], table[:, 2 * k + 1], table[:, 2 * k + 2]
        k1 = f(z, u0)
        k2 = f(z + 0.5 * h * k1, um)
        k3 = f(z + 0.5 * h * k2, um)
        k4 = f(z + h * k3, u1)
        z = z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        np.minimum(zmin, z[:, 0], out=zmin)
    if np.any(~(zmin > 0)):
        raise PositivityViolated("z1 <= 0 on some path")
    return [ReachabilityReport(s.interpolant_kind, float(abs(z[i, 0] - e.z1)), float(abs(z[i, 1] - e.z2)),
                               float(zmin[i]), s.min_p, h) for i, (e, s) in enumerate(zip(endpoints, sols))]


def random_endpoints(n, seed, lo=0.2, hi=3.0, vlo=-2.0, vhi=2.0):
    g = np.random.default_rng(seed)
    a = g.uniform(lo, hi, size=(n, 2))
    b = g.uniform(vlo, vhi, size=(n, 2))
    return [Endpoints(a[i, 0], b[i, 0], a[i, 1], b[i, 1]) for i in range(n)]
