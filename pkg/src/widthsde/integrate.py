"""Pathwise integrators for the original and transformed width systems.

All Gaussian increments come from :mod:`widthsde.rng`, addressed by
(seed, path_index, step), so a path is a pure function of its config.
Fixed-step schemes can consume ``refine`` fine-grid draws per step, which
is how coarse and fine paths share one Brownian motion in the strong-error
study.
"""

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from numba import njit

from . import rng
from .errors import ConfigError, NonpositiveWidth, NumericalOverflow, StepBlowUp
from .model import HalfPlaneState, SdeParamsRef, TransformedState

SCHEMES = ("euler_maruyama", "tamed_euler", "adaptive_em")
_SCHEME_CODE = {name: i for i, name in enumerate(SCHEMES)}

OVERFLOW = 1e12

_OK, _BLOWUP, _OVERFLOW = 0, 1, 2


@dataclass(frozen=True)
class IntegratorConfig:
    scheme: str = "adaptive_em"
    dt: float = 1e-3
    t_end: float = 1.0
    x_floor: float = 1e-3
    dt_min: float = 1e-9
    seed: int = 0
    path_index: int = 0
    record_dt: float = 0.0  # 0 records every step

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if not (self.dt > 0 and self.t_end > 0 and self.x_floor > 0):
            raise ConfigError("dt, t_end and x_floor must be positive")
        if not (0 < self.dt_min <= self.dt):
            raise ConfigError(f"need 0 < dt_min <= dt, got dt_min={self.dt_min}, dt={self.dt}")
        if not (0 <= self.seed < 2**64 and 0 <= self.path_index < 2**48):
            raise ConfigError("seed must fit in 64 bits and path_index in 48 bits")
        if self.record_dt < 0:
            raise ConfigError("record_dt must be nonnegative")

    def replace(self, **kw):
        d = asdict(self)
        d.update(kw)
        return IntegratorConfig(**d)


@dataclass
class PathSample:
    times: np.ndarray
    states: np.ndarray  # shape (n, 2)
    coordinate_system: str
    min_x: float
    hit_floor: bool
    rng_fingerprint: int
    status: str = "ok"
    config: Optional[dict] = field(default=None)
    n_steps: int = 0

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float).reshape(-1, 2)
        if self.times.shape[0] != self.states.shape[0]:
            raise ValueError("times and states differ in length")

    @property
    def x(self):
        return self.states[:, 0]

    @property
    def y(self):
        return self.states[:, 1]

    @property
    def terminal(self):
        return self.states[-1]

    def header(self):
        return {"original": "t,x,y", "transformed": "t,xi,eta"}.get(self.coordinate_system, "t,z1,z2")

    def metadata(self):
        return {
            "coordinate_system": self.coordinate_system,
            "config": self.config,
            "min_x": self.min_x,
            "hit_floor": bool(self.hit_floor),
            "fingerprint": int(self.rng_fingerprint),
            "status": self.status,
            "n_steps": int(self.n_steps),
        }

    def to_csv(self, path):
        data = np.column_stack([self.times, self.states])
        np.savetxt(path, data, delimiter=",", header=self.header(), comments="", fmt="%.17g")
        with open(str(path) + ".json", "w") as fh:
            json.dump(self.metadata(), fh, indent=2, sort_keys=True)

    @classmethod
    def from_csv(cls, path):
        with open(path) as fh:
            head = fh.readline().strip()
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        system = {"t,x,y": "original", "t,xi,eta": "transformed"}.get(head)
        if system is None:
            raise ConfigError(f"{path}: unexpected header {head!r}")
        meta = {}
        try:
            with open(str(path) + ".json") as fh:
                meta = json.load(fh)
        except FileNotFoundError:
            pass
        x = data[:, 1] if system == "original" else 1.0 / data[:, 1]
        return cls(
            times=data[:, 0],
            states=data[:, 1:3],
            coordinate_system=system,
            min_x=float(meta.get("min_x", np.min(x))),
            hit_floor=bool(meta.get("hit_floor", False)),
            rng_fingerprint=int(meta.get("fingerprint", 0)),
            status=meta.get("status", "ok"),
            config=meta.get("config"),
            n_steps=int(meta.get("n_steps", len(data) - 1)),
        )


# --- kernels ----------------------------------------------------------------------


@njit(cache=True)
def _grow(a, n):
    b = np.empty(2 * a.shape[0])
    b[:n] = a[:n]
    return b


@njit(cache=True)
def _increment(seed, path, k, refine, h):
    if refine == 1:
        return math.sqrt(h) * rng.gauss(seed, path, k, 0)
    acc = 0.0
    base = k * refine
    for j in range(refine):
        acc += rng.gauss(seed, path, base + j, 0)
    return math.sqrt(h / refine) * acc


@njit(cache=True)
def _original_kernel(x0, y0, delta, gamma, sigma, scheme, dt, t_end, x_floor, dt_min, seed, path, refine,
                     record_dt):
    cap = 1024
    ts = np.empty(cap)
    xs = np.empty(cap)
    ys = np.empty(cap)
    ts[0] = 0.0
    xs[0] = x0
    ys[0] = y0
    n = 1
    t = 0.0
    x = x0
    y = y0
    k = 0
    min_x = x0
    hit = x0 < x_floor
    status = 0
    next_rec = record_dt
    while t_end - t > 1e-13 * t_end:
        h = dt
        if scheme == 2:
            h = dt * x * x * x * x
            if h > dt:
                h = dt
            if h < dt_min:
                h = dt_min
        last = False
        if h >= t_end - t:
            h = t_end - t
            last = True
        x2 = x * x
        b = delta / (x2 * x) - gamma * y / (x2 * x2)
        if scheme == 1:
            b = b / (1.0 + h * abs(b))
        dw = _increment(seed, path, k, refine, h)
        x_new = x + y * h
        y_new = y + b * h + sigma / x2 * dw
        k += 1
        if not x_new > 0.0:
            status = 1
            break
        if not (abs(y_new) < 1e12 and x_new < 1e12):
            status = 2
            break
        x = x_new
        y = y_new
        t = t_end if last else t + h
        if x < min_x:
            min_x = x
        if x < x_floor:
            hit = True
        if record_dt <= 0.0 or t >= next_rec or last:
            if n == ts.shape[0]:
                ts = _grow(ts, n)
                xs = _grow(xs, n)
                ys = _grow(ys, n)
            ts[n] = t
            xs[n] = x
            ys[n] = y
            n += 1
            while record_dt > 0.0 and next_rec <= t:
                next_rec += record_dt
    return ts[:n].copy(), xs[:n].copy(), ys[:n].copy(), status, min_x, hit, k


@njit(cache=True)
def _transformed_kernel(xi0, eta0, delta, gamma, sigma, scheme, dt, t_end, x_floor, dt_min, seed, path, refine,
                        record_dt):
    cap = 1024
    ts = np.empty(cap)
    us = np.empty(cap)
    vs = np.empty(cap)
    ts[0] = 0.0
    us[0] = xi0
    vs[0] = eta0
    n = 1
    t = 0.0
    xi = xi0
    eta = eta0
    k = 0
    max_xi = xi0
    status = 0
    next_rec = record_dt
    while t_end - t > 1e-13 * t_end:
        h = dt
        if scheme == 2 and xi != 0.0:
            xi4 = xi * xi * xi * xi
            h = dt / xi4
            if h > dt:
                h = dt
            if h < dt_min:
                h = dt_min
        last = False
        if h >= t_end - t:
            h = t_end - t
            last = True
        dw = _increment(seed, path, k, refine, h)
        k += 1
        if xi == 0.0:
            # the line xi = 0 is invariant: eta is a scaled Brownian motion there
            xi_new = 0.0
            eta_new = eta + sigma * dw
        else:
            xi3 = xi * xi * xi
            xi4 = xi3 * xi
            a = -xi4 * eta
            b = delta * xi + 2.0 * xi3 * eta * eta - gamma * xi4 * eta
            if scheme == 1:
                a = a / (1.0 + h * abs(a))
                b = b / (1.0 + h * abs(b))
            xi_new = xi + a * h
            eta_new = eta + b * h + sigma * dw
            if xi > 0.0 and not xi_new > 0.0:
                status = 1
                break
        if not (abs(xi_new) < 1e12 and abs(eta_new) < 1e12):
            status = 2
            break
        xi = xi_new
        eta = eta_new
        t = t_end if last else t + h
        if xi > max_xi:
            max_xi = xi
        if record_dt <= 0.0 or t >= next_rec or last:
            if n == ts.shape[0]:
                ts = _grow(ts, n)
                us = _grow(us, n)
                vs = _grow(vs, n)
            ts[n] = t
            us[n] = xi
            vs[n] = eta
            n += 1
            while record_dt > 0.0 and next_rec <= t:
                next_rec += record_dt
    min_x = 1.0 / max_xi if max_xi > 0.0 else np.inf
    return ts[:n].copy(), us[:n].copy(), vs[:n].copy(), status, min_x, min_x < x_floor, k


def _run(kernel, z0, p, cfg, refine, system):
    if cfg.scheme == "adaptive_em" and refine != 1:
        raise ConfigError("adaptive_em cannot share coarse/fine increments (refine must be 1)")
    ts, us, vs, status, min_x, hit, steps = kernel(
        float(z0[0]), float(z0[1]), float(p.delta), float(p.gamma), p.sigma, _SCHEME_CODE[cfg.scheme],
        float(cfg.dt), float(cfg.t_end), float(cfg.x_floor), float(cfg.dt_min), np.uint64(cfg.seed),
        np.uint64(cfg.path_index), int(refine), float(cfg.record_dt),
    )
    sample = PathSample(
        times=ts,
        states=np.column_stack([us, vs]),
        coordinate_system=system,
        min_x=float(min_x),
        hit_floor=bool(hit),
        rng_fingerprint=rng.fingerprint(cfg.seed, cfg.path_index),
        status={_OK: "ok", _BLOWUP: "step_blow_up", _OVERFLOW: "overflow"}[status],
        config=asdict(cfg),
        n_steps=int(steps),
    )
    if status == _BLOWUP:
        raise StepBlowUp(f"{system} path {cfg.path_index}: step left the half plane at t={ts[-1]:.6g}", sample)
    if status == _OVERFLOW:
        raise NumericalOverflow(f"{system} path {cfg.path_index}: |state| > {OVERFLOW:g} at t={ts[-1]:.6g}",
                                sample)
    return sample


def simulate_original(init: HalfPlaneState, p: SdeParamsRef, cfg: IntegratorConfig, refine=1) -> PathSample:
    """Discrete path of the (x, y) system.

    The width is advanced by x + y*dt (no noise touches it); the velocity by
    the chosen scheme.  ``adaptive_em`` takes steps dt*min(1, x^4) clamped
    below by ``dt_min``.  Raises :class:`StepBlowUp` (with the truncated path
    attached) if a step produces x <= 0.
    """
    if not init.x > 0:
        raise NonpositiveWidth("initial width must be positive")
    return _run(_original_kernel, (init.x, init.y), p, cfg, refine, "original")


def simulate_transformed(init: TransformedState, p: SdeParamsRef, cfg: IntegratorConfig, refine=1) -> PathSample:
    """Discrete path of the (xi, eta) system with additive noise sqrt(2D) dW.

    ``adaptive_em`` mirrors the original-system rule: dt*min(1, xi^-4).
    """
    return _run(_transformed_kernel, (init.xi, init.eta), p, cfg, refine, "transformed")


# --- deterministic reference -------------------------------------------------------


def rk4_arrays(field, z0, t_end, dt):
    """Classical RK4 for dz/dt = field(t, z); z may be any array shape.

    Returns (times, states) with states stacked along axis 0.
    """
    n = int(math.ceil(t_end / dt - 1e-9))
    z = np.array(z0, dtype=float)
    out = np.empty((n + 1,) + z.shape)
    times = np.empty(n + 1)
    out[0] = z
    times[0] = 0.0
    t = 0.0
    for k in range(n):
        h = min(dt, t_end - t)
        k1 = field(t, z)
        k2 = field(t + 0.5 * h, z + 0.5 * h * k1)
        k3 = field(t + 0.5 * h, z + 0.5 * h * k2)
        k4 = field(t + h, z + h * k3)
        z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = t_end if k == n - 1 else t + h
        if not np.all(np.abs(z) < OVERFLOW):
            raise NumericalOverflow(f"RK4 state left the finite range at t={t:.6g}")
        out[k + 1] = z
        times[k + 1] = t
    return times, out


def rk4_ode(field, init, t_end, dt, coordinate_system="ode") -> PathSample:
    if not dt > 0:
        raise ConfigError("dt must be positive")
    times, states = rk4_arrays(field, np.asarray(init, dtype=float), t_end, dt)
    x = states[:, 0]
    return PathSample(times, states, coordinate_system, float(np.min(x)), False, 0, n_steps=len(times) - 1)


def original_field(p: SdeParamsRef):
    """Deterministic (D = 0) right-hand side of the original system, for :func:`rk4_ode`."""

    def field(t, z):
        x, y = z[0], z[1]
        return np.array([y, p.delta / x**3 - p.gamma * y / x**4])

    return field


def transformed_field(p: SdeParamsRef):
    def field(t, z):
        xi, eta = z[0], z[1]
        return np.array([-(xi**4) * eta, p.delta * xi + 2.0 * xi**3 * eta**2 - p.gamma * xi**4 * eta])

    return field


# --- strong convergence --------------------------------------------------------------


@dataclass
class StrongErrorResult:
    system: str
    dts: np.ndarray
    errors: np.ndarray
    stderr: np.ndarray
    slope: float
    slope_stderr: float
    dt_ref: float
    n_paths: int
    n_failed: int

    def as_dict(self):
        return {
            "system": self.system,
            "dt": [float(v) for v in self.dts],
            "strong_error": [float(v) for v in self.errors],
            "stderr": [float(v) for v in self.stderr],
            "slope": self.slope,
            "slope_stderr": self.slope_stderr,
            "dt_ref": self.dt_ref,
            "n_paths": self.n_paths,
            "n_failed": self.n_failed,
        }


def loglog_slope(h, err):
    """Least-squares slope of log(err) against log(h), with its standard error."""
    lh, le = np.log(np.asarray(h, dtype=float)), np.log(np.asarray(err, dtype=float))
    A = np.column_stack([lh, np.ones_like(lh)])
    coef, res, _, _ = np.linalg.lstsq(A, le, rcond=None)
    n = len(lh)
    if n > 2:
        resid = le - A @ coef
        s2 = float(resid @ resid) / (n - 2)
        se = math.sqrt(s2 / float(np.sum((lh - lh.mean()) ** 2)))
    else:
        se = float("nan")
    return float(coef[0]), se


def strong_error_study(system, init, p: SdeParamsRef, dt_list, n_paths, seed, t_end=1.0, ref_factor=4):
    """Euler-Maruyama strong error E|Z_dt(T) - Z_ref(T)| on coupled Brownian paths.

    The reference runs at ``dt_list[-1] / ref_factor``; every level sums the
    reference increments that fall into its steps.
    """
    dts = np.asarray(dt_list, dtype=float)
    if dts.size < 3 or np.any(np.diff(dts) >= 0):
        raise ConfigError("dt_list needs at least 3 strictly decreasing entries")
    dt_ref = dts[-1] / ref_factor
    refines = np.rint(dts / dt_ref).astype(int)
    if np.any(np.abs(refines * dt_ref - dts) > 1e-12 * dts):
        raise ConfigError("each dt must be an integer multiple of the reference step")
    for coarse, fine in zip(refines[:-1], refines[1:]):
        if coarse % fine:
            raise ConfigError("each dt must divide the next-coarser one")
    if np.any(np.abs(np.rint(t_end / dts) * dts - t_end) > 1e-12 * t_end):
        raise ConfigError("t_end must be a multiple of every dt")
    if n_paths < 1:
        raise ConfigError("n_paths must be positive")
    if system == "original":
        sim, z0 = simulate_original, init if isinstance(init, HalfPlaneState) else HalfPlaneState(*init)
    elif system == "transformed":
        sim, z0 = simulate_transformed, init if isinstance(init, TransformedState) else TransformedState(*init)
    else:
        raise ConfigError(f"unknown system {system!r}")

    base = IntegratorConfig(scheme="euler_maruyama", dt=dt_ref, t_end=t_end, dt_min=dt_ref, seed=seed,
                            record_dt=t_end)
    diffs = np.full((n_paths, len(dts)), np.nan)
    failed = 0
    for i in range(n_paths):
        try:
            ref = sim(z0, p, base.replace(path_index=i), refine=1).terminal
            row = [np.linalg.norm(sim(z0, p, base.replace(path_index=i, dt=float(h)), refine=int(r)).terminal - ref)
                   for h, r in zip(dts, refines)]
        except (StepBlowUp, NumericalOverflow):
            failed += 1
            continue
        diffs[i] = row
    ok = ~np.isnan(diffs[:, 0])
    errs = diffs[ok].mean(axis=0)
    se = diffs[ok].std(axis=0, ddof=1) / math.sqrt(max(1, ok.sum())) if ok.sum() > 1 else np.full(len(dts), np.nan)
    slope, slope_se = loglog_slope(dts, errs)
    return StrongErrorResult(system, dts, errs, se, slope, slope_se, float(dt_ref), int(n_paths), failed)
