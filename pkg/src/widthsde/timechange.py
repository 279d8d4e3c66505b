"""Weak solutions of the width equation by random time change and reweighting.

Under the reference measure the velocity runs as an Ornstein-Uhlenbeck
process on an auxiliary clock s,

    y_hat(s) = e^{-gamma s} y0 + sqrt(2D) int_0^s e^{-gamma (s-r)} dB_r,

and the width follows in closed form,

    x_hat(s) = (x0^-3 - 3 int_0^s y_hat)^(-1/3)   for s < tau.

The physical clock is T_s = int_0^s x_hat^4 and A_t is its inverse, so that
x(t) = x_hat(A_t), y(t) = y_hat(A_t) solves the equation with delta = 0.  The
delta term is restored by the Girsanov weight

    log rho = int theta dB - 1/2 int theta^2 ds,   theta = delta x_hat / sqrt(2D),

with theta switched off after A_horizon.  Target expectations are E_Q[g rho].
"""

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit

from . import rng
from .errors import ConfigError, GridExhausted, NonpositiveWidth
from .model import SdeParamsRef

STEP_FLOOR = 1e-12


# --- Ornstein-Uhlenbeck ---------------------------------------------------------------


def ou_exact(y0, p: SdeParamsRef, s_grid, seed, path_index=0, stream=rng.STREAM_OU):
    """Exact OU transitions on ``s_grid``.  ``path_index`` may be an array (one row per path)."""
    if not p.gamma > 0:
        raise ConfigError("the auxiliary OU process needs gamma > 0")
    s = np.asarray(s_grid, dtype=float)
    if s.ndim != 1 or s.size < 1 or np.any(np.diff(s) <= 0):
        raise ConfigError("s_grid must be strictly increasing")
    idx = np.atleast_1d(np.asarray(path_index, dtype=np.uint64))
    ds = np.diff(s)
    decay = np.exp(-p.gamma * ds)
    sd = np.sqrt(p.d / p.gamma * -np.expm1(-2.0 * p.gamma * ds))
    z = rng.normals(seed, idx, 0, len(ds), stream)
    out = np.empty((len(idx), len(s)))
    out[:, 0] = y0
    for k in range(len(ds)):
        out[:, k + 1] = decay[k] * out[:, k] + sd[k] * z[:, k]
    return out[0] if np.ndim(path_index) == 0 else out


# --- auxiliary path on a fixed grid ----------------------------------------------------------


@dataclass
class AuxiliaryPath:
    x0: float
    y0: float
    s_grid: np.ndarray
    b: np.ndarray
    y_hat: np.ndarray
    y_hat_integral: np.ndarray
    x_hat: np.ndarray  # nan from the first node at or past the crossing
    clock_t: np.ndarray  # inf from the first node at or past the crossing
    tau_bracket: Optional[tuple] = None
    params: Optional[SdeParamsRef] = None

    @property
    def level(self):
        """x0^-3 / 3, the value of int y_hat at which the width blows up."""
        return self.x0**-3 / 3.0

    @property
    def tau(self):
        return None if self.tau_bracket is None else 0.5 * sum(self.tau_bracket)

    @property
    def n_valid(self):
        return int(np.sum(np.isfinite(self.clock_t)))


def _interp_integral(s_a, s_b, ya, yb, Ia, s):
    """Integral of the linear interpolant of y_hat from s_a to s, plus Ia."""
    h = s - s_a
    return Ia + ya * h + 0.5 * (yb - ya) / (s_b - s_a) * h * h


def _bisect_crossing(s_a, s_b, ya, yb, Ia, level, tol=1e-15):
    lo, hi = s_a, s_b
    while hi - lo > tol * max(1.0, abs(hi)):
        mid = 0.5 * (lo + hi)
        if _interp_integral(s_a, s_b, ya, yb, Ia, mid) >= level:
            hi = mid
        else:
            lo = mid
        if mid == lo and mid == hi:
            break
    return lo, hi


def aux_path(x0, y0, p: SdeParamsRef, s_grid, seed, path_index=0, stream=rng.STREAM_OU) -> AuxiliaryPath:
    """Auxiliary OU path, its running integral, closed-form width and clock.

    The first grid interval in which the trapezoid integral reaches x0^-3/3 is
    refined by bisection on the interpolant; that bracket is tau.
    """
    if not x0 > 0:
        raise NonpositiveWidth("x0 must be positive")
    s = np.asarray(s_grid, dtype=float)
    if p.gamma > 0:
        y = ou_exact(y0, p, s, seed, path_index, stream)
    else:
        raise ConfigError("the auxiliary OU process needs gamma > 0")
    ds = np.diff(s)
    integral = np.concatenate([[0.0], np.cumsum(0.5 * (y[1:] + y[:-1]) * ds)])
    level = x0**-3 / 3.0
    crossed = np.nonzero(integral >= level)[0]
    bracket = None
    n_ok = len(s)
    if crossed.size:
        k = int(crossed[0])
        n_ok = k
        bracket = _bisect_crossing(s[k - 1], s[k], y[k - 1], y[k], integral[k - 1], level)
    bracket_term = x0**-3 - 3.0 * integral
    x_hat = np.full(len(s), np.nan)
    x_hat[:n_ok] = bracket_term[:n_ok] ** (-1.0 / 3.0)
    clock = np.full(len(s), np.inf)
    x4 = x_hat[:n_ok] ** 4
    clock[:n_ok] = np.concatenate([[0.0], np.cumsum(0.5 * (x4[1:] + x4[:-1]) * ds[: n_ok - 1])])
    if p.d > 0:
        b = (y - y0 + p.gamma * integral) / p.sigma
    else:
        b = np.zeros_like(y)
    return AuxiliaryPath(float(x0), float(y0), s, b, y, integral, x_hat, clock, bracket, p)


def crossing_times(x0, y0, p: SdeParamsRef, s_grid, seed, path_indices, stream=rng.STREAM_OU):
    """First grid node where the trapezoid integral of y_hat reaches x0^-3/3, per path.

    Vectorized over ``path_indices`` with the same draws as :func:`aux_path`;
    paths that never cross on the grid get inf.
    """
    if not x0 > 0:
        raise NonpositiveWidth("x0 must be positive")
    s = np.asarray(s_grid, dtype=float)
    idx = np.atleast_1d(np.asarray(path_indices, dtype=np.uint64))
    y = ou_exact(y0, p, s, seed, idx, stream)
    integral = np.cumsum(0.5 * (y[:, 1:] + y[:, :-1]) * np.diff(s), axis=1)
    hit = integral >= x0**-3 / 3.0
    first = np.argmax(hit, axis=1)
    return np.where(hit.any(axis=1), s[first + 1], np.inf)


def clock_near_tau(aux: AuxiliaryPath, gaps):
    """Clock T at distances ``gaps`` below the crossing, along the interpolant.

    Integrates x_hat^4 = (x0^-3 - 3 I(s))^(-4/3) from the last valid node with
    geometrically shrinking substeps; used to watch T diverge as s -> tau.
    """
    if aux.tau_bracket is None:
        raise GridExhausted("no crossing on this grid")
    k = aux.n_valid - 1
    s_a, s_b = aux.s_grid[k], aux.s_grid[k + 1]
    ya, yb, Ia = aux.y_hat[k], aux.y_hat[k + 1], aux.y_hat_integral[k]
    tau = aux.tau_bracket[0]
    out = []
    for gap in np.atleast_1d(gaps):
        target = tau - gap
        if target <= s_a:
            out.append(float(np.interp(target, aux.s_grid[: k + 1], aux.clock_t[: k + 1])))
            continue
        # nodes clustered toward the singular end
        u = 1.0 - np.geomspace(1.0, gap / (tau - s_a), 4000)
        nodes = s_a + (tau - s_a) * u
        nodes[-1] = target
        nodes = np.concatenate([[s_a], nodes[nodes > s_a]])
        vals = (aux.x0**-3 - 3.0 * _interp_integral(s_a, s_b, ya, yb, Ia, nodes)) ** (-4.0 / 3.0)
        out.append(float(aux.clock_t[k] + np.sum(0.5 * (vals[1:] + vals[:-1]) * np.diff(nodes))))
    return np.array(out)


def time_change(aux: AuxiliaryPath, t_grid):
    """A_t = inf{s : T_s > t} by monotone (piecewise-linear) inversion of the clock."""
    t = np.asarray(t_grid, dtype=float)
    n = aux.n_valid
    T = aux.clock_t[:n]
    if np.any(np.diff(t) < 0):
        raise ConfigError("t_grid must be increasing")
    if t.size and t[-1] > T[-1]:
        raise GridExhausted(
            f"clock reaches only {T[-1]:.6g} on this grid (requested {t[-1]:.6g}); extend s_grid"
        )
    return np.interp(t, T, aux.s_grid[:n])


# --- weak sampler with adaptive auxiliary grid ----------------------------------------------


@dataclass(frozen=True)
class TimeChangeConfig:
    dt_target: float = 2e-4  # clock increment aimed for per auxiliary step
    ds_max: float = 1e-2
    ds_min: float = STEP_FLOOR
    dt_out: float = 1e-2
    max_steps: int = 50_000_000
    printed_constants: bool = False  # use the weight constants as printed (delta sqrt(2D), delta^2 D)

    def __post_init__(self):
        if not (0 < self.ds_min <= self.ds_max and self.dt_target > 0 and self.dt_out > 0):
            raise ConfigError("invalid time-change configuration")


@njit(cache=True)
def _weak_kernel(x0, y0, delta, gamma, d, horizon, dt_target, ds_max, ds_min, seed, path, stream, theta_scale,
                 half_theta2_scale, max_steps):
    """Adaptive auxiliary stepping until the clock passes ``horizon``.

    Returns node arrays (s, y_hat, I, T, B, log_weight) and a status code
    (0 ok, 1 step floor reached near tau, 2 step budget exhausted).
    """
    cap = 4096
    s_a = np.empty(cap)
    y_a = np.empty(cap)
    i_a = np.empty(cap)
    t_a = np.empty(cap)
    b_a = np.empty(cap)
    w_a = np.empty(cap)
    level = 1.0 / (x0 * x0 * x0)
    sigma = math.sqrt(2.0 * d)
    s = 0.0
    y = y0
    I = 0.0
    T = 0.0
    B = 0.0
    lw = 0.0
    xh = x0
    s_a[0] = s
    y_a[0] = y
    i_a[0] = I
    t_a[0] = T
    b_a[0] = B
    w_a[0] = lw
    n = 1
    k = 0
    status = 0
    while T < horizon:
        if k >= max_steps:
            status = 2
            break
        x4 = xh * xh * xh * xh
        ds = dt_target / x4
        if ds > ds_max:
            ds = ds_max
        z = rng.gauss(seed, path, k, stream)
        k += 1
        # shrink the step until the new node stays before the crossing;
        # the draw is reused, scaled to the shorter step (exact OU law)
        while True:
            if ds < ds_min:
                status = 1
                break
            e = math.exp(-gamma * ds)
            sd = math.sqrt(d / gamma * (1.0 - math.exp(-2.0 * gamma * ds)))
            y_new = e * y + sd * z
            I_new = I + 0.5 * (y + y_new) * ds
            bt = 1.0 - 3.0 * I_new / level
            if bt > 0.0:
                break
            ds *= 0.5
        if status != 0:
            break
        xh_new = (level - 3.0 * I_new) ** (-1.0 / 3.0)
        T_new = T + 0.5 * (x4 + xh_new ** 4) * ds
        if sigma > 0.0:
            dB = ((y_new - y) + gamma * 0.5 * (y + y_new) * ds) / sigma
        else:
            dB = 0.0
        theta = theta_scale * xh
        lw += theta * dB - half_theta2_scale * xh * xh * ds
        B += dB
        s += ds
        y = y_new
        I = I_new
        T = T_new
        xh = xh_new
        if n == s_a.shape[0]:
            m = 2 * n
            s2 = np.empty(m)
            s2[:n] = s_a
            s_a = s2
            y2 = np.empty(m)
            y2[:n] = y_a
            y_a = y2
            i2 = np.empty(m)
            i2[:n] = i_a
            i_a = i2
            t2 = np.empty(m)
            t2[:n] = t_a
            t_a = t2
            b2 = np.empty(m)
            b2[:n] = b_a
            b_a = b2
            w2 = np.empty(m)
            w2[:n] = w_a
            w_a = w2
        s_a[n] = s
        y_a[n] = y
        i_a[n] = I
        t_a[n] = T
        b_a[n] = B
        w_a[n] = lw
        n += 1
    return s_a[:n].copy(), y_a[:n].copy(), i_a[:n].copy(), t_a[:n].copy(), b_a[:n].copy(), w_a[:n].copy(), status


@dataclass
class WeightedPath:
    times: np.ndarray
    states: np.ndarray  # (n, 2) columns x, y
    log_weight: np.ndarray
    horizon: float
    seed: int = 0
    path_index: int = 0
    segments: int = 1
    nodes: list = field(default_factory=list)  # per-segment auxiliary node arrays
    x0: float = 0.0
    y0: float = 0.0

    @property
    def x(self):
        return self.states[:, 0]

    @property
    def y(self):
        return self.states[:, 1]

    @property
    def weight(self):
        return math.exp(self.log_weight[-1])

    def to_csv(self, path):
        data = np.column_stack([self.times, self.states, self.log_weight])
        np.savetxt(path, data, delimiter=",", header="t,x,y,log_weight", comments="", fmt="%.17g")


def _segment(x0, y0, p: SdeParamsRef, horizon, cfg: TimeChangeConfig, seed, path_index, segment):
    if not x0 > 0:
        raise NonpositiveWidth("x0 must be positive")
    if not p.gamma > 0:
        raise ConfigError("the auxiliary OU process needs gamma > 0")
    if p.d > 0:
        if cfg.printed_constants:
            theta_scale, half2 = p.delta * p.sigma, p.delta**2 * p.d
        else:
            theta_scale, half2 = p.delta / p.sigma, p.delta**2 / (4.0 * p.d)
    elif p.delta == 0:
        theta_scale, half2 = 0.0, 0.0
    else:
        raise ConfigError("reweighting needs D > 0 when delta != 0")
    stream = rng.STREAM_OU + 8 * segment
    if stream > 0xFFFF:
        raise ConfigError("too many segments for the stream counter")
    s, y, I, T, B, lw, status = _weak_kernel(
        float(x0), float(y0), float(p.delta), float(p.gamma), float(p.d), float(horizon), cfg.dt_target, cfg.ds_max,
        cfg.ds_min, np.uint64(seed), np.uint64(path_index), stream, theta_scale, half2, cfg.max_steps,
    )
    if status == 1:
        raise GridExhausted(f"auxiliary step fell below {cfg.ds_min:g} near tau (path {path_index})")
    if status == 2:
        raise GridExhausted(f"auxiliary step budget exhausted before clock reached {horizon:g} (path {path_index})")
    return {"s": s, "y_hat": y, "integral": I, "clock": T, "b": B, "log_weight": lw, "x0": float(x0),
            "y0": float(y0)}


def _outputs(nodes, t_out):
    """States and log-weights at physical times t_out (relative to the segment start)."""
    s, y, I, T, lw = nodes["s"], nodes["y_hat"], nodes["integral"], nodes["clock"], nodes["log_weight"]
    A = np.interp(t_out, T, s)
    k = np.clip(np.searchsorted(s, A, side="right") - 1, 0, len(s) - 2)
    Ia = _interp_integral(s[k], s[k + 1], y[k], y[k + 1], I[k], A)
    level = nodes["x0"] ** -3
    x = (level - 3.0 * Ia) ** (-1.0 / 3.0)
    yv = np.interp(A, s, y)
    return x, yv, np.interp(A, s, lw)


def weak_sample(x0, y0, p: SdeParamsRef, horizon, cfg: TimeChangeConfig = TimeChangeConfig(), seed=0,
                path_index=0, _segment_index=0) -> WeightedPath:
    """One reweighted path on [0, horizon] built by time change."""
    if not horizon > 0:
        raise ConfigError("horizon must be positive")
    nodes = _segment(x0, y0, p, horizon, cfg, seed, path_index, _segment_index)
    n_out = max(1, int(round(horizon / cfg.dt_out)))
    t = np.linspace(0.0, horizon, n_out + 1)
    x, y, lw = _outputs(nodes, t)
    x[0], y[0] = x0, y0
    return WeightedPath(t, np.column_stack([x, y]), lw, float(horizon), seed, path_index, 1, [nodes], float(x0),
                        float(y0))


def extend(path: WeightedPath, p: SdeParamsRef, cfg: TimeChangeConfig = TimeChangeConfig(), seed=None,
           length=1.0) -> WeightedPath:
    """Append one more segment of ``length`` started from the terminal state.

    The new segment uses a fresh Brownian stream; log-weights add.
    """
    seed = path.seed if seed is None else seed
    xT, yT = path.states[-1]
    nodes = _segment(xT, yT, p, length, cfg, seed, path.path_index, path.segments)
    n_out = max(1, int(round(length / cfg.dt_out)))
    t_loc = np.linspace(0.0, length, n_out + 1)
    x, y, lw = _outputs(nodes, t_loc)
    x[0], y[0] = xT, yT
    times = np.concatenate([path.times, path.horizon + t_loc[1:]])
    states = np.concatenate([path.states, np.column_stack([x, y])[1:]])
    logw = np.concatenate([path.log_weight, path.log_weight[-1] + lw[1:]])
    return WeightedPath(times, states, logw, path.horizon + length, seed, path.path_index, path.segments + 1,
                        path.nodes + [nodes], path.x0, path.y0)


def weak_terminal_ensemble(x0, y0, p: SdeParamsRef, horizon, n_paths, cfg: TimeChangeConfig = TimeChangeConfig(),
                           seed=0, first_index=0, segments=1):
    """Terminal (x, y, log_weight) for ``n_paths`` independent paths.

    With ``segments`` > 1 the horizon is split into equal pieces joined by
    :func:`extend`-style restarts.
    """
    out = np.empty((n_paths, 3))
    piece = horizon / segments
    for i in range(n_paths):
        x, y, lw = x0, y0, 0.0
        for seg in range(segments):
            nodes = _segment(x, y, p, piece, cfg, seed, first_index + i, seg)
            xs, ys, ws = _outputs(nodes, np.array([piece]))
            x, y, lw = float(xs[0]), float(ys[0]), lw + float(ws[0])
        out[i] = (x, y, lw)
    return out


# --- diagnostics -----------------------------------------------------------------------------


def clock_identities(nodes):
    """Return (max |T(A_t) - t| over node clocks, relative error of A = int x^-4 dt).

    The second compares the auxiliary time reached with the trapezoid integral
    of x(t)^-4 over the clock values of the nodes.
    """
    s, T = nodes["s"], nodes["clock"]
    A = np.interp(T, T, s)
    TA = np.interp(A, s, T)
    x = (nodes["x0"] ** -3 - 3.0 * nodes["integral"]) ** (-1.0 / 3.0)
    inv4 = x**-4
    A_int = np.concatenate([[0.0], np.cumsum(0.5 * (inv4[1:] + inv4[:-1]) * np.diff(T))])
    rel = np.max(np.abs(A_int[1:] - s[1:]) / s[1:])
    return float(np.max(np.abs(TA - T))), float(rel)


def recovered_wiener(nodes, p: SdeParamsRef, indicator_end=None):
    """Two constructions of sqrt(2D) W_+ on the node clock.

    Returns (t, direct, identity): ``direct`` integrates x^2 against the
    reweighted Brownian motion; ``identity`` is the product-rule expression in
    the path's own x and y.  They agree up to discretisation error.
    """
    s, y, I, T, B = nodes["s"], nodes["y_hat"], nodes["integral"], nodes["clock"], nodes["b"]
    x = (nodes["x0"] ** -3 - 3.0 * I) ** (-1.0 / 3.0)
    ds = np.diff(s)
    end = T[-1] if indicator_end is None else indicator_end
    active = (T[:-1] < end).astype(float)
    dW_hat = np.diff(B) - active * p.delta * x[:-1] * ds / p.sigma
    direct = p.sigma * np.concatenate([[0.0], np.cumsum(x[:-1] ** 2 * dW_hat)])

    def integ(f):
        return np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * ds)])

    # d t = x^4 ds turns each time integral into an auxiliary-clock integral
    ident = (x**2 * y - x[0] ** 2 * y[0] - 2.0 * integ(x**5 * y**2)
             - p.delta * np.concatenate([[0.0], np.cumsum(active * 0.5 * (x[1:] ** 3 + x[:-1] ** 3) * ds)])
             + p.gamma * integ(x**2 * y))
    return T, direct, ident


def ensemble_summary(values, log_weights):
    """Weighted mean of ``values`` (E_Q[g rho]) with its standard error and ESS."""
    w = np.exp(np.asarray(log_weights, dtype=float))
    g = np.asarray(values, dtype=float)
    gw = g * w
    n = len(w)
    return {
        "mean": float(gw.mean()),
        "stderr": float(gw.std(ddof=1) / math.sqrt(n)),
        "weight_mean": float(w.mean()),
        "weight_stderr": float(w.std(ddof=1) / math.sqrt(n)),
        "ess": float(w.sum() ** 2 / np.sum(w**2)),
        "n": n,
    }


def write_summary(path, summary):
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
