"""Occupation measures, their transport between coordinate systems, and the
log-width trend regression used to look for exponential decay.
"""

import json
import math
from dataclasses import dataclass

import numpy as np
import statsmodels.api as sm

from .errors import ConfigError, InsufficientData, WindowMismatch
from .integrate import IntegratorConfig, PathSample, simulate_original, simulate_transformed
from .model import HalfPlaneState, SdeParamsRef, TransformedState

DEFAULT_X_EDGES = np.linspace(0.0, 4.0, 41)
DEFAULT_Y_EDGES = np.linspace(-4.0, 4.0, 41)
NEWEY_WEST_LAG = 5
FLOOR = 0.01


@dataclass
class OccupationHistogram:
    coordinate_system: str
    x_edges: np.ndarray
    y_edges: np.ndarray
    mass: np.ndarray  # fraction of post-burn-in time per cell
    overflow: float
    total_time: float
    burn_in: float

    def __post_init__(self):
        self.x_edges = np.asarray(self.x_edges, dtype=float)
        self.y_edges = np.asarray(self.y_edges, dtype=float)
        self.mass = np.asarray(self.mass, dtype=float)
        if self.mass.shape != (len(self.x_edges) - 1, len(self.y_edges) - 1):
            raise ConfigError("mass shape does not match the edges")
        if np.any(np.diff(self.x_edges) <= 0) or np.any(np.diff(self.y_edges) <= 0):
            raise ConfigError("bin edges must be strictly increasing")

    @property
    def window_mass(self):
        return float(self.mass.sum())

    @property
    def observed_time(self):
        return self.total_time - self.burn_in

    def same_grid(self, other):
        return (
            self.coordinate_system == other.coordinate_system
            and self.x_edges.shape == other.x_edges.shape
            and self.y_edges.shape == other.y_edges.shape
            and np.array_equal(self.x_edges, other.x_edges)
            and np.array_equal(self.y_edges, other.y_edges)
        )

    def cell_of(self, x, y):
        i = np.searchsorted(self.x_edges, x, side="right") - 1
        j = np.searchsorted(self.y_edges, y, side="right") - 1
        return int(i), int(j)

    def to_csv(self, path):
        xi, yj = np.meshgrid(self.x_edges[:-1], self.y_edges[:-1], indexing="ij")
        data = np.column_stack([xi.ravel(), yj.ravel(), self.mass.ravel()])
        names = {"original": "x_edge,y_edge,mass", "transformed": "xi_edge,eta_edge,mass"}
        np.savetxt(path, data, delimiter=",", header=names.get(self.coordinate_system, "x_edge,y_edge,mass"),
                   comments="", fmt="%.17g")
        meta = {
            "coordinate_system": self.coordinate_system,
            "x_edges": self.x_edges.tolist(),
            "y_edges": self.y_edges.tolist(),
            "overflow": self.overflow,
            "total_time": self.total_time,
            "burn_in": self.burn_in,
        }
        with open(str(path) + ".json", "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)


def _check_window(x_edges, y_edges):
    x_edges = np.asarray(x_edges, dtype=float)
    y_edges = np.asarray(y_edges, dtype=float)
    if x_edges.ndim != 1 or y_edges.ndim != 1 or len(x_edges) < 2 or len(y_edges) < 2:
        raise ConfigError("edges must be 1-D with at least two entries")
    return x_edges, y_edges


def occupation(path: PathSample, x_edges=DEFAULT_X_EDGES, y_edges=DEFAULT_Y_EDGES, burn_in=0.0,
               min_time=0.0) -> OccupationHistogram:
    """Time-weighted occupation measure of one path after ``burn_in``.

    Each stored state carries the time until the next stored state.  Mass that
    falls outside the window is kept as ``overflow``.
    """
    x_edges, y_edges = _check_window(x_edges, y_edges)
    t = path.times
    total = float(t[-1])
    if burn_in < 0 or (burn_in > 0 and total < 10.0 * burn_in):
        raise InsufficientData(f"path length {total:g} is shorter than 10x burn-in {burn_in:g}")
    dt = np.diff(t)
    start = t[:-1]
    # clip the interval that straddles the burn-in time
    w = np.clip(t[1:] - np.maximum(start, burn_in), 0.0, None)
    w = np.minimum(w, dt)
    observed = float(w.sum())
    if observed <= 0 or observed < min_time:
        raise InsufficientData(f"only {observed:g} time units after burn-in (need {max(min_time, 0):g})")
    s = path.states[:-1]
    mass, _, _ = np.histogram2d(s[:, 0], s[:, 1], bins=[x_edges, y_edges], weights=w)
    mass /= observed
    overflow = max(0.0, 1.0 - float(mass.sum()))
    return OccupationHistogram(path.coordinate_system, x_edges, y_edges, mass, overflow, total, float(burn_in))


def merge(hists):
    """Time-weighted combination of histograms on one grid."""
    hists = list(hists)
    first = hists[0]
    for h in hists[1:]:
        if not first.same_grid(h):
            raise WindowMismatch("cannot merge histograms on different grids")
    w = np.array([h.observed_time for h in hists])
    mass = sum(wi * h.mass for wi, h in zip(w, hists)) / w.sum()
    overflow = float(sum(wi * h.overflow for wi, h in zip(w, hists)) / w.sum())
    return OccupationHistogram(first.coordinate_system, first.x_edges, first.y_edges, mass, overflow,
                               float(w.sum() + sum(h.burn_in for h in hists)), float(sum(h.burn_in for h in hists)))


def occupation_run(system, init, p: SdeParamsRef, cfg: IntegratorConfig, x_edges, y_edges, burn_in):
    """Simulate one long trajectory and return (path, histogram in its own coordinates)."""
    if system == "original":
        path = simulate_original(init if isinstance(init, HalfPlaneState) else HalfPlaneState(*init), p, cfg)
    elif system == "transformed":
        path = simulate_transformed(init if isinstance(init, TransformedState) else TransformedState(*init), p, cfg)
    else:
        raise ConfigError(f"unknown system {system!r}")
    return path, occupation(path, x_edges, y_edges, burn_in)


def compare_histograms(a: OccupationHistogram, b: OccupationHistogram) -> float:
    """Total-variation distance, counting the overflow cell."""
    if not a.same_grid(b):
        raise WindowMismatch("histograms live on different grids or coordinate systems")
    return 0.5 * (float(np.abs(a.mass - b.mass).sum()) + abs(a.overflow - b.overflow))


# --- transport through (x, y) <-> (1/x, x^2 y) -----------------------------------------


def preimage_edges(x_edges=DEFAULT_X_EDGES, y_edges=DEFAULT_Y_EDGES, xi_cap=1e3, n_eta=2048):
    """(xi, eta) edges whose xi-cells map exactly onto the x-cells of the target.

    The first target x-cell starts at 0, which has no finite preimage; it is
    capped at ``xi_cap``.  The eta range covers the preimage of the y-window at
    the smallest xi.
    """
    x_edges, y_edges = _check_window(x_edges, y_edges)
    xs = np.where(x_edges > 0, x_edges, 1.0 / xi_cap)
    xi_edges = np.sort(1.0 / xs)
    xi_lo = xi_edges[0]
    eta_max = max(abs(y_edges[0]), abs(y_edges[-1])) / xi_lo**2
    return xi_edges, np.linspace(-eta_max, eta_max, n_eta + 1)


def pushforward(h: OccupationHistogram, x_edges=DEFAULT_X_EDGES, y_edges=DEFAULT_Y_EDGES, refine=4,
                strict=True) -> OccupationHistogram:
    """Transport a (xi, eta) histogram to (x, y).

    The map has unit Jacobian determinant, so each source cell is split into
    ``refine`` x ``refine`` equal sub-cells whose masses move unchanged to the
    target cell containing the image of their centre.  Source overflow stays
    overflow.  With ``strict`` the image of the source window must lie inside
    the target window; otherwise sub-cells that land outside become overflow.
    """
    if h.coordinate_system != "transformed":
        raise WindowMismatch("pushforward expects a histogram over (xi, eta)")
    if not h.x_edges[0] > 0:
        raise WindowMismatch("source xi-window must be strictly positive")
    x_edges, y_edges = _check_window(x_edges, y_edges)
    xi_lo, xi_hi = h.x_edges[0], h.x_edges[-1]
    eta_lo, eta_hi = h.y_edges[0], h.y_edges[-1]
    if strict:
        img_x = (1.0 / xi_hi, 1.0 / xi_lo)
        corners_y = [xi**2 * eta for xi in (xi_lo, xi_hi) for eta in (eta_lo, eta_hi)]
        img_y = (min(corners_y), max(corners_y))
        if img_x[0] < x_edges[0] or img_x[1] > x_edges[-1] or img_y[0] < y_edges[0] or img_y[1] > y_edges[-1]:
            raise WindowMismatch(
                f"image of source window x in [{img_x[0]:.4g}, {img_x[1]:.4g}], y in [{img_y[0]:.4g}, {img_y[1]:.4g}]"
                f" is not contained in the target window"
            )
    frac = (np.arange(refine) + 0.5) / refine
    out = np.zeros((len(x_edges) - 1, len(y_edges) - 1))
    nz_i, nz_j = np.nonzero(h.mass)
    if nz_i.size:
        xa, xb = h.x_edges[nz_i], h.x_edges[nz_i + 1]
        ya, yb = h.y_edges[nz_j], h.y_edges[nz_j + 1]
        sub_xi = xa[:, None, None] + (xb - xa)[:, None, None] * frac[None, :, None]
        sub_eta = ya[:, None, None] + (yb - ya)[:, None, None] * frac[None, None, :]
        sub_xi, sub_eta = np.broadcast_arrays(sub_xi, sub_eta)
        m = np.broadcast_to((h.mass[nz_i, nz_j] / refine**2)[:, None, None], sub_xi.shape)
        x = 1.0 / sub_xi
        y = sub_xi**2 * sub_eta
        out, _, _ = np.histogram2d(x.ravel(), y.ravel(), bins=[x_edges, y_edges], weights=m.ravel())
    overflow = max(0.0, 1.0 - float(out.sum()))
    return OccupationHistogram("original", x_edges, y_edges, out, overflow, h.total_time, h.burn_in)


# --- decay audit --------------------------------------------------------------------------


@dataclass
class DecayReport:
    window_length: float
    window_mid: np.ndarray
    window_log_means: np.ndarray
    slope: float
    slope_ci: tuple
    fraction_below_floor: float
    floor: float = FLOOR

    def as_dict(self):
        return {
            "slope": self.slope,
            "ci_lo": self.slope_ci[0],
            "ci_hi": self.slope_ci[1],
            "windows": int(len(self.window_log_means)),
            "window_length": self.window_length,
            "fraction_below_floor": self.fraction_below_floor,
            "floor": self.floor,
        }


def _window_means(t, v, edges):
    """Exact window averages of the piecewise-linear interpolant of v(t)."""
    seg = 0.5 * (v[1:] + v[:-1]) * np.diff(t)
    cum = np.concatenate([[0.0], np.cumsum(seg)])

    def integral_to(s):
        k = np.clip(np.searchsorted(t, s, side="right") - 1, 0, len(t) - 2)
        h = s - t[k]
        dv = (v[k + 1] - v[k]) / (t[k + 1] - t[k])
        return cum[k] + v[k] * h + 0.5 * dv * h * h

    c = integral_to(edges)
    return np.diff(c) / np.diff(edges)


def decay_test(path: PathSample, window_length, lag=NEWEY_WEST_LAG, floor=FLOOR) -> DecayReport:
    """OLS trend of window-mean log width against time, Newey-West 95% interval."""
    if path.coordinate_system == "transformed":
        x = 1.0 / path.states[:, 0]
    else:
        x = path.states[:, 0]
    t = path.times
    if not window_length > 0:
        raise ConfigError("window_length must be positive")
    duration = float(t[-1] - t[0])
    n_win = int(math.floor(duration / window_length + 1e-9))
    if n_win < 20:
        raise InsufficientData(f"path covers {n_win} windows of length {window_length:g}; need at least 20")
    edges = t[0] + window_length * np.arange(n_win + 1)
    means = _window_means(t, np.log(x), edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    X = sm.add_constant(mid)
    fit = sm.OLS(means, X).fit()
    resid_scale = float(np.max(np.abs(fit.resid))) if len(fit.resid) else 0.0
    slope = float(fit.params[1])
    if resid_scale <= 1e-12 * max(1.0, float(np.max(np.abs(means)))):
        ci = (slope, slope)
    else:
        hac = sm.OLS(means, X).fit(cov_type="HAC", cov_kwds={"maxlags": lag})
        lo, hi = hac.conf_int(alpha=0.05)[1]
        ci = (float(lo), float(hi))
    dt = np.diff(t)
    below = float(np.sum(dt[x[:-1] < floor]) / duration)
    return DecayReport(float(window_length), mid, means, slope, ci, below, floor)
