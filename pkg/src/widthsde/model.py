"""State types and closed-form vector fields of the width equation.

Original system on the half plane x > 0:

    dx = y dt
    dy = (delta/x**3 - gamma*y/x**4) dt + sqrt(2D)/x**2 dW

Transformed system in (xi, eta) = (1/x, x**2 y), with additive noise:

    dxi  = -xi**4 eta dt
    deta = (delta xi + 2 xi**3 eta**2 - gamma xi**4 eta) dt + sqrt(2D) dW

Functions accept scalars or numpy arrays for the coordinates.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NonpositiveWidth, NonpositiveXi

RANK_TOL = 1e-9


@dataclass(frozen=True)
class SdeParamsRef:
    """Dynamics parameters.  D = 0 and gamma = 0 are allowed for limit cases."""

    delta: float
    gamma: float
    d: float

    def __post_init__(self):
        if not (self.gamma >= 0 and self.d >= 0):
            raise ConfigError(f"gamma and d must be nonnegative, got gamma={self.gamma}, d={self.d}")
        if not all(math.isfinite(v) for v in (self.delta, self.gamma, self.d)):
            raise ConfigError("parameters must be finite")

    @classmethod
    def from_params(cls, p):
        return cls(p.delta, p.gamma, p.d)

    @property
    def sigma(self):
        """Noise amplitude sqrt(2D)."""
        return math.sqrt(2.0 * self.d)


@dataclass(frozen=True)
class HalfPlaneState:
    x: float
    y: float

    def __post_init__(self):
        if not self.x > 0:
            raise NonpositiveWidth(f"width must be positive, got x={self.x}")


@dataclass(frozen=True)
class TransformedState:
    xi: float
    eta: float


@dataclass(frozen=True)
class VectorField2:
    a: float
    b: float

    def __iter__(self):
        return iter((self.a, self.b))


def _require_width(x):
    if np.any(np.asarray(x) <= 0):
        raise NonpositiveWidth("width must be positive")


def to_transformed(s: HalfPlaneState) -> TransformedState:
    _require_width(s.x)
    return TransformedState(1.0 / s.x, s.x * s.x * s.y)


def from_transformed(t: TransformedState) -> HalfPlaneState:
    if not t.xi > 0:
        raise NonpositiveXi(f"xi must be positive on the physical branch, got {t.xi}")
    return HalfPlaneState(1.0 / t.xi, t.xi * t.xi * t.eta)


def g1(x, y):
    """Array form of (x, y) -> (1/x, x^2 y); its own inverse."""
    x = np.asarray(x, dtype=float)
    return 1.0 / x, x * x * np.asarray(y, dtype=float)


def g1_jacobian(x, y):
    """Jacobian of (x, y) -> (1/x, x^2 y)."""
    return np.array([[-1.0 / x**2, 0.0], [2.0 * x * y, x**2]])


def drift_original(s: HalfPlaneState, p: SdeParamsRef):
    _require_width(s.x)
    x, y = s.x, s.y
    return (y, p.delta / x**3 - p.gamma * y / x**4)


def diffusion_original(s: HalfPlaneState, p: SdeParamsRef):
    _require_width(s.x)
    return (0.0, p.sigma / s.x**2)


def drift_transformed(t: TransformedState, p: SdeParamsRef):
    xi, eta = t.xi, t.eta
    xi3 = xi**3
    xi4 = xi3 * xi
    return (-xi4 * eta, p.delta * xi + 2.0 * xi3 * eta**2 - p.gamma * xi4 * eta)


def diffusion_transformed(p: SdeParamsRef):
    return (0.0, p.sigma)


def lyapunov(t: TransformedState):
    """f_L = xi^4 eta^2 / 2."""
    return 0.5 * t.xi**4 * t.eta**2


def generator_lyapunov(t: TransformedState, p: SdeParamsRef):
    """Generator applied to f_L: delta xi^5 eta - gamma xi^8 eta^2 + D xi^4."""
    xi, eta = t.xi, t.eta
    return p.delta * xi**5 * eta - p.gamma * xi**8 * eta**2 + p.d * xi**4


def generator_lyapunov_printed(t: TransformedState, p: SdeParamsRef):
    """Variant with first term delta*xi*eta, kept only for the discrimination check."""
    xi, eta = t.xi, t.eta
    return p.delta * xi * eta - p.gamma * xi**8 * eta**2 + p.d * xi**4


def generator(g, grad, hess_eta_eta, t: TransformedState, p: SdeParamsRef):
    """Generator applied to a test function given its partial derivatives.

    ``grad(t)`` returns (g_xi, g_eta); ``hess_eta_eta(t)`` returns g_eta_eta.
    """
    b = drift_transformed(t, p)
    gx, ge = grad(t)
    return b[0] * gx + b[1] * ge + p.d * hess_eta_eta(t)


def bracket(t: TransformedState, p: SdeParamsRef) -> VectorField2:
    """Lie bracket [X0, X1] of the drift field X0 with X1 = d/d eta."""
    xi, eta = t.xi, t.eta
    return VectorField2(xi**4, -(4.0 * xi**3 * eta - p.gamma * xi**4))


def hormander_rank(t: TransformedState, p: SdeParamsRef, tol=RANK_TOL):
    """Rank of {X1, [X0, X1]}: the determinant of the pair is -xi^4."""
    if not tol > 0:
        raise ConfigError("tol must be positive")
    br = bracket(t, p)
    det = 0.0 * br.b - 1.0 * br.a
    return 2 if abs(det) > tol else 1


def ray_threshold(xi0, eta0, p: SdeParamsRef):
    """A scale t* beyond which t -> generator_lyapunov(t xi0, t eta0) is decreasing.

    With G(t) = a t^6 - c t^10 + e t^4 and c > 0, G'(t) = t^3 (6a t^2 - 10c t^6 + 4e)
    is negative once u = t^2 exceeds the largest real root of 10c u^3 - 6|a| u - 4e.
    """
    a = p.delta * xi0**5 * eta0
    c = p.gamma * xi0**8 * eta0**2
    e = p.d * xi0**4
    if not c > 0:
        return math.inf
    roots = np.roots([10.0 * c, 0.0, -6.0 * abs(a), -4.0 * e])
    u = max([r.real for r in roots if abs(r.imag) < 1e-9 * max(1.0, abs(r))] + [0.0])
    return math.sqrt(u)
