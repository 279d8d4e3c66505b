import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy.special import gamma as Gamma

from widthsde import profile as prof
from widthsde.errors import InvalidPhysicalInput, NonpositiveDivisorCoefficient, NonpositiveWidth, ProfileError


def gauss_moment(k, a):
    """int_0^inf r^k exp(-a r^2) dr."""
    return Gamma((k + 1) / 2) / (2 * a ** ((k + 1) / 2))


def gaussian_oracle():
    # f = e^{-r^2/2}, f' = -r e^{-r^2/2}; f^n f'^p r^m = (-1)^p r^{m+p} e^{-(n+p) r^2 / 2}
    c = {}
    for key, (m, n, p) in prof.COEFFICIENT_INDEX.items():
        c[key] = 2 * math.pi * (-1) ** p * gauss_moment(m + p, (n + p) / 2)
    return c


def test_gaussian_coefficients_match_gamma_integrals():
    got = prof.shape_coefficients(prof.gaussian()).as_dict()
    want = gaussian_oracle()
    assert want["c120"] == pytest.approx(math.pi)
    assert want["c322"] == pytest.approx(math.pi / 4)
    for k in want:
        assert got[k] == pytest.approx(want[k], rel=1e-8)


def test_sech2_coefficients_against_adaptive_quadrature():
    got = prof.shape_coefficients(prof.sech2()).as_dict()
    f = lambda r: 1 / math.cosh(r) ** 2
    fp = lambda r: -2 * math.tanh(r) / math.cosh(r) ** 2
    for key, (m, n, p) in prof.COEFFICIENT_INDEX.items():
        ref, _ = integrate.quad(lambda r: r**m * f(r) ** n * fp(r) ** p, 0, 40, limit=200)
        assert got[key] == pytest.approx(2 * math.pi * ref, rel=1e-9)


def test_numeric_derivative_matches_analytic():
    g = prof.gaussian()
    numeric = prof.ProfileSpec(g.f, None, g.r_max, g.quad_n)
    a = prof.shape_coefficients(g).as_dict()
    b = prof.shape_coefficients(numeric).as_dict()
    for k in a:
        assert b[k] == pytest.approx(a[k], rel=1e-7)


def test_error_estimate_bounds_refinement_change():
    g = prof.gaussian(quad_n=256)
    c = prof.shape_coefficients(g)
    fine = prof.shape_coefficients(g.with_quad_n(512)).as_dict()
    for k, v in c.as_dict().items():
        assert abs(fine[k] - v) <= c.error[k]


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 10.0))
def test_homogeneity(a):
    base = prof.shape_coefficients(prof.gaussian()).as_dict()
    scaled = prof.shape_coefficients(prof.gaussian().scaled(a)).as_dict()
    for key, (m, n, p) in prof.COEFFICIENT_INDEX.items():
        assert scaled[key] == pytest.approx(a ** (n + p) * base[key], rel=1e-10)


def test_scaled_gaussian_c120():
    assert prof.shape_coefficients(prof.gaussian().scaled(2.0)).c120 == pytest.approx(4 * math.pi, rel=1e-12)


def test_zero_profile_rejected():
    with pytest.raises(NonpositiveDivisorCoefficient):
        prof.shape_coefficients(prof.zero_profile())


def test_negative_or_untruncated_profile_rejected():
    neg = prof.ProfileSpec(lambda r: np.exp(-r**2) - 0.5, r_max=12.0)
    with pytest.raises(ProfileError):
        prof.shape_coefficients(neg)
    with pytest.raises(ProfileError):
        prof.shape_coefficients(prof.gaussian(r_max=4.0))
    with pytest.raises(ProfileError):
        prof.ProfileSpec(lambda r: r, quad_n=8)


def test_gaussian_parameters():
    c = prof.shape_coefficients(prof.gaussian())
    p = prof.derive_params(c, prof.PhysicalInputs.from_mass_sq(1.0, 1.0, math.pi))
    assert (p.delta, p.gamma, p.d, p.amp) == pytest.approx((3.0, 2.0, 8 * math.pi, 1.0), rel=1e-8)


def test_parameter_linearity_in_noise_strength():
    c = prof.shape_coefficients(prof.gaussian())
    p1 = prof.derive_params(c, prof.PhysicalInputs(1.0, 1.0, 1.3))
    p2 = prof.derive_params(c, prof.PhysicalInputs(1.0, 2.0, 1.3))
    assert p2.d == pytest.approx(2 * p1.d)
    assert (p2.delta, p2.gamma, p2.amp) == (p1.delta, p1.gamma, p1.amp)


def test_invalid_physical_inputs():
    c = prof.shape_coefficients(prof.gaussian())
    with pytest.raises(InvalidPhysicalInput):
        prof.derive_params(c, prof.PhysicalInputs(1.0, 1.0, 0.0))
    with pytest.raises(InvalidPhysicalInput):
        prof.derive_params(c, prof.PhysicalInputs(-1.0, 1.0, 1.0))
    with pytest.raises(InvalidPhysicalInput):
        prof.PhysicalInputs.from_mass_sq(1.0, 1.0, 0.0)


def test_delta_changes_sign_with_mass():
    c = prof.shape_coefficients(prof.gaussian())
    # delta = (4/c320)(c102 - M^2 c140/(2 c120)) vanishes at M^2 = 4 pi for the Gaussian
    assert prof.derive_params(c, prof.PhysicalInputs.from_mass_sq(1, 1, 4 * math.pi)).delta == pytest.approx(0, abs=1e-8)
    assert prof.derive_params(c, prof.PhysicalInputs.from_mass_sq(1, 1, 6 * math.pi)).delta < 0


def test_trial_wave_values():
    g = prof.gaussian()
    v = prof.trial_wave(g, 1.0, 1.0, 4.0, math.sqrt(2))
    assert v == pytest.approx(math.exp(-1) * complex(math.cos(2), math.sin(2)), rel=1e-14)
    assert prof.trial_wave(g, 2.0, 0.5, 3.0, 0.0) == pytest.approx(4.0)
    assert prof.trial_wave(g, 1.0, 2.0, 0.0, 1.0).imag == 0.0
    with pytest.raises(NonpositiveWidth):
        prof.trial_wave(g, 1.0, 0.0, 0.0, 1.0)


@pytest.mark.parametrize("x,xdot", [(1.0, 0.0), (0.4, 3.0), (2.5, -7.0)])
def test_mass_conserved_against_cartesian_quadrature(x, xdot):
    g = prof.gaussian()
    amp = 1.3
    # |psi|^2 over the plane on a Cartesian grid, independent of the radial rule
    L = 12.0 * x
    u = np.linspace(-L, L, 1601)
    U, V = np.meshgrid(u, u)
    dens = np.abs(prof.trial_wave(g, amp, x, xdot, np.hypot(U, V))) ** 2
    mass = integrate.simpson(integrate.simpson(dens, x=u, axis=1), x=u)
    assert mass == pytest.approx(prof.l2_mass(g, amp), rel=1e-8)
    assert prof.l2_mass(g, 1.0) == pytest.approx(math.pi, rel=1e-12)


def test_zero_profile_has_zero_mass():
    assert prof.l2_mass(prof.zero_profile(), 1.0) == 0.0


def test_table_profile_reproduces_gaussian(tmp_path):
    r = np.linspace(0, 12, 2401)
    path = tmp_path / "g.csv"
    np.savetxt(path, np.column_stack([r, np.exp(-r**2 / 2)]), delimiter=",", header="r,f", comments="")
    tab = prof.load_profile(str(path))
    got = prof.params_report(tab, prof.PhysicalInputs.from_mass_sq(1, 1, math.pi))
    assert (got["delta"], got["gamma"], got["amp"]) == pytest.approx((3, 2, 1), rel=1e-6)
    assert set(got) == {"c120", "c320", "c102", "c140", "c322", "delta", "gamma", "d", "amp"}
