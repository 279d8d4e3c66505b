import math

import numpy as np
import pytest
from scipy import stats

from widthsde import timechange as tc
from widthsde.errors import ConfigError, GridExhausted, NonpositiveWidth
from widthsde.model import SdeParamsRef as P


def test_ou_deterministic_contraction():
    y = tc.ou_exact(4.0, P(0, 1, 0), [0.0, math.log(2)], seed=0)
    assert y[-1] == pytest.approx(2.0, rel=1e-14)


def test_ou_one_step_moments():
    p = P(3, 2, 8 * math.pi)
    dt = 0.3
    y = tc.ou_exact(1.5, p, [0.0, dt], seed=1, path_index=np.arange(100_000))[:, 1]
    mean = math.exp(-2 * dt) * 1.5
    var = p.d / p.gamma * (1 - math.exp(-2 * p.gamma * dt))
    n = y.size
    assert abs(y.mean() - mean) < 3 * math.sqrt(var / n)
    assert abs(y.var() - var) < 3 * var * math.sqrt(2 / n)


def test_ou_stationary_variance():
    p = P(3, 2, 8 * math.pi)
    y = tc.ou_exact(0.0, p, [0.0, 5.0, 20.0], seed=2, path_index=np.arange(100_000))[:, -1]
    assert abs(y.var() - 4 * math.pi) < 3 * 4 * math.pi * math.sqrt(2 / y.size)


def test_ou_rejects_bad_input():
    with pytest.raises(ConfigError):
        tc.ou_exact(0, P(0, 1, 1), [0, 2, 1], 0)
    with pytest.raises(ConfigError):
        tc.ou_exact(0, P(0, 0, 1), [0, 1], 0)


def test_tau_closed_form():
    aux = tc.aux_path(1.0, 1.0, P(0, 1, 0), np.linspace(0, 2, 20001), seed=0)
    # trapezoid error on the grid is O(ds^2); the bracket sits on the interpolant
    assert abs(aux.tau - math.log(1.5)) < 1e-8
    assert aux.tau_bracket[1] - aux.tau_bracket[0] < 1e-14
    assert np.all(np.isnan(aux.x_hat[aux.n_valid:])) and np.all(np.isinf(aux.clock_t[aux.n_valid:]))


def test_no_crossing_closed_form():
    s = np.linspace(0, 30, 30001)
    aux = tc.aux_path(1.0, -1.0, P(0, 1, 0), s, seed=0)
    assert aux.tau_bracket is None
    want = (1 + 3 * (1 - np.exp(-s))) ** (-1 / 3)
    assert np.allclose(aux.x_hat, want, rtol=1e-7)
    assert aux.x_hat[-1] == pytest.approx(4 ** (-1 / 3), rel=1e-7)


def test_constant_path_clock_and_inverse():
    s = np.linspace(0, 3, 301)
    aux = tc.aux_path(1.3, 0.0, P(0, 1, 0), s, seed=0)
    assert np.all(aux.x_hat == 1.3)
    assert np.allclose(aux.clock_t, 1.3**4 * s, rtol=1e-13)
    t = np.linspace(0, 5, 11)
    assert np.allclose(tc.time_change(aux, t), t / 1.3**4, rtol=1e-12)
    with pytest.raises(GridExhausted):
        tc.time_change(aux, [0.0, 100.0])


def test_aux_rejects_nonpositive_width():
    with pytest.raises(NonpositiveWidth):
        tc.aux_path(0.0, 0.0, P(0, 1, 1), [0, 1], 0)


def test_roundtrip_on_random_path():
    aux = tc.aux_path(1.0, 0.0, P(3, 2, 1), np.linspace(0, 0.2, 20001), seed=3)
    T = aux.clock_t[: aux.n_valid]
    t = np.linspace(0, T[-1], 500)
    A = tc.time_change(aux, t)
    assert np.max(np.abs(np.interp(A, aux.s_grid[: aux.n_valid], T) - t)) < 1e-8
    assert np.all(np.diff(A) > 0)


def test_wiener_recovery_on_fixed_grid():
    p = P(3, 2, 1)
    s = np.linspace(0, 1, 1001)
    aux = tc.aux_path(1.0, 0.5, p, s, seed=4)
    # sqrt(2D) B = y_hat - y0 + gamma int y_hat, so B has quadratic variation ~ s
    qv = np.sum(np.diff(aux.b) ** 2)
    assert qv == pytest.approx(1.0, rel=0.15)


def test_clock_grows_near_tau():
    aux = tc.aux_path(1.0, 0.0, P(3, 2, 1), np.linspace(0, 50, 50001), seed=0)
    assert aux.tau_bracket is not None
    vals = tc.clock_near_tau(aux, [1e-4, 1e-6, 1e-8, 1e-10, 1e-12])
    assert np.all(np.diff(vals) > 0)
    # T ~ gap^(-1/3) near a simple crossing
    assert vals[-1] / vals[-2] == pytest.approx(100 ** (1 / 3), rel=0.1)


def test_delta_zero_has_unit_weight():
    path = tc.weak_sample(1.0, 0.0, P(0, 2, 1), 1.0, seed=5)
    assert np.all(path.log_weight == 0.0)
    assert np.all(path.x > 0)


def test_weak_sample_shape_and_csv(tmp_path):
    path = tc.weak_sample(1.0, 0.0, P(3, 2, 1), 1.0, seed=6)
    assert path.times[0] == 0 and path.times[-1] == pytest.approx(1.0)
    assert path.log_weight[0] == 0.0
    assert tuple(path.states[0]) == (1.0, 0.0)
    f = tmp_path / "w.csv"
    path.to_csv(f)
    assert f.read_text().splitlines()[0] == "t,x,y,log_weight"
    assert np.loadtxt(f, delimiter=",", skiprows=1).shape == (len(path.times), 4)


def test_weak_sample_deterministic():
    a = tc.weak_sample(1.0, 0.0, P(3, 2, 1), 1.0, seed=7, path_index=2)
    b = tc.weak_sample(1.0, 0.0, P(3, 2, 1), 1.0, seed=7, path_index=2)
    assert np.array_equal(a.states, b.states) and np.array_equal(a.log_weight, b.log_weight)


def test_positivity_sweep():
    out = tc.weak_terminal_ensemble(1.0, 0.0, P(3, 2, 1), 1.0, 300, seed=8)
    assert np.all(out[:, 0] > 0) and np.all(np.isfinite(out))


def test_deterministic_extension_continues_trajectory():
    from widthsde.integrate import original_field, rk4_arrays

    p = P(0, 1, 0)
    cfg = tc.TimeChangeConfig(dt_target=1e-5)
    a = tc.weak_sample(1.0, 0.3, p, 1.0, cfg)
    b = tc.extend(a, p, cfg)
    one = tc.weak_sample(1.0, 0.3, p, 2.0, cfg)
    assert np.max(np.abs(b.states - one.states)) < 1e-9
    k = len(a.times) - 1
    assert b.states[k, 0] == a.states[-1, 0]
    _, z = rk4_arrays(original_field(p), [1.0, 0.3], 2.0, 1e-4)
    assert np.max(np.abs(z[::100] - b.states)) < 1e-9


def test_extension_weights_add():
    p = P(3, 2, 1)
    a = tc.weak_sample(1.0, 0.0, p, 1.0, seed=9)
    b = tc.extend(a, p)
    assert b.segments == 2 and b.horizon == 2.0
    assert np.array_equal(b.log_weight[: len(a.times)], a.log_weight)
    assert np.array_equal(b.states[: len(a.times)], a.states)


@pytest.mark.slow
def test_two_segments_equal_one_in_law():
    p = P(0, 2, 1)
    one = tc.weak_terminal_ensemble(1.0, 0.0, p, 2.0, 1500, seed=10)
    two = tc.weak_terminal_ensemble(1.0, 0.0, p, 2.0, 1500, seed=11, segments=2)
    assert stats.ks_2samp(one[:, 0], two[:, 0]).pvalue > 0.01


def test_printed_constants_change_weights():
    p = P(3, 2, 1)
    a = tc.weak_sample(1.0, 0.0, p, 1.0, seed=12)
    b = tc.weak_sample(1.0, 0.0, p, 1.0, tc.TimeChangeConfig(printed_constants=True), seed=12)
    assert np.array_equal(a.states, b.states)
    assert a.log_weight[-1] != b.log_weight[-1]


def test_clock_identities_and_wiener_identity():
    p = P(3, 2, 1)
    path = tc.weak_sample(1.0, 0.0, p, 1.0, seed=13)
    nodes = path.nodes[0]
    roundtrip, rel = tc.clock_identities(nodes)
    assert roundtrip < 1e-12 and rel < 1e-6
    T, direct, ident = tc.recovered_wiener(nodes, p)
    scale = max(1.0, np.max(np.abs(ident)))
    assert np.max(np.abs(direct - ident)) < 5e-3 * scale


def test_ensemble_summary():
    s = tc.ensemble_summary([1.0, 2.0, 3.0], [0.0, 0.0, 0.0])
    assert s["mean"] == 2.0 and s["weight_mean"] == 1.0 and s["ess"] == pytest.approx(3.0)
    s = tc.ensemble_summary([1.0, 1.0], [0.0, math.log(3)])
    assert s["ess"] == pytest.approx(16 / 10)


def test_nonpositive_horizon_and_missing_noise():
    with pytest.raises(ConfigError):
        tc.weak_sample(1.0, 0.0, P(3, 2, 1), 0.0)
    with pytest.raises(ConfigError):
        tc.weak_sample(1.0, 0.0, P(3, 2, 0), 1.0)
    with pytest.raises(NonpositiveWidth):
        tc.weak_sample(-1.0, 0.0, P(3, 2, 1), 1.0)


def test_crossing_times_match_aux_path():
    p = P(3, 2, 1)
    s = np.linspace(0, 50, 5001)
    ct = tc.crossing_times(1.0, 0.0, p, s, seed=2, path_indices=np.arange(20))
    for i in range(20):
        aux = tc.aux_path(1.0, 0.0, p, s, seed=2, path_index=i)
        if aux.tau_bracket is None:
            assert np.isinf(ct[i])
        else:
            assert aux.tau_bracket[0] <= ct[i] and ct[i] == s[aux.n_valid]
