import json

import pytest

from widthsde import verify as vf
from widthsde.errors import ConfigError, InsufficientData
from widthsde.model import SdeParamsRef as P
from widthsde.model import TransformedState as T

P321 = P(3, 2, 1)


def test_report_needs_witness_when_failing():
    with pytest.raises(ConfigError):
        vf.VerificationReport("x", {}, False)
    r = vf.VerificationReport("x", {"n": 1}, True)
    assert list(json.loads(r.to_json())) == ["claim_id", "pass", "grid_spec", "witness", "notes", "details"]


def test_lyapunov_rays():
    r = vf.lyapunov_ray_report(P321, [(1, 1), (1, -1), (2, 1), (1, 0), (0, 1)])
    assert r.passed
    assert "eta=0 axis ray [1.0, 0.0]: generator value 1" in r.notes
    assert "xi=0 line ray [0.0, 1.0]" in r.notes
    with pytest.raises(ConfigError):
        vf.lyapunov_ray_report(P321, [])


def test_lyapunov_rays_only_axes_is_not_a_pass():
    r = vf.lyapunov_ray_report(P321, [(1, 0)])
    assert not r.passed and r.witness is not None


def test_lyapunov_rays_fail_without_damping():
    # gamma = 0 removes the negative leading term, so no ray ends below -1 for delta eta0 > 0
    r = vf.lyapunov_ray_report(P(3, 0, 1), [(1, 1)])
    assert not r.passed and r.witness["ray"] == [1.0, 1.0]


def test_rank_map_examples():
    assert vf.rank_map(P321).passed
    r = vf.rank_map(P321, xi_range=(0.0, 1.0))
    assert not r.passed and r.witness["xi"] == 0.0 and r.witness["rank"] == 1
    r = vf.rank_map(P321, xi_range=(0.1, 0.9), tol=1.0)
    assert not r.passed


def test_boundary_invariance():
    r = vf.boundary_invariance(P321, n_paths=400, seed=1)
    assert r.passed and r.witness["max_abs_xi"] == 0.0
    with pytest.raises(ConfigError):
        vf.boundary_invariance(P321, n_paths=10)


def test_generator_crosscheck_unit_point_is_non_discriminating():
    r = vf.generator_crosscheck(T(1, 1), P321, n_paths=100_000, seed=0)
    assert r.passed and not r.details["discriminating"]
    assert abs(r.witness["estimate"] - 2.0) <= 3 * r.witness["stderr"]


def test_generator_crosscheck_discriminates():
    r = vf.generator_crosscheck(T(2, 1), P321, n_paths=100_000, seed=0)
    assert r.passed and r.notes == "printed first term rejected"
    assert r.witness["derived"] == -400 and r.witness["printed"] == -490


def test_generator_crosscheck_on_line():
    r = vf.generator_crosscheck(T(0, 5), P321, n_paths=1000, seed=0)
    assert r.witness["estimate"] == 0.0 and "non-discriminating" in r.notes


def test_generator_crosscheck_too_few_paths():
    with pytest.raises(InsufficientData):
        vf.generator_crosscheck(T(2, 1), P321, n_paths=100, seed=0)
    with pytest.raises(ConfigError):
        vf.generator_crosscheck(T(2, 1), P321, h_list=(1e-4, 2e-4))


def test_reports_reproducible(tmp_path):
    a = [vf.rank_map(P321), vf.boundary_invariance(P321, n_paths=200, seed=5)]
    b = [vf.rank_map(P321), vf.boundary_invariance(P321, n_paths=200, seed=5)]
    vf.write_reports(a, tmp_path / "a.jsonl")
    vf.write_reports(b, tmp_path / "b.jsonl")
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
    assert vf.read_reports(tmp_path / "a.jsonl")[0]["claim_id"] == "hormander_rank"
