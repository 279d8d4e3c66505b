"""Configuration-driven command line entry point.

    widthsde SUBCOMMAND [--config FILE] [--seed N] [--workers N] [--output-dir DIR]

A config is one JSON document:

    {"subcommand": "timechange",
     "params": {"delta": 3, "gamma": 2, "d": 1},        # or "profile" + "physical"
     "integrator": {...IntegratorConfig fields...},
     "seed": 0, "workers": 1, "output_dir": "out",
     "timechange": {...section for the subcommand...}}

Every artifact lands in output_dir next to manifest.json.  Exit status is 0 on
success, 2 when the computation ran but an audited claim failed, 1 on error.
"""

import argparse
import copy
import json
import math
import os
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import control as ctl
from . import ergodic as erg
from . import integrate as ig
from . import profile as prof
from . import timechange as tc
from . import verify as vf
from .errors import ConfigError, WidthSDEError
from .model import HalfPlaneState, SdeParamsRef, TransformedState

SUBCOMMANDS = ("params", "simulate", "timechange", "invariant", "decay", "control", "verify", "convergence")
EXIT_OK, EXIT_ERROR, EXIT_CLAIM_FAILED = 0, 1, 2
WORKERS_ENV = "WIDTH_SDE_WORKERS"

DEFAULT_CLAIMS = [
    {"claim": "rank_map", "xi_range": [0.1, 3.0], "eta_range": [-3.0, 3.0], "n": [64, 64], "tol": 1e-9},
    {"claim": "lyapunov_rays", "rays": [[1, 1], [1, -1], [2, 1], [0.5, 2], [1, 0], [0, 1]], "t_max": 10.0},
    {"claim": "boundary_invariance", "n_paths": 1000, "t_end": 1.0, "eta0": 0.0},
    {"claim": "generator_crosscheck", "z": [2.0, 1.0], "h_list": [4e-4, 2e-4, 1e-4], "n_paths": 100000},
]

SECTIONS = {
    "params": {},
    "simulate": {"system": "original", "init": [1.0, 0.0], "n_paths": 1},
    "timechange": {"x0": 1.0, "y0": 0.0, "horizon": 1.0, "n_paths": 1000, "segments": 1, "dt_target": 2e-4,
                   "ds_max": 1e-2, "dt_out": 1e-2, "save_paths": 1, "printed_constants": False},
    "invariant": {"init": [1.0, 0.0], "t_end": 2e4, "burn_in": 1e3, "x_range": [0.0, 4.0], "y_range": [-4.0, 4.0],
                  "bins": [40, 40], "refine": 4, "tv_tol": 0.05},
    "decay": {"input": None, "init": [1.0, 0.0], "window_length": 5.0, "lag": 5, "floor": 0.01},
    "control": {"endpoints": [], "n_random": 0, "random_seed": 0, "dt": 1e-4, "n_grid": 10001,
                "fallback": "raised_polynomial", "tol": 1e-5},
    "verify": {"claims": DEFAULT_CLAIMS},
    "convergence": {"systems": ["original", "transformed"], "init": [1.0, 0.0], "dt_exponents": [4, 9],
                    "n_paths": 2000, "t_end": 1.0, "slope_range": [0.8, 1.2]},
}

TOP_KEYS = {"subcommand", "profile", "physical", "params", "integrator", "output_dir", "seed", "workers"}
PHYSICAL_KEYS = {"lambda", "d_r", "mass_sq", "mass"}
PARAM_KEYS = {"delta", "gamma", "d"}
# "params" names both a subcommand and the explicit-parameter block; it has no section
SECTION_KEYS = set(SUBCOMMANDS) - {"params"}


@dataclass
class ExperimentConfig:
    subcommand: str
    profile: str = None
    physical: dict = None
    params: dict = None
    integrator: ig.IntegratorConfig = field(default_factory=ig.IntegratorConfig)
    output_dir: str = "out"
    seed: int = 0
    workers: int = 1
    section: dict = field(default_factory=dict)

    def to_dict(self):
        d = {"subcommand": self.subcommand}
        if self.profile is not None:
            d["profile"] = self.profile
            d["physical"] = dict(self.physical)
        else:
            d["params"] = dict(self.params)
        d["integrator"] = asdict(self.integrator)
        d["output_dir"] = self.output_dir
        d["seed"] = self.seed
        d["workers"] = self.workers
        if self.subcommand in SECTION_KEYS:
            d[self.subcommand] = copy.deepcopy(self.section)
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    def dynamics(self) -> SdeParamsRef:
        if self.params is not None:
            return SdeParamsRef(float(self.params["delta"]), float(self.params["gamma"]), float(self.params["d"]))
        p = derive_from_profile(self)
        return SdeParamsRef(p["delta"], p["gamma"], p["d"])


def derive_from_profile(cfg: ExperimentConfig):
    phys = cfg.physical
    if "mass" in phys:
        pi = prof.PhysicalInputs(float(phys["lambda"]), float(phys["d_r"]), float(phys["mass"]))
    else:
        pi = prof.PhysicalInputs.from_mass_sq(float(phys["lambda"]), float(phys["d_r"]), float(phys["mass_sq"]))
    return prof.params_report(prof.load_profile(cfg.profile), pi)


# --- parsing ----------------------------------------------------------------------------------


def _unknown(where, keys, allowed):
    extra = sorted(set(keys) - set(allowed))
    if extra:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(map(repr, extra))}")


def _number(where, v):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{where}: expected a finite number, got {v!r}")
    return v


def _check_like(where, value, default):
    """Type check ``value`` against the shape of ``default``."""
    if default is None:
        if value is not None and not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string or null")
    elif isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false")
    elif isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer")
    elif isinstance(default, float):
        _number(where, value)
    elif isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string")
    elif isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list")
    return value


def _load(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    return doc


def parse_config(text, overrides=None) -> ExperimentConfig:
    """Validate a JSON config, fill defaults and apply scalar flag overrides."""
    doc = dict(_load(text))
    for k, v in (overrides or {}).items():
        if v is not None:
            doc[k] = v
    sub = doc.get("subcommand")
    if sub not in SUBCOMMANDS:
        raise ConfigError(f"subcommand: expected one of {SUBCOMMANDS}, got {sub!r}")
    _unknown("config", doc, TOP_KEYS | SECTION_KEYS)
    for other in set(doc) & SECTION_KEYS:
        if other != sub:
            raise ConfigError(f"{other}: section does not apply to subcommand {sub!r}")

    has_profile, has_params = "profile" in doc, "params" in doc
    if has_profile == has_params:
        raise ConfigError("exactly one of 'profile' or 'params' must be given")
    profile = physical = params = None
    if has_profile:
        profile = doc["profile"]
        if not isinstance(profile, str):
            raise ConfigError("profile: expected a built-in name or a CSV path")
        physical = doc.get("physical", {"lambda": 1.0, "d_r": 1.0, "mass_sq": math.pi})
        if not isinstance(physical, dict):
            raise ConfigError("physical: expected an object")
        _unknown("physical", physical, PHYSICAL_KEYS)
        if ("mass" in physical) == ("mass_sq" in physical):
            raise ConfigError("physical: give exactly one of 'mass' or 'mass_sq'")
        for k in ("lambda", "d_r"):
            if k not in physical:
                raise ConfigError(f"physical.{k}: missing")
        for k, v in physical.items():
            _number(f"physical.{k}", v)
    else:
        if "physical" in doc:
            raise ConfigError("physical: only meaningful together with 'profile'")
        params = doc["params"]
        if not isinstance(params, dict):
            raise ConfigError("params: expected an object")
        _unknown("params", params, PARAM_KEYS)
        for k in sorted(PARAM_KEYS):
            if k not in params:
                raise ConfigError(f"params.{k}: missing")
            _number(f"params.{k}", params[k])
        SdeParamsRef(float(params["delta"]), float(params["gamma"]), float(params["d"]))

    integ = doc.get("integrator", {})
    if not isinstance(integ, dict):
        raise ConfigError("integrator: expected an object")
    names = set(ig.IntegratorConfig.__dataclass_fields__)
    _unknown("integrator", integ, names)
    try:
        icfg = ig.IntegratorConfig(**integ)
    except TypeError as e:
        raise ConfigError(f"integrator: {e}") from None

    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError("seed: expected an unsigned 64-bit integer")
    workers = doc.get("workers", 1)
    if isinstance(workers, bool) or not isinstance(workers, int) or workers < 1:
        raise ConfigError("workers: expected a positive integer")
    out = doc.get("output_dir", "out")
    if not isinstance(out, str) or not out:
        raise ConfigError("output_dir: expected a nonempty path")

    sec_in = doc.get(sub, {}) if sub in SECTION_KEYS else {}
    if not isinstance(sec_in, dict):
        raise ConfigError(f"{sub}: expected an object")
    defaults = SECTIONS[sub]
    _unknown(sub, sec_in, defaults)
    section = copy.deepcopy(defaults)
    for k, v in sec_in.items():
        section[k] = _check_like(f"{sub}.{k}", v, defaults[k])
    return ExperimentConfig(sub, profile, physical, params, icfg, out, seed, workers, section)


# --- runners ------------------------------------------------------------------------------------


class Run:
    """Collects artifacts and the claim outcome for one invocation."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.out = Path(cfg.output_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.artifacts = []
        self.claim_failed = False
        self.summary = {}

    def path(self, name):
        self.artifacts.append(name)
        return self.out / name

    def write_json(self, name, obj):
        with open(self.path(name), "w") as fh:
            json.dump(vf._plain(obj), fh, indent=2)
            fh.write("\n")


def _pmap(fn, tasks, workers):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, *zip(*tasks)))


def _chunks(n, workers):
    k = max(1, min(n, 4 * workers))
    bounds = np.linspace(0, n, k + 1).astype(int)
    return [(int(a), int(b - a)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def run_params(r: Run):
    cfg = r.cfg
    if cfg.profile is None:
        raise ConfigError("params needs a profile source")
    rep = derive_from_profile(cfg)
    rep["profile"] = cfg.profile
    r.write_json("params.json", rep)
    r.summary = {k: rep[k] for k in ("delta", "gamma", "d", "amp")}


def _init_state(system, init):
    return HalfPlaneState(*init) if system == "original" else TransformedState(*init)


def _simulate_one(system, init, p, icfg):
    sim = ig.simulate_original if system == "original" else ig.simulate_transformed
    return sim(_init_state(system, init), p, icfg)


def run_simulate(r: Run):
    cfg, sec = r.cfg, r.cfg.section
    if sec["system"] not in ("original", "transformed"):
        raise ConfigError("simulate.system: expected 'original' or 'transformed'")
    p = cfg.dynamics()
    icfg = cfg.integrator.replace(seed=cfg.seed)
    tasks = [(sec["system"], sec["init"], p, icfg.replace(path_index=icfg.path_index + i))
             for i in range(sec["n_paths"])]
    paths = _pmap(_simulate_one, tasks, cfg.workers)
    for i, path in enumerate(paths):
        path.to_csv(r.path(f"path_{i:04d}.csv"))
        r.artifacts.append(f"path_{i:04d}.csv.json")
    r.summary = {"n_paths": len(paths), "terminal": [pth.terminal.tolist() for pth in paths[:10]]}


def _tc_config(sec):
    return tc.TimeChangeConfig(dt_target=sec["dt_target"], ds_max=sec["ds_max"], dt_out=sec["dt_out"],
                               printed_constants=sec["printed_constants"])


def _tc_chunk(x0, y0, p, horizon, n, tcfg, seed, first, segments):
    return tc.weak_terminal_ensemble(x0, y0, p, horizon, n, tcfg, seed, first, segments)


def run_timechange(r: Run):
    cfg, sec = r.cfg, r.cfg.section
    p = cfg.dynamics()
    tcfg = _tc_config(sec)
    n = sec["n_paths"]
    if n < 2:
        raise ConfigError("timechange.n_paths must be at least 2")
    tasks = [(sec["x0"], sec["y0"], p, sec["horizon"], cnt, tcfg, cfg.seed, first, sec["segments"])
             for first, cnt in _chunks(n, cfg.workers)]
    term = np.concatenate(_pmap(_tc_chunk, tasks, cfg.workers))
    np.savetxt(r.path("terminal.csv"), np.column_stack([np.arange(n), term]), delimiter=",",
               header="path,x,y,log_weight", comments="", fmt="%.17g")
    for i in range(min(sec["save_paths"], n)):
        wp = tc.weak_sample(sec["x0"], sec["y0"], p, sec["horizon"] / sec["segments"], tcfg, cfg.seed, i)
        for _ in range(sec["segments"] - 1):
            wp = tc.extend(wp, p, tcfg, length=sec["horizon"] / sec["segments"])
        wp.to_csv(r.path(f"weighted_path_{i:04d}.csv"))
    summary = {
        "x": tc.ensemble_summary(term[:, 0], term[:, 2]),
        "y": tc.ensemble_summary(term[:, 1], term[:, 2]),
        "one": tc.ensemble_summary(np.ones(n), term[:, 2]),
        "horizon": sec["horizon"],
        "weights": "printed" if sec["printed_constants"] else "drift-shift",
    }
    r.write_json("ensemble.json", summary)
    r.summary = {"mean_x": summary["x"]["mean"], "ess": summary["x"]["ess"]}


def run_invariant(r: Run):
    cfg, sec = r.cfg, r.cfg.section
    p = cfg.dynamics()
    xe = np.linspace(*sec["x_range"], sec["bins"][0] + 1)
    ye = np.linspace(*sec["y_range"], sec["bins"][1] + 1)
    icfg = cfg.integrator.replace(seed=cfg.seed, t_end=float(sec["t_end"]))
    x0, y0 = sec["init"]
    path_o, h_o = erg.occupation_run("original", (x0, y0), p, icfg, xe, ye, sec["burn_in"])
    xi_e, eta_e = erg.preimage_edges(xe, ye)
    path_t, h_t = erg.occupation_run("transformed", (1.0 / x0, x0 * x0 * y0), p, icfg.replace(path_index=1),
                                     xi_e, eta_e, sec["burn_in"])
    h_p = erg.pushforward(h_t, xe, ye, refine=sec["refine"], strict=False)
    _, h_o2 = erg.occupation_run("original", (x0, y0), p, icfg.replace(path_index=2), xe, ye, sec["burn_in"])
    tv_cross = erg.compare_histograms(h_o, h_p)
    tv_seed = erg.compare_histograms(h_o, h_o2)
    h_o.to_csv(r.path("hist_original.csv"))
    h_t.to_csv(r.path("hist_transformed.csv"))
    h_p.to_csv(r.path("hist_pushforward.csv"))
    r.artifacts += ["hist_original.csv.json", "hist_transformed.csv.json", "hist_pushforward.csv.json"]
    ok = tv_cross < sec["tv_tol"] and tv_seed < sec["tv_tol"]
    rep = {"tv_cross_system": tv_cross, "tv_two_seeds": tv_seed, "tv_tol": sec["tv_tol"], "pass": ok,
           "window_mass": {"original": h_o.window_mass, "pushforward": h_p.window_mass,
                           "original_seed2": h_o2.window_mass},
           "terminal_x": {"original": float(path_o.x[-1]), "transformed": float(1.0 / path_t.x[-1])}}
    if min(rep["window_mass"].values()) < 0.5:
        rep["notes"] = "most occupation time is outside the window; agreement is carried by the overflow cell"
    r.write_json("invariant.json", rep)
    r.claim_failed = not ok
    r.summary = {"tv_cross_system": tv_cross, "tv_two_seeds": tv_seed}


def run_decay(r: Run):
    cfg, sec = r.cfg, r.cfg.section
    if sec["input"]:
        path = ig.PathSample.from_csv(sec["input"])
    else:
        icfg = cfg.integrator.replace(seed=cfg.seed)
        path = ig.simulate_original(HalfPlaneState(*sec["init"]), cfg.dynamics(), icfg)
    rep = erg.decay_test(path, sec["window_length"], lag=sec["lag"], floor=sec["floor"])
    d = rep.as_dict()
    d["ci_contains_zero"] = bool(rep.slope_ci[0] <= 0.0 <= rep.slope_ci[1])
    r.write_json("decay.json", d)
    np.savetxt(r.path("window_means.csv"), np.column_stack([rep.window_mid, rep.window_log_means]), delimiter=",",
               header="t_mid,mean_log_x", comments="", fmt="%.17g")
    r.claim_failed = not d["ci_contains_zero"]
    r.summary = {"slope": rep.slope, "ci": list(rep.slope_ci)}


def run_control(r: Run):
    cfg, sec = r.cfg, r.cfg.section
    p = cfg.dynamics()
    eps = []
    for i, e in enumerate(sec["endpoints"]):
        if not (isinstance(e, list) and len(e) == 4):
            raise ConfigError(f"control.endpoints[{i}]: expected [xi0, eta0, z1, z2]")
        eps.append(ctl.Endpoints(*map(float, e)))
    eps += ctl.random_endpoints(sec["n_random"], sec["random_seed"]) if sec["n_random"] else []
    if not eps:
        raise ConfigError("control: no endpoints (set 'endpoints' or 'n_random')")
    sols = [ctl.synthesize_control(ctl.hermite_positive(e, sec["fallback"]), p, sec["n_grid"]) for e in eps]
    reports = ctl.verify_batch(eps, p, sec["dt"], sec["n_grid"], fallback=sec["fallback"])
    rows = []
    for i, (e, s, rep) in enumerate(zip(eps, sols, reports)):
        s.to_csv(r.path(f"control_{i:04d}.csv"))
        d = rep.as_dict()
        d.update({"index": i, "endpoints": [e.xi0, e.eta0, e.z1, e.z2]})
        rows.append(d)
    worst = max(x["residual"] for x in rows)
    ok = worst < sec["tol"] and min(x["min_z1"] for x in rows) > 0
    r.write_json("control_report.json", {"pass": ok, "max_residual": worst, "tol": sec["tol"], "pairs": rows})
    r.claim_failed = not ok
    r.summary = {"max_residual": worst, "n": len(rows)}


def _claim(p, spec, seed):
    spec = dict(spec)
    kind = spec.pop("claim", None)
    try:
        if kind == "rank_map":
            return vf.rank_map(p, tuple(spec.get("xi_range", (0.1, 3.0))), tuple(spec.get("eta_range", (-3.0, 3.0))),
                               tuple(spec.get("n", (64, 64))), spec.get("tol", 1e-9))
        if kind == "lyapunov_rays":
            return vf.lyapunov_ray_report(p, spec["rays"], spec.get("t_max", 10.0))
        if kind == "boundary_invariance":
            return vf.boundary_invariance(p, spec.get("n_paths", 1000), spec.get("t_end", 1.0), seed,
                                          spec.get("eta0", 0.0))
        if kind == "generator_crosscheck":
            return vf.generator_crosscheck(TransformedState(*spec["z"]), p, tuple(spec.get("h_list", (4e-4, 2e-4, 1e-4))),
                                           spec.get("n_paths", 100000), seed)
    except KeyError as e:
        raise ConfigError(f"verify claim {kind!r}: missing field {e}") from None
    except TypeError as e:
        raise ConfigError(f"verify claim {kind!r}: {e}") from None
    raise ConfigError(f"verify: unknown claim {kind!r}")


def run_verify(r: Run):
    cfg = r.cfg
    p = cfg.dynamics()
    reports = [_claim(p, spec, cfg.seed) for spec in cfg.section["claims"]]
    vf.write_reports(reports, r.path("reports.jsonl"))
    r.claim_failed = not all(x.passed for x in reports)
    r.summary = {x.claim_id: x.passed for x in reports}


def run_convergence(r: Run):
    cfg, sec = r.cfg, r.cfg.section
    p = cfg.dynamics()
    lo, hi = sec["dt_exponents"]
    dts = [2.0**-k for k in range(lo, hi + 1)]
    x0, y0 = sec["init"]
    out, rows, ok = {}, [], True
    for system in sec["systems"]:
        init = (x0, y0) if system == "original" else (1.0 / x0, x0 * x0 * y0)
        res = ig.strong_error_study(system, init, p, dts, sec["n_paths"], cfg.seed, t_end=sec["t_end"])
        out[system] = res.as_dict()
        rows += [(system, h, e, s) for h, e, s in zip(res.dts, res.errors, res.stderr)]
        ok = ok and sec["slope_range"][0] <= res.slope <= sec["slope_range"][1]
    with open(r.path("convergence.csv"), "w") as fh:
        fh.write("system,dt,strong_error,stderr\n")
        for s, h, e, se in rows:
            fh.write(f"{s},{h!r},{e!r},{se!r}\n")
    out["pass"] = ok
    r.write_json("convergence.json", out)
    r.claim_failed = not ok
    r.summary = {s: out[s]["slope"] for s in sec["systems"]}


RUNNERS = {
    "params": run_params,
    "simulate": run_simulate,
    "timechange": run_timechange,
    "invariant": run_invariant,
    "decay": run_decay,
    "control": run_control,
    "verify": run_verify,
    "convergence": run_convergence,
}


def _versions():
    import numba
    import scipy
    import statsmodels

    return {"widthsde": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__, "statsmodels": statsmodels.__version__}


def run(cfg: ExperimentConfig):
    """Dispatch, write artifacts plus manifest.json, and return the exit status."""
    t0 = time.time()
    r = Run(cfg)
    status, error = EXIT_OK, None
    try:
        RUNNERS[cfg.subcommand](r)
        if r.claim_failed:
            status = EXIT_CLAIM_FAILED
    except WidthSDEError as e:
        status, error = EXIT_ERROR, f"{type(e).__name__}: {e}"
    manifest = {
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "workers": cfg.workers,
        "versions": _versions(),
        "started": time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(t0)),
        "wall_time_s": time.time() - t0,
        "exit_status": status,
        "error": error,
        "artifacts": r.artifacts,
        "summary": r.summary,
    }
    with open(r.out / "manifest.json", "w") as fh:
        json.dump(vf._plain(manifest), fh, indent=2)
        fh.write("\n")
    return status, manifest


def build_parser():
    ap = argparse.ArgumentParser(prog="widthsde", description="Stochastic width dynamics experiments.")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", help="JSON config file (its subcommand must match)")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--workers", type=int, help=f"worker processes (fallback: ${WORKERS_ENV})")
    ap.add_argument("--output-dir")
    ap.add_argument("--profile", help="built-in profile name or CSV path (replaces params)")
    ap.add_argument("--params", help="explicit delta,gamma,d (replaces profile)")
    ap.add_argument("--print-config", action="store_true", help="print the resolved config and exit")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        doc = _load(Path(args.config).read_text()) if args.config else {"subcommand": args.subcommand}
        if doc.get("subcommand", args.subcommand) != args.subcommand:
            raise ConfigError(f"config is for {doc.get('subcommand')!r}, not {args.subcommand!r}")
        doc["subcommand"] = args.subcommand
        if args.profile is not None:
            doc.pop("params", None)
            doc["profile"] = args.profile
        if args.params is not None:
            doc.pop("profile", None)
            doc.pop("physical", None)
            try:
                d, g, dd = (float(v) for v in args.params.split(","))
            except ValueError:
                raise ConfigError("--params expects delta,gamma,d") from None
            doc["params"] = {"delta": d, "gamma": g, "d": dd}
        workers = args.workers
        if workers is None and os.environ.get(WORKERS_ENV):
            try:
                workers = int(os.environ[WORKERS_ENV])
            except ValueError:
                raise ConfigError(f"{WORKERS_ENV} must be an integer") from None
        cfg = parse_config(json.dumps(doc), {"seed": args.seed, "workers": workers, "output_dir": args.output_dir})
    except (ConfigError, OSError) as e:
        print(f"widthsde: error: {e}", file=sys.stderr)
        return EXIT_ERROR
    if args.print_config:
        print(cfg.to_json())
        return EXIT_OK
    status, manifest = run(cfg)
    if manifest["error"]:
        print(f"widthsde: error: {manifest['error']}", file=sys.stderr)
    print(json.dumps(vf._plain(manifest["summary"])))
    return status


if __name__ == "__main__":
    sys.exit(main())
