"""Command-line interface.

    rankboot analyze --input scores.csv --layout long --fraction 0.355 --out res/
    rankboot select-m --input scores.csv --layout long --estimator proportion --out res/
    rankboot conditional --input expr.csv --layout matrix --response Y --top 15 --out res/
    rankboot simulate figure7 --rho 0 --out res/
    rankboot oracle figure4 --z1 1

Options may also come from ``--config file.json`` (keys are the long option
names with dashes or underscores); explicit flags win. Exit codes: 0 ok,
2 bad usage or input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import inspect
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import simulation as sim
from . import theory
from .data import Layout, PopulationData, load_long_csv, load_matrix_csv, summarize_sizes
from .engine import (
    bootstrap_rank_distribution,
    interval_width_summary,
    observed_conditional_distribution,
    prediction_intervals,
)
from .errors import NumericalError, ValidationError
from .estimators import EstimatorSpec, estimate_all
from .ranking import rank_estimates
from .resampling import ResamplePlan, Rounding, Scheme
from .tuning import select_m

EXIT_USAGE = 2
EXIT_NUMERICAL = 3

_COMMON = {"seed": 0, "threads": 1, "out": "."}
_DATA = {"layout": "long", "response": None, "estimator": "mean"}
_RUN = {"scheme": None, "size": "full", "fraction": None, "m": None, "rounding": "round",
        "replicates": 2000, "level": 0.95}
DEFAULTS = {
    "analyze": {**_COMMON, **_DATA, **_RUN},
    "select-m": {**_COMMON, **_DATA, "candidates": None, "log_scale": 1.0},
    "conditional": {**_COMMON, **_DATA, **_RUN, "top": 15},
    # preset defaults apply unless overridden
    "simulate": {**_COMMON, "seed": None},
    "oracle": {**_COMMON},
}
# runtime hints that never change results; kept out of the config hash and echo
RUNTIME_KEYS = {"threads", "out", "config", "command"}


def _level(text: str) -> float:
    v = float(text)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"level must lie in (0, 1), got {text}")
    return v


def _fraction(text: str) -> float:
    v = float(text)
    if not 0.0 < v <= 1.0:
        raise argparse.ArgumentTypeError(f"fraction must lie in (0, 1], got {text}")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _add_data_args(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--input", default=S, help="CSV input file")
    p.add_argument("--layout", choices=["long", "matrix"], default=S,
                   help="long: item,value rows; matrix: one observation vector per row")
    p.add_argument("--response", default=S, help="response column name (matrix layout)")
    p.add_argument("--estimator", default=S, help="mean | proportion | quantile:q | correlation")


def _add_run_args(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--scheme", choices=[s.value for s in Scheme], default=S)
    size = p.add_mutually_exclusive_group()
    size.add_argument("--full", dest="size", action="store_const", const="full", default=S,
                      help="n-out-of-n resampling (default)")
    size.add_argument("--fraction", type=_fraction, default=S, help="resample m_j = fraction * n_j")
    size.add_argument("--m", type=_positive_int, default=S, help="common resample size m")
    size.add_argument("--auto-m", dest="size", action="store_const", const="auto", default=S,
                      help="choose the resample fraction by minimising the tuning objective")
    p.add_argument("--rounding", choices=[r.value for r in Rounding], default=S,
                   help="rounding of fraction * n_j (default: round half up)")
    p.add_argument("--replicates", type=_positive_int, default=S)
    p.add_argument("--level", type=_level, default=S)


def _add_common_args(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--threads", type=_positive_int, default=S)
    p.add_argument("--out", default=S, help="output directory")
    p.add_argument("--config", default=S, help="JSON file with option values")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rankboot", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"rankboot {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="bootstrap rank distribution and prediction intervals")
    _add_data_args(p)
    _add_run_args(p)
    _add_common_args(p)

    p = sub.add_parser("select-m", help="choose the m-out-of-n resample size")
    _add_data_args(p)
    p.add_argument("--candidates", type=_int_list, default=argparse.SUPPRESS,
                   help="comma-separated candidate m values")
    p.add_argument("--log-scale", type=float, default=argparse.SUPPRESS,
                   help="constant C in the log(C n) shrinkage (default 1)")
    _add_common_args(p)

    p = sub.add_parser("conditional", help="rank intervals with each item's estimate held fixed")
    _add_data_args(p)
    _add_run_args(p)
    p.add_argument("--top", type=_positive_int, default=argparse.SUPPRESS,
                   help="number of top-ranked items to report")
    _add_common_args(p)

    p = sub.add_parser("simulate", help="run a preset or JSON-defined simulation study")
    p.add_argument("scenario", nargs="?", default=argparse.SUPPRESS,
                   help=f"preset name: {', '.join(sim.PRESETS)}")
    p.add_argument("--rho", type=_float_list, default=argparse.SUPPRESS)
    p.add_argument("--n", type=_int_list, default=argparse.SUPPRESS)
    p.add_argument("--alpha", type=_float_list, default=argparse.SUPPRESS)
    p.add_argument("--reps", type=_positive_int, default=argparse.SUPPRESS)
    p.add_argument("--truth-reps", type=_positive_int, default=argparse.SUPPRESS)
    p.add_argument("--replicates", type=_positive_int, default=argparse.SUPPRESS)
    p.add_argument("--growth", choices=["constant", "linear", "quadratic"], default=argparse.SUPPRESS)
    p.add_argument("--shrink-gap", action="store_true", default=argparse.SUPPRESS)
    _add_common_args(p)

    p = sub.add_parser("oracle", help="evaluate limit laws")
    p.add_argument("name", choices=["figure4", "constantC", "expected-rank", "r-limit", "limit-cdf"])
    p.add_argument("--z1", type=float, default=argparse.SUPPRESS)
    p.add_argument("--j", type=int, default=argparse.SUPPRESS)
    p.add_argument("--delta", type=float, default=argparse.SUPPRESS)
    p.add_argument("--sigmas", type=_float_list, default=argparse.SUPPRESS)
    p.add_argument("--offsets", type=_float_list, default=argparse.SUPPRESS)
    p.add_argument("--draws", type=_positive_int, default=argparse.SUPPRESS)
    _add_common_args(p)
    return parser


# --------------------------------------------------------------------------
# config handling


def effective_config(args: argparse.Namespace) -> dict:
    given = vars(args)
    cfg = dict(DEFAULTS[given["command"]])
    if "config" in given:
        try:
            loaded = json.loads(Path(given["config"]).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {given['config']}: {exc}") from None
        if not isinstance(loaded, dict):
            raise ValidationError("config file must hold a JSON object")
        cfg.update({k.replace("-", "_"): v for k, v in loaded.items()})
    cfg.update(given)
    if "fraction" in given:
        cfg["size"] = "fraction"
    elif "m" in given:
        cfg["size"] = "m"
    elif "size" not in given and cfg.get("fraction") is not None:
        cfg["size"] = "fraction"
    return cfg


def _hashed(cfg: dict) -> dict:
    return {k: v for k, v in sorted(cfg.items()) if k not in RUNTIME_KEYS}


def config_hash(cfg: dict) -> str:
    blob = json.dumps(_hashed(cfg), sort_keys=True, default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def header_lines(cfg: dict) -> list[str]:
    return [f"rankboot {__version__}", f"command={cfg['command']} seed={cfg['seed']}",
            f"config_sha256={config_hash(cfg)}"]


def _out_dir(cfg: dict) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(
        json.dumps(_hashed(cfg), indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")
    return out


def _load(cfg: dict) -> PopulationData:
    if not cfg.get("input"):
        raise ValidationError("--input is required")
    if cfg["layout"] == "long":
        return load_long_csv(cfg["input"])
    return load_matrix_csv(cfg["input"], cfg.get("response"))


def _plan(cfg: dict, data: PopulationData, estimator: EstimatorSpec) -> tuple[ResamplePlan, dict]:
    if cfg.get("scheme"):
        scheme = Scheme(cfg["scheme"])
    elif data.layout is Layout.MATRIX:
        scheme = Scheme.INDEPENDENT_COMPONENT
    else:
        scheme = Scheme.INDEPENDENT_POPULATIONS
    common = {"scheme": scheme, "replicates": int(cfg["replicates"]), "seed": int(cfg["seed"]),
              "rounding": Rounding(cfg["rounding"])}
    info = {}
    size = cfg["size"]
    if size == "auto":
        choice = select_m(data, estimator)
        info = {"auto_m": choice.m, "auto_rho": choice.rho}
        if choice.rho >= 1.0:
            return ResamplePlan(**common), info
        return ResamplePlan.fraction(choice.rho, **common), info
    if size == "fraction":
        return ResamplePlan.fraction(float(cfg["fraction"]), **common), info
    if size == "m":
        return ResamplePlan.per_item([int(cfg["m"])], **common), info
    return ResamplePlan(**common), info


def _estimator(cfg: dict) -> EstimatorSpec:
    return EstimatorSpec.parse(cfg["estimator"], sigma_seed=int(cfg["seed"]))


# --------------------------------------------------------------------------
# commands


def cmd_analyze(cfg: dict) -> int:
    data = _load(cfg)
    est = _estimator(cfg)
    plan, info = _plan(cfg, data, est)
    theta = estimate_all(data, est)
    dist = bootstrap_rank_distribution(data, est, plan, threads=int(cfg["threads"]))
    iv = prediction_intervals(dist, float(cfg["level"]))
    out = _out_dir(cfg)
    head = header_lines(cfg)
    dist.to_csv(out / "rank_distribution.csv", head)
    iv.to_csv(out / "intervals.csv", head)
    ranks = rank_estimates(theta)
    summary = {
        "tool": f"rankboot {__version__}",
        "config_sha256": config_hash(cfg),
        "seed": plan.seed,
        "scheme": plan.scheme.value,
        "replicates": plan.replicates,
        "level": iv.level,
        "n_bar": summarize_sizes(data).n_bar,
        "m_used": [int(v) for v in dist.m_used],
        "mean_width": interval_width_summary(iv),
        **info,
        "items": [{"item": lab, "estimate": float(t), "rank": int(r), "lo": int(lo), "hi": int(hi),
                   "width": int(hi - lo + 1)}
                  for lab, t, r, lo, hi in zip(data.labels, theta, ranks, iv.lo, iv.hi)],
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    print(f"analyzed {data.p} items; mean {iv.level:g} interval width {summary['mean_width']:.3f}; "
          f"output in {out}")
    return 0


def cmd_select_m(cfg: dict) -> int:
    data = _load(cfg)
    est = _estimator(cfg)
    choice = select_m(data, est, cfg.get("candidates"), float(cfg["log_scale"]))
    out = _out_dir(cfg)
    choice.to_csv(out / "m_selection.csv", header_lines(cfg))
    print(f"chosen m = {choice.m} (rho = {choice.rho:.4f} of n_bar = {choice.n_bar:g})")
    return 0


def cmd_conditional(cfg: dict) -> int:
    data = _load(cfg)
    if data.layout is not Layout.MATRIX:
        raise ValidationError("conditional analysis needs matrix data (--layout matrix)")
    est = _estimator(cfg)
    plan, _ = _plan(cfg, data, est)
    theta = estimate_all(data, est)
    ranks = rank_estimates(theta)
    top = [int(j) for j in np.argsort(ranks)[:min(int(cfg["top"]), data.p)]]
    threads = int(cfg["threads"])
    level = float(cfg["level"])
    cond = prediction_intervals(observed_conditional_distribution(data, est, plan, top, threads), level)
    full = prediction_intervals(bootstrap_rank_distribution(data, est, plan, threads), level)
    out = _out_dir(cfg)
    with open(out / "conditional_intervals.csv", "w", encoding="utf-8") as fh:
        for line in header_lines(cfg):
            fh.write(f"# {line}\n")
        fh.write("item,estimate,rank,cond_lo,cond_hi,uncond_lo,uncond_hi,level\n")
        for i, j in enumerate(top):
            fh.write(f"{data.labels[j]},{float(theta[j])!r},{int(ranks[j])},{int(cond.lo[i])},"
                     f"{int(cond.hi[i])},{int(full.lo[j])},{int(full.hi[j])},{level!r}\n")
    print(f"conditional intervals for the top {len(top)} items written to {out}")
    return 0


_PRESET_ARGS = {"rho": "rhos", "n": "ns", "alpha": "alphas", "reps": "reps",
                "truth_reps": "truth_reps", "replicates": "replicates", "growth": "growth",
                "shrink_gap": "shrink_gap", "seed": "seed"}


def _simulation_specs(cfg: dict) -> list[sim.ScenarioSpec]:
    if "scenarios" in cfg:
        return [sim.scenario_from_dict(d) for d in cfg["scenarios"]]
    name = cfg.get("scenario")
    if name not in sim.PRESETS:
        raise ValidationError(f"unknown scenario {name!r}; choose from {', '.join(sim.PRESETS)}")
    preset = sim.PRESETS[name]
    params = inspect.signature(preset).parameters
    kwargs = {}
    for key, arg in _PRESET_ARGS.items():
        if cfg.get(key) is None:
            continue
        if arg in params:
            kwargs[arg] = cfg[key]
        elif key == "n" and "n" in params:
            # single-n presets take the first value
            kwargs["n"] = int(cfg[key][0])
        else:
            raise ValidationError(f"preset {name} does not accept --{key.replace('_', '-')}")
    return preset(**kwargs)


def cmd_simulate(cfg: dict) -> int:
    specs = _simulation_specs(cfg)
    results = [sim.run_scenario(s, threads=int(cfg["threads"])) for s in specs]
    out = _out_dir(cfg)
    head = header_lines(cfg)
    sim.write_metrics_csv(results, out / "metrics.csv", head)
    sim.write_summary_csv(results, out / "summary.csv", head)
    for res in results:
        for s in res.summary:
            print(f"{s['scenario']:<32} {s['metric']:<18} mean={s['mean']:.5g} "
                  f"90% CI [{s['ci90_lo']:.5g}, {s['ci90_hi']:.5g}] reps={s['reps']}")
    return 0


def cmd_oracle(cfg: dict) -> int:
    name = cfg["name"]
    draws = int(cfg.get("draws", 10**6))
    seed = int(cfg["seed"])
    if name == "figure4":
        z1 = float(cfg.get("z1", 1.0))
        z = np.array([z1, 0.0, 0.0, 0.0, 0.0])
        pmf = theory.bootstrap_limit_pmf(theory.tied_block(5), np.ones(5), z, draws, seed)
        mean, var = theory.pmf_moments(pmf)
        result = {"oracle": name, "z1": z1, "draws": draws, "pmf": pmf.tolist(),
                  "mean": mean, "variance": var}
    elif name == "constantC":
        from scipy.integrate import quad
        from scipy.special import ndtr
        value, err = quad(lambda x: ndtr(-x), 0.0, np.inf, epsabs=1e-13, epsrel=1e-13)
        result = {"oracle": name, "quadrature": value, "quadrature_error": err,
                  "closed_form": theory.RANK_CONSTANT}
    elif name == "expected-rank":
        er = theory.expected_rank_asymptotic(int(cfg.get("j", 1)), float(cfg.get("delta", 1.0)))
        result = {"oracle": name, "j": int(cfg.get("j", 1)), "delta": float(cfg.get("delta", 1.0)),
                  "expected_rank": er.value, "constant": er.constant}
    elif name == "r-limit":
        sig = cfg.get("sigmas") or [1.0] * 5
        j = int(cfg.get("j", 0))
        pmf = theory.r_limit_pmf(sig, j, draws, seed)
        mean, var = theory.pmf_moments(pmf)
        result = {"oracle": name, "sigmas": sig, "j": j, "pmf": pmf.tolist(), "mean": mean,
                  "variance": var}
    else:
        sig = cfg.get("sigmas") or [1.0] * 5
        off = cfg.get("offsets") or [0.0] * len(sig)
        spec = theory.LimitSpec(tuple(sig), tuple(off), int(cfg.get("j", 0)))
        pmf = theory.limit_rank_pmf(spec, draws, seed)
        result = {"oracle": name, "sigmas": sig, "offsets": off, "focal": spec.focal,
                  "pmf": pmf.tolist(), "cdf": np.cumsum(pmf).tolist()}
    text = json.dumps(result, indent=2)
    print(text)
    if cfg["out"] != ".":
        (_out_dir(cfg) / "oracle.json").write_text(text + "\n", encoding="utf-8")
    return 0


COMMANDS = {
    "analyze": cmd_analyze,
    "select-m": cmd_select_m,
    "conditional": cmd_conditional,
    "simulate": cmd_simulate,
    "oracle": cmd_oracle,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = effective_config(args)
        return COMMANDS[cfg["command"]](cfg)
    except ValidationError as exc:
        print(f"rankboot: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"rankboot: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
