"""Command line front end: ``dpreg generate|fit|sweep|evaluate``.

Sweep output is a versioned CSV with one row per (cell, trial). Row ``i``
uses seed ``base_seed + i``; that seed is split into independent data and
mechanism streams, so results do not depend on ``--jobs``.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import logging
import math
import os
import statistics
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .oracles import exact_lse, stein_k_quad
from .privacy import PrivacyBudget
from .regression import (
    LinearConfig,
    LseConfig,
    RegressionEstimate,
    priv_learn_binary,
    priv_learn_linear,
    priv_learn_lse,
)
from .synthetic import Dataset, GeneratorSpec, generate, read_dataset, read_sidecar, write_dataset

SCHEMA_VERSION = 1
ESTIMATORS = ("lse", "binary", "linear")
SWEEP_KEYS = ("n", "d", "epsilon", "delta", "link")
RESULT_COLUMNS = (
    "schema_version",
    "row_index",
    "setting",
    "estimator",
    "n",
    "d",
    "epsilon",
    "delta",
    "link",
    "trial",
    "seed",
    "error_l2",
    "angle_deg",
    "bottom_flag",
    "runtime_ms",
    "budget_epsilon",
    "budget_delta",
)

log = logging.getLogger("dpreg")


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

_CONFIG_KEYS = {"epsilon", "delta", "kappa", "c", "alpha", "eta", "gamma", "beta_bound", "noise_bound", "kappa_z"}


def parse_epsilon(value) -> float:
    """Accept numbers and the string ``"inf"``."""
    eps = float(value)
    if not (eps > 0):
        raise ValueError(f"epsilon must be positive, got {value!r}")
    return eps


def make_config(estimator: str, config: dict, epsilon=None, delta=None):
    """Build the estimator's config from a flat dict; ``epsilon``/``delta`` override it."""
    unknown = set(config) - _CONFIG_KEYS
    if unknown:
        raise ValueError(f"unknown config fields: {sorted(unknown)}")
    cfg = dict(config)
    eps = parse_epsilon(cfg.pop("epsilon", 1.0) if epsilon is None else epsilon)
    dlt = float(cfg.pop("delta", 1e-6) if delta is None else delta)
    cfg.pop("epsilon", None)
    cfg.pop("delta", None)
    budget = PrivacyBudget(eps, dlt)
    if estimator == "linear":
        cfg.pop("c", None)
        return LinearConfig(budget=budget, **cfg)
    if estimator in ("lse", "binary"):
        for key in ("beta_bound", "noise_bound", "kappa_z"):
            cfg.pop(key, None)
        return LseConfig(budget=budget, **cfg)
    raise ValueError(f"estimator must be one of {ESTIMATORS}, got {estimator!r}")


def run_estimator(estimator: str, data: Dataset, cfg, rng: np.random.Generator) -> RegressionEstimate:
    if estimator == "lse":
        return priv_learn_lse(data, cfg, rng)
    if estimator == "binary":
        return priv_learn_binary(data, cfg, rng)
    if estimator == "linear":
        if data.y is not None and np.all(np.isin(data.y, (-1.0, 1.0))):
            warnings.warn("labels look binary; fitting the linear model anyway", UserWarning)
        return priv_learn_linear(data, cfg, rng)
    raise ValueError(f"estimator must be one of {ESTIMATORS}, got {estimator!r}")


def target_beta(estimator: str, spec: GeneratorSpec, data: Dataset) -> np.ndarray:
    """Reference the estimate is scored against.

    lse: exact least squares on the same data; binary: k * beta with k from
    quadrature; linear: the generating beta.
    """
    if estimator == "lse":
        return exact_lse(data.X, np.clip(data.y, -spec.c, spec.c))
    beta = spec.coefficients()
    if estimator == "binary":
        return stein_k_quad(spec.make_link(), beta, spec.covariance(), data.n, data.d) * beta
    return beta


def score(beta_hat: Optional[np.ndarray], target: np.ndarray) -> tuple[float, float]:
    """(||beta_hat - target||, angle in degrees); NaN when undefined."""
    if beta_hat is None:
        return math.nan, math.nan
    err = float(np.linalg.norm(beta_hat - target))
    denom = float(np.linalg.norm(beta_hat) * np.linalg.norm(target))
    if denom == 0:
        return err, math.nan
    cos = float(np.clip(beta_hat @ target / denom, -1.0, 1.0))
    return err, math.degrees(math.acos(cos))


# --------------------------------------------------------------------------
# experiment spec and result rows
# --------------------------------------------------------------------------


@dataclass
class ExperimentSpec:
    generator: GeneratorSpec
    estimator: str = "lse"
    config: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    trials: int = 1
    seed: int = 0
    output_path: Optional[str] = None

    def __post_init__(self):
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"estimator: must be one of {ESTIMATORS}")
        if self.trials < 1:
            raise ValueError("trials: must be at least 1")
        unknown = set(self.sweep) - set(SWEEP_KEYS)
        if unknown:
            raise ValueError(f"sweep: unknown keys {sorted(unknown)}")
        for key, values in self.sweep.items():
            if not isinstance(values, list) or not values:
                raise ValueError(f"sweep.{key}: must be a non-empty list")
        make_config(self.estimator, self.config)

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentSpec:
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown experiment fields: {sorted(unknown)}")
        if "generator" not in data:
            raise ValueError("generator: missing")
        data["generator"] = GeneratorSpec.from_dict(data["generator"])
        return cls(**data)

    def cells(self) -> list[dict]:
        """Cross product of the sweep lists in a fixed key order."""
        base = {
            "n": self.generator.n,
            "d": self.generator.d,
            "epsilon": self.config.get("epsilon", 1.0),
            "delta": self.config.get("delta", 1e-6),
            "link": self.generator.link,
        }
        axes = [self.sweep.get(k, [base[k]]) for k in SWEEP_KEYS]
        return [dict(zip(SWEEP_KEYS, combo)) for combo in itertools.product(*axes)]

    def tasks(self) -> list[dict]:
        out = []
        for cell in self.cells():
            for trial in range(self.trials):
                row_index = len(out)
                out.append({"row_index": row_index, "trial": trial, "seed": self.seed + row_index, **cell})
        return out


@dataclass
class ResultRow:
    row_index: int
    setting: str
    estimator: str
    n: int
    d: int
    epsilon: float
    delta: float
    link: str
    trial: int
    seed: int
    error_l2: float
    angle_deg: float
    bottom_flag: bool
    runtime_ms: Optional[float]
    budget_epsilon: float
    budget_delta: float
    schema_version: int = SCHEMA_VERSION

    def csv_fields(self) -> list[str]:
        values = asdict(self)
        if self.bottom_flag:
            values["error_l2"] = values["angle_deg"] = math.nan
        return [_fmt(values[c]) for c in RESULT_COLUMNS]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def _resize(values, d: int):
    if values is None:
        return None
    values = list(values)
    return (values + [0.0] * d)[:d]


def cell_generator(base: GeneratorSpec, cell: dict, seed: int) -> GeneratorSpec:
    d = int(cell["d"])
    fields_ = base.to_dict()
    fields_.update(n=int(cell["n"]), d=d, link=cell["link"], seed=seed)
    if d != base.d:
        if base.Sigma is not None:
            raise ValueError("sweep.d: cannot resize an explicit Sigma")
        fields_.update(mu=_resize(base.mu, d), beta=_resize(base.beta, d))
    return GeneratorSpec.from_dict(fields_)


def run_task(task: dict, spec: ExperimentSpec, timing: bool) -> ResultRow:
    data_seq, mech_seq = np.random.SeedSequence(task["seed"]).spawn(2)
    gen = cell_generator(spec.generator, task, task["seed"])
    data = generate(gen, np.random.default_rng(data_seq))
    cfg = make_config(spec.estimator, spec.config, task["epsilon"], task["delta"])
    start = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        est = run_estimator(spec.estimator, data, cfg, np.random.default_rng(mech_seq))
    elapsed = (time.perf_counter() - start) * 1000.0
    err, angle = score(est.beta_hat, target_beta(spec.estimator, gen, data))
    return ResultRow(
        row_index=task["row_index"],
        setting=gen.setting,
        estimator=spec.estimator,
        n=gen.n,
        d=gen.d,
        epsilon=float(task["epsilon"]),
        delta=float(task["delta"]),
        link=gen.link,
        trial=task["trial"],
        seed=task["seed"],
        error_l2=err,
        angle_deg=angle,
        bottom_flag=est.is_bottom,
        runtime_ms=elapsed if timing else None,
        budget_epsilon=est.budget.epsilon,
        budget_delta=est.budget.delta,
    )


def _run_task_star(args):
    return run_task(*args)


def run_sweep(spec: ExperimentSpec, jobs: int = 1, timing: bool = False) -> list[ResultRow]:
    tasks = spec.tasks()
    if jobs <= 1 or len(tasks) == 1:
        rows = [run_task(t, spec, timing) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_task_star, [(t, spec, timing) for t in tasks]))
    return sorted(rows, key=lambda r: r.row_index)


def results_csv(rows: list[ResultRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RESULT_COLUMNS)
    for row in rows:
        writer.writerow(row.csv_fields())
    return buf.getvalue()


def read_results(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def summarize(records: list[dict]) -> list[dict]:
    """Per-cell medians; bottom outputs count as +inf error."""
    groups: dict[tuple, list[dict]] = {}
    for rec in records:
        key = tuple(rec[k] for k in ("setting", "estimator", "n", "d", "epsilon", "delta", "link"))
        groups.setdefault(key, []).append(rec)
    out = []
    for key, recs in groups.items():
        errs = [math.inf if r["bottom_flag"] == "1" else float(r["error_l2"]) for r in recs]
        angles = [math.inf if r["bottom_flag"] == "1" else float(r["angle_deg"] or "nan") for r in recs]
        angles = [a for a in angles if not math.isnan(a)]
        out.append(
            {
                **dict(zip(("setting", "estimator", "n", "d", "epsilon", "delta", "link"), key)),
                "trials": len(recs),
                "median_error_l2": statistics.median(errs),
                "median_angle_deg": statistics.median(angles) if angles else math.nan,
                "bottom_rate": sum(r["bottom_flag"] == "1" for r in recs) / len(recs),
            }
        )
    return out


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def _load_json(path) -> dict:
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: line {exc.lineno}: {exc.msg}") from None


def cmd_generate(args) -> int:
    raw = _load_json(args.spec)
    gen = GeneratorSpec.from_dict(raw["generator"] if "generator" in raw else raw)
    if args.seed is not None:
        gen = replace(gen, seed=args.seed)
    out = Path(args.out)
    written = write_dataset(generate(gen), out, gen)
    for path in written:
        print(path)
    return 0


def cmd_fit(args) -> int:
    data = read_dataset(args.data)
    config = _load_json(args.config) if args.config else {}
    for key in ("kappa", "c", "alpha", "eta", "gamma", "beta_bound", "noise_bound", "kappa_z"):
        value = getattr(args, key)
        if value is not None:
            config[key] = value
    cfg = make_config(args.estimator, config, args.epsilon, args.delta)
    gen = read_sidecar(args.data) if args.evaluate else None
    rng = np.random.default_rng(args.seed)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        est = run_estimator(args.estimator, data, cfg, rng)
    for w in caught:
        log.warning("%s", w.message)
    err = angle = math.nan
    if gen is not None:
        err, angle = score(est.beta_hat, target_beta(args.estimator, gen, data))
    report = {
        "schema_version": SCHEMA_VERSION,
        "estimator": args.estimator,
        "n": data.n,
        "d": data.d,
        "epsilon": cfg.budget.epsilon if math.isfinite(cfg.budget.epsilon) else "inf",
        "delta": cfg.budget.delta,
        "seed": args.seed,
        "bottom_flag": est.is_bottom,
        "beta_hat": None if est.is_bottom else est.beta_hat.tolist(),
        "error_l2": None if math.isnan(err) else err,
        "angle_deg": None if math.isnan(angle) else angle,
        "budget_epsilon": _json_float(est.budget.epsilon),
        "budget_delta": est.budget.delta,
        "diagnostics": {k: _json_float(v) for k, v in est.diagnostics.items()},
    }
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def _json_float(v):
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


def cmd_sweep(args) -> int:
    spec = ExperimentSpec.from_dict(_load_json(args.spec))
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    out = args.out or spec.output_path
    if not out:
        raise ValueError("no output path: pass --out or set output_path")
    rows = run_sweep(spec, jobs=args.jobs, timing=args.timing)
    Path(out).write_text(results_csv(rows))
    log.info("wrote %d rows to %s", len(rows), out)
    return 0


def cmd_evaluate(args) -> int:
    summary = summarize(read_results(args.data))
    columns = list(summary[0].keys()) if summary else []
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for rec in summary:
        writer.writerow([_fmt(rec[c]) if not isinstance(rec[c], str) else rec[c] for c in columns])
    if args.out:
        Path(args.out).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dpreg", description="Private linear regression experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic dataset and its JSON sidecar")
    g.add_argument("--spec", required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int)
    g.set_defaults(func=cmd_generate)

    f = sub.add_parser("fit", help="run one private estimator on a dataset")
    f.add_argument("--data", required=True)
    f.add_argument("--estimator", choices=ESTIMATORS, default="lse")
    f.add_argument("--config", help="JSON file with estimator parameters")
    f.add_argument("--epsilon", type=parse_epsilon)
    f.add_argument("--delta", type=float)
    for key in ("kappa", "c", "alpha", "eta", "gamma", "beta_bound", "noise_bound", "kappa_z"):
        f.add_argument("--" + key.replace("_", "-"), dest=key, type=float)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--evaluate", action="store_true", help="score against the sidecar ground truth")
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("sweep", help="run an experiment grid and write the results CSV")
    s.add_argument("--spec", required=True)
    s.add_argument("--out")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--seed", type=int)
    s.add_argument("--timing", action="store_true", help="fill runtime_ms (breaks byte-identical output)")
    s.set_defaults(func=cmd_sweep)

    e = sub.add_parser("evaluate", help="summarise a results CSV per cell")
    e.add_argument("--data", required=True)
    e.add_argument("--out")
    e.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("DPREG_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, np.linalg.LinAlgError) as exc:
        print(f"dpreg: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
