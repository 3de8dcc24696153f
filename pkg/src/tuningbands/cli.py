"""Command-line front end: ingest random-search logs and emit band tables.

Every table is UTF-8 CSV whose first line is ``# `` followed by a JSON
receipt of the resolved configuration, so any output can be regenerated.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import _random, sim
from ._backend import NAME as BACKEND
from .cdfbands import BandMethod, CdfBands, Sample, make_bands
from .errors import ConfigError, ConvergenceError, DataError, EmptySampleError
from .tuning import (
    DEFAULT_NONTRIVIAL_FRACTION,
    CurveKind,
    KGrid,
    SupportBounds,
    _warn_extrapolation,
    compare_curves,
    curve_bands,
    scale_cost,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

REQUIRED_COLUMNS = ("model_id", "iteration", "score")
BOUNDED_METRICS = ("accuracy", "f1")


@dataclass
class AnalysisConfig:
    confidence: float = 0.8
    method: str = BandMethod.LD_HIGHEST_DENSITY.value
    curve: str = CurveKind.MEDIAN.value
    support: Optional[List[float]] = None
    metric: Optional[str] = None
    k_max: Optional[int] = None
    cost_scale: str = "none"
    seed: int = 0
    replicates: int = 100_000
    nontrivial_fraction: float = DEFAULT_NONTRIVIAL_FRACTION
    subsample: Optional[int] = None
    # coverage only
    truth: str = "uniform"
    nominal: List[float] = field(default_factory=lambda: [0.5, 0.8, 0.95])
    reps: int = 1000
    n: int = 48
    target: Optional[str] = None

    def validate(self) -> "AnalysisConfig":
        try:
            if not 0.0 <= self.confidence < 1.0:
                raise ConfigError(f"confidence must lie in [0, 1), got {self.confidence}")
            BandMethod(self.method)
            CurveKind(self.curve)
            if self.target is not None:
                sim.Target(self.target)
            if self.cost_scale not in ("none", "avg"):
                raise ConfigError(f"cost_scale must be none or avg, got {self.cost_scale}")
            if self.support is not None:
                SupportBounds(*self.support)
            if self.k_max is not None and self.k_max < 1:
                raise ConfigError("k_max must be at least 1")
            if self.subsample is not None and self.subsample < 1:
                raise ConfigError("subsample must be at least 1")
            if not 0.0 < self.nontrivial_fraction <= 1.0:
                raise ConfigError("nontrivial_fraction must lie in (0, 1]")
            if self.replicates < 1000:
                raise ConfigError("replicates must be at least 1000")
            if any(not 0.0 <= c < 1.0 for c in self.nominal):
                raise ConfigError("nominal levels must lie in [0, 1)")
            if self.reps < 100:
                raise ConfigError("reps must be at least 100")
            if self.n < 1:
                raise ConfigError("n must be at least 1")
            _random.check_seed(self.seed)
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
        return self

    @property
    def band_method(self) -> BandMethod:
        return BandMethod(self.method)

    @property
    def curve_kind(self) -> CurveKind:
        return CurveKind(self.curve)

    def support_bounds(self) -> Optional[SupportBounds]:
        if self.support is not None:
            return SupportBounds(*self.support)
        if self.metric in BOUNDED_METRICS:
            return SupportBounds(0.0, 1.0)
        return None


@dataclass
class ModelRuns:
    model_id: str
    scores: List[float] = field(default_factory=list)
    costs: List[float] = field(default_factory=list)
    iterations: List[int] = field(default_factory=list)
    # extra columns, opaque to the analysis
    metadata: List[Dict[str, str]] = field(default_factory=list)

    @property
    def sample(self) -> Sample:
        return Sample.from_scores(self.scores)

    @property
    def average_cost(self) -> float:
        return float(np.mean(self.costs))


def _parse_row(row: Dict[str, object], where: str, seen: set, models: Dict[str, ModelRuns]) -> None:
    missing = [c for c in REQUIRED_COLUMNS if row.get(c) in (None, "")]
    if missing:
        raise DataError(f"{where}: missing {', '.join(missing)}")
    model = str(row["model_id"])
    try:
        iteration = int(str(row["iteration"]))
        score = float(row["score"])
        cost = float(row["cost"]) if row.get("cost") not in (None, "") else 1.0
    except ValueError as exc:
        raise DataError(f"{where}: {exc}") from exc
    if not math.isfinite(score):
        raise DataError(f"{where}: score must be finite, got {row['score']}")
    if not (cost > 0 and math.isfinite(cost)):
        raise DataError(f"{where}: cost must be positive, got {row['cost']}")
    if (model, iteration) in seen:
        raise DataError(f"{where}: duplicate iteration {iteration} for model {model!r}")
    seen.add((model, iteration))
    runs = models.setdefault(model, ModelRuns(model))
    runs.scores.append(score)
    runs.costs.append(cost)
    runs.iterations.append(iteration)
    runs.metadata.append(
        {str(k): str(v) for k, v in row.items() if k not in REQUIRED_COLUMNS and k != "cost"}
    )


def ingest(path, fmt: str = "csv") -> Dict[str, ModelRuns]:
    """Read a search log into per-model runs, in order of first appearance."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    models: Dict[str, ModelRuns] = {}
    seen: set = set()
    with path.open(newline="", encoding="utf-8") as fh:
        if fmt == "csv":
            reader = csv.DictReader(fh)
            absent = [c for c in REQUIRED_COLUMNS if c not in (reader.fieldnames or [])]
            if absent:
                raise DataError(f"{path}: missing column(s) {', '.join(absent)}")
            for row in reader:
                _parse_row(row, f"{path}:{reader.line_num}", seen, models)
        elif fmt == "jsonl":
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise DataError(f"{path}:{lineno}: {exc.msg}") from exc
                if not isinstance(row, dict):
                    raise DataError(f"{path}:{lineno}: expected a JSON object")
                _parse_row(row, f"{path}:{lineno}", seen, models)
        else:
            raise ConfigError(f"unknown input format {fmt!r}")
    if not models:
        raise EmptySampleError(f"{path}: no runs found")
    return models


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_table(out, header: dict, columns: Sequence[str], rows) -> None:
    out.write("# " + json.dumps(header, sort_keys=True, allow_nan=True) + "\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])


def read_table(text: str):
    """Parse a table written by :func:`write_table` into (header, rows)."""
    lines = text.splitlines()
    header = json.loads(lines[0][2:])
    reader = csv.DictReader(io.StringIO("\n".join(lines[1:])))
    return header, list(reader)


def _model(models: Dict[str, ModelRuns], model_id: str) -> ModelRuns:
    if model_id not in models:
        raise DataError(f"model {model_id!r} not found; have {', '.join(models)}")
    return models[model_id]


def _sample_for(runs: ModelRuns, cfg: AnalysisConfig, stream: int) -> Sample:
    sample = runs.sample
    if cfg.subsample is None:
        return sample
    if cfg.subsample > sample.n:
        raise ConfigError(f"cannot subsample {cfg.subsample} of {sample.n} runs")
    rng = _random.generator(cfg.seed, _random.SUBSAMPLE, stream)
    picked = rng.choice(np.asarray(runs.scores), size=cfg.subsample, replace=False)
    return Sample.from_scores(picked)


def _grid(cfg: AnalysisConfig, n: int, runs: ModelRuns) -> KGrid:
    grid = KGrid.integers(cfg.k_max or n)
    _warn_extrapolation(grid, n)
    if cfg.cost_scale == "avg":
        grid = scale_cost(grid, runs.average_cost)
    return grid


def _bands(sample: Sample, cfg: AnalysisConfig, workers: int) -> CdfBands:
    return make_bands(sample, cfg.confidence, cfg.band_method, cfg.replicates, cfg.seed, workers)


def _receipt(command: str, cfg: AnalysisConfig, **extra) -> dict:
    return {"command": command, "config": dataclasses.asdict(cfg), **extra}


def cmd_bands(cfg: AnalysisConfig, models, model_id: str, out, cdf_out=None, workers: int = 1):
    runs = _model(models, model_id)
    sample = _sample_for(runs, cfg, 0)
    bands = _bands(sample, cfg, workers)
    grid = _grid(cfg, sample.n, runs)
    curves = curve_bands(bands, grid, cfg.curve_kind, cfg.support_bounds())
    header = _receipt("bands", cfg, model_id=model_id, n=sample.n, critical_value=bands.critical_value)
    rows = zip(curves.k, grid.budgets, curves.lower, curves.point, curves.upper)
    write_table(out, header, ["k", "k_cost", "lower", "point", "upper"], rows)
    if cdf_out is not None:
        side = zip(bands.knots, bands.lower.values, bands.upper.values)
        header = dict(header, upper_before_first=bands.upper.value_before_first)
        write_table(cdf_out, header, ["knot", "lower", "upper"], side)
    return curves


def cmd_compare(cfg: AnalysisConfig, models, model_a: str, model_b: str, out, workers: int = 1):
    runs_a, runs_b = _model(models, model_a), _model(models, model_b)
    sample_a, sample_b = _sample_for(runs_a, cfg, 0), _sample_for(runs_b, cfg, 1)
    n = min(sample_a.n, sample_b.n)
    grid = KGrid.integers(cfg.k_max or n)
    _warn_extrapolation(grid, n)
    if cfg.cost_scale == "avg":
        # both curves must share budgets; use the pooled average cost
        grid = scale_cost(grid, float(np.mean(runs_a.costs + runs_b.costs)))
    support = cfg.support_bounds()
    a = curve_bands(_bands(sample_a, cfg, workers), grid, cfg.curve_kind, support)
    b = curve_bands(_bands(sample_b, cfg, workers), grid, cfg.curve_kind, support)
    report = compare_curves(a, b, cfg.nontrivial_fraction)
    summary = {
        "overall": report.overall.value,
        "favors": report.favors,
        "fractions": {g.value: f for g, f in report.fractions.items()},
        "nontrivial_fraction": report.nontrivial_fraction,
    }
    header = _receipt("compare", cfg, model_a=model_a, model_b=model_b, report=summary)
    cols = ["k", "k_cost", "a_lower", "a_point", "a_upper", "b_lower", "b_point", "b_upper", "grade"]
    rows = zip(a.k, grid.budgets, a.lower, a.point, a.upper, b.lower, b.point, b.upper,
               [g.value for g in report.grades])
    write_table(out, header, cols, rows)
    return report


def parse_truth(spec: str, cfg: AnalysisConfig, fmt: str = "csv") -> sim.GroundTruth:
    """``uniform[:LO:HI]``, ``beta:A:B`` or ``kde:PATH:MODEL:BANDWIDTH``."""
    name, _, rest = spec.partition(":")
    try:
        if name == "uniform":
            lo, hi = (float(v) for v in rest.split(":")) if rest else (0.0, 1.0)
            return sim.uniform_truth(lo, hi)
        if name == "beta":
            a, b = (float(v) for v in rest.split(":"))
            return sim.beta_truth(a, b)
        if name == "bimodal":
            return sim.kde_truth(sim.bimodal_kde(float(rest) if rest else 0.05))
        if name == "kde":
            path, model, h = rest.rsplit(":", 2)
            scores = _model(ingest(path, fmt), model).scores
            support = cfg.support_bounds()
            kde = sim.Kde(scores, float(h), support or SupportBounds(), reflect=support is not None)
            return sim.kde_truth(kde)
    except (ValueError, TypeError) as exc:
        if isinstance(exc, DataError):
            raise
        raise ConfigError(f"bad truth spec {spec!r}: {exc}") from exc
    raise ConfigError(f"unknown truth {name!r}; use uniform, beta, bimodal or kde")


def cmd_coverage(cfg: AnalysisConfig, out, fmt: str = "csv", workers: int = 1):
    truth = parse_truth(cfg.truth, cfg, fmt)
    target = sim.Target(cfg.target or cfg.curve)
    results = []
    for nominal in cfg.nominal:
        res = sim.coverage_experiment(
            truth, cfg.n, nominal, cfg.reps, cfg.band_method, target, cfg.seed,
            cfg.replicates, workers=workers,
        )
        results.append(res)
    header = _receipt("coverage", cfg, truth_tag=truth.tag)
    cols = ["truth", "target", "method", "n", "nominal", "successes", "trials", "rate",
            "cp_lo", "cp_hi", "nominal_inside"]
    rows = [
        (truth.tag, target.value, cfg.method, cfg.n, r.nominal, r.successes, r.trials, r.rate,
         r.cp_interval.lo, r.cp_interval.hi, r.nominal_inside)
        for r in results
    ]
    write_table(out, header, cols, rows)
    return results


def _support_arg(text: str) -> List[float]:
    try:
        lo, hi = text.split(":")
        return [float(lo), float(hi)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI, got {text!r}") from None


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of config fields; flags override it")
    common.add_argument("--confidence", type=float)
    common.add_argument("--method", choices=[m.value for m in BandMethod])
    common.add_argument("--curve", choices=[c.value for c in CurveKind])
    common.add_argument("--support", type=_support_arg, metavar="LO:HI")
    common.add_argument("--metric", help="accuracy and f1 imply support 0:1")
    common.add_argument("--k-max", dest="k_max", type=int)
    common.add_argument("--cost-scale", dest="cost_scale", choices=["none", "avg"])
    common.add_argument("--seed", type=int)
    common.add_argument("--replicates", type=int)
    common.add_argument("--nontrivial-fraction", dest="nontrivial_fraction", type=float)
    common.add_argument("--subsample", type=int)
    common.add_argument("--format", dest="fmt", choices=["csv", "jsonl"], default="csv",
                        help="input format")
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--workers", type=int, default=1,
                        help="threads for null simulation; never changes results")

    parser = argparse.ArgumentParser(prog="tuningbands", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s ({BACKEND} kernels)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bands", parents=[common], help="tuning curve bands for one model")
    p.add_argument("data")
    p.add_argument("--model", required=True)
    p.add_argument("--cdf-out", dest="cdf_out", help="also write the CDF bands here")

    p = sub.add_parser("compare", parents=[common], help="grade two models' tuning curves")
    p.add_argument("data")
    p.add_argument("--model-a", dest="model_a", required=True)
    p.add_argument("--model-b", dest="model_b", required=True)

    p = sub.add_parser("coverage", parents=[common], help="simulate band coverage")
    p.add_argument("--truth", help="uniform[:LO:HI], beta:A:B, bimodal[:H] or kde:PATH:MODEL:H")
    p.add_argument("--nominal", type=_float_list, help="comma-separated confidence levels")
    p.add_argument("--reps", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--target", choices=[t.value for t in sim.Target])
    return parser


CONFIG_FIELDS = {f.name for f in dataclasses.fields(AnalysisConfig)}


def resolve_config(args: argparse.Namespace) -> AnalysisConfig:
    values: dict = {}
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(loaded) - CONFIG_FIELDS
        if unknown:
            raise ConfigError(f"unknown config field(s): {', '.join(sorted(unknown))}")
        values.update(loaded)
    for name in CONFIG_FIELDS:
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
    try:
        cfg = AnalysisConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.validate()


def _run(args, out) -> None:
    cfg = resolve_config(args)
    if args.workers < 1:
        raise ConfigError("workers must be at least 1")
    if args.command == "bands":
        models = ingest(args.data, args.fmt)
        if args.cdf_out:
            with open(args.cdf_out, "w", encoding="utf-8", newline="") as side:
                cmd_bands(cfg, models, args.model, out, side, args.workers)
        else:
            cmd_bands(cfg, models, args.model, out, None, args.workers)
    elif args.command == "compare":
        cmd_compare(cfg, ingest(args.data, args.fmt), args.model_a, args.model_b, out, args.workers)
    else:
        cmd_coverage(cfg, out, args.fmt, args.workers)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    warnings.simplefilter("default")
    buffer = io.StringIO()
    try:
        _run(args, buffer)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ConvergenceError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(buffer.getvalue())
    else:
        sys.stdout.write(buffer.getvalue())
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
