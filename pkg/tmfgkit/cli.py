#!/usr/bin/env python3
"""Command-line entry point: filter, gen, bench, compare, validate and replay.

Exit codes: 0 success, 1 validation failure, 2 input error.
"""

from __future__ import annotations

import argparse
import functools
import json
import logging
import math
import string
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import markdown as markdown_lib
import numpy as np

from . import __version__
from .graph import FilterResult
from .pmfg import build_pmfg
from .scores import GaussianModel, ScoreFunction, WeightOracle
from .synth import (
    MatrixFormatError,
    MatrixSpec,
    derive_seed,
    factor_series,
    generate,
    make_rng,
    matrix_oracle,
    read_matrix,
    read_timeseries,
    sample_windows,
    write_matrix_csv,
)
from .tmfg import METHOD_NAMES, SEED_STRATEGIES, BuildConfig, build
from .utils import (
    ROOT_DIR,
    default_workers,
    file_digest,
    is_remote,
    load_default_env,
    resolve_output_path,
    setup_logging,
    text_digest,
)
from .validate import validate_result

logger = logging.getLogger("tmfgkit.cli")

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_INPUT = 2

METHODS = tuple(METHOD_NAMES) + ("pmfg",)
FORMATS = ("json", "edge-tsv", "dot")
TEMPLATE_PATH = ROOT_DIR / "templates" / "report-template.md"
DEFAULT_COMPARE_DISTRIBUTIONS = [
    "uniform",
    "beta(3,0.5)",
    "beta(0.5,3)",
    "pareto(1)",
    "pareto(2)",
    "factor(20)",
    "factor(50)",
    "factor(100)",
]
MIN_BENCH_SIZE = 50
MIN_BENCH_REPS = 3


class InputError(ValueError):
    """Bad command-line input (exit code 2)."""


@dataclass
class RunManifest:
    command: str
    argv: List[str]
    config: Dict[str, Any]
    seeds: Dict[str, Any] = field(default_factory=dict)
    inputs: Dict[str, str] = field(default_factory=dict)
    tool_version: str = __version__
    elapsed: Optional[Dict[str, float]] = None

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        if data["elapsed"] is None:
            del data["elapsed"]
        return data


def input_digest(path: str) -> str:
    if is_remote(path):
        return text_digest(path)
    return file_digest(Path(path).expanduser())


def write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def dump_json(payload: Dict[str, Any]) -> str:
    return json.dumps(payload, indent=2, ensure_ascii=False) + "\n"


# ---------------------------------------------------------------- building


def run_method(
    method: str,
    oracle: WeightOracle,
    score: Optional[ScoreFunction] = None,
    *,
    seed_strategy: str = "greedy-expansion",
    t1_sweep_cap: int = 10,
) -> FilterResult:
    if method == "pmfg":
        return build_pmfg(oracle)
    if method not in METHOD_NAMES:
        raise InputError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")
    cfg = BuildConfig(
        variant=METHOD_NAMES[method],
        score=score,
        seed_strategy=seed_strategy,
        t1_sweep_cap=t1_sweep_cap,
    )
    return build(oracle, cfg)


def load_filter_input(
    path: str, input_kind: str, transform: Optional[str], score_kind: str
) -> Tuple[WeightOracle, Optional[ScoreFunction], Optional[List[str]]]:
    """Weight oracle, score function and vertex names for ``filter``.

    With the entropy score a matrix input is read as a covariance matrix and the
    weights are its squared correlations; a time-series input yields the sample
    covariance.
    """
    if input_kind == "timeseries":
        names, data = read_timeseries(path)
        oracle = WeightOracle.from_series(data, transform or "squared", metadata={"names": names})
        score = ScoreFunction.gaussian_entropy(GaussianModel.from_series(data)) if score_kind == "entropy" else None
        return oracle, score, names

    matrix, names = read_matrix(path)
    if score_kind == "entropy":
        model = GaussianModel(matrix)
        return model.weight_oracle(transform or "squared"), ScoreFunction.gaussian_entropy(model), names
    return matrix_oracle(matrix, transform or "raw", metadata={"names": names}), None, names


# ---------------------------------------------------------------- writers


def format_tsv(result: FilterResult, manifest: RunManifest) -> str:
    lines = [f"# manifest: {json.dumps(manifest.to_dict(), sort_keys=True)}", "i\tj\tweight"]
    lines.extend(f"{i}\t{j}\t{wt:.17g}" for i, j, wt in result.edges)
    return "\n".join(lines) + "\n"


def _dot_quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def format_dot(result: FilterResult, manifest: RunManifest) -> str:
    lines = [f"// manifest: {json.dumps(manifest.to_dict(), sort_keys=True)}", "graph filtered {"]
    for v in result.vertices:
        label = result.names[v] if result.names and v < len(result.names) else str(v)
        lines.append(f"  {v} [label={_dot_quote(label)}];")
    for i, j, wt in result.edges:
        lines.append(f"  {i} -- {j} [label={_dot_quote(format(wt, '.17g'))}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def format_result(result: FilterResult, manifest: RunManifest, fmt: str, include_timings: bool) -> str:
    if fmt == "json":
        payload = result.to_dict(include_timings=include_timings)
        payload["manifest"] = manifest.to_dict()
        return dump_json(payload)
    if fmt == "edge-tsv":
        return format_tsv(result, manifest)
    if fmt == "dot":
        return format_dot(result, manifest)
    raise InputError(f"unknown format {fmt!r}")


def read_manifest(path: Path) -> Dict[str, Any]:
    """Manifest embedded in a JSON, TSV or DOT output, or a bare manifest file."""
    text = path.read_text(encoding="utf-8")
    for prefix in ("# manifest: ", "// manifest: "):
        if text.startswith(prefix):
            return json.loads(text.splitlines()[0][len(prefix):])
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} holds no run manifest: {exc}") from exc
    manifest = data.get("manifest", data)
    if "argv" not in manifest:
        raise InputError(f"{path} holds no run manifest")
    return manifest


def render_report(title: str, command: str, configuration: Dict[str, Any], table: str, notes: str = "") -> str:
    config_lines = "\n".join(f"- **{key}**: `{value}`" for key, value in configuration.items())
    if TEMPLATE_PATH.is_file():
        template = string.Template(TEMPLATE_PATH.read_text(encoding="utf-8"))
    else:
        template = string.Template("# $title\n\n$configuration\n\n$table\n\n$notes\n")
    return template.safe_substitute(
        title=title,
        version=__version__,
        command=command,
        configuration=config_lines,
        table=table,
        notes=notes or "None.",
    )


def write_report(markdown_text: str, path: Path, html: bool) -> List[Path]:
    written = [write_text(path, markdown_text)]
    if html:
        body = markdown_lib.markdown(markdown_text, extensions=["extra", "sane_lists", "toc"])
        written.append(write_text(path.with_suffix(".html"), f"<!DOCTYPE html>\n<html><body>\n{body}\n</body></html>\n"))
    return written


def markdown_table(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines.extend("| " + " | ".join(str(cell) for cell in row) + " |" for row in rows)
    return "\n".join(lines)


# ---------------------------------------------------------------- commands


def cmd_filter(args: argparse.Namespace, argv: Sequence[str]) -> int:
    oracle, score, names = load_filter_input(args.input, args.input_kind, args.transform, args.score)
    if args.score == "entropy" and args.method == "pmfg":
        logger.info("pmfg ignores the score function and ranks edges by weight")
    started = time.perf_counter()
    result = run_method(args.method, oracle, score, seed_strategy=args.seed_strategy, t1_sweep_cap=args.t1_sweep_cap)
    elapsed = time.perf_counter() - started
    result.names = names

    manifest = RunManifest(
        command="filter",
        argv=list(argv),
        config={
            "method": args.method,
            "score": args.score,
            "transform": oracle.transform,
            "input_kind": args.input_kind,
            "format": args.format,
            "seed_strategy": args.seed_strategy,
            "t1_sweep_cap": args.t1_sweep_cap,
        },
        inputs={args.input: input_digest(args.input)},
        elapsed={"build": elapsed} if args.record_timings else None,
    )
    text = format_result(result, manifest, args.format, args.record_timings)
    if args.output:
        path = write_text(resolve_output_path(args.output), text)
        print(f"✅ {args.method}: {len(result.edges)} edges, total weight {result.total_weight:.6g} → {path}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_gen(args: argparse.Namespace, argv: Sequence[str]) -> int:
    spec = MatrixSpec.parse(args.distribution, p=args.p, seed=args.seed, transform=args.transform)
    if spec.family.startswith("file-"):
        raise InputError("gen only samples synthetic families")
    output = resolve_output_path(args.output)
    if args.kind == "timeseries":
        if spec.family != "factor":
            raise InputError("--kind timeseries needs a factor(k) distribution")
        series = factor_series(spec.p, spec.n_factors, spec.q, make_rng(spec.seed))
        write_matrix_csv(series, output, names=[f"x{k}" for k in range(spec.p)])
    else:
        write_matrix_csv(generate(spec).dense(), output)
    manifest = RunManifest(
        command="gen",
        argv=list(argv),
        config={"distribution": spec.to_dict(), "kind": args.kind},
        seeds={"seed": spec.seed, "rng": "numpy.PCG64"},
        inputs={},
    )
    sidecar = output.with_name(output.stem + ".manifest.json")
    write_text(sidecar, dump_json(manifest.to_dict()))
    print(f"✅ {spec.label} p={spec.p} seed={spec.seed} → {output} (manifest {sidecar.name})")
    return EXIT_OK


def _fit(sizes: np.ndarray, times: np.ndarray, cubic: bool) -> Dict[str, float]:
    """Two-parameter polynomial fit plus the log-log slope."""
    if cubic:
        design = np.column_stack([sizes**3, sizes**2])
        names = ("a_p3", "b_p2")
    else:
        design = np.column_stack([sizes**2, sizes])
        names = ("a_p2", "b_p")
    coef, *_ = np.linalg.lstsq(design, times, rcond=None)
    fit = {names[0]: float(coef[0]), names[1]: float(coef[1])}
    positive = times > 0
    if positive.sum() >= 2:
        fit["loglog_slope"] = float(np.polyfit(np.log(sizes[positive]), np.log(times[positive]), 1)[0])
    return fit


def _map_tasks(fn: Callable[[Any], Dict[str, Any]], items: Sequence[Any], workers: int) -> List[Dict[str, Any]]:
    """Results of ``fn`` over ``items`` in input order, on ``workers`` processes."""
    if workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def _bench_cell(job: Tuple[MatrixSpec, str], reps: int) -> Dict[str, Any]:
    spec, method = job
    oracle = generate(spec)
    timings = [run_method(method, oracle).elapsed for _ in range(reps)]
    median = float(np.median(timings))
    logger.info("%s p=%d median %.4fs over %d reps", method, spec.p, median, reps)
    return {"method": method, "p": spec.p, "median_seconds": median, "timings": timings}


def cmd_bench(args: argparse.Namespace, argv: Sequence[str]) -> int:
    small = [p for p in args.sizes if p < MIN_BENCH_SIZE]
    if small:
        raise InputError(f"bench sizes must be >= {MIN_BENCH_SIZE}, got {small}")
    if args.reps < MIN_BENCH_REPS:
        raise InputError(f"bench needs at least {MIN_BENCH_REPS} reps, got {args.reps}")

    cells = [
        MatrixSpec.parse(args.distribution, p=p, seed=derive_seed(args.seed, p)) for p in args.sizes
    ]
    jobs = [(spec, method) for spec in cells for method in args.methods]
    workers = args.workers or default_workers()
    rows = _map_tasks(functools.partial(_bench_cell, reps=args.reps), jobs, workers)

    fits: Dict[str, Dict[str, float]] = {}
    for method in args.methods:
        own = [r for r in rows if r["method"] == method]
        sizes = np.array([r["p"] for r in own], dtype=np.float64)
        times = np.array([r["median_seconds"] for r in own], dtype=np.float64)
        if len(own) >= 2:
            fits[method] = _fit(sizes, times, cubic=(method == "pmfg"))

    manifest = RunManifest(
        command="bench",
        argv=list(argv),
        config={"methods": args.methods, "sizes": args.sizes, "reps": args.reps, "distribution": args.distribution},
        seeds={"seed": args.seed, "rng": "numpy.PCG64"},
    )
    payload = {"format": "tmfgkit.bench/1", "rows": rows, "fits": fits, "manifest": manifest.to_dict()}
    output = resolve_output_path(args.output)
    write_text(output, dump_json(payload))

    table = markdown_table(
        ["method", "p", "median (s)"],
        [(r["method"], r["p"], f"{r['median_seconds']:.4g}") for r in rows],
    )
    fit_lines = "\n".join(
        f"- **{method}**: " + ", ".join(f"{k} = {v:.4g}" for k, v in fit.items()) for method, fit in fits.items()
    )
    report = render_report("Execution times", " ".join(argv), manifest.config, table, fit_lines)
    written = write_report(report, output.with_suffix(".md"), args.html)
    for method, fit in fits.items():
        print(f"✅ {method}: " + ", ".join(f"{k}={v:.4g}" for k, v in fit.items()))
    print(f"✅ Bench results → {output} ({', '.join(p.name for p in written)})")
    return EXIT_OK


@dataclass
class _Task:
    label: str
    p: int
    sample: int
    spec: Optional[MatrixSpec] = None
    window: Optional[Tuple[int, int]] = None


def _run_task(task: _Task, methods: Sequence[str], series: Optional[np.ndarray]) -> Dict[str, Any]:
    if task.window is not None:
        start, length = task.window
        oracle = WeightOracle.from_series(series[start:start + length], "squared", lazy=False)  # type: ignore[index]
    else:
        oracle = generate(task.spec)  # type: ignore[arg-type]
    totals: Dict[str, float] = {}
    times: Dict[str, float] = {}
    for method in methods:
        result = run_method(method, oracle)
        totals[method] = result.total_weight
        times[method] = result.elapsed
    return {"distribution": task.label, "p": task.p, "sample": task.sample, "totals": totals, "seconds": times}


def cmd_compare(args: argparse.Namespace, argv: Sequence[str]) -> int:
    methods = list(dict.fromkeys(args.methods))
    if "pmfg" not in methods:
        methods.append("pmfg")
    sizes = args.sizes or [args.p]
    workers = args.workers or default_workers()

    tasks: List[_Task] = []
    series: Optional[np.ndarray] = None
    seeds: Dict[str, Any] = {"seed": args.seed, "rng": "numpy.PCG64"}
    inputs: Dict[str, str] = {}
    if args.timeseries:
        _, series = read_timeseries(args.timeseries)
        inputs[args.timeseries] = input_digest(args.timeseries)
        starts = sample_windows(series.shape[0], args.windows, args.window_length, args.seed)
        seeds["window_starts"] = starts
        label = f"windows:{Path(args.timeseries).name}"
        tasks = [_Task(label, series.shape[1], k, window=(s, args.window_length)) for k, s in enumerate(starts)]
    else:
        distributions = args.distribution or DEFAULT_COMPARE_DISTRIBUTIONS
        for d_index, text in enumerate(distributions):
            for p in sizes:
                for sample in range(args.samples):
                    spec = MatrixSpec.parse(text, p=p, seed=derive_seed(args.seed, d_index, p, sample))
                    tasks.append(_Task(spec.label, p, sample, spec=spec))

    logger.info("Comparing %s over %d samples with %d workers", ", ".join(methods), len(tasks), workers)
    samples = _map_tasks(functools.partial(_run_task, methods=methods, series=series), tasks, workers)

    groups: Dict[Tuple[str, int], List[Dict[str, Any]]] = {}
    for entry in samples:
        groups.setdefault((entry["distribution"], entry["p"]), []).append(entry)
    summary: List[Dict[str, Any]] = []
    for (label, p), entries in groups.items():
        row: Dict[str, Any] = {"distribution": label, "p": p, "samples": len(entries), "ratios": {}, "time_ratios": {}}
        for method in methods:
            ratios = [e["totals"][method] / e["totals"]["pmfg"] for e in entries if e["totals"]["pmfg"] > 0]
            row["ratios"][method] = float(np.mean(ratios)) if ratios else math.nan
            spans = [e["seconds"][method] / e["seconds"]["pmfg"] for e in entries if e["seconds"]["pmfg"] > 0]
            row["time_ratios"][method] = float(np.mean(spans)) if spans else math.nan
        summary.append(row)

    manifest = RunManifest(
        command="compare",
        argv=list(argv),
        config={
            "methods": methods,
            "distributions": args.distribution or ([] if args.timeseries else DEFAULT_COMPARE_DISTRIBUTIONS),
            "sizes": sizes,
            "samples": args.samples,
            "windows": args.windows if args.timeseries else None,
            "window_length": args.window_length if args.timeseries else None,
        },
        seeds=seeds,
        inputs=inputs,
    )
    payload = {"format": "tmfgkit.compare/1", "summary": summary, "samples": samples, "manifest": manifest.to_dict()}
    output = resolve_output_path(args.output)
    write_text(output, dump_json(payload))

    header = ["distribution", "p"] + [f"{m}/pmfg" for m in methods if m != "pmfg"]
    header += [f"{m} time/pmfg time" for m in methods if m != "pmfg"]
    rows = []
    for row in summary:
        cells = [row["distribution"], row["p"]]
        cells += [f"{100.0 * row['ratios'][m]:.2f}%" for m in methods if m != "pmfg"]
        cells += [f"{100.0 * row['time_ratios'][m]:.2f}%" for m in methods if m != "pmfg"]
        rows.append(cells)
    table = markdown_table(header, rows)
    report = render_report(
        "Average relative performances",
        " ".join(argv),
        manifest.config,
        table,
        "Ratios are means over samples of the total retained weight relative to PMFG.",
    )
    written = write_report(report, output.with_suffix(".md"), args.html)
    print(table)
    print(f"✅ Compare results → {output} ({', '.join(p.name for p in written)})")
    return EXIT_OK


def cmd_validate(args: argparse.Namespace, argv: Sequence[str]) -> int:
    source = Path(args.input).expanduser()
    if not source.is_file():
        raise FileNotFoundError(f"Result file not found: {source}")
    try:
        data = json.loads(source.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed result file {source}: {exc}") from exc
    if not isinstance(data, dict):
        raise InputError(f"malformed result file {source}: expected a JSON object")
    result = FilterResult.from_dict(data)
    oracle = None
    if args.matrix:
        matrix, _ = read_matrix(args.matrix)
        oracle = matrix_oracle(matrix, args.transform or "raw")
    report = validate_result(result, oracle)
    for check in report.checks:
        if check.passed:
            print(f"✅ {check.name}")
        else:
            print(f"❌ {check.name}: {check.detail}")
    if not result.chordal:
        print("⚠️  chordality: skipped (not claimed)")
    if args.report:
        write_text(resolve_output_path(args.report), dump_json(report.to_dict()))
    return EXIT_OK if report.passed else EXIT_INVALID


def cmd_replay(args: argparse.Namespace, argv: Sequence[str]) -> int:
    manifest = read_manifest(Path(args.input).expanduser())
    recorded = manifest.get("tool_version")
    if recorded != __version__:
        print(f"⚠️  manifest written by tmfgkit {recorded}, replaying with {__version__}")
    replay_argv = [str(a) for a in manifest["argv"]]
    if replay_argv and replay_argv[0] == "replay":
        raise InputError("refusing to replay a replay")
    print(f"🔄 Replaying: {' '.join(replay_argv)}")
    return main(replay_argv)


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tmfgkit", description="Filter dense weight matrices into planar networks.")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_filter = sub.add_parser("filter", help="Filter one matrix or time-series file")
    p_filter.add_argument("input", help="CSV matrix or time series (path or http(s) URL)")
    p_filter.add_argument("--method", choices=METHODS, default="tmfg")
    p_filter.add_argument("--score", choices=("sum", "entropy"), default="sum")
    p_filter.add_argument("--transform", choices=("squared", "absolute", "raw"), default=None)
    p_filter.add_argument("--input-kind", choices=("matrix", "timeseries"), default="matrix")
    p_filter.add_argument("--output", "-o", help="Output file (default: stdout)")
    p_filter.add_argument("--format", choices=FORMATS, default="json")
    p_filter.add_argument("--seed-strategy", choices=SEED_STRATEGIES, default="greedy-expansion")
    p_filter.add_argument("--t1-sweep-cap", type=int, default=10)
    p_filter.add_argument(
        "--record-timings",
        action="store_true",
        help="Store elapsed times in the output (outputs then differ between runs)",
    )
    p_filter.set_defaults(handler=cmd_filter)

    p_gen = sub.add_parser("gen", help="Sample a synthetic weight matrix")
    p_gen.add_argument("distribution", help="uniform | beta(a,b) | pareto(x) | factor(k[,q])")
    p_gen.add_argument("--p", type=int, required=True)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--transform", choices=("squared", "absolute", "raw"), default=None)
    p_gen.add_argument("--kind", choices=("matrix", "timeseries"), default="matrix")
    p_gen.add_argument("--output", "-o", required=True)
    p_gen.set_defaults(handler=cmd_gen)

    p_bench = sub.add_parser("bench", help="Time builds over growing sizes and fit the scaling")
    p_bench.add_argument("--methods", nargs="+", choices=METHODS, default=["tmfg", "pmfg"])
    p_bench.add_argument("--sizes", nargs="+", type=int, default=[100, 200, 400])
    p_bench.add_argument("--reps", type=int, default=3)
    p_bench.add_argument("--distribution", default="uniform")
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument(
        "--workers",
        type=int,
        default=None,
        help="Concurrent (size, method) cells (default: TMFG_WORKERS or 1); timings then share cores",
    )
    p_bench.add_argument("--output", "-o", default="bench.json")
    p_bench.add_argument("--html", action="store_true", help="Also render the report to HTML")
    p_bench.set_defaults(handler=cmd_bench)

    p_compare = sub.add_parser("compare", help="Average total-weight ratios against PMFG")
    p_compare.add_argument("--distribution", action="append", help="Repeat for several families")
    p_compare.add_argument("--methods", nargs="+", choices=METHODS, default=list(METHODS))
    p_compare.add_argument("--samples", type=int, default=10)
    p_compare.add_argument("--p", type=int, default=100)
    p_compare.add_argument("--sizes", nargs="+", type=int, help="Sweep several p for each distribution")
    p_compare.add_argument("--seed", type=int, default=0)
    p_compare.add_argument("--workers", type=int, default=None, help="Concurrent samples (default: TMFG_WORKERS or 1)")
    p_compare.add_argument("--timeseries", help="Sample windows of this time-series file instead of synthetic matrices")
    p_compare.add_argument("--windows", type=int, default=100)
    p_compare.add_argument("--window-length", type=int, default=1000)
    p_compare.add_argument("--output", "-o", default="compare.json")
    p_compare.add_argument("--html", action="store_true", help="Also render the report to HTML")
    p_compare.set_defaults(handler=cmd_compare)

    p_validate = sub.add_parser("validate", help="Check a filter result file")
    p_validate.add_argument("input", help="JSON written by filter")
    p_validate.add_argument("--matrix", help="Original matrix, to check stored weights")
    p_validate.add_argument("--transform", choices=("squared", "absolute", "raw"), default=None)
    p_validate.add_argument("--report", help="Write the check list as JSON")
    p_validate.set_defaults(handler=cmd_validate)

    p_replay = sub.add_parser("replay", help="Re-run the command recorded in an output's manifest")
    p_replay.add_argument("input", help="Output file or manifest")
    p_replay.set_defaults(handler=cmd_replay)
    return parser


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    return build_parser().parse_args(argv)


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    load_default_env()
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_INPUT
    setup_logging(args.verbose)
    if args.verbose:
        argv = [a for a in argv if a not in ("-v", "--verbose")]
    try:
        return args.handler(args, argv)
    except (ValueError, FileNotFoundError, RuntimeError) as exc:
        if isinstance(exc, MatrixFormatError):
            print(f"❌ Invalid input: {exc}", file=sys.stderr)
        else:
            print(f"❌ {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
