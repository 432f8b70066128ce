"""Command-line front end.

Subcommands
-----------
``test``      run LRT / Max-D / Min-D on a long-format CSV (``group,value``)
``simulate``  estimate size or power for one JSON cell spec
``grid``      run a list of cells and emit one CSV row per (cell, test, c)

Exit status: 0 success, 2 configuration error, 3 data error,
4 numerical or convergence failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .distributions import Seed
from .errors import (
    BootstrapInstabilityError,
    ConfigError,
    ConvergenceError,
    DegenerateVarianceError,
    IngestionError,
    InsufficientDataError,
    ParameterDomainError,
    TreeAnovaError,
    UnsupportedMomentsError,
)
from .estimation import ConvergenceConfig, GroupedData, SummaryStats, summarize
from .procedures import BootstrapConfig, TestReport, parse_tests, run_tests
from .simulation import (
    STANDARD_C_GRID,
    SimulationResult,
    SimulationSpec,
    estimate_power,
    estimate_size,
    run_grid,
    write_csv,
)

log = logging.getLogger("tree_anova")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


# -- ingestion ----------------------------------------------------------------


def ingest_csv(path: str | Path, control_label: str) -> GroupedData:
    """Read a ``group,value`` table; the control goes first, treatments follow in order of first appearance."""
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise IngestionError(f"cannot open {path}: {exc.strerror}") from None
    groups: dict[str, list[float]] = {}
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise IngestionError("file is empty", row=1)
        if [h.strip().lower() for h in header] != ["group", "value"]:
            raise IngestionError(f"header must be 'group,value', got {','.join(header)!r}", row=1)
        for rownum, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 2:
                raise IngestionError(f"expected 2 fields, got {len(row)}", row=rownum)
            label, raw = row[0].strip(), row[1].strip()
            if not label:
                raise IngestionError("empty group label", row=rownum)
            try:
                value = float(raw)
            except ValueError:
                raise IngestionError(f"value {raw!r} is not numeric", row=rownum) from None
            if not math.isfinite(value):
                raise IngestionError(f"value {raw!r} is not finite", row=rownum)
            groups.setdefault(label, []).append(value)
    if control_label not in groups:
        raise IngestionError(f"control group {control_label!r} not found; groups are {list(groups)}")
    if len(groups) < 2:
        raise IngestionError("need at least one treatment group besides the control (k >= 1 required)")
    for label, values in groups.items():
        if len(values) < 2:
            raise IngestionError(f"group {label!r} has {len(values)} row(s); at least 2 required")
    labels = [control_label] + [g for g in groups if g != control_label]
    return GroupedData(tuple(np.array(groups[g]) for g in labels), tuple(labels))


def export_csv(data: GroupedData, path: str | Path) -> None:
    """Write ``data`` back out in the long format accepted by :func:`ingest_csv`."""
    labels = data.labels or tuple(f"g{i}" for i in range(len(data.groups)))
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["group", "value"])
        for label, values in zip(labels, data.groups):
            writer.writerows([label, repr(float(v))] for v in values)


# -- reports ------------------------------------------------------------------


def _summary_rows(data: GroupedData, stats: SummaryStats) -> list[dict[str, Any]]:
    labels = data.labels or tuple(f"g{i}" for i in range(len(data.groups)))
    return [
        {"group": lab, "n": int(n), "mean": float(m), "biased_var": float(s), "unbiased_var": float(S)}
        for lab, n, m, s, S in zip(labels, stats.n, stats.mean, stats.biased_var, stats.unbiased_var)
    ]


def render_json_report(data: GroupedData, reports: dict[str, TestReport], boot: BootstrapConfig) -> str:
    stats = summarize(data)
    doc = {
        "summary": _summary_rows(data, stats),
        "alpha": boot.alpha,
        "draws": boot.draws,
        "seed": boot.seed.root,
        "reports": {name: rep.to_dict() for name, rep in reports.items()},
    }
    return json.dumps(doc, indent=2) + "\n"


def render_text_report(data: GroupedData, reports: dict[str, TestReport], boot: BootstrapConfig) -> str:
    stats = summarize(data)
    lines = [f"{'group':<12} {'n':>5} {'mean':>14} {'s^2 (1/n)':>14} {'S^2 (1/(n-1))':>14}"]
    for row in _summary_rows(data, stats):
        lines.append(
            f"{row['group']:<12} {row['n']:>5} {row['mean']:>14.7f} {row['biased_var']:>14.7f} {row['unbiased_var']:>14.7f}"
        )
    lines.append("")
    lines.append(f"alpha = {boot.alpha}, bootstrap draws = {boot.draws}, seed = {boot.seed.root}")
    labels = data.labels or tuple(f"g{i}" for i in range(len(data.groups)))
    for name, rep in reports.items():
        lines.append("")
        lines.append(f"[{name}]")
        lines.append(f"  statistic      {rep.statistic:.7f}")
        lines.append(f"  critical value {rep.critical_value:.7f}")
        lines.append(f"  p-value        {rep.p_value:.6f}")
        lines.append(f"  decision       {rep.decision}")
        for w in rep.condition1_warnings:
            lines.append(f"  warning: Condition 1: {w}")
        if rep.bootstrap_nonconverged:
            lines.append(f"  note: {rep.bootstrap_nonconverged} bootstrap fits did not converge")
        if rep.bootstrap_redrawn:
            lines.append(f"  note: {rep.bootstrap_redrawn} degenerate resamples redrawn")
        if rep.per_treatment_d is not None:
            lines.append("  D = " + ", ".join(f"{d:.7f}" for d in rep.per_treatment_d))
        if rep.ci_lower is not None:
            lines.append(f"  simultaneous {1 - rep.alpha:.0%} lower confidence limits:")
            for lab, lo in zip(labels[1:], rep.ci_lower):
                lines.append(f"    mu[{lab}] - mu[{labels[0]}] in ({lo:.7f}, inf)")
    return "\n".join(lines) + "\n"


# -- config -------------------------------------------------------------------


def _load_json(path: str) -> Any:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None


def _cell(obj: Any, overrides: dict[str, Any]) -> SimulationSpec:
    if not isinstance(obj, dict):
        raise ConfigError("each simulation cell must be a JSON object")
    obj = dict(obj)
    if obj.get("c_grid") == "standard":
        obj["c_grid"] = list(STANDARD_C_GRID)
    obj.update({k: v for k, v in overrides.items() if v is not None})
    return SimulationSpec.from_dict(obj)


def _overrides(args) -> dict[str, Any]:
    return {
        "bootstrap": args.bootstrap,
        "seed": args.seed,
        "alpha": args.alpha,
        "replications": args.replications,
        "tests": args.tests,
    }


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_test(args) -> int:
    data = ingest_csv(args.input, args.control)
    boot = BootstrapConfig(args.bootstrap, args.alpha, Seed(args.seed))
    cfg = ConvergenceConfig(args.tol_exponent)
    reports = run_tests(data, boot, cfg, parse_tests(args.tests))
    render = render_json_report if args.format == "json" else render_text_report
    _write(render(data, reports, boot), args.out)
    return EXIT_OK


def _simulation_doc(results: Sequence[SimulationResult]) -> str:
    doc = [
        {
            "spec": r.spec.to_dict(),
            "replications_failed": r.replications_failed,
            "rows": [
                {"c": row.c, "test": row.test, "rejections": row.rejections, "valid": row.valid,
                 "rejection_rate": row.rejection_rate, "mc_se": row.mc_se}
                for row in r.rows
            ],
        }
        for r in results
    ]
    return json.dumps(doc, indent=2) + "\n"


def cmd_simulate(args) -> int:
    spec = _cell(_load_json(args.config), _overrides(args))
    if spec.is_null and spec.c_grid is None:
        result = estimate_size(spec, args.workers)
    else:
        result = estimate_power(spec, args.workers)
    log.info("simulation finished in %.1f s (%d failed replications)", result.elapsed, result.replications_failed)
    _write(_simulation_doc([result]) if args.format == "json" else write_csv([result]), args.out)
    return EXIT_OK


def cmd_grid(args) -> int:
    doc = _load_json(args.config)
    defaults: dict[str, Any] = {}
    if isinstance(doc, dict):
        defaults = dict(doc.get("defaults", {}))
        cells = doc.get("cells")
    else:
        cells = doc
    if not isinstance(cells, list) or not cells:
        raise ConfigError("grid config must be a non-empty list of cells or {'cells': [...]}")
    specs = []
    for i, cell in enumerate(cells):
        try:
            specs.append(_cell({**defaults, **cell} if isinstance(cell, dict) else cell, _overrides(args)))
        except ConfigError as exc:
            raise ConfigError(f"cell {i}: {exc}") from None
    grid = run_grid(specs, args.workers)
    ok = grid.ok()
    _write(_simulation_doc(ok) if args.format == "json" else write_csv(ok), args.out)
    failed = [(i, e) for i, e in enumerate(grid.errors) if e is not None]
    for i, err in failed:
        print(f"error: cell {i}: {err}", file=sys.stderr)
    return EXIT_NUMERIC if failed else EXIT_OK


# -- entry point --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tree-anova",
        description="Bootstrap tests of equal means against tree-ordered alternatives (heteroscedastic one-way ANOVA).",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("test", help="test a dataset")
    t.add_argument("--input", required=True, help="long-format CSV with header group,value")
    t.add_argument("--control", required=True, help="label of the control group")
    t.add_argument("--alpha", type=float, default=0.05)
    t.add_argument("--bootstrap", type=int, default=5000, metavar="M")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--tests", default="lrt,maxd,mind")
    t.add_argument("--tol-exponent", type=int, default=6, metavar="P", help="stop MLE iterations at 10^-P")
    t.add_argument("--format", choices=("text", "json"), default="text")
    t.add_argument("--out")
    t.set_defaults(func=cmd_test)

    for name, helptext, func in (
        ("simulate", "estimate size or power for one cell", cmd_simulate),
        ("grid", "run a list of cells", cmd_grid),
    ):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--config", required=True, help="JSON cell spec" if name == "simulate" else "JSON list of cells")
        s.add_argument("--bootstrap", type=int, default=None, metavar="M", help="bootstrap draws (default 1000)")
        s.add_argument("--seed", type=int, default=None)
        s.add_argument("--alpha", type=float, default=None)
        s.add_argument("--replications", type=int, default=None, metavar="P")
        s.add_argument("--tests", default=None)
        s.add_argument("--workers", type=int, default=None, help="process pool size (capped by TREE_ANOVA_THREADS)")
        s.add_argument("--format", choices=("csv", "json"), default="csv")
        s.add_argument("--out")
        s.set_defaults(func=func)
    return parser


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, (IngestionError, InsufficientDataError)):
        return EXIT_DATA
    if isinstance(exc, (ConvergenceError, DegenerateVarianceError, BootstrapInstabilityError)):
        return EXIT_NUMERIC
    if isinstance(exc, (ConfigError, ParameterDomainError, UnsupportedMomentsError)):
        return EXIT_CONFIG
    return EXIT_NUMERIC


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except TreeAnovaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
