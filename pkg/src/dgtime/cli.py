"""Command-line front end: convergence studies, system validation, projection demo.

Subcommands
-----------
study     run a convergence study and emit CSV or Markdown tables
validate  check the structural assumptions of a problem or system file
project   print the slab projection of a named data preset

Exit codes: 0 success; 1 validation failures; 2 unusable configuration or
input files; 3 solver failure.  Table output is deterministic: identical
configurations produce byte-identical files.  Values are printed with 6
significant digits; EOC cells read "at-floor" when the error sits at the
floating-point floor, and unselected-norm cells stay empty.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass
from typing import Optional, Sequence

from .analysis import EOCTable, StudyRow, run_study
from .dgsolver import DataError, SlabSolveError
from .projection import ProjectionSpec, project_broken
from .systems import PRESET_FUNCTIONS, load_system, validate_system
from .timecore import build_uniform_mesh, gauss_legendre

__all__ = ["main", "StudyConfig", "format_csv", "format_markdown", "parse_table_csv"]

CSV_COLUMNS = ("N", "k", "err_energy", "eoc_energy", "err_nodal", "eoc_nodal",
               "err_p", "eoc_p")


# ---------------------------------------------------------------------------
# study configuration

@dataclass(frozen=True)
class StudyConfig:
    problem: str
    q: int = 2
    Ns: tuple = (8, 16, 32, 64)
    projection: str = "on"
    norms: tuple = ("energy", "nodal")
    output: Optional[str] = None
    format: str = "md"
    seed: int = 0  # reserved for randomized validation checks

    def __post_init__(self):
        if self.q < 1 or self.q > 6:
            raise ValueError("q must be in 1..6")
        if len(self.Ns) == 0:
            raise ValueError("Ns must not be empty")
        if not all(self.Ns[i] < self.Ns[i + 1] for i in range(len(self.Ns) - 1)):
            raise ValueError("Ns must be strictly increasing")
        if self.projection not in ("on", "off", "both"):
            raise ValueError("projection must be on, off, or both")
        if self.format not in ("csv", "md"):
            raise ValueError("format must be csv or md")
        bad = set(self.norms) - {"energy", "nodal", "multiplier"}
        if bad:
            raise ValueError(f"unknown norms: {sorted(bad)}")


def _parse_int_list(text: str) -> tuple:
    items = [s for s in text.split(",") if s.strip()]
    if not items:
        raise ValueError("empty list")
    return tuple(int(s) for s in items)


def _study_config(args) -> StudyConfig:
    fields: dict = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        for key in ("problem", "q", "projection", "format", "output", "seed"):
            if key in raw:
                fields[key] = raw[key]
        if "Ns" in raw:
            fields["Ns"] = tuple(int(n) for n in raw["Ns"])
        if "norms" in raw:
            fields["norms"] = tuple(raw["norms"])
    # command-line flags override file values
    if args.problem is not None:
        fields["problem"] = args.problem
    if args.q is not None:
        fields["q"] = args.q
    if args.Ns is not None:
        fields["Ns"] = _parse_int_list(args.Ns)
    if args.projection is not None:
        fields["projection"] = args.projection
    if args.norms is not None:
        fields["norms"] = tuple(s.strip() for s in args.norms.split(",") if s.strip())
    if args.output is not None:
        fields["output"] = args.output
    if args.format is not None:
        fields["format"] = args.format
    if args.seed is not None:
        fields["seed"] = args.seed
    if "problem" not in fields:
        raise ValueError("a problem must be given (--problem or config file)")
    return StudyConfig(**fields)


# ---------------------------------------------------------------------------
# table formatting

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float) and math.isnan(value):
        return "at-floor"
    if isinstance(value, int):
        return str(value)
    return f"{value:.6g}"


def _parse_cell(text: str):
    if text == "":
        return None
    if text == "at-floor":
        return math.nan
    return float(text)


def format_csv(table: EOCTable) -> str:
    """Fixed-column CSV (comma separated, LF line endings)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in table.rows:
        writer.writerow([_fmt(getattr(r, col)) for col in CSV_COLUMNS])
    return buf.getvalue()


def parse_table_csv(text: str, problem: str = "", q: int = 0,
                    use_projection: bool = True) -> EOCTable:
    """Inverse of format_csv (table metadata is not stored in the file)."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if tuple(header) != CSV_COLUMNS:
        raise ValueError(f"unexpected CSV header {header}")
    rows = []
    for rec in reader:
        vals = [_parse_cell(cell) for cell in rec]
        rows.append(StudyRow(N=int(vals[0]), k=vals[1], err_energy=vals[2],
                             eoc_energy=vals[3], err_nodal=vals[4], eoc_nodal=vals[5],
                             err_p=vals[6], eoc_p=vals[7]))
    return EOCTable(problem=problem, q=q, use_projection=use_projection,
                    rows=tuple(rows))


def format_markdown(table: EOCTable) -> str:
    """Markdown pipe table with one error/EOC column pair per selected norm."""
    cols = [("N", "N"), ("k", "k")]
    first = table.rows[0]
    if first.err_energy is not None:
        cols += [("err_energy", "err_energy"), ("eoc_energy", "EOC")]
    if first.err_nodal is not None:
        cols += [("err_nodal", "err_nodal"), ("eoc_nodal", "EOC")]
    if first.err_p is not None:
        cols += [("err_p", "err_p"), ("eoc_p", "EOC")]
    proj = "on" if table.use_projection else "off"
    lines = [f"### {table.problem}, q = {table.q}, projection {proj}", ""]
    lines.append("| " + " | ".join(label for _, label in cols) + " |")
    lines.append("|" + "|".join("---:" for _ in cols) + "|")
    for r in table.rows:
        lines.append("| " + " | ".join(_fmt(getattr(r, field)) for field, _ in cols) + " |")
    lines.append("")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# subcommands

def _resolve_problem_ref(ref: str):
    if ref in ("heat1d", "stokes3"):
        return ref
    return load_system(ref)


def _cmd_study(args) -> int:
    try:
        config = _study_config(args)
        problem = _resolve_problem_ref(config.problem)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    variants = {"on": [True], "off": [False], "both": [True, False]}[config.projection]
    tables = []
    for use_projection in variants:
        try:
            tables.append(run_study(problem, config.q, config.Ns,
                                    use_projection=use_projection, norms=config.norms))
        except (SlabSolveError, DataError) as exc:
            print(f"error: solver failure (N sweep aborted): {exc}", file=sys.stderr)
            return 3
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
    render = format_csv if config.format == "csv" else format_markdown
    if config.output is None:
        for table in tables:
            if config.format == "csv" and len(tables) > 1:
                proj = "on" if table.use_projection else "off"
                print(f"# projection {proj}")
            print(render(table), end="")
            if config.format == "csv":
                print()
        return 0
    for table in tables:
        path = config.output
        if len(tables) > 1:
            stem, dot, ext = path.rpartition(".")
            suffix = "on" if table.use_projection else "off"
            path = f"{stem}_projection_{suffix}.{ext}" if dot else f"{path}_projection_{suffix}"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(render(table))
        print(f"wrote {path}")
    return 0


def _cmd_validate(args) -> int:
    try:
        ref = _resolve_problem_ref(args.problem)
        if isinstance(ref, str):
            from .analysis import _resolve_problem
            system = _resolve_problem(ref, n_elements=4)
        else:
            system = ref
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    report = validate_system(system)
    for check in report.checks:
        status = "PASS" if check.ok else "FAIL"
        print(f"[{status}] {check.name} — {check.detail}")
    for note in report.warnings:
        print(f"[warn] {note}")
    return 0 if report.passed else 1


def _cmd_project(args) -> int:
    fn = PRESET_FUNCTIONS.get(args.preset)
    if fn is None:
        print(f"error: unknown preset {args.preset!r} "
              f"(known: {', '.join(sorted(PRESET_FUNCTIONS))})", file=sys.stderr)
        return 2
    try:
        mesh = build_uniform_mesh(args.T, args.N)
        spec = ProjectionSpec(args.q, gauss_legendre(max(args.q + 2, 4)))
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    F = project_broken(fn, mesh, 1, spec)
    print(f"projection of preset '{args.preset}' with q = {args.q} "
          f"on {mesh.N} slab(s), T = {mesh.T:g}")
    for n in range(mesh.N):
        s = F.slab(n)
        coeffs = " ".join(f"{c:.6g}" for c in s.coeffs[:, 0])
        print(f"slab {n + 1}: ({s.a:g}, {s.b:g}]  modal coeffs: {coeffs}  "
              f"value(t_n): {s.value_end()[0]:.6g}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dgtime",
        description="DG time stepping for constrained parabolic systems.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_study = sub.add_parser("study", help="run a convergence study")
    p_study.add_argument("--problem", choices=None, default=None,
                         help="heat1d, stokes3, or a system JSON file")
    p_study.add_argument("--q", type=int, default=None, help="temporal dofs per slab (1..6)")
    p_study.add_argument("--Ns", default=None, help="comma-separated slab counts, increasing")
    p_study.add_argument("--projection", choices=("on", "off", "both"), default=None)
    p_study.add_argument("--norms", default=None,
                         help="comma-separated subset of energy,nodal,multiplier")
    p_study.add_argument("--format", choices=("csv", "md"), default=None)
    p_study.add_argument("--output", default=None, help="output file (stdout if omitted)")
    p_study.add_argument("--config", default=None, help="JSON config file; flags override")
    p_study.add_argument("--seed", type=int, default=None)
    p_study.set_defaults(handler=_cmd_study)

    p_val = sub.add_parser("validate", help="validate a problem or system file")
    p_val.add_argument("problem", help="heat1d, stokes3, or a system JSON file")
    p_val.set_defaults(handler=_cmd_validate)

    p_proj = sub.add_parser("project", help="print the slab projection of a preset")
    p_proj.add_argument("--preset", required=True,
                        help=f"one of {', '.join(sorted(PRESET_FUNCTIONS))}")
    p_proj.add_argument("--q", type=int, default=2)
    p_proj.add_argument("--N", type=int, default=1, help="number of slabs")
    p_proj.add_argument("--T", type=float, default=1.0, help="final time")
    p_proj.set_defaults(handler=_cmd_project)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    return args.handler(args)


if __name__ == "__main__":
    sys.exit(main())
