"""Command line entry point ``ktuple``.

Exit codes: 0 success, 2 invalid input, 3 an enumeration or node budget ran out.
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import harness
from .exact import NODE_BUDGET, solve_security_index
from .jacobian import build_h
from .mincut import ENUMERATION_CAP, MinCutSolver
from .milp import export_milp
from .netmodel import CaseError, full_metering, load_case

EXIT_VALIDATION = 2
EXIT_TRUNCATED = 3


def _fail(msg: str) -> None:
    click.echo(f"error: {msg}", err=True)
    sys.exit(EXIT_VALIDATION)


def _load(case: str, meters_per_line: int | None):
    try:
        net, ms = load_case(case)
    except (CaseError, OSError) as exc:
        _fail(str(exc))
    if meters_per_line is not None:
        ms = full_metering(net, meters_per_line)
    return net, ms


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        click.echo(text, nl=False)


def _fractions(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise click.BadParameter("expected comma separated numbers")
    if any(not 0 <= v <= 1 for v in vals):
        raise click.BadParameter("fractions must lie in [0, 1]")
    return vals


mpl_option = click.option("--meters-per-line", type=click.IntRange(min=1), default=None,
                          help="Replace the case measurements by full metering with this many "
                               "flow meters per line.")


@click.group()
def main() -> None:
    """Sparsest critical measurement tuples for DC state estimation."""


@main.command()
@click.option("--case", required=True, help="Case file or bundled name (ieee6, ieee14, ...).")
@click.option("--anchor", required=True, type=int, help="Row index of the specified measurement.")
@click.option("--method", type=click.Choice(["mincut", "exact", "both"]), default="both")
@mpl_option
@click.option("--node-budget", type=int, default=NODE_BUDGET)
@click.option("--out", default=None, help="Write JSON here instead of stdout.")
def solve(case, anchor, method, meters_per_line, node_budget, out):
    """Sparsest critical tuple containing one measurement."""
    net, ms = _load(case, meters_per_line)
    if not 0 <= anchor < len(ms):
        _fail(f"anchor {anchor} out of range 0..{len(ms) - 1}")
    h = build_h(net, ms)
    doc: dict = {"case": net.name or case, "anchor": anchor,
                 "measurement": ms[anchor].describe(net)}
    truncated = False
    hint = None
    if method in ("mincut", "both"):
        solver = MinCutSolver(net, ms, h)
        try:
            tup = solver.solve(anchor)
            doc["mincut"] = tup.to_dict()
            hint = tup.cardinality
        except Exception as exc:
            doc["mincut"] = {"error": str(exc)}
        truncated |= solver.truncated
    if method in ("exact", "both"):
        try:
            sol = solve_security_index(h, anchor, hint, node_budget=node_budget)
        except ValueError as exc:
            _fail(str(exc))
        doc["exact"] = sol.to_dict()
        truncated |= not sol.proved_optimal
    _emit(json.dumps(doc, indent=2) + "\n", out)
    sys.exit(EXIT_TRUNCATED if truncated else 0)


@main.command()
@click.option("--case", required=True)
@click.option("--removal", type=click.Choice(["lines", "injections", "arbitrary"]), default="lines")
@click.option("--fractions", default="0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1")
@click.option("--ensembles", type=click.IntRange(min=1), default=5)
@click.option("--seed", type=int, default=0)
@click.option("--meters-per-line", type=click.IntRange(min=1), default=1)
@click.option("--solver", type=click.Choice(["mincut", "exact", "both"]), default="both")
@click.option("--enumeration-cap", type=click.IntRange(min=1), default=ENUMERATION_CAP)
@click.option("--node-budget", type=int, default=NODE_BUDGET)
@click.option("--out-json", default=None)
@click.option("--out-csv", default=None)
def sweep(case, removal, fractions, ensembles, seed, meters_per_line, solver, enumeration_cap,
          node_budget, out_json, out_csv):
    """Random meter-removal sweep with overestimation statistics."""
    _load(case, None)
    try:
        fr = _fractions(fractions)
    except click.BadParameter as exc:
        _fail(str(exc))
    cfg = harness.ScenarioConfig(case, meters_per_line, True, 0.0, removal, seed, 0, solver,
                                 enumeration_cap, node_budget)
    points = harness.removal_sweep(cfg, fr, ensembles)
    doc = {"case": case, "removal": removal, "seed": seed,
           "points": [p.to_dict() for p in points]}
    _emit(json.dumps(doc, indent=2) + "\n", out_json)
    if out_csv:
        Path(out_csv).write_text(harness.sweep_table_csv(points))
    truncated = any(r.truncated for p in points for r in p.reports)
    sys.exit(EXIT_TRUNCATED if truncated else 0)


@main.command()
@click.option("--case", required=True)
@click.option("--solver", type=click.Choice(["mincut", "exact"]), default="mincut")
@mpl_option
@click.option("--out-json", default=None)
@click.option("--out-csv", default=None)
def membership(case, solver, meters_per_line, out_json, out_csv):
    """How many critical tuples found contain each measurement."""
    _load(case, None)
    rep = harness.membership_report(case, solver, meters_per_line)
    _emit(rep.to_json(), out_json)
    if out_csv:
        Path(out_csv).write_text(rep.to_csv())


@main.command("export-milp")
@click.option("--case", required=True)
@click.option("--anchor", required=True, type=int)
@click.option("--big-m", default="100", help="Positive rational, e.g. 100 or 5/2.")
@click.option("--protect", default="", help="Comma separated rows held at zero.")
@mpl_option
@click.option("--out", required=True)
def export_milp_cmd(case, anchor, big_m, protect, meters_per_line, out):
    """Write the big-M model in LP format."""
    from fractions import Fraction

    net, ms = _load(case, meters_per_line)
    try:
        m_val = Fraction(big_m)
        rows = [int(x) for x in protect.split(",") if x.strip()]
        model = export_milp(build_h(net, ms), anchor, m_val, out, rows)
    except (ValueError, IndexError, ZeroDivisionError) as exc:
        _fail(str(exc))
    click.echo(f"wrote {out}: {model.n_continuous} continuous, {model.n_binary} binary, "
               f"{model.n_constraints} constraints")


@main.command()
@click.option("--cases", required=True, help="Comma separated case files or bundled names.")
@click.option("--solver", "solvers", multiple=True, type=click.Choice(["mincut", "exact"]),
              default=["mincut"])
@click.option("--meters-per-line", type=click.IntRange(min=1), default=2)
@click.option("--node-budget", type=int, default=NODE_BUDGET)
@click.option("--out", default=None)
def timing(cases, solvers, meters_per_line, node_budget, out):
    """Wall time to solve every anchor of each case."""
    names = [c for c in cases.split(",") if c.strip()]
    for c in names:
        _load(c, None)
    table = harness.timing_report(names, solvers, meters_per_line, node_budget)
    _emit(json.dumps(table, indent=2) + "\n", out)
    truncated = any(v for row in table for k, v in row.items() if k.endswith("_truncated"))
    sys.exit(EXIT_TRUNCATED if truncated else 0)


if __name__ == "__main__":
    main()
