"""``harmonia`` command line: run checks, list models and checks.

Exit codes: 0 success, 1 regression (or a check raised), 2 unknown
names or bad usage, 3 oracle gate failure.
"""

from __future__ import annotations

import csv
import datetime as _dt
import json
import os
import sys

import click

from .harmonic import CheckConfig
from .models import MODEL_IDS, build
from .runner import CHECKS, RunResult, RunSpec, SelectionError, check_names, run, with_overrides


def _split(values: tuple[str, ...]) -> tuple[str, ...] | None:
    out = tuple(v.strip() for item in values for v in item.split(",") if v.strip())
    return out or None


def _jobs(flag: int | None) -> int:
    env = os.environ.get("HARMONIA_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise click.UsageError(f"HARMONIA_JOBS must be an integer, got {env!r}") from None
    return flag or 1


def _fmt(x: float) -> str:
    return f"{x:.3e}"


def render_text(result: RunResult) -> str:
    """Human-readable table, one row per check."""
    rows = [("model", "check", "points", "max_residual", "tolerance", "verdict", "outcome")]
    for c in result.results:
        rows.append((c.model, c.name, str(c.points), _fmt(c.max_residual), _fmt(c.tolerance), c.verdict,
                     c.outcome + (" (conditional)" if c.conditional else "")))
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() for r in rows]
    for c in result.results:
        if c.error:
            lines.append(f"error in {c.model} {c.name}: {c.error}")
    s = result.summary()
    lines.append(
        f"{s['checks']} checks: {s['pass']} pass, {s['fail']} fail, {s['error']} error; "
        f"{s['ok']} ok, {s['known-discrepancy']} known-discrepancy, {s['regression']} regression"
        + ("; oracle gate FAILED" if result.gate_failed else "")
    )
    return "\n".join(lines) + "\n"


def render_json(result: RunResult, created: str | None = None) -> str:
    return json.dumps(result.to_dict(created), indent=2, sort_keys=False, allow_nan=False) + "\n"


def write_csv(result: RunResult, path: str) -> None:
    """Per-point residuals: model, field, check, point index, residual."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["model", "field", "check", "point", "residual"])
        for c in result.results:
            fld = c.fields[0] if c.fields else "-"
            for i, r in enumerate(c.residuals):
                w.writerow([c.model, fld, c.name, i, repr(float(r))])


@click.group()
def main() -> None:
    """Numerical verification of harmonic sections and maps of differential forms."""


@main.command("run")
@click.option("--model", "models", multiple=True, help="Model id or glob (repeatable, comma-separated).")
@click.option("--all", "all_models", is_flag=True, help="Select every catalog model.")
@click.option("--field", "fields", multiple=True, help="Field names (repeatable, comma-separated).")
@click.option("--checks", "checks", multiple=True, help="Check names (repeatable, comma-separated).")
@click.option("--points", type=click.IntRange(min=1), default=None, help="Sample points per model.")
@click.option("--seed", type=int, default=None, help="Sampling seed.")
@click.option("--tol-d1", type=click.FloatRange(min=0, min_open=True), default=None)
@click.option("--tol-d2", type=click.FloatRange(min=0, min_open=True), default=None)
@click.option("--out", type=click.Path(dir_okay=False, writable=True), default=None, help="Report file.")
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text")
@click.option("--regression", is_flag=True, help="Compare outcomes with the catalog expectations.")
@click.option("--jobs", type=click.IntRange(min=1), default=None, help="Worker processes (HARMONIA_JOBS wins).")
@click.option("--emit-csv", type=click.Path(dir_okay=False, writable=True), default=None,
              help="Write per-point residuals to this CSV file.")
def run_cmd(models, all_models, fields, checks, points, seed, tol_d1, tol_d2, out, fmt, regression, jobs,
            emit_csv) -> None:
    """Run checks and report verdicts."""
    patterns = ("*",) if all_models else _split(models)
    if not patterns:
        click.echo("error: need --model or --all", err=True)
        sys.exit(2)
    config = with_overrides(CheckConfig(), sample_count=points, seed=seed, tol_d1=tol_d1, tol_d2=tol_d2)
    try:
        spec = RunSpec(patterns, _split(fields), _split(checks), config, regression, _jobs(jobs))
        result = run(spec)
    except SelectionError as err:
        click.echo(f"error: {err}", err=True)
        sys.exit(2)
    created = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    text = render_json(result, created) if fmt == "json" else render_text(result)
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)
    if emit_csv:
        write_csv(result, emit_csv)
    sys.exit(result.exit_code)


@main.command("list-models")
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text")
def list_models_cmd(fmt: str) -> None:
    """List catalog models."""
    if fmt == "json":
        click.echo(json.dumps([build(m).descriptor() for m in MODEL_IDS], indent=2))
        return
    for m in MODEL_IDS:
        cm = build(m)
        click.echo(f"{m:18s} dim={cm.model.n:<3d} fields: {', '.join(cm.fields)}")


@main.command("list-checks")
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text")
def list_checks_cmd(fmt: str) -> None:
    """List check names."""
    if fmt == "json":
        click.echo(json.dumps([{"name": c, "description": CHECKS[c].description, "generic": CHECKS[c].generic}
                               for c in check_names()], indent=2))
        return
    for c in check_names():
        click.echo(f"{c:18s} {CHECKS[c].description}")


if __name__ == "__main__":  # pragma: no cover
    main()
