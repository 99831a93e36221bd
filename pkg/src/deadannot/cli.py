"""Command-line interface.

Four subcommands mirror the tool's execution options:

    simplify      remove dead annotations, write <name>.min.<ext> files
    log           simplify plus summary.csv / detail.csv logs
    completeness  compare complete_dare against combined_dare per file
    timing        run all three algorithms and log times and call counts

The oracle is chosen with --oracle deps:<sidecar path> for the hermetic
dependency oracle or ext:<config path> for an external verifier command.

Exit codes: 0 success, 2 when any input failed to parse or load, 3 when
the oracle cannot run at all.
"""

from __future__ import annotations

import glob
import os
import sys
import time
from dataclasses import dataclass
from typing import Optional

import click

from . import minimizer as mz
from . import oracle as orc
from . import reporting as rp
from . import source_model as sm

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_ORACLE = 3

_KIND_NAMES = sorted(sm.ANNOTATION_KINDS)


class _OracleSpec:
    """Parsed --oracle value; builds a fresh oracle per file so counters
    and caches never leak between inputs."""

    def __init__(self, value: str):
        if ":" not in value:
            raise click.BadParameter("expected deps:<path> or ext:<path>", param_hint="--oracle")
        mode, path = value.split(":", 1)
        if mode not in ("deps", "ext"):
            raise click.BadParameter(f"unknown oracle type {mode!r}", param_hint="--oracle")
        self.mode = mode
        self.path = path
        self._ext_config: Optional[orc.ExternalVerifierConfig] = None
        if mode == "ext":
            self._ext_config = orc.load_external_config(path)

    def build(self, program: sm.AnnotatedProgram) -> orc.VerificationOracle:
        if self.mode == "deps":
            return orc.load_dependency_oracle(self.path, program)
        return orc.ExternalVerifierOracle(self._ext_config)


def _parse_kinds(value: Optional[str]) -> frozenset[str]:
    if not value:
        return mz.ALL_KINDS
    kinds = set()
    for name in value.split(","):
        name = name.strip()
        if name not in sm.ANNOTATION_KINDS:
            raise click.BadParameter(
                f"unknown kind {name!r}; choose from {', '.join(_KIND_NAMES)}",
                param_hint="--kinds",
            )
        kinds.add(name)
    return frozenset(kinds)


def _expand_inputs(patterns: tuple[str, ...]) -> tuple[list[str], list[str]]:
    """Glob-expand each argument; a pattern with no matches is an error."""
    files: list[str] = []
    missing: list[str] = []
    for pat in patterns:
        matches = sorted(glob.glob(pat))
        if matches:
            files.extend(matches)
        elif os.path.exists(pat):
            files.append(pat)
        else:
            missing.append(pat)
    return files, missing


@dataclass
class _FileRun:
    path: str
    program: sm.AnnotatedProgram
    oracle: orc.VerificationOracle
    job: mz.MinimizationJob
    edits: sm.EditSet
    report: rp.MinimizationReport


def _load_program(path: str) -> sm.AnnotatedProgram:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return sm.parse(text, path)


def _run_file(
    path: str,
    oracle_spec: _OracleSpec,
    algorithm: str,
    kinds: frozenset[str],
    passes: str = "whole_then_split",
) -> _FileRun:
    program = _load_program(path)
    oracle = oracle_spec.build(program)
    orc.preflight(oracle, program)
    job = mz.MinimizationJob(
        program, oracle, algorithm=algorithm, enabled_kinds=kinds, passes=passes
    )
    edits, report = mz.minimize(job)
    return _FileRun(path, program, oracle, job, edits, report)


def _min_path(out_dir: str, input_path: str) -> str:
    base = os.path.basename(input_path)
    stem, ext = os.path.splitext(base)
    return os.path.join(out_dir, f"{stem}.min{ext}")


def _fail(path: str, err: Exception) -> None:
    click.echo(f"{path}: error: {err}", err=True)


_oracle_option = click.option(
    "--oracle", "oracle_value", required=True,
    help="deps:<sidecar path> or ext:<verifier config path>",
)
_kinds_option = click.option(
    "--kinds", "kinds_value", default=None,
    help=f"comma-separated annotation kinds to attempt (default: all of {', '.join(_KIND_NAMES)})",
)
_algorithm_option = click.option(
    "--algorithm", type=click.Choice(mz.ALGORITHMS), default="combined",
    show_default=True, help="whole-annotation removal strategy",
)


@click.group()
def main():
    """Find and remove dead annotations from MiniDfy programs."""


def _simplify_files(files, oracle_spec, algorithm, kinds, out_dir):
    """Shared body of simplify and log. Returns (runs, parse_failures)."""
    os.makedirs(out_dir, exist_ok=True)
    runs: list[_FileRun] = []
    failures = 0
    for path in files:
        try:
            run = _run_file(path, oracle_spec, algorithm, kinds)
        except (sm.SourceError, orc.OracleConfigError, OSError) as e:
            _fail(path, e)
            failures += 1
            continue
        out_text = sm.print_source(run.program, run.edits)
        out_path = _min_path(out_dir, path)
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(out_text)
        report = run.report
        click.echo(
            f"{path}: removed {report.annotations_removed}/{report.annotations_total} "
            f"annotations ({report.verifier_calls} verifier calls) -> {out_path}"
        )
        runs.append(run)
    return runs, failures


@main.command()
@_oracle_option
@click.option("--out", "out_dir", required=True, help="output directory")
@_algorithm_option
@_kinds_option
@click.argument("inputs", nargs=-1, required=True)
def simplify(oracle_value, out_dir, algorithm, kinds_value, inputs):
    """Remove dead annotations and write simplified programs."""
    sys.exit(_simplify_main(oracle_value, out_dir, algorithm, kinds_value, inputs, with_csv=False, timing=False))


@main.command()
@_oracle_option
@click.option("--out", "out_dir", required=True, help="output directory")
@_algorithm_option
@_kinds_option
@click.option("--timing", is_flag=True, help="measure before/after verification time (3-run averages)")
@click.argument("inputs", nargs=-1, required=True)
def log(oracle_value, out_dir, algorithm, kinds_value, timing, inputs):
    """Simplify and write summary.csv / detail.csv run logs."""
    sys.exit(_simplify_main(oracle_value, out_dir, algorithm, kinds_value, inputs, with_csv=True, timing=timing))


def _simplify_main(oracle_value, out_dir, algorithm, kinds_value, inputs, with_csv, timing):
    try:
        oracle_spec = _OracleSpec(oracle_value)
    except (orc.OracleConfigError, OSError) as e:
        click.echo(f"oracle: error: {e}", err=True)
        return EXIT_PARSE
    kinds = _parse_kinds(kinds_value)
    files, missing = _expand_inputs(inputs)
    for pat in missing:
        _fail(pat, FileNotFoundError("no such file"))
    try:
        runs, failures = _simplify_files(files, oracle_spec, algorithm, kinds, out_dir)
    except orc.OracleUnavailableError as e:
        click.echo(f"oracle unavailable: {e}", err=True)
        return EXIT_ORACLE
    if any(r.job.aborted for r in runs):
        click.echo("oracle unavailable: minimization aborted", err=True)
        return EXIT_ORACLE
    if with_csv:
        reports = []
        for run in runs:
            if timing:
                run.report.verify_before_ms = _timed_verify(run, sm.EditSet.empty())
                run.report.verify_after_ms = _timed_verify(run, run.edits)
            reports.append(run.report)
        summary_path, detail_path = rp.write_csv(reports, out_dir)
        click.echo(f"wrote {summary_path} and {detail_path}")
    return EXIT_PARSE if (failures or missing) else EXIT_OK


def _timed_verify(run: _FileRun, edits: sm.EditSet) -> float:
    """Average verification wall time over 3 runs, in milliseconds."""
    oracle = run.oracle
    text = sm.print_source(run.program, edits) if oracle.needs_text else None
    samples = []
    for _ in range(3):
        outcome = oracle.verify(text, run.program, edits)
        samples.append(outcome.elapsed * 1000.0)
    return sum(samples) / len(samples)


@main.command()
@_oracle_option
@click.option("--out", "out_dir", default=".", help="unused; accepted for a uniform surface")
@_kinds_option
@click.argument("inputs", nargs=-1, required=True)
def completeness(oracle_value, out_dir, kinds_value, inputs):
    """Check whether combined_dare finds solutions as small as complete_dare."""
    del out_dir
    try:
        oracle_spec = _OracleSpec(oracle_value)
    except (orc.OracleConfigError, OSError) as e:
        click.echo(f"oracle: error: {e}", err=True)
        sys.exit(EXIT_PARSE)
    kinds = _parse_kinds(kinds_value)
    files, missing = _expand_inputs(inputs)
    for pat in missing:
        _fail(pat, FileNotFoundError("no such file"))
    failures = len(missing)
    equal = larger = 0
    try:
        for path in files:
            try:
                complete = _run_file(path, oracle_spec, "complete", kinds, passes="whole_only")
                combined = _run_file(path, oracle_spec, "combined", kinds, passes="whole_only")
            except (sm.SourceError, orc.OracleConfigError, OSError) as e:
                _fail(path, e)
                failures += 1
                continue
            delta = complete.report.annotations_removed - combined.report.annotations_removed
            verdict = "equal-size" if delta == 0 else f"combined-larger({delta})"
            skipped = sorted(complete.job.branch_limited)
            note = f" [skipped: {', '.join(skipped)}]" if skipped else ""
            click.echo(f"{path}: {verdict}{note}")
            if delta == 0:
                equal += 1
            else:
                larger += 1
    except orc.OracleUnavailableError as e:
        click.echo(f"oracle unavailable: {e}", err=True)
        sys.exit(EXIT_ORACLE)
    click.echo(f"tally: {equal} equal-size, {larger} combined-larger")
    sys.exit(EXIT_OK)


@main.command()
@_oracle_option
@click.option("--out", "out_dir", required=True, help="output directory for timing.csv")
@_kinds_option
@click.argument("inputs", nargs=-1, required=True)
def timing(oracle_value, out_dir, kinds_value, inputs):
    """Run simple, combined, and complete per file; log wall time and calls."""
    try:
        oracle_spec = _OracleSpec(oracle_value)
    except (orc.OracleConfigError, OSError) as e:
        click.echo(f"oracle: error: {e}", err=True)
        sys.exit(EXIT_PARSE)
    kinds = _parse_kinds(kinds_value)
    files, missing = _expand_inputs(inputs)
    for pat in missing:
        _fail(pat, FileNotFoundError("no such file"))
    failures = len(missing)
    rows: list[rp.TimingRow] = []
    try:
        for path in files:
            measures = {}
            try:
                for algorithm in mz.ALGORITHMS:
                    start = time.perf_counter()
                    run = _run_file(path, oracle_spec, algorithm, kinds, passes="whole_only")
                    wall_ms = (time.perf_counter() - start) * 1000.0
                    measures[algorithm] = (wall_ms, run.report.verifier_calls)
            except (sm.SourceError, orc.OracleConfigError, OSError) as e:
                _fail(path, e)
                failures += 1
                continue
            rows.append(rp.TimingRow(
                file=path,
                wall_ms_simple=measures["simple"][0],
                wall_ms_combined=measures["combined"][0],
                wall_ms_complete=measures["complete"][0],
                calls_simple=measures["simple"][1],
                calls_combined=measures["combined"][1],
                calls_complete=measures["complete"][1],
            ))
            click.echo(
                f"{path}: calls simple={measures['simple'][1]} "
                f"combined={measures['combined'][1]} complete={measures['complete'][1]}"
            )
    except orc.OracleUnavailableError as e:
        click.echo(f"oracle unavailable: {e}", err=True)
        sys.exit(EXIT_ORACLE)
    path = rp.write_timing_csv(rows, out_dir)
    click.echo(f"wrote {path}")
    sys.exit(EXIT_PARSE if failures else EXIT_OK)
