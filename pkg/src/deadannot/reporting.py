"""Run metrics and CSV logs.

A MinimizationReport summarizes one file's run: per method and annotation
kind, how many whole annotations existed and how many were removed, the
sub-part counts (conjuncts for asserts/invariants, steps plus hints for
calcs), the verifier calls that involved the row, and the wall time those
calls took. write_csv emits two files:

    detail.csv  file,method,kind,total,removed,remaining,conjuncts_total,
                conjuncts_removed,verifier_calls,wall_ms
    summary.csv file,methods,annotations_total,annotations_removed,
                percent_removed,verifier_calls,verify_before_ms,
                verify_after_ms

Percentages are derived at write time and never stored, so reading the
CSVs back recovers the reports exactly.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from typing import Optional

from . import source_model as sm
from .source_model import AnnotatedProgram, EditSet, Span

DETAIL_HEADER = [
    "file", "method", "kind", "total", "removed", "remaining",
    "conjuncts_total", "conjuncts_removed", "verifier_calls", "wall_ms",
]
SUMMARY_HEADER = [
    "file", "methods", "annotations_total", "annotations_removed",
    "percent_removed", "verifier_calls", "verify_before_ms", "verify_after_ms",
]
TIMING_HEADER = [
    "file", "wall_ms_simple", "wall_ms_combined", "wall_ms_complete",
    "calls_simple", "calls_combined", "calls_complete",
]

_KIND_ORDER = [
    sm.ASSERT, sm.INVARIANT, sm.DECREASES, sm.DECREASES_WILDCARD, sm.LEMMA_CALL, sm.CALC,
]


@dataclass
class KindRow:
    file: str
    method: str
    kind: str
    total: int
    removed: int
    conjuncts_total: int
    conjuncts_removed: int
    verifier_calls: int
    wall_ms: float

    @property
    def remaining(self) -> int:
        return self.total - self.removed


@dataclass
class MinimizationReport:
    file: str
    methods: int
    rows: list[KindRow] = field(default_factory=list)
    verifier_calls: int = 0
    verify_before_ms: Optional[float] = None
    verify_after_ms: Optional[float] = None
    aborted: bool = False

    @property
    def annotations_total(self) -> int:
        return sum(r.total for r in self.rows)

    @property
    def annotations_removed(self) -> int:
        return sum(r.removed for r in self.rows)

    @property
    def percent_removed(self) -> float:
        total = self.annotations_total
        return 100.0 * self.annotations_removed / total if total else 0.0


def _deleted_whole(program: AnnotatedProgram, deletions: list[Span], span: Span) -> bool:
    from .oracle import _span_survives

    return not _span_survives(program, deletions, span)


def build_report(job, edits: EditSet) -> MinimizationReport:
    """Aggregate a finished job into per-method, per-kind rows. A whole
    annotation counts as removed when none of its solid bytes survive; a
    sub-part likewise. verifier_calls and wall_ms come from the engine's
    call log: a row is charged for every verify in which it was under
    trial."""
    program = job.program
    deletions = edits.sorted()

    calls: dict[tuple[str, str], int] = {}
    wall: dict[tuple[str, str], float] = {}
    for rec in job.call_log:
        for key in set(rec.attempted):
            calls[key] = calls.get(key, 0) + 1
            wall[key] = wall.get(key, 0.0) + rec.elapsed

    rows: list[KindRow] = []
    for m in program.methods:
        by_kind: dict[str, KindRow] = {}
        for a in m.annotations:
            row = by_kind.get(a.kind)
            if row is None:
                key = (m.name, a.kind)
                row = KindRow(
                    file=program.file_name,
                    method=m.name,
                    kind=a.kind,
                    total=0,
                    removed=0,
                    conjuncts_total=0,
                    conjuncts_removed=0,
                    verifier_calls=calls.get(key, 0),
                    wall_ms=wall.get(key, 0.0) * 1000.0,
                )
                by_kind[a.kind] = row
            row.total += 1
            if _deleted_whole(program, deletions, a.span):
                row.removed += 1
            for p in a.parts:
                row.conjuncts_total += 1
                if _deleted_whole(program, deletions, p.span):
                    row.conjuncts_removed += 1
        rows.extend(
            by_kind[k] for k in _KIND_ORDER if k in by_kind
        )
    return MinimizationReport(
        file=program.file_name,
        methods=len(program.methods),
        rows=rows,
        verifier_calls=len(job.call_log),
        aborted=job.aborted,
    )


def _fmt_ms(value: Optional[float]) -> str:
    return "" if value is None else str(value)


def write_csv(reports: list[MinimizationReport], out_dir: str) -> tuple[str, str]:
    """Write summary.csv (one row per file) and detail.csv (one row per
    method and kind). Returns their paths."""
    os.makedirs(out_dir, exist_ok=True)
    detail_path = os.path.join(out_dir, "detail.csv")
    summary_path = os.path.join(out_dir, "summary.csv")
    with open(detail_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(DETAIL_HEADER)
        for report in reports:
            for r in report.rows:
                w.writerow([
                    r.file, r.method, r.kind, r.total, r.removed, r.remaining,
                    r.conjuncts_total, r.conjuncts_removed, r.verifier_calls,
                    str(r.wall_ms),
                ])
    with open(summary_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_HEADER)
        for report in reports:
            w.writerow([
                report.file, report.methods, report.annotations_total,
                report.annotations_removed, f"{report.percent_removed:.1f}",
                report.verifier_calls, _fmt_ms(report.verify_before_ms),
                _fmt_ms(report.verify_after_ms),
            ])
    return summary_path, detail_path


def read_csv(out_dir: str) -> list[MinimizationReport]:
    """Rebuild reports from a write_csv output directory (derived columns
    are recomputed, so this inverts write_csv exactly)."""
    detail_path = os.path.join(out_dir, "detail.csv")
    summary_path = os.path.join(out_dir, "summary.csv")
    rows_by_file: dict[str, list[KindRow]] = {}
    with open(detail_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != DETAIL_HEADER:
            raise ValueError(f"unexpected detail.csv header: {header}")
        for rec in reader:
            (file, method, kind, total, removed, _remaining,
             conj_total, conj_removed, calls, wall_ms) = rec
            rows_by_file.setdefault(file, []).append(
                KindRow(file, method, kind, int(total), int(removed),
                        int(conj_total), int(conj_removed), int(calls),
                        float(wall_ms))
            )
    reports: list[MinimizationReport] = []
    with open(summary_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != SUMMARY_HEADER:
            raise ValueError(f"unexpected summary.csv header: {header}")
        for rec in reader:
            (file, methods, _total, _removed, _pct, calls, before, after) = rec
            reports.append(
                MinimizationReport(
                    file=file,
                    methods=int(methods),
                    rows=rows_by_file.get(file, []),
                    verifier_calls=int(calls),
                    verify_before_ms=float(before) if before else None,
                    verify_after_ms=float(after) if after else None,
                )
            )
    return reports


@dataclass
class TimingRow:
    file: str
    wall_ms_simple: float
    wall_ms_combined: float
    wall_ms_complete: float
    calls_simple: int
    calls_combined: int
    calls_complete: int


def write_timing_csv(rows: list[TimingRow], out_dir: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "timing.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TIMING_HEADER)
        for r in rows:
            w.writerow([
                r.file, str(r.wall_ms_simple), str(r.wall_ms_combined),
                str(r.wall_ms_complete), r.calls_simple, r.calls_combined,
                r.calls_complete,
            ])
    return path
