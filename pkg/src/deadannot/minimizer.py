"""Annotation removal engines.

Three whole-annotation strategies over a parsed program and an oracle:

* simple_dare — one forward pass per method: tentatively delete each
  target, verify, restore on failure. One verify per target.
* complete_dare — per-method recursive branch-and-compare: after a
  successful removal, explore both the removed and the kept branch and
  keep whichever leaves fewer annotations. Worst case exponential, so a
  method with more targets than the branch limit falls back to simple.
* combined_dare — lockstep rounds across all methods: every method
  tentatively deletes its next target, one verify covers the round, and
  each failing method rolls back its own change. Verify count equals the
  largest per-method target count.

split_pass then refines surviving annotations: conjuncts of asserts and
invariants, and interior steps and hints of calcs, are attempted one at a
time with the simple strategy.

All progress is tracked as deletions over the original text; rollback is
dropping the tentative deletion, not text surgery.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from . import source_model as sm
from .oracle import OracleUnavailableError, VerificationOracle, VerifierOutcome, has_error
from .source_model import (
    ASSERT,
    CALC,
    INVARIANT,
    AnnotatedProgram,
    Annotation,
    EditSet,
    MethodRecord,
    RemovalTarget,
    Span,
    hint_bundled_with_step,
    next_annotation,
    print_source,
    removal_targets,
)

ALL_KINDS = frozenset(sm.ANNOTATION_KINDS)

ALGORITHMS = ("simple", "complete", "combined")


class Cancelled(Exception):
    """Raised between verify calls when the job's cancel flag is set."""


@dataclass
class Attempt:
    target_id: str
    action: str  # "removed" | "restored"
    verifier_call_index: int


@dataclass
class CallRecord:
    """One verify call issued by an engine: which (method, kind) targets
    were under trial and how long the oracle took."""

    index: int
    elapsed: float
    attempted: tuple[tuple[str, str], ...]
    phase: str  # "whole" | "split"


@dataclass
class MinimizationJob:
    program: AnnotatedProgram
    oracle: VerificationOracle
    algorithm: str = "combined"
    enabled_kinds: frozenset[str] = ALL_KINDS
    passes: str = "whole_then_split"  # or "whole_only"
    branch_limit: int = 16
    scope: Optional[frozenset[str]] = None  # method names; None = all
    cancel_check: Optional[Callable[[], bool]] = None
    trace: list[Attempt] = field(default_factory=list)
    call_log: list[CallRecord] = field(default_factory=list)
    branch_limited: set[str] = field(default_factory=set)
    aborted: bool = False

    def methods_in_play(self) -> list[MethodRecord]:
        out = []
        for m in self.program.methods:
            if not m.initially_verified:
                continue
            if self.scope is not None and m.name not in self.scope:
                continue
            out.append(m)
        return out


def count_annotations(method: MethodRecord) -> int:
    """NumAnnots: whole-annotation removal targets, sub-parts not counted."""
    return len(removal_targets(method))


class _EditState:
    """Mutable removal state: whole-target deletions plus per-annotation
    removed sub-parts. Deletion spans for sub-parts are recomputed on
    materialization because conjunct separators depend on which other
    conjuncts are gone."""

    def __init__(self, program: AnnotatedProgram):
        self.program = program
        self.whole: dict[str, tuple[Span, ...]] = {}
        self.parts: dict[str, set[str]] = {}

    def removed_count(self, method: MethodRecord, targets: list[RemovalTarget]) -> int:
        return sum(1 for t in targets if t.id in self.whole)

    def snapshot_method(self, method: MethodRecord) -> dict[str, tuple[Span, ...]]:
        ids = {t.id for t in removal_targets(method)}
        return {tid: spans for tid, spans in self.whole.items() if tid in ids}

    def restore_method(self, method: MethodRecord, snap: dict[str, tuple[Span, ...]]) -> None:
        ids = {t.id for t in removal_targets(method)}
        for tid in list(self.whole):
            if tid in ids:
                del self.whole[tid]
        self.whole.update(snap)

    def materialize(self) -> EditSet:
        spans: set[Span] = set()
        for sps in self.whole.values():
            spans.update(sps)
        for ann_id, removed in self.parts.items():
            if not removed:
                continue
            ann = self.program.annotation(ann_id)
            spans.update(self._part_spans(ann, removed))
        return EditSet.from_spans(spans)

    def _part_spans(self, ann: Annotation, removed: set[str]) -> set[Span]:
        out: set[Span] = set()
        conjunct_idx = {
            int(pid.rsplit(".c", 1)[1]) for pid in removed if pid.rsplit(".", 1)[1].startswith("c")
        }
        if conjunct_idx:
            out.update(sm.conjunct_removal_spans(self.program, ann, conjunct_idx))
        for pid in removed:
            suffix = pid.rsplit(".", 1)[1]
            if suffix.startswith("c"):
                continue
            out.update(sm.part_removal_spans(self.program, pid))
        return out


def _next_enabled(
    job: MinimizationJob, method: MethodRecord, pos: int
) -> tuple[Optional[RemovalTarget], int]:
    while True:
        target, pos = next_annotation(method, pos)
        if target is None or target.kind in job.enabled_kinds:
            return target, pos


def _do_verify(
    job: MinimizationJob,
    state: _EditState,
    attempted: list[tuple[str, str]],
    phase: str,
) -> VerifierOutcome:
    if job.cancel_check is not None and job.cancel_check():
        raise Cancelled()
    edits = state.materialize()
    text = print_source(job.program, edits) if job.oracle.needs_text else None
    outcome = job.oracle.verify(text, job.program, edits)
    for name, _kind in attempted:
        job.oracle.counter.note_method(name)
    job.call_log.append(
        CallRecord(job.oracle.counter.total, outcome.elapsed, tuple(attempted), phase)
    )
    return outcome


def _require_preflight(job: MinimizationJob) -> None:
    if job.program.methods and not getattr(job.program, "preflight_done", False):
        raise RuntimeError("minimization requires a preflight verification first")


def _finish(job: MinimizationJob, state: _EditState):
    from .reporting import build_report

    edits = state.materialize()
    return edits, build_report(job, edits)


def simple_dare(job: MinimizationJob):
    """One forward whole-annotation pass. Returns (EditSet, report)."""
    _require_preflight(job)
    state = _EditState(job.program)
    try:
        for m in job.methods_in_play():
            _simple_method(job, state, m)
    except OracleUnavailableError:
        job.aborted = True
        return _finish(job, _EditState(job.program))
    return _finish(job, state)


def _simple_method(job: MinimizationJob, state: _EditState, m: MethodRecord) -> None:
    pos = 0
    while True:
        target, pos = _next_enabled(job, m, pos)
        if target is None:
            return
        state.whole[target.id] = target.spans
        outcome = _do_verify(job, state, [(m.name, target.kind)], "whole")
        if has_error(outcome, m.name):
            del state.whole[target.id]
            job.trace.append(Attempt(target.id, "restored", job.oracle.counter.total))
        else:
            job.trace.append(Attempt(target.id, "removed", job.oracle.counter.total))


def combined_dare(job: MinimizationJob):
    """Lockstep rounds across methods, one verify per round."""
    _require_preflight(job)
    state = _EditState(job.program)
    methods = job.methods_in_play()
    cursors = {m.name: 0 for m in methods}
    try:
        while True:
            round_targets: list[tuple[MethodRecord, RemovalTarget]] = []
            for m in methods:
                target, cursors[m.name] = _next_enabled(job, m, cursors[m.name])
                if target is not None:
                    state.whole[target.id] = target.spans
                    round_targets.append((m, target))
            if not round_targets:
                break
            attempted = [(m.name, t.kind) for m, t in round_targets]
            outcome = _do_verify(job, state, attempted, "whole")
            for m, target in round_targets:
                if has_error(outcome, m.name):
                    del state.whole[target.id]
                    job.trace.append(Attempt(target.id, "restored", job.oracle.counter.total))
                else:
                    job.trace.append(Attempt(target.id, "removed", job.oracle.counter.total))
    except OracleUnavailableError:
        job.aborted = True
        return _finish(job, _EditState(job.program))
    return _finish(job, state)


def complete_dare(job: MinimizationJob):
    """Per-method branch-and-compare. After a removal verifies, both the
    removed and the kept continuation are explored; the branch with fewer
    remaining annotations wins, the kept branch on ties."""
    _require_preflight(job)
    state = _EditState(job.program)
    try:
        for m in job.methods_in_play():
            targets = [
                t for t in removal_targets(m) if t.kind in job.enabled_kinds
            ]
            if len(targets) > job.branch_limit:
                job.branch_limited.add(m.name)
                _simple_method(job, state, m)
                continue
            _complete_method(job, state, m, targets, 0)
    except OracleUnavailableError:
        job.aborted = True
        return _finish(job, _EditState(job.program))
    return _finish(job, state)


def _complete_method(
    job: MinimizationJob,
    state: _EditState,
    m: MethodRecord,
    targets: list[RemovalTarget],
    pos: int,
) -> None:
    target, pos = _next_enabled(job, m, pos)
    if target is None:
        return
    pre = state.snapshot_method(m)
    state.whole[target.id] = target.spans
    outcome = _do_verify(job, state, [(m.name, target.kind)], "whole")
    if has_error(outcome, m.name):
        state.restore_method(m, pre)
        job.trace.append(Attempt(target.id, "restored", job.oracle.counter.total))
        _complete_method(job, state, m, targets, pos)
        return
    job.trace.append(Attempt(target.id, "removed", job.oracle.counter.total))
    _complete_method(job, state, m, targets, pos)
    s1 = len(targets) - state.removed_count(m, targets)
    removed_branch = state.snapshot_method(m)
    state.restore_method(m, pre)
    _complete_method(job, state, m, targets, pos)
    s2 = len(targets) - state.removed_count(m, targets)
    if s1 < s2:
        state.restore_method(m, removed_branch)


def split_pass(job: MinimizationJob, base_edits: EditSet) -> EditSet:
    """Refine a whole-pass result: per surviving annotation, try conjuncts
    (asserts/invariants) and interior calc steps then hints, one at a time,
    simple-style. First and last calc expression lines are never targets;
    a step's attached hint goes with the step when its operator does."""
    _require_preflight(job)
    state = _state_from_edits(job.program, base_edits)
    try:
        for m in job.methods_in_play():
            for a in m.annotations:
                if _annotation_fully_removed(state, a):
                    continue
                if a.kind in (ASSERT, INVARIANT) and a.kind in job.enabled_kinds:
                    conjuncts = [p for p in a.parts if p.id.rsplit(".", 1)[1].startswith("c")]
                    if len(conjuncts) >= 2:
                        _try_parts(job, state, m, a, conjuncts)
                elif a.kind == CALC and a.parts:
                    steps = [p for p in a.parts if p.id.rsplit(".", 1)[1].startswith("s")]
                    hints = [p for p in a.parts if p.id.rsplit(".", 1)[1].startswith("h")]
                    if sm.CALC_STEP in job.enabled_kinds:
                        _try_parts(job, state, m, a, steps)
                    if sm.CALC_HINT in job.enabled_kinds:
                        gone = _bundled_hints(a, state.parts.get(a.id, set()))
                        _try_parts(job, state, m, a, [h for h in hints if h.id not in gone])
    except OracleUnavailableError:
        job.aborted = True
        return base_edits
    return state.materialize()


def _try_parts(job, state: _EditState, m: MethodRecord, a: Annotation, parts) -> None:
    for p in parts:
        removed = state.parts.setdefault(a.id, set())
        removed.add(p.id)
        outcome = _do_verify(job, state, [(m.name, a.kind)], "split")
        if has_error(outcome, m.name):
            removed.discard(p.id)
            job.trace.append(Attempt(p.id, "restored", job.oracle.counter.total))
        else:
            job.trace.append(Attempt(p.id, "removed", job.oracle.counter.total))


def _bundled_hints(a: Annotation, removed: set[str]) -> set[str]:
    gone: set[str] = set()
    for p in a.parts:
        if p.id in removed and p.id.rsplit(".", 1)[1].startswith("s"):
            hint = hint_bundled_with_step(a, p)
            if hint is not None:
                gone.add(hint.id)
    return gone


def _annotation_fully_removed(state: _EditState, a: Annotation) -> bool:
    # whole-pass entries are keyed by target id; a grouped wild-card target
    # carries the ids of all its members, so check span coverage instead
    for spans in state.whole.values():
        if a.span in spans:
            return True
    return False


def _state_from_edits(program: AnnotatedProgram, edits: EditSet) -> _EditState:
    """Rebuild whole-target state from a whole-pass EditSet (each target is
    either fully deleted or untouched there)."""
    state = _EditState(program)
    deleted = set(edits.deletions)
    for m in program.methods:
        for t in removal_targets(m):
            spans = t.spans
            if spans and all(s in deleted for s in spans):
                state.whole[t.id] = spans
    covered = {s for spans in state.whole.values() for s in spans}
    leftover = deleted - covered
    if leftover:
        raise sm.InvalidEditError(
            f"base edits contain non-whole-annotation deletions: {sorted(leftover)[:3]}"
        )
    return state


def minimize(job: MinimizationJob):
    """Run the configured whole-annotation pass, then the split pass when
    the job asks for it. Returns (EditSet, MinimizationReport)."""
    from .reporting import build_report

    algo = {
        "simple": simple_dare,
        "complete": complete_dare,
        "combined": combined_dare,
    }.get(job.algorithm)
    if algo is None:
        raise ValueError(f"unknown algorithm {job.algorithm!r}")
    edits, report = algo(job)
    if job.passes == "whole_then_split" and not job.aborted:
        edits = split_pass(job, edits)
        report = build_report(job, edits)
    return edits, report
