"""Local HTTP job service for interactive annotation cleanup.

A job holds one source buffer plus an oracle. Analysis runs in a background
worker and publishes a list of removable entries (annotation or sub-part
ids with byte spans); the client applies a selection of them, which is the
only operation that rewrites the source. A mode flag coordinates the two
sides:

    idle -> running -> success          analysis finished, results published
                    -> failure -> idle  analysis failed or was cancelled
         -> running -> cancel -> failure -> idle
    success -> idle                     results consumed (apply) or stale (edit)

Editing the buffer while an analysis runs requests cancellation; the
worker checks the flag before each verifier call and discards partial
results. Re-analysis can be limited to the methods marked dirty by edits,
and an idle notification from the client starts that automatically once
the configured quiet period (default 10 s) has passed.

The service binds to localhost and keeps jobs in memory; it is a
single-developer tool, not a deployment target.
"""

import json
import threading
import time
import uuid
from dataclasses import dataclass
from typing import Callable, Optional

from . import minimizer as mz
from . import oracle as orc
from . import source_model as sm

MODES = ("idle", "running", "success", "failure", "cancel")

LEGAL_TRANSITIONS = frozenset({
    ("idle", "running"),
    ("running", "success"),
    ("running", "failure"),
    ("running", "cancel"),
    ("cancel", "failure"),
    ("failure", "idle"),
    ("success", "idle"),
})

DEFAULT_IDLE_THRESHOLD_MS = 10000


class ServiceError(Exception):
    """An API-level error with an HTTP status and a JSON payload."""

    def __init__(self, status: int, code: str, message: str, location: Optional[dict] = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.location = location

    def payload(self) -> dict:
        out = {"code": self.code, "message": self.message}
        if self.location is not None:
            out["location"] = self.location
        return out


class IllegalTransition(RuntimeError):
    """A mode change not in LEGAL_TRANSITIONS; indicates a service bug."""


@dataclass(frozen=True)
class RemovableEntry:
    """One dead annotation or sub-part the engine proved removable."""

    id: str
    kind: str
    start: int
    end: int
    method: str

    def as_json(self) -> dict:
        return {
            "id": self.id, "kind": self.kind, "start": self.start,
            "end": self.end, "method": self.method,
        }


def _oracle_monotone(oracle: orc.VerificationOracle) -> bool:
    while isinstance(oracle, orc.CachedOracle):
        oracle = oracle.inner
    if isinstance(oracle, orc.DependencyOracle):
        return oracle.monotone
    return False


def _entries_for_ids(
    program: sm.AnnotatedProgram, method_name: str, ids: list[str]
) -> list[RemovableEntry]:
    """Build entries for removable ids of one method, in the given order.
    Grouped wild-card targets yield one entry per member clause, all under
    the target id so applying any of them removes the group consistently.
    Ids that no longer resolve are dropped."""
    method = program.method(method_name)
    targets = {t.id: t for t in sm.removal_targets(method)}
    out: list[RemovableEntry] = []
    seen: set[str] = set()
    for entry_id in ids:
        if entry_id in seen:
            continue
        seen.add(entry_id)
        target = targets.get(entry_id)
        if target is not None:
            for a in target.annotations:
                out.append(RemovableEntry(entry_id, target.kind, a.span.start, a.span.end, method_name))
            continue
        found = program.lookup_id(entry_id)
        if found is None or found[0] != "part":
            continue
        part = found[1]
        ann = program.annotation(entry_id.rsplit(".", 1)[0])
        out.append(RemovableEntry(entry_id, ann.kind, part.span.start, part.span.end, method_name))
    return out


def _removable_ids(program: sm.AnnotatedProgram, method: sm.MethodRecord, edits: sm.EditSet) -> list[str]:
    """Ids removed by the edit set within one method, in document order.
    A fully-removed annotation is one whole entry; a partially-removed one
    contributes its absent sub-parts."""
    assign = orc.presence_assignment(program, edits)
    ids: list[str] = []
    for target in sm.removal_targets(method):
        if all(not assign[a.id] for a in target.annotations):
            ids.append(target.id)
            continue
        if len(target.annotations) > 1:
            continue  # grouped wild-cards go whole or not at all
        ann = target.annotations[0]
        for part in ann.parts:
            if not assign[part.id]:
                ids.append(part.id)
    return ids


def _build_oracle(spec, program: sm.AnnotatedProgram, use_cache: bool) -> orc.VerificationOracle:
    """Turn the oracle description from a create request into an oracle.
    Accepts a ready-made VerificationOracle for library callers."""
    if isinstance(spec, orc.VerificationOracle):
        return orc.CachedOracle(spec) if use_cache else spec
    if not isinstance(spec, dict) or len(spec) != 1:
        raise ServiceError(422, "oracle_config", "oracle must be {deps: <text>} or {external: <config>}")
    try:
        if "deps" in spec:
            formulas = orc.parse_dependency_file(str(spec["deps"]))
            oracle: orc.VerificationOracle = orc.DependencyOracle(formulas)
            oracle.validate_against(program)
        elif "external" in spec:
            config = orc.ExternalVerifierConfig.from_json(json.dumps(spec["external"]))
            oracle = orc.ExternalVerifierOracle(config)
        else:
            raise ServiceError(422, "oracle_config", "unknown oracle type; use deps or external")
    except orc.OracleConfigError as e:
        raise ServiceError(422, "oracle_config", str(e)) from None
    return orc.CachedOracle(oracle) if use_cache else oracle


class Job:
    """One source buffer under analysis. All state changes go through the
    per-job lock; the worker thread never holds it across a verifier call,
    so cancel and edit requests always get through."""

    def __init__(
        self,
        job_id: str,
        source: str,
        oracle_spec,
        *,
        file_name: str = "input.dfy",
        idle_threshold_ms: int = DEFAULT_IDLE_THRESHOLD_MS,
        allow_stale_apply: bool = False,
        use_cache: bool = True,
        enabled_kinds: frozenset[str] = mz.ALL_KINDS,
        runner: Optional[Callable] = None,
    ):
        self.id = job_id
        self.file_name = file_name
        self.idle_threshold_ms = idle_threshold_ms
        self.allow_stale_apply = allow_stale_apply
        self.enabled_kinds = enabled_kinds
        self._runner = runner or _thread_runner
        self._lock = threading.RLock()
        self._thread: Optional[threading.Thread] = None

        try:
            self.program: Optional[sm.AnnotatedProgram] = sm.parse(source, file_name)
        except sm.SourceError as e:
            raise ServiceError(
                422, "parse_error", e.message, {"line": e.line, "col": e.col}
            ) from None
        self.source = source
        self.oracle = _build_oracle(oracle_spec, self.program, use_cache)
        self.monotone = _oracle_monotone(self.oracle)

        self.mode = "idle"
        self.transitions: list[tuple[str, str]] = []
        self.rev = 0
        self.removable: list[RemovableEntry] = []
        self.excluded: set[str] = set()
        self.dirty: set[str] = set()
        self.parse_error: Optional[dict] = None
        self.last_error: Optional[str] = None
        self.cancel_requested = False
        self.created = time.time()
        self.updated = self.created

        # Preflight now so excluded methods show up before the first run.
        verified = orc.preflight(self.oracle, self.program)
        self.excluded = {m.name for m in self.program.methods} - verified

    # -- mode machine -------------------------------------------------

    def _set_mode(self, new: str) -> None:
        pair = (self.mode, new)
        if pair not in LEGAL_TRANSITIONS:
            raise IllegalTransition(f"illegal mode transition {pair[0]} -> {pair[1]}")
        self.transitions.append(pair)
        self.mode = new
        self.updated = time.time()

    # -- read side ----------------------------------------------------

    def snapshot(self) -> dict:
        with self._lock:
            methods = []
            if self.program is not None:
                methods = [
                    {
                        "name": m.name,
                        "excluded": m.name in self.excluded,
                        "dirty": m.name in self.dirty,
                    }
                    for m in self.program.methods
                ]
            return {
                "id": self.id,
                "mode": self.mode,
                "monotone": self.monotone,
                "excluded": sorted(self.excluded),
                "removable": [e.as_json() for e in self.removable],
                "source_rev": self.rev,
                "source": self.source,
                "dirty": sorted(self.dirty),
                "methods": methods,
                "file_name": self.file_name,
                "parse_error": self.parse_error,
                "last_error": self.last_error,
            }

    def wait(self, timeout: Optional[float] = None) -> str:
        """Block until the current worker (if any) finishes; returns mode."""
        thread = self._thread
        if thread is not None:
            thread.join(timeout)
        with self._lock:
            return self.mode

    # -- analyze ------------------------------------------------------

    def analyze(self, scope_spec="all") -> None:
        """Start background analysis. scope_spec is "all" or
        {"methods": [names]}; raises busy unless the job is idle."""
        with self._lock:
            if self.program is None:
                raise ServiceError(422, "parse_error", "source does not parse; fix it before analyzing")
            scope = self._resolve_scope(scope_spec)
            if self.mode != "idle":
                raise ServiceError(409, "busy", f"job is {self.mode}; analysis needs idle")
            self.cancel_requested = False
            self.last_error = None
            self._set_mode("running")
            program = self.program
            worker = self._make_worker(program, scope)
        self._thread = self._runner(worker)

    def _resolve_scope(self, scope_spec) -> Optional[frozenset[str]]:
        if scope_spec == "all" or scope_spec is None:
            return None
        if isinstance(scope_spec, dict) and isinstance(scope_spec.get("methods"), list):
            names = frozenset(str(n) for n in scope_spec["methods"])
            known = {m.name for m in self.program.methods}
            unknown = names - known
            if unknown:
                raise ServiceError(422, "unknown_method", f"no such method: {', '.join(sorted(unknown))}")
            return names
        raise ServiceError(422, "bad_request", 'scope must be "all" or {"methods": [...]}')

    def _make_worker(self, program: sm.AnnotatedProgram, scope: Optional[frozenset[str]]):
        def worker():
            try:
                verified = orc.preflight(self.oracle, program)
                job = mz.MinimizationJob(
                    program,
                    self.oracle,
                    algorithm="combined",
                    enabled_kinds=self.enabled_kinds,
                    scope=scope,
                    cancel_check=lambda: self.cancel_requested,
                )
                edits, _report = mz.minimize(job)
            except mz.Cancelled:
                self._finish_discard("analysis cancelled")
                return
            except orc.OracleUnavailableError as e:
                self._finish_discard(f"oracle unavailable: {e}")
                return
            except Exception as e:  # noqa: BLE001 - surfaced via last_error
                self._finish_discard(f"analysis failed: {e}")
                return
            if job.aborted:
                self._finish_discard("oracle unavailable: analysis aborted")
                return
            self._finish_publish(program, scope, verified, edits)

        return worker

    def _finish_discard(self, message: str) -> None:
        with self._lock:
            self.last_error = message
            if self.mode in ("running", "cancel"):
                self._set_mode("failure")
            if self.mode == "failure":
                self._set_mode("idle")

    def _finish_publish(
        self,
        program: sm.AnnotatedProgram,
        scope: Optional[frozenset[str]],
        verified: set[str],
        edits: sm.EditSet,
    ) -> None:
        with self._lock:
            if self.mode != "running" or self.program is not program:
                # cancelled or edited underneath us: results are stale
                self.last_error = "analysis cancelled"
                if self.mode in ("running", "cancel"):
                    self._set_mode("failure")
                if self.mode == "failure":
                    self._set_mode("idle")
                return
            self.excluded = {m.name for m in program.methods} - verified
            scoped = set(scope) if scope is not None else {m.name for m in program.methods}
            old_by_method: dict[str, list[RemovableEntry]] = {}
            for e in self.removable:
                old_by_method.setdefault(e.method, []).append(e)
            entries: list[RemovableEntry] = []
            for m in program.methods:
                if m.name in scoped:
                    entries.extend(_entries_for_ids(program, m.name, _removable_ids(program, m, edits)))
                else:
                    entries.extend(old_by_method.get(m.name, []))
            self.removable = entries
            self.dirty -= scoped
            self.last_error = None
            self._set_mode("success")

    # -- cancel -------------------------------------------------------

    def cancel(self) -> str:
        with self._lock:
            if self.mode == "running":
                self.cancel_requested = True
                self._set_mode("cancel")
            return self.mode

    # -- apply --------------------------------------------------------

    def apply(self, select, expect_rev: Optional[int] = None) -> dict:
        with self._lock:
            self._check_rev(expect_rev)
            if self.mode not in ("success", "idle"):
                raise ServiceError(409, "busy", f"job is {self.mode}; apply needs finished results")
            if self.mode == "idle" and not self.allow_stale_apply and self.removable:
                raise ServiceError(409, "stale", "results are stale; re-analyze before applying")
            selected = self._resolve_selection(select)
            if not selected:
                return {"source": self.source, "source_rev": self.rev}
            spans = self._selection_spans(selected)
            new_text, _offsets = sm.apply_edits(self.program, sm.EditSet.from_spans(spans))
            affected = {e.method for e in selected}
            old_program = self.program
            self.program = sm.parse(new_text, self.file_name)
            self.source = new_text
            self.rev += 1
            self.parse_error = None
            self.dirty |= affected
            self.dirty &= {m.name for m in self.program.methods}
            self._rebind_entries(old_program, affected)
            if self.mode == "success":
                self._set_mode("idle")
            self.updated = time.time()
            return {"source": self.source, "source_rev": self.rev}

    def _check_rev(self, expect_rev: Optional[int]) -> None:
        if expect_rev is not None and expect_rev != self.rev:
            raise ServiceError(409, "rev_mismatch", f"expected rev {expect_rev}, job is at {self.rev}")

    def _resolve_selection(self, select) -> list[RemovableEntry]:
        if select == "all":
            return list(self.removable)
        if isinstance(select, dict) and "id" in select:
            matches = [e for e in self.removable if e.id == select["id"]]
            if not matches:
                raise ServiceError(422, "unknown_id", f"{select['id']!r} is not removable here")
            return matches
        if isinstance(select, dict) and "method" in select:
            name = select["method"]
            if self.program is not None and name not in {m.name for m in self.program.methods}:
                raise ServiceError(422, "unknown_method", f"no such method: {name}")
            return [e for e in self.removable if e.method == name]
        raise ServiceError(422, "bad_request", 'select must be "all", {"id": ...} or {"method": ...}')

    def _selection_spans(self, selected: list[RemovableEntry]) -> set[sm.Span]:
        """Deletion ranges for the selected entries. Sub-parts of the same
        annotation are resolved together so conjunct separators match the
        final shape."""
        program = self.program
        spans: set[sm.Span] = set()
        part_ids: dict[str, set[str]] = {}
        for entry in {e.id: e for e in selected}.values():
            found = program.lookup_id(entry.id)
            if found is None:
                raise ServiceError(409, "stale", f"{entry.id} no longer resolves; re-analyze")
            role, _obj = found
            if role == "annotation":
                method = program.method_of(entry.id)
                target = next(t for t in sm.removal_targets(method) if t.id == entry.id)
                spans.update(target.spans)
            elif role == "part":
                part_ids.setdefault(entry.id.rsplit(".", 1)[0], set()).add(entry.id)
            else:
                raise ServiceError(422, "unknown_id", f"{entry.id!r} is not a removable unit")
        for _ann_id, removed in part_ids.items():
            frozen = frozenset(removed)
            for pid in removed:
                spans.update(sm.part_removal_spans(program, pid, frozen))
        return spans

    def _rebind_entries(self, old_program: Optional[sm.AnnotatedProgram], affected: set[str]) -> None:
        """Carry removable entries across a source change. Methods whose full
        declaration text is unchanged keep their entries with spans recomputed
        from the new parse (ids are per-method, so they are stable); changed,
        new, or vanished methods lose theirs and are marked dirty."""
        new_program = self.program
        if new_program is None:
            self.removable = []
            return
        old_slices = {}
        if old_program is not None:
            old_slices = {m.name: old_program.slice(m.body_span) for m in old_program.methods}
        old_by_method: dict[str, list[str]] = {}
        for e in self.removable:
            old_by_method.setdefault(e.method, []).append(e.id)
        entries: list[RemovableEntry] = []
        for m in new_program.methods:
            if m.name in affected:
                continue
            if old_slices.get(m.name) != new_program.slice(m.body_span):
                self.dirty.add(m.name)
                continue
            ids = old_by_method.get(m.name)
            if ids:
                entries.extend(_entries_for_ids(new_program, m.name, ids))
        self.removable = entries

    # -- patch --------------------------------------------------------

    def patch_source(self, source: str, expect_rev: Optional[int] = None) -> dict:
        """Replace the buffer with an edited version. Marks methods whose
        declaration text changed as dirty; requests cancellation if an
        analysis is running."""
        with self._lock:
            self._check_rev(expect_rev)
            if self.mode == "running":
                self.cancel_requested = True
                self._set_mode("cancel")
            elif self.mode == "success":
                self._set_mode("idle")
            old_program = self.program
            old_names = {m.name for m in old_program.methods} if old_program else set()
            try:
                self.program = sm.parse(source, self.file_name)
                self.parse_error = None
            except sm.SourceError as e:
                self.program = None
                self.parse_error = {"message": e.message, "line": e.line, "col": e.col}
            self.source = source
            self.rev += 1
            if self.program is None:
                self.dirty = set(old_names)
                self.removable = []
                self.excluded = set()
            else:
                new_names = {m.name for m in self.program.methods}
                changed = {
                    m.name
                    for m in self.program.methods
                    if old_program is None
                    or m.name not in old_names
                    or old_program.slice(old_program.method(m.name).body_span)
                    != self.program.slice(m.body_span)
                }
                self.dirty = (self.dirty | changed) & new_names
                self.excluded &= new_names
                self._rebind_entries(old_program, changed)
            self.updated = time.time()
            return {"source_rev": self.rev, "dirty": sorted(self.dirty), "mode": self.mode}

    # -- idle trigger -------------------------------------------------

    def idle_trigger(self, idle_ms: int) -> bool:
        """Start analysis of the dirty methods if the client has been quiet
        long enough and there is anything to do."""
        with self._lock:
            if idle_ms < self.idle_threshold_ms:
                return False
            if self.mode != "idle" or not self.dirty or self.program is None:
                return False
            scope = {"methods": sorted(self.dirty)}
        try:
            self.analyze(scope)
        except ServiceError:
            return False  # lost a race with another request; not an error
        return True


def _thread_runner(fn: Callable[[], None]) -> threading.Thread:
    thread = threading.Thread(target=fn, daemon=True)
    thread.start()
    return thread


def inline_runner(fn: Callable[[], None]) -> None:
    """Run the analysis synchronously; deterministic tests use this."""
    fn()
    return None


class JobManager:
    """In-memory job registry. A custom runner makes analysis synchronous
    for tests; the default runs it on a daemon thread."""

    def __init__(self, runner: Optional[Callable] = None):
        self._runner = runner
        self._jobs: dict[str, Job] = {}
        self._lock = threading.Lock()

    def create_job(self, source: str, oracle_spec, **kwargs) -> Job:
        job_id = uuid.uuid4().hex[:12]
        job = Job(job_id, source, oracle_spec, runner=self._runner, **kwargs)
        with self._lock:
            self._jobs[job_id] = job
        return job

    def get(self, job_id: str) -> Job:
        with self._lock:
            job = self._jobs.get(job_id)
        if job is None:
            raise ServiceError(404, "unknown_job", f"no such job: {job_id}")
        return job

    def jobs(self) -> list[Job]:
        with self._lock:
            return list(self._jobs.values())


# ---------------------------------------------------------------------------
# HTTP layer
# ---------------------------------------------------------------------------

def create_app(manager: Optional[JobManager] = None):
    """Build the FastAPI app around a JobManager (a fresh one by default)."""
    from fastapi import FastAPI, Request
    from fastapi.middleware.cors import CORSMiddleware
    from fastapi.responses import JSONResponse

    manager = manager or JobManager()
    app = FastAPI(title="dead-annot service", docs_url=None, redoc_url=None)
    app.state.manager = manager
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(ServiceError)
    async def _service_error(_request, exc: ServiceError):
        return JSONResponse(exc.payload(), status_code=exc.status)

    async def _body(request: Request) -> dict:
        try:
            payload = await request.json()
        except Exception:  # noqa: BLE001 - malformed client input
            raise ServiceError(422, "bad_json", "request body must be a JSON object") from None
        if not isinstance(payload, dict):
            raise ServiceError(422, "bad_json", "request body must be a JSON object")
        return payload

    @app.post("/jobs")
    async def create_job(request: Request):
        payload = await _body(request)
        if "source" not in payload or "oracle" not in payload:
            raise ServiceError(422, "bad_request", "body needs source and oracle")
        kwargs = {}
        if "file_name" in payload:
            kwargs["file_name"] = str(payload["file_name"])
        if "idle_threshold_ms" in payload:
            kwargs["idle_threshold_ms"] = int(payload["idle_threshold_ms"])
        if "allow_stale_apply" in payload:
            kwargs["allow_stale_apply"] = bool(payload["allow_stale_apply"])
        job = manager.create_job(str(payload["source"]), payload["oracle"], **kwargs)
        return {"id": job.id, "mode": job.mode, "source_rev": job.rev}

    @app.get("/jobs/{job_id}")
    async def get_job(job_id: str):
        return manager.get(job_id).snapshot()

    @app.post("/jobs/{job_id}/analyze", status_code=202)
    async def analyze(job_id: str, request: Request):
        job = manager.get(job_id)
        payload = await _body(request) if await request.body() else {}
        job.analyze(payload.get("scope", "all"))
        return {"mode": job.mode}

    @app.post("/jobs/{job_id}/cancel")
    async def cancel(job_id: str):
        return {"mode": manager.get(job_id).cancel()}

    @app.post("/jobs/{job_id}/apply")
    async def apply(job_id: str, request: Request):
        job = manager.get(job_id)
        payload = await _body(request)
        if "select" not in payload:
            raise ServiceError(422, "bad_request", "body needs select")
        return job.apply(payload["select"], payload.get("expect_rev"))

    @app.patch("/jobs/{job_id}/source")
    async def patch_source(job_id: str, request: Request):
        job = manager.get(job_id)
        payload = await _body(request)
        if "source" not in payload:
            raise ServiceError(422, "bad_request", "body needs source")
        return job.patch_source(str(payload["source"]), payload.get("expect_rev"))

    @app.post("/jobs/{job_id}/idle")
    async def idle(job_id: str, request: Request):
        job = manager.get(job_id)
        payload = await _body(request)
        if "idle_ms" not in payload:
            raise ServiceError(422, "bad_request", "body needs idle_ms")
        return {"started": job.idle_trigger(int(payload["idle_ms"]))}

    @app.get("/jobs/{job_id}/wait")
    async def wait(job_id: str, timeout_ms: int = 30000):
        return {"mode": manager.get(job_id).wait(timeout_ms / 1000.0)}

    return app


def main(argv: Optional[list[str]] = None) -> None:
    import argparse

    import uvicorn

    parser = argparse.ArgumentParser(description="dead annotation job service")
    parser.add_argument("--host", default="127.0.0.1", help="bind address (default: localhost only)")
    parser.add_argument("--port", type=int, default=8787)
    args = parser.parse_args(argv)
    uvicorn.run(create_app(), host=args.host, port=args.port, log_level="info")


if __name__ == "__main__":
    main()
