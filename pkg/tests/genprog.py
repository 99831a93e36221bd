"""Randomized MiniDfy programs with per-method dependency formulas.

Programs mix asserts (with conjunctions), loops with invariants and
decreases clauses, lemma calls, calc blocks (default-op, explicit-op, and
header-op shapes), and wild-card decreases. Formulas only ever mention ids
of their own method, so methods stay independent: that is the regime the
call-count identities and the method-level cache assume.
"""

import random
from dataclasses import dataclass

from deadannot import oracle as orc
from deadannot import source_model as sm


@dataclass
class Instance:
    seed: int
    source: str
    program: sm.AnnotatedProgram
    formulas: dict[str, orc.Formula]
    sidecar: str

    def oracle(self) -> orc.DependencyOracle:
        """A fresh oracle (own call counter) over this instance's formulas."""
        return orc.DependencyOracle(dict(self.formulas))


def render_formula(f: orc.Formula) -> str:
    if f.op == "const":
        return "true" if f.value else "false"
    if f.op == "var":
        return f.name
    if f.op == "not":
        return "!" + render_formula(f.args[0])
    joiner = " & " if f.op == "and" else " | "
    return "(" + joiner.join(render_formula(a) for a in f.args) + ")"


def make_sidecar(formulas: dict[str, orc.Formula]) -> str:
    lines = ["# generated dependency directives"]
    for name in sorted(formulas):
        lines.append(f"method {name} = {render_formula(formulas[name])}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Source generation
# ---------------------------------------------------------------------------

class _MethodGen:
    def __init__(self, rng: random.Random, name: str, budget: int):
        self.rng = rng
        self.name = name
        self.budget = budget  # whole-annotation targets left to spend
        self.lines: list[str] = []
        self.fresh = 0

    def _var(self) -> str:
        self.fresh += 1
        return f"v{self.fresh}"

    def emit(self) -> str:
        rng = self.rng
        header = [f"method {self.name}(n: int) returns (r: int)"]
        if rng.random() < 0.4:
            header.append("  requires n >= 0")
        if rng.random() < 0.3:
            header.append("  ensures r == r")
        wildcard = self.budget > 0 and rng.random() < 0.15
        if wildcard:
            header.append("  decreases *")
            self.budget -= 1
        elif self.budget > 0 and rng.random() < 0.3:
            header.append("  decreases n")
            self.budget -= 1
        body: list[str] = ["{", "  r := 0;"]
        while self.budget > 0:
            pick = rng.random()
            if pick < 0.35:
                body.append(f"  {self._assert()}")
            elif pick < 0.55:
                body.extend(self._loop(wildcard))
            elif pick < 0.7:
                body.append("  Helper(n);")
                self.budget -= 1
            elif pick < 0.85:
                body.extend(self._calc())
            else:
                body.append(f"  r := r + {rng.randint(0, 9)};")
        if rng.random() < 0.3:
            body.append(f"  r := r + {rng.randint(0, 3)};")
        body.append("}")
        return "\n".join(header + body) + "\n"

    def _expr(self) -> str:
        rng = self.rng
        return rng.choice([
            "n >= 0", "n + 1 > n", "r >= 0", "r == r", "0 <= 1",
            f"n + {rng.randint(0, 5)} >= n", f"r + {rng.randint(1, 3)} > r",
        ])

    def _assert(self) -> str:
        n_conj = self.rng.randint(1, 3)
        self.budget -= 1
        return "assert " + " && ".join(self._expr() for _ in range(n_conj)) + ";"

    def _loop(self, wildcard: bool) -> list[str]:
        rng = self.rng
        i = self._var()
        specs = []
        n_inv = min(self.budget, rng.randint(1, 2))
        for _ in range(n_inv):
            n_conj = rng.randint(1, 2)
            specs.append("    invariant " + " && ".join(
                rng.choice([f"{i} >= 0", f"{i} <= n || n < 0", "r >= 0"])
                for _ in range(n_conj)
            ))
            self.budget -= 1
        if wildcard:
            # the wild-card has to be used consistently, so loops repeat it;
            # it joins the method's grouped target and costs no extra budget
            specs.append("    decreases *")
        elif self.budget > 0 and rng.random() < 0.6:
            specs.append(f"    decreases n - {i}")
            self.budget -= 1
        return [
            f"  var {i} := 0;",
            f"  while {i} < n",
            *specs,
            "  {",
            f"    {i} := {i} + 1;",
            "  }",
        ]

    def _calc(self) -> list[str]:
        rng = self.rng
        self.budget -= 1
        shape = rng.choice(["default", "explicit", "header"])
        exprs = ["n + 0", "0 + n", "n", "n * 1"][: rng.randint(2, 4)]
        out = ["  calc == {" if shape == "header" else "  calc {"]
        for k, e in enumerate(exprs):
            if k > 0:
                if shape == "explicit":
                    if rng.random() < 0.5:
                        out.append("    == { Helper(n); }")
                    else:
                        out.append("    ==")
                elif rng.random() < 0.4:
                    out.append("    { Helper(n); }")
            out.append(f"    {e};")
        out.append("  }")
        return out


def gen_source(rng: random.Random, n_methods: int, max_targets: int) -> str:
    decls = [
        "lemma Helper(n: int)\n  ensures n + 0 == n\n{\n}\n",
    ]
    for i in range(n_methods):
        budget = rng.randint(0, max_targets)
        decls.append(_MethodGen(rng, f"M{i}", budget).emit())
    return "\n".join(decls)


# ---------------------------------------------------------------------------
# Formula generation
# ---------------------------------------------------------------------------

def method_ids(program: sm.AnnotatedProgram, name: str, parts: bool = True) -> list[str]:
    """Target and (optionally) sub-part ids owned by one method."""
    ids: list[str] = []
    for t in sm.removal_targets(program.method(name)):
        ids.append(t.id)
        if parts and len(t.annotations) == 1:
            ids.extend(p.id for p in t.annotations[0].parts)
    return ids


def gen_formula(
    rng: random.Random, ids: list[str], monotone: bool, prefer_parts: bool = False
) -> orc.Formula:
    if not ids:
        return orc.TRUE
    pool = ids
    if prefer_parts:
        part_ids = [i for i in ids if "." in i]
        if part_ids:
            pool = part_ids
    k = rng.randint(1, min(4, len(pool)))
    leaves = [orc.var(v) for v in rng.sample(pool, k)]
    if not monotone:
        leaves = [orc.fnot(f) if rng.random() < 0.35 else f for f in leaves]
    while len(leaves) > 1:
        take = rng.randint(2, min(3, len(leaves)))
        group, leaves = leaves[:take], leaves[take:]
        combine = orc.fand if rng.random() < 0.6 else orc.for_
        leaves.append(combine(*group))
    return leaves[0]


def translate_formulas(
    old_program: sm.AnnotatedProgram,
    edits: sm.EditSet,
    new_program: sm.AnnotatedProgram,
    formulas: dict[str, orc.Formula],
) -> dict[str, orc.Formula]:
    """Re-express formulas over the program that results from applying the
    edits. Ids of deleted annotations/parts become `false` (they can never
    be present again); surviving ones are renamed to their re-parsed ids,
    which shift because ids are positional. A single surviving conjunct
    collapses into its (now partless) annotation id."""
    deletions = edits.sorted()

    def alive(span: sm.Span) -> bool:
        return orc._span_survives(old_program, deletions, span)

    varmap: dict[str, str] = {}
    for m in old_program.methods:
        m2 = new_program.method(m.name)
        kept = [a for a in m.annotations if alive(a.span)]
        if len(kept) != len(m2.annotations):
            raise AssertionError(f"annotation drift in {m.name}")
        for a_old, a_new in zip(kept, m2.annotations):
            varmap[a_old.id] = a_new.id
            for role in ("c", "s", "h"):
                kept_parts = [p for p in a_old.parts if p.role == role and alive(p.span)]
                new_parts = [p for p in a_new.parts if p.role == role]
                if role == "c" and not new_parts and len(kept_parts) == 1:
                    varmap[kept_parts[0].id] = a_new.id
                    continue
                if len(kept_parts) != len(new_parts):
                    raise AssertionError(f"part drift in {a_old.id}")
                for po, pn in zip(kept_parts, new_parts):
                    varmap[po.id] = pn.id

    def tr(f: orc.Formula) -> orc.Formula:
        if f.op == "const":
            return f
        if f.op == "var":
            new = varmap.get(f.name)
            return orc.var(new) if new is not None else orc.FALSE
        if f.op == "not":
            return orc.fnot(tr(f.args[0]))
        combine = orc.fand if f.op == "and" else orc.for_
        return combine(*(tr(a) for a in f.args))

    return {name: tr(f) for name, f in formulas.items()}


def gen_instance(
    seed: int,
    monotone: bool = True,
    n_methods: tuple[int, int] = (1, 6),
    max_targets: int = 8,
    part_level: bool = False,
    directive_prob: float = 0.8,
) -> Instance:
    rng = random.Random(seed)
    source = gen_source(rng, rng.randint(*n_methods), max_targets)
    program = sm.parse(source, f"<gen-{seed}>")
    formulas: dict[str, orc.Formula] = {}
    for m in program.methods:
        if m.kind != "method":
            continue
        ids = method_ids(program, m.name, parts=True)
        if ids and rng.random() < directive_prob:
            formulas[m.name] = gen_formula(rng, ids, monotone, prefer_parts=part_level)
    oracle = orc.DependencyOracle(formulas)
    oracle.validate_against(program)  # generator bug if this ever raises
    return Instance(seed, source, program, formulas, make_sidecar(formulas))
