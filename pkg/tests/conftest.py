"""Shared fixtures and helpers for the test suite.

The golden directory holds small named cases, each a MiniDfy source with a
dependency sidecar (and, where minimization changes the text, the expected
minimized output). The corpus directory holds parse/print round-trip
material covering the grammar corners.
"""

import os

import pytest

from deadannot import minimizer as mz
from deadannot import oracle as orc
from deadannot import source_model as sm

TESTS_DIR = os.path.dirname(os.path.abspath(__file__))
GOLDEN_DIR = os.path.join(TESTS_DIR, "golden")
CORPUS_DIR = os.path.join(TESTS_DIR, "corpus")

# Cases with a .golden.dfy expected output.
GOLDEN_CASES = ("fib", "binary_search", "max", "set_inter", "peano")


def read_text(path: str) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def golden_paths(name: str) -> tuple[str, str, str]:
    return (
        os.path.join(GOLDEN_DIR, name + ".dfy"),
        os.path.join(GOLDEN_DIR, name + ".deps"),
        os.path.join(GOLDEN_DIR, name + ".golden.dfy"),
    )


def load_case(name: str) -> tuple[sm.AnnotatedProgram, orc.DependencyOracle]:
    """Fresh program + oracle for a golden-directory case."""
    src_path, deps_path, _ = golden_paths(name)
    program = sm.parse(read_text(src_path), os.path.basename(src_path))
    oracle = orc.load_dependency_oracle(deps_path, program)
    return program, oracle


def run_minimize(program, oracle, algorithm="combined", passes="whole_then_split", **kwargs):
    """Preflight, minimize, and hand back (job, edits, report)."""
    orc.preflight(oracle, program)
    job = mz.MinimizationJob(program, oracle, algorithm=algorithm, passes=passes, **kwargs)
    edits, report = mz.minimize(job)
    return job, edits, report


def absent_ids(program: sm.AnnotatedProgram, edits: sm.EditSet) -> set[str]:
    """Ids (annotations, parts, operators) deleted by the edit set."""
    assign = orc.presence_assignment(program, edits)
    return {name for name, present in assign.items() if not present}


def roundtrip_files() -> list[str]:
    """Every MiniDfy source the suite owns: corpus plus all golden inputs
    and expected outputs (those must parse and print cleanly too)."""
    paths = [
        os.path.join(CORPUS_DIR, f)
        for f in sorted(os.listdir(CORPUS_DIR))
        if f.endswith(".dfy")
    ]
    paths += [
        os.path.join(GOLDEN_DIR, f)
        for f in sorted(os.listdir(GOLDEN_DIR))
        if f.endswith(".dfy")
    ]
    return paths


@pytest.fixture
def pqr():
    return load_case("pqr")


@pytest.fixture
def golden_dir():
    return GOLDEN_DIR


@pytest.fixture
def corpus_dir():
    return CORPUS_DIR
