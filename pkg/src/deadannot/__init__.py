"""Dead-annotation removal for MiniDfy programs."""

from .source_model import (
    AnnotatedProgram,
    Annotation,
    EditSet,
    InvalidEditError,
    MethodRecord,
    RemovalTarget,
    SourceError,
    Span,
    SubPart,
    apply_edits,
    next_annotation,
    parse,
    print_source,
    removal_targets,
    split_conjuncts,
)

__all__ = [
    "AnnotatedProgram",
    "Annotation",
    "EditSet",
    "InvalidEditError",
    "MethodRecord",
    "RemovalTarget",
    "SourceError",
    "Span",
    "SubPart",
    "apply_edits",
    "next_annotation",
    "parse",
    "print_source",
    "removal_targets",
    "split_conjuncts",
]

__version__ = "0.1.0"
