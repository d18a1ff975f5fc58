"""Monitors with automatic signaling, driven by predicate tags."""

from automon.errors import (
    AutomonError,
    ContractError,
    CorrectnessError,
    DnfTooLarge,
    IncompleteBinding,
    Int64Overflow,
    MissingVariable,
    ParseError,
    PermanentWait,
    PredicateError,
)
from automon.manager import ConditionManager, ConditionRecord, ExhaustiveConditionManager, RecordKind
from automon.monitor import Mechanism, Monitor, MonitorCore, WaitStats, synchronized
from automon.parser import parse, parse_expr
from automon.predicates import (
    DnfPred,
    canonical_key,
    canonicalize,
    classify,
    evaluate,
    globalize,
    normalize_atom,
    to_dnf,
)
from automon.tagging import Tag, TagMode, tag_conjunction, tag_predicate

__all__ = [
    "AutomonError",
    "ConditionManager",
    "ConditionRecord",
    "ContractError",
    "CorrectnessError",
    "DnfPred",
    "DnfTooLarge",
    "ExhaustiveConditionManager",
    "IncompleteBinding",
    "Int64Overflow",
    "Mechanism",
    "MissingVariable",
    "Monitor",
    "MonitorCore",
    "ParseError",
    "PermanentWait",
    "PredicateError",
    "RecordKind",
    "Tag",
    "TagMode",
    "WaitStats",
    "canonical_key",
    "canonicalize",
    "classify",
    "evaluate",
    "globalize",
    "normalize_atom",
    "parse",
    "parse_expr",
    "synchronized",
    "tag_conjunction",
    "tag_predicate",
    "to_dnf",
]
