"""Exception hierarchy shared by every automon module."""


class AutomonError(Exception):
    """Base class for all library errors."""


class PredicateError(AutomonError):
    """A predicate is malformed or cannot be processed."""


class ParseError(PredicateError):
    def __init__(self, message, text=None, pos=None):
        if text is not None and pos is not None:
            message = f"{message} at column {pos}: {text!r}"
        super().__init__(message)
        self.text = text
        self.pos = pos


class DnfTooLarge(PredicateError):
    """DNF conversion exceeded the configured conjunction limit."""


class IncompleteBinding(PredicateError):
    def __init__(self, missing):
        self.missing = tuple(sorted(missing))
        super().__init__("no binding for local variable(s): " + ", ".join(self.missing))


class PermanentWait(PredicateError):
    """The globalized predicate is constantly false; waiting on it would never end."""


class MissingVariable(PredicateError, KeyError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"unknown shared variable {name!r}")

    def __str__(self):
        return self.args[0]


class Int64Overflow(PredicateError, OverflowError):
    """An integer left the signed 64-bit range."""


class ContractError(AutomonError, RuntimeError):
    """An API was used outside its calling contract (lock ownership, reentrancy, ...)."""


class CorrectnessError(AutomonError):
    """A benchmark run failed its correctness digest."""
