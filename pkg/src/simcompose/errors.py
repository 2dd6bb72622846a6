"""Exception hierarchy and violation records.

Every error carries a machine-readable ``code`` and a ``path`` pointing at
the offending element, so the CLI and the HTTP service can surface the same
{code, path, message} triple.
"""

from __future__ import annotations

from dataclasses import dataclass


class SimComposeError(Exception):
    """Base class for all engine errors."""

    code = "ERROR"

    def __init__(self, message: str, path: str = ""):
        super().__init__(message)
        self.message = message
        self.path = path

    def as_document(self) -> dict:
        return {"code": self.code, "path": self.path, "message": self.message}


class DocumentSyntaxError(SimComposeError):
    """Malformed document: bad JSON, missing key, wrong type, bad enum."""

    code = "SYNTAX"


class DanglingReferenceError(SimComposeError):
    """An id reference does not resolve inside the owning class."""

    code = "DANGLING_REF"


class InvariantError(SimComposeError):
    """A structural invariant is violated (see Violation codes)."""

    code = "INVARIANT"

    def __init__(self, message: str, path: str = "", violations: tuple = ()):
        super().__init__(message, path)
        self.violations = violations


class UnknownParamError(SimComposeError):
    code = "UNKNOWN_PARAM"


class TypeMismatchError(SimComposeError):
    code = "TYPE_MISMATCH"


class AxisConflictError(SimComposeError):
    """Same quality-axis id declared with different domains."""

    code = "AXIS_CONFLICT"


class UnitConflictError(SimComposeError):
    """Shared value id with incompatible declarations (unit or variability)."""

    code = "UNIT_CONFLICT"


class BasisIdCollisionError(SimComposeError):
    """Same basis id on both sides with different kind/reference/params."""

    code = "BASIS_ID_COLLISION"


class UnknownModelError(SimComposeError):
    code = "UNKNOWN_MODEL"


class NoPlanError(SimComposeError):
    """Requested data is unreachable from the provided data."""

    code = "NO_PLAN"

    def __init__(self, message: str, blockers: tuple = (), path: str = ""):
        super().__init__(message, path)
        self.blockers = blockers


class ModeSpecMissingError(SimComposeError):
    code = "MODE_SPEC_MISSING"


class UnresolvedParamError(SimComposeError):
    """A scenario parameter binding has no payload at compile time."""

    code = "UNRESOLVED_PARAM"


class MissingPackageError(SimComposeError):
    code = "MISSING_PACKAGE"

    def __init__(self, message: str, missing: tuple = (), path: str = ""):
        super().__init__(message, path)
        self.missing = missing


class SignatureMismatchError(SimComposeError):
    code = "SIGNATURE_MISMATCH"


class MissingInputError(SimComposeError):
    """A workflow's external input has no payload at run time."""

    code = "MISSING_INPUT"


class CycleDetectedError(SimComposeError):
    code = "CYCLE_DETECTED"

    def __init__(self, message: str, cycle: tuple = (), path: str = ""):
        super().__init__(message, path)
        self.cycle = cycle


class DuplicatePackageError(SimComposeError):
    code = "DUPLICATE_PACKAGE"


class UnknownSessionError(SimComposeError):
    code = "UNKNOWN_SESSION"


class NoCompositeError(SimComposeError):
    code = "NO_COMPOSITE"


@dataclass(frozen=True)
class Violation:
    """One validation finding: machine-readable code plus element path."""

    code: str
    path: str
    message: str

    def as_document(self) -> dict:
        return {"code": self.code, "path": self.path, "message": self.message}


# Violation codes emitted by validate_class (kept in one place so tests and
# docs can enumerate them).
DUPLICATE_ID = "DUPLICATE_ID"
EMPTY_BASIS_PARAMS = "EMPTY_BASIS_PARAMS"
DANGLING_VALUE = "DANGLING_VALUE"
DANGLING_BASIS = "DANGLING_BASIS"
QUALITY_AXIS_MISMATCH = "QUALITY_AXIS_MISMATCH"
IN_OUT_OVERLAP = "IN_OUT_OVERLAP"
DANGLING_SCENARIO = "DANGLING_SCENARIO"
DANGLING_PACKAGE = "DANGLING_PACKAGE"
DANGLING_MODEL = "DANGLING_MODEL"
EDGE_CONDITION = "EDGE_CONDITION"
SCENARIO_BINDING = "SCENARIO_BINDING"
