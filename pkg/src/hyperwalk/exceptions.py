"""Exception hierarchy shared by every module of the package."""


class HyperwalkError(Exception):
    """Base class. ``code`` is a short machine-readable tag used by the CLI."""

    code = "error"

    def to_dict(self):
        return {"error": self.code, "message": str(self)}


class InvalidWordError(HyperwalkError, ValueError):
    code = "invalid-word"


class BackendMismatchError(HyperwalkError, ValueError):
    code = "backend-mismatch"


class BallEscapeError(HyperwalkError):
    """An element left the validated ball of a ball-table backend."""

    code = "ball-escape"


class SmallCancellationError(HyperwalkError, ValueError):
    code = "small-cancellation"


class MeasureError(HyperwalkError, ValueError):
    """A step measure violates one of the walk hypotheses.

    ``violation`` is one of ``nonpositive``, ``total``, ``non-symmetric``,
    ``zero-identity`` or ``non-generating``.
    """

    code = "invalid-measure"

    def __init__(self, violation, message):
        super().__init__(message)
        self.violation = violation

    def to_dict(self):
        d = super().to_dict()
        d["violation"] = self.violation
        return d


class SupportGuardError(HyperwalkError):
    code = "support-guard"


class GuardError(HyperwalkError, ValueError):
    """A documented precondition (radius guard, hypothesis, window) failed."""

    code = "guard"


class BoundViolation(HyperwalkError, AssertionError):
    """A verified inequality failed. Carries the offending witnesses."""

    code = "violation"

    def __init__(self, inequality, message, witnesses=None):
        super().__init__(message)
        self.inequality = inequality
        self.witnesses = witnesses or {}

    def to_dict(self):
        d = super().to_dict()
        d["inequality"] = self.inequality
        d["witnesses"] = self.witnesses
        return d
