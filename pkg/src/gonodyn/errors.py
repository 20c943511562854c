"""Exception hierarchy for gonodyn."""


class GonodynError(Exception):
    """Base class for every error raised by this package."""


class InvalidParams(GonodynError, ValueError):
    pass


class DegenerateRate(GonodynError, ValueError):
    """The female rate ``a`` is 0 or 1, so one sex is absent."""


class InvalidState(GonodynError, ValueError):
    pass


class NotStochastic(GonodynError, ValueError):
    """A heredity tensor failed validation; ``report`` lists every violation."""

    def __init__(self, report):
        self.report = report
        bad = ", ".join(f"({v.i + 1},{v.p + 1})" for v in report.violations[:5])
        more = "" if len(report.violations) <= 5 else f" and {len(report.violations) - 5} more"
        super().__init__(f"heredity tensor is not row-stochastic at {bad}{more}")


class ZeroSexMass(InvalidState):
    """Total female or male mass is zero, the full operator is undefined."""

    def __init__(self, message, step=None):
        self.step = step
        super().__init__(message if step is None else f"{message} (step {step})")


class NotInSa(GonodynError, ValueError):
    pass


class BadPattern(GonodynError, ValueError):
    pass


class HalfForbidden(GonodynError, ValueError):
    pass


class BadPartition(GonodynError, ValueError):
    pass


class IndexOutOfRange(GonodynError, IndexError):
    pass


class NotAFixedPoint(GonodynError, ValueError):
    pass


class WholeIntervalFixed(GonodynError):
    """Raised instead of a root list when every point of [0, a] is fixed."""

    def __init__(self, a):
        self.a = a
        super().__init__(f"identity: every point of [0, {a!r}] is fixed")


class UnknownClaim(GonodynError, KeyError):
    pass
