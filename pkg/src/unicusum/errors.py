"""Exception hierarchy shared by every module."""


class ChangeDetectionError(ValueError):
    """Base class for all package errors."""


class SupportMismatch(ChangeDetectionError):
    """A symbol has positive probability under one measure and zero under the other."""


class EmptyPrefix(ChangeDetectionError):
    pass


class DeltaTooLarge(ChangeDetectionError):
    pass


class EmptyWindow(ChangeDetectionError):
    """No admissible drift penalty exists for the given distributions."""

    def __init__(self, lo, hi):
        super().__init__(f"lambda window is empty: lo={lo:.6g} >= hi={hi:.6g}")
        self.lo = lo
        self.hi = hi


class LambdaOutsideWindow(ChangeDetectionError):
    def __init__(self, lam, lo, hi):
        super().__init__(
            f"lambda={lam:.6g} outside admissible window ({lo:.6g}, {hi:.6g})")
        self.lam = lam
        self.window = (lo, hi)


class ZeroReferenceProb(ChangeDetectionError):
    """Observed a symbol that the reference distribution assigns zero probability."""


class TooLarge(ChangeDetectionError):
    pass


class InfeasibleKappa(ChangeDetectionError):
    pass


class ConfigError(ChangeDetectionError):
    pass


class ParseError(ConfigError):
    pass


class ValidationError(ConfigError):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
