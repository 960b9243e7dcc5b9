"""Exception types shared across the package."""


class ZonefaultError(Exception):
    """Base class for all package-specific errors."""


class CaseParseError(ZonefaultError):
    """Raised when a case file is malformed or violates model assumptions."""

    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class IslandedGridError(ZonefaultError):
    """Removing lines split the grid into more than one connected component."""


class SingularObservationError(ZonefaultError):
    """An observation cannot be used (e.g. a zero exterior voltage)."""


class InconsistentRecoveryError(ZonefaultError):
    """Detection constraints are infeasible; the recovered voltages or the
    observation do not describe a steady state of any line-removal pattern."""


class ZoneTooLargeError(ZonefaultError):
    """Brute-force enumeration refused: subset count exceeds the cap."""

    def __init__(self, n_lines, cap):
        super().__init__(
            f"zone has {n_lines} internal lines (2^{n_lines} = {2 ** n_lines} "
            f"subsets); cap is {cap} lines -- pass a higher max_lines to override"
        )
        self.n_lines = n_lines
        self.subset_count = 2**n_lines


class CaseSimplificationWarning(UserWarning):
    """Case data dropped to fit the no-shunt, no-tap line model."""
