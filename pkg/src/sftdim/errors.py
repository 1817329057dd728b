"""Exception hierarchy.

Symbol indices are 0-based on the attributes and 1-based in messages, to
match the usual ``1..n`` labelling of alphabets.
"""


class SftDimError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(SftDimError, ValueError):
    """Input data violates a structural contract."""


class StrandedSymbol(ValidationError):
    def __init__(self, index: int, kind: str = "row"):
        self.index = index
        self.kind = kind
        super().__init__(f"symbol {index + 1} has an all-zero {kind} in the adjacency matrix")


class BadTheta(ValidationError):
    def __init__(self, theta):
        self.theta = theta
        super().__init__(f"theta must lie strictly between 0 and 1, got {theta!r}")


class SupportMismatch(ValidationError):
    def __init__(self, i: int, j: int, detail: str = ""):
        self.i, self.j = i, j
        msg = f"P[{i + 1},{j + 1}] disagrees with the adjacency support"
        super().__init__(f"{msg}: {detail}" if detail else msg)


class RowSum(ValidationError):
    def __init__(self, i: int, total: float):
        self.i = i
        self.total = total
        super().__init__(f"row {i + 1} of P sums to {total!r}, not 1")


class NotMixing(ValidationError):
    pass


class WordTooShort(ValidationError):
    pass


class NonPositiveFunction(ValidationError):
    pass


class ConfigError(ValidationError):
    """Config document failed validation; ``errors`` lists every problem found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class Infeasible(SftDimError):
    def __init__(self, s_star: float, tol: float):
        self.s_star = s_star
        self.tol = tol
        super().__init__(
            f"Bowen root s*={s_star!r} is below 1/2 (tol {tol:g}); no Markov measure "
            "of any block length reaches entropy/exponent ratio 1/2"
        )


class DegenerateLevelSet(SftDimError):
    pass


class NumericalFailure(SftDimError, ArithmeticError):
    """An iteration did not converge or an internal consistency check failed."""
