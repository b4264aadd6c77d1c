"""Exception hierarchy.

``ValidationError`` covers bad inputs (the CLI maps it to exit code 2) and
``NumericalError`` covers failures that only show up mid-computation, such as
a degenerate bootstrap resample (exit code 3).
"""


class RankbootError(Exception):
    pass


class ValidationError(RankbootError, ValueError):
    pass


class NumericalError(RankbootError, ArithmeticError):
    pass
