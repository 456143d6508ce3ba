"""Exception hierarchy shared by the solvers."""


class SimdiagError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(SimdiagError, ValueError):
    pass


class NonFiniteError(SimdiagError, ArithmeticError):
    """An entry became NaN or infinite."""


class SpectrumCollision(SimdiagError, ArithmeticError):
    """Two diagonal slots are too close for the linearized solve.

    The gap threshold is relative: ``2**(-prec/2) * max(1, max|sigma|)``.
    The partially built trace, when there is one, is attached as ``trace``.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class DeterminantCollapse(SpectrumCollision):
    """Some 2x2 determinant of paired spectra vanished (two-matrix solver)."""


class RankDeficient(SimdiagError, ArithmeticError):
    pass


class PositiveRadicand(SimdiagError, ValueError):
    """Arrowhead nodes do not interlace the roots of the polynomial."""


class ZeroColumn(SimdiagError, ZeroDivisionError):
    pass
