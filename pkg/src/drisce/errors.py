"""Exception and warning types shared across the package."""


class ShapeMismatch(ValueError):
    """Operand shapes are not conformable for the requested operation."""


class ColumnMismatch(ShapeMismatch):
    pass


class RankMismatch(ShapeMismatch):
    pass


class InvalidMode(ValueError):
    pass


class ZeroMatrix(ValueError):
    pass


class ZeroTruth(ValueError):
    pass


class DimError(ValueError):
    """A system dimension violates a structural requirement."""


class IndexOutOfRange(IndexError):
    pass


class RankDeficientWarning(UserWarning):
    pass


class IdentifiabilityWarning(UserWarning):
    pass
