"""Exception hierarchy shared by the engine modules."""


class QDRError(Exception):
    """Base class for every engine error (CLI exit code 3)."""


class UndeclaredParameter(QDRError):
    pass


class ParseError(QDRError):
    pass


class IncompatibleSetup(QDRError):
    """Operands live on different field counts."""


class WeightOneObstruction(QDRError):
    """A term of dilaton weight 1 sits in the kernel of ``D - 1``."""


class NotExact(QDRError):
    """The input is not a total x-derivative."""


class NotDivisible(QDRError):
    """A term without a factor of hbar was divided by hbar."""


class OddLambdaResidue(QDRError):
    """An odd power of the square root of hbar survived an expansion."""


class TruncationError(QDRError):
    """The requested truncation cannot represent the object."""
