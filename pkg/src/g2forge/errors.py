"""Exception hierarchy shared by all g2forge modules."""


class G2ForgeError(Exception):
    """Base class for every error raised by g2forge."""


class IncompatibleBase(G2ForgeError):
    """Product of (1+s1 t)^r1 and (1+s2 t)^r2 with distinct s and nonzero powers."""


class DomainError(G2ForgeError, ValueError):
    pass


class SingularMetric(G2ForgeError):
    pass


class NotDerivation(G2ForgeError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class NonDiagonalizable(G2ForgeError):
    pass


class UnstableForm(G2ForgeError):
    pass


class NonSymmetric(G2ForgeError):
    pass


class NonPositiveType(G2ForgeError):
    pass


class InconsistentTau1(G2ForgeError):
    pass


class Tau2NonZero(G2ForgeError):
    pass


class NotOrthonormal(G2ForgeError):
    pass


class UnresolvableStructureFunctions(G2ForgeError):
    pass


class NewtonDiverged(G2ForgeError):
    pass


class ParseError(G2ForgeError):
    pass


class SchemaError(G2ForgeError):
    pass


class JacobiFailed(G2ForgeError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness
