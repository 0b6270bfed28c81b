"""Exception hierarchy shared by all modules."""


class LatticeARError(ValueError):
    """Base class; carries an optional ``witness`` payload for reports."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class InvalidGraph(LatticeARError):
    pass


class IsolatedNode(LatticeARError):
    pass


class ComplexSpectrum(LatticeARError):
    pass


class DegenerateSpectrum(LatticeARError):
    pass


class NotPositiveDefinite(LatticeARError):
    pass


class AsymmetryViolation(LatticeARError):
    pass


class SingularSystem(LatticeARError):
    pass


class InvalidParameter(LatticeARError):
    pass


class RootDiagonalZero(LatticeARError):
    pass


class InvalidPlane(LatticeARError):
    pass


class UndefinedFullness(LatticeARError):
    pass


class UndefinedSparseness(LatticeARError):
    pass


class NonConvergence(LatticeARError):
    def __init__(self, message, best=None):
        super().__init__(message, witness=None)
        self.best = best


class ParseError(LatticeARError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class InconsistentDataset(LatticeARError):
    pass
