"""Exception types shared across the engine."""


class JetcalcError(Exception):
    """Base class for all engine errors."""


class DimensionMismatch(JetcalcError):
    pass


class NotAPartition(JetcalcError):
    pass


class OrderOverflow(JetcalcError):
    pass


class DegreeError(JetcalcError):
    pass


class UnknownAtom(JetcalcError):
    pass


class MissingPartial(JetcalcError):
    pass


class UnboundAtom(JetcalcError):
    pass


class DomainError(JetcalcError):
    pass


class NonInvertible(JetcalcError):
    pass


class UnknownDescriptor(JetcalcError):
    pass


class ModeError(JetcalcError):
    pass


class NotLinear(JetcalcError):
    pass


class MissingLift(JetcalcError):
    pass


class NotASymmetry(JetcalcError):
    pass


class CertificateFailure(JetcalcError):
    pass


class ConstraintUnsatisfiable(JetcalcError):
    pass


class DeadlineExceeded(JetcalcError):
    pass


class ParseError(JetcalcError):
    def __init__(self, message, line=None, column=None, expected=None):
        self.line = line
        self.column = column
        self.expected = tuple(expected) if expected else ()
        loc = f" at line {line}, column {column}" if line is not None else ""
        exp = f" (expected one of: {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"{message}{loc}{exp}")


class SemanticError(JetcalcError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        loc = f" at line {line}, column {column}" if line is not None else ""
        super().__init__(f"{message}{loc}")
