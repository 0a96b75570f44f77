"""Domain errors raised across the package.

Every class derives from DomainError so the CLI can map them to exit code 2.
"""

from __future__ import annotations


class DomainError(Exception):
    """Base class for mathematical precondition failures."""


class DivergentLimit(DomainError):
    def __init__(self, monomial=None, min_exponent=None, msg=None):
        self.monomial = monomial
        self.min_exponent = min_exponent
        super().__init__(msg or f"pole of order {-min_exponent} at monomial {monomial}")


class NotHomogeneousLimit(DomainError):
    def __init__(self, degree, residue):
        self.degree = degree
        self.residue = residue
        super().__init__(f"homogeneous part of degree {degree} does not vanish in the limit: {residue}")


class NonRepresentableScale(DomainError):
    pass


class CongruenceViolation(DomainError):
    def __init__(self, j, msg=None):
        self.j = j
        super().__init__(msg or f"e_{j}(a) and e_{j}(b) are not congruent to the required order")


class DegreeTooLow(DomainError):
    pass


class SpanningSetFailure(DomainError):
    pass


class DuplicateNodes(DomainError):
    pass


class RankViolation(DomainError):
    pass


class FactorMatchFailure(DomainError):
    pass


class UnsupportedRank(DomainError):
    pass


class NotInvariant(DomainError):
    def __init__(self, witness, msg=None):
        self.witness = witness
        super().__init__(msg or f"not fixed by generator {witness}")


class DegreeMismatch(DomainError):
    pass


class NonHomogeneous(DomainError):
    pass


class SizeMismatch(DomainError):
    pass


class InvalidSquare(DomainError):
    pass


class MalformedCircuit(DomainError):
    pass


class OutOfRange(DomainError):
    pass
