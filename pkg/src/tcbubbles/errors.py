"""Exception types shared across the package."""

from __future__ import annotations


class TcBubblesError(Exception):
    """Base class for all package-specific failures."""


class InvalidTree(TcBubblesError):
    """Event tree violates a structural invariant (probabilities, depth, prices)."""


class ShapeMismatch(TcBubblesError):
    """Per-node data does not line up with the tree it claims to describe."""


class NumericalFailure(TcBubblesError):
    """Float-mode linear programming lost more accuracy than the tolerance allows."""


class NoCps(TcBubblesError):
    """No consistent price system exists at the requested transaction cost.

    ``certificate`` carries a Farkas ray of the feasibility program when one
    is available (infeasible system), otherwise None (feasible only on the
    boundary where the candidate measure fails equivalence).
    """

    def __init__(self, message: str, certificate=None):
        super().__init__(message)
        self.certificate = certificate


class NoEmm(TcBubblesError):
    """No equivalent martingale measure exists on the relevant (sub)tree."""

    def __init__(self, message: str, certificate=None):
        super().__init__(message)
        self.certificate = certificate


class BandViolation(TcBubblesError):
    """A shadow price left the bid-ask band [(1-lam)S, (1+lam)S]."""


class NotMartingale(TcBubblesError):
    """A proposed measure fails the martingale identities it was claimed to satisfy."""


class BadConfig(TcBubblesError):
    """Scenario or fixture input is malformed (unknown keys, bad values)."""


class EmptySample(TcBubblesError):
    """An estimator was asked to summarize zero samples."""


class CertificationFailure(TcBubblesError):
    """An internal cross-check failed; indicates an engine bug, not bad input."""


class EmbeddingFailure(TcBubblesError):
    """Circulant embedding produced a negative spectral value beyond tolerance."""
