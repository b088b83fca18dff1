"""Exception hierarchy shared by the solver, fitting and analysis layers."""


class CptsimError(Exception):
    """Base class for all package errors."""


class DomainError(CptsimError, ValueError):
    """A closed-form expression was evaluated at a point where it is undefined."""


class SolverError(CptsimError):
    """Base class for steady-state solver failures."""


class NonUniqueSteadyState(SolverError):
    """The Liouvillian has more than one null direction (decoupled subspaces)."""


class SingularSystem(SolverError):
    """The bordered linear system could not be factorized."""


class TruncationError(SolverError):
    """No photon cutoff up to the cap satisfied the truncation-adequacy check."""


class FitUnstable(CptsimError):
    """Polynomial design matrix too ill-conditioned for a reliable fit."""


class NoFixedPoint(CptsimError):
    """Self-consistent iteration failed to converge."""


class PeakError(CptsimError):
    """Base class for peak-analysis failures."""


class AmbiguousPeak(PeakError):
    """More than one local maximum inside the analysis window."""


class UnresolvedPeak(PeakError):
    """The maximum sits on the window edge, so its width cannot be measured."""


class NormalizationUndefined(CptsimError):
    """Transmission is identically zero, so it cannot be normalized."""
