"""Exception taxonomy shared across the package."""
from __future__ import annotations


class FactorLabError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInput(FactorLabError):
    """Malformed or out-of-contract arguments (shapes, NaN/Inf, bad ranges)."""


class NumericalFailure(FactorLabError):
    """An iterative numerical routine failed to converge."""


class SingularMatrix(FactorLabError):
    """A matrix required to be positive definite was (numerically) singular."""


class DegenerateSpectrum(FactorLabError):
    """An eigenvalue spectrum too degenerate for factor-number selection."""


class BlockingInfeasible(FactorLabError):
    """Sample too short to form the requested block partition."""


class PoetInfeasible(FactorLabError):
    """No thresholding constant on the grid gives a positive definite matrix."""


class StudyFailed(FactorLabError):
    """Too many Monte Carlo replications failed to trust the aggregates."""


class DegenerateOracle(FactorLabError):
    """Oracle error denominator is zero; relative errors undefined."""


class DataFormatError(FactorLabError):
    """An input data file exists but cannot be parsed as requested."""
