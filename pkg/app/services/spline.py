"""
Clamped B-spline bases over the spectrum and the geometry vectors they induce.
"""
import logging

import numpy as np
from scipy.interpolate import BSpline

from app.core.errors import InsufficientDataError
from app.models.spectral import DescriptorField, Eigensystem, Provenance, SplineBasis

logger = logging.getLogger(__name__)


def clamped_knots(lower: float, upper: float, count: int, degree: int) -> np.ndarray:
    """count + degree + 1 knots: uniform breakpoints with both ends repeated degree + 1 times."""
    if count < degree + 1:
        raise ValueError(f"a degree-{degree} basis needs at least {degree + 1} functions, got {count}")
    if not upper > lower:
        raise ValueError("basis span must have positive length")
    breakpoints = np.linspace(lower, upper, count - degree + 1)
    return np.concatenate((np.full(degree, lower), breakpoints, np.full(degree, upper)))


def make_basis(lower: float, upper: float, count: int, degree: int = 3, log_domain: bool = True) -> SplineBasis:
    knots = clamped_knots(lower, upper, count, degree)
    return SplineBasis(knots=knots, degree=degree, count=count, lower=lower, upper=upper, log_domain=log_domain)


def spline_basis(eig: Eigensystem, count: int, degree: int = 3, log_domain: bool = True) -> SplineBasis:
    """Basis spanning [log lambda_2, log lambda_K] (or the raw eigenvalue range when not log_domain)."""
    if log_domain:
        positive = eig.eigenvalues[eig.positive_mask]
        if len(positive) < 2:
            raise InsufficientDataError(
                f"need at least 2 positive eigenvalues for a spline basis, got {len(positive)}",
                hint="increase spectral.k",
            )
        lower, upper = float(np.log(positive[0])), float(np.log(positive[-1]))
    else:
        lower, upper = float(eig.eigenvalues[0]), float(eig.eigenvalues[-1])
    basis = make_basis(lower, upper, count, degree, log_domain)
    logger.debug("Spline basis: %d functions of degree %d over [%.4g, %.4g]", count, degree, lower, upper)
    return basis


def evaluate(basis: SplineBasis, eigenvalues: np.ndarray) -> np.ndarray:
    """(len(eigenvalues), count) table of beta_m(lambda); rows outside the span are zero."""
    u = basis.coordinates(np.atleast_1d(eigenvalues))
    inside = (u >= basis.lower) & (u <= basis.upper)
    table = np.zeros((len(u), basis.count))
    if inside.any():
        spline = BSpline(basis.knots, np.eye(basis.count), basis.degree, extrapolate=True)
        table[inside] = spline(np.clip(u[inside], basis.lower, basis.upper))
    # round-off can leave tiny negative values near knots
    return np.maximum(table, 0.0)


def geometry_vectors(eig: Eigensystem, basis: SplineBasis) -> DescriptorField:
    """g_m(x) = sum_k beta_m(lambda_k) phi_k(x)^2."""
    beta = evaluate(basis, eig.eigenvalues)
    return DescriptorField(eig.squared() @ beta, Provenance.GEOVEC)
