"""Row selection by thresholding covariance-standardized row norms.

A row j is flagged in one posterior draw when ||B_j Sigma^(-1/2)|| exceeds
the threshold a_n; averaging the flags across retained draws gives the
inclusion probability, and the selected set keeps rows whose probability
clears the cutoff (0.5 by default, the median-probability rule).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cholesky, solve_triangular

from .errors import DomainError, LogicError, NumericalError


def row_scores(b: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """Euclidean norms of the rows of B Sigma^(-1/2).

    Computed through the Cholesky factor of Sigma; the result does not
    depend on which matrix square root is used, since
    ||B_j Sigma^(-1/2)||^2 = B_j Sigma^-1 B_j'.
    """
    b = np.asarray(b, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    try:
        c = cholesky(0.5 * (sigma + sigma.T), lower=True)
    except Exception as exc:
        raise NumericalError("Sigma is not positive definite") from exc
    w = solve_triangular(c, b.T, lower=True)
    return np.sqrt((w * w).sum(axis=0))


def default_threshold(n: int, p: int) -> float:
    """Default selection threshold sqrt(log(p)/n) / (p * log(n)).

    The extra 1/log(n) factor keeps the default strictly below the
    sqrt(log(p)/n)/p scale that the selection theory allows.
    """
    if n < 2:
        raise DomainError("default_threshold requires n >= 2")
    if p < 2:
        raise DomainError("default_threshold requires p >= 2")
    return np.sqrt(np.log(p) / n) / (p * np.log(n))


@dataclass(eq=False)
class SelectionResult:
    """Per-row inclusion probabilities and the thresholded row set."""

    inclusion_probability: np.ndarray
    selected: np.ndarray  # sorted 0-based indices
    threshold: float
    probability_cutoff: float
    field_metadata: dict = field(default_factory=dict)


def select(samples, a_n: float, probability_cutoff: float = 0.5) -> SelectionResult:
    """Apply the row-selection rule to every retained draw and aggregate.

    Parameters
    ----------
    samples : PosteriorSamples
        Retained draws (must be nonempty).
    a_n : float
        Row-score threshold, positive.
    probability_cutoff : float
        Inclusion-probability cutoff in (0, 1); rows with probability
        strictly above it are selected.
    """
    if len(samples) == 0:
        raise LogicError("selection requires a nonempty sample collection")
    if a_n <= 0:
        raise DomainError("a_n must be positive")
    if not 0.0 < probability_cutoff < 1.0:
        raise DomainError("probability_cutoff must lie in (0, 1)")
    m = len(samples)
    p = samples.b.shape[1]
    hits = np.zeros(p)
    for t in range(m):
        hits += row_scores(samples.b[t], samples.sigma[t]) > a_n
    prob = hits / m
    selected = np.flatnonzero(prob > probability_cutoff)
    return SelectionResult(
        inclusion_probability=prob,
        selected=selected,
        threshold=float(a_n),
        probability_cutoff=float(probability_cutoff),
    )
