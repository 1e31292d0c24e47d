"""Numerical verification of the prior-mass conditions behind row shrinkage.

For a concrete (family, tau, n, p, q, s0) configuration this module
computes the contraction-rate scale, the two conditions on the marginal
row prior g_tau (near-origin concentration and a density floor on a ball),
finite-sample surrogates of the design/covariance assumptions, the
closed-form volume integral used by the tail bound, and the flatness
quantity l_n behind the selection rule.  Everything here is report-only:
no verdict is fabricated where the theory leaves a constant unspecified.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .errors import DomainError, NumericalError
from .priors import (
    DIVERGES,
    MixingFamily,
    family_spec,
    log_mixing_density,
    marginal_diverges_at_origin,
    marginal_prior_density,
    sample_mixing,
    tail_exponent,
    theoretical_tau_max,
)
from .selection import row_scores


def contraction_rate(n: int, p: int, q: int, s0: int) -> float:
    """max of sqrt(s0 log p / n), sqrt(q^2 log n / n), sqrt(q s0 log n / n)."""
    if n < 2 or p < 2:
        raise DomainError("contraction_rate requires n >= 2 and p >= 2")
    if q < 1 or s0 < 1:
        raise DomainError("contraction_rate requires q >= 1 and s0 >= 1")
    return math.sqrt(
        max(s0 * math.log(p), q * q * math.log(n), q * s0 * math.log(n)) / n
    )


def tail_mass(family: MixingFamily, tau: float, q: int, a_n: float) -> float:
    """P(||x|| >= a_n) under the marginal row prior g_tau.

    Given xi the squared norm is tau*xi times a chi-square with q degrees
    of freedom, so the mass is the one-dimensional integral of
    pi(xi) * Q(q/2, a_n^2 / (2 tau xi)) with Q the regularized upper
    incomplete gamma function.
    """
    if tau <= 0 or a_n <= 0:
        raise DomainError("tau and a_n must be positive")
    if q < 1:
        raise DomainError("q must be >= 1")
    c = a_n * a_n / (2.0 * tau)

    def integrand(z: float) -> float:
        log_pi = float(log_mixing_density(family, c * z))
        if log_pi < -700.0:
            return 0.0
        return math.exp(log_pi) * special.gammaincc(q / 2.0, 1.0 / z) * c

    lo, err_lo = integrate.quad(integrand, 0.0, 1.0, epsabs=0.0, epsrel=1e-10, limit=400)
    hi, err_hi = integrate.quad(integrand, 1.0, np.inf, epsabs=0.0, epsrel=1e-10, limit=400)
    value, err = lo + hi, err_lo + err_hi
    if not np.isfinite(value) or value < 0 or (value > 0 and err > 1e-6 * value):
        raise NumericalError(
            f"tail-mass quadrature failed for {family_spec(family)}"
            f" (value={value!r}, abserr={err!r})"
        )
    return value


def tail_mass_monte_carlo(
    family: MixingFamily, tau: float, q: int, a_n: float, draws: int, rng
) -> tuple[float, float]:
    """Monte-Carlo cross-check of :func:`tail_mass`: (estimate, standard error)."""
    xi = sample_mixing(family, draws, rng)
    r2 = tau * xi * rng.chisquare(q, draws)
    hit = r2 >= a_n * a_n
    est = float(hit.mean())
    se = float(hit.std(ddof=1) / math.sqrt(draws))
    return est, se


def check_tail_condition(
    family: MixingFamily, tau: float, q: int, a_n: float, p: int, u: float
) -> tuple[float, bool]:
    """Tail mass together with the verdict mass <= p^-(1+u)."""
    if u <= 0:
        raise DomainError("u must be positive")
    if p < 2:
        raise DomainError("p must be >= 2")
    mass = tail_mass(family, tau, q, a_n)
    return mass, mass <= float(p) ** -(1.0 + u)


def check_density_floor(
    family: MixingFamily, tau: float, q: int, m0: float, p: int
) -> tuple[float, float]:
    """(log g_tau(m0), -log g_tau(m0) / log p).

    The infimum of g_tau over the ball of radius m0 sits on the boundary
    because the marginal is radially non-increasing.  The ratio is left to
    the caller to compare against a ceiling; no verdict is fixed here.
    """
    if m0 <= 0:
        raise DomainError("m0 must be positive")
    if p < 2:
        raise DomainError("p must be >= 2")
    value = marginal_prior_density(family, tau, q, m0)
    log_density = math.log(value) if value > 0 else -math.inf
    return log_density, -log_density / math.log(p)


def volume_integral(d: int, k: float, a: float) -> float:
    """Closed form of the integral of ||x||^-(d+k) over ||x|| >= a in R^d:

        2 pi^(d/2) a^(-k) / (k Gamma(d/2))
    """
    if d < 1 or k <= 0 or a <= 0:
        raise DomainError("need d >= 1, k > 0, a > 0")
    return 2.0 * math.pi ** (d / 2.0) * a ** (-k) / (k * math.gamma(d / 2.0))


def flatness_ln(
    family: MixingFamily,
    tau: float,
    q: int,
    b0_rows: np.ndarray,
    sigma: np.ndarray,
    c0: float,
    eps_n: float,
) -> float:
    """max over rows of sup/inf of g_tau over balls around B_j Sigma^(-1/2).

    The marginal is radial and non-increasing, so on a ball of radius
    c0*eps_n around a center at distance ||B_j Sigma^(-1/2)|| the extremes
    sit at the nearest and farthest radii.  A ball that reaches the origin
    of a family whose marginal diverges there yields +inf.
    """
    if c0 <= 0 or eps_n <= 0:
        raise DomainError("c0 and eps_n must be positive")
    rows = np.atleast_2d(np.asarray(b0_rows, dtype=float))
    norms = row_scores(rows, sigma)
    radius = c0 * eps_n
    worst = 1.0
    for dist in norms:
        near = max(dist - radius, 0.0)
        far = dist + radius
        g_far = marginal_prior_density(family, tau, q, far)
        if near == 0.0 and marginal_diverges_at_origin(family, q):
            return math.inf
        g_near = marginal_prior_density(family, tau, q, near)
        if g_far <= 0.0:
            return math.inf
        worst = max(worst, g_near / g_far)
    return worst


@dataclass(eq=False)
class AssumptionReport:
    """Finite-sample surrogates for the sparsity/design/covariance assumptions.

    Flags report point checks at the given (n, p, q, s0); the growth-rate
    statements themselves are asymptotic, so the ratios are included and
    no asymptotic claim is made.
    """

    a1: bool                    # s0 log p < n
    a2_1: bool                  # max |X_ij| <= 1
    a2_3: bool                  # min eigenvalue ratio over probed subsets > 0
    a3_1: bool                  # q <= log p (1 + tol)
    a3_2: bool                  # q^2 log n < n
    a3_3: bool                  # Sigma0 eigenvalues bounded away from 0
    a2_3_min_ratio: float       # min over probed S of lambda_min(X_S'X_S)/n
    sigma0_eig_min: float
    sigma0_eig_max: float
    ratios: dict = field(default_factory=dict)

    def flags(self) -> dict:
        return {
            "A1": self.a1, "A2_1": self.a2_1, "A2_3": self.a2_3,
            "A3_1": self.a3_1, "A3_2": self.a3_2, "A3_3": self.a3_3,
        }


def check_assumptions(
    x: np.ndarray,
    b0: np.ndarray,
    sigma0: np.ndarray,
    s0: int,
    subset_budget: int = 200,
    rng: np.random.Generator | None = None,
    support: np.ndarray | None = None,
    a3_1_tol: float = 0.0,
) -> AssumptionReport:
    """Evaluate the finite-sample assumption surrogates on concrete inputs.

    The design eigenvalue check probes the true support (taken from the
    nonzero rows of ``b0`` unless ``support`` is given) plus
    ``subset_budget`` random column subsets of size at most 2*s0; an
    exhaustive subset scan is combinatorially infeasible.
    """
    x = np.asarray(x, dtype=float)
    b0 = np.asarray(b0, dtype=float)
    sigma0 = np.asarray(sigma0, dtype=float)
    n, p = x.shape
    q = sigma0.shape[0]
    rng = rng or np.random.default_rng(0)
    if support is None:
        support = np.flatnonzero(np.abs(b0).sum(axis=1) > 0)

    subsets = []
    if support.size:
        subsets.append(np.asarray(support))
    max_size = max(1, min(2 * s0, p))
    for _ in range(subset_budget):
        size = int(rng.integers(1, max_size + 1))
        subsets.append(rng.choice(p, size=size, replace=False))

    min_ratio = math.inf
    for s in subsets:
        xs = x[:, s]
        gram = xs.T @ xs
        min_ratio = min(min_ratio, float(np.linalg.eigvalsh(gram).min()) / n)

    eig0 = np.linalg.eigvalsh(0.5 * (sigma0 + sigma0.T))
    log_p, log_n = math.log(p), math.log(n)
    return AssumptionReport(
        a1=s0 * log_p < n,
        a2_1=bool(np.abs(x).max() <= 1.0 + 1e-12),
        a2_3=min_ratio > 1e-12,
        a3_1=q <= log_p * (1.0 + a3_1_tol),
        a3_2=q * q * log_n < n,
        a3_3=bool(eig0.min() > 0),
        a2_3_min_ratio=min_ratio,
        sigma0_eig_min=float(eig0.min()),
        sigma0_eig_max=float(eig0.max()),
        ratios={
            "s0_logp_over_n": s0 * log_p / n,
            "q2_logn_over_n": q * q * log_n / n,
            "q_over_logp": q / log_p,
            "max_abs_x": float(np.abs(x).max()),
        },
    )


@dataclass(eq=False)
class ConditionReport:
    """Collected numerical verdicts for one prior configuration."""

    family: str
    tau: float
    n: int
    p: int
    q: int
    s0: int
    u: float
    epsilon_n: float
    a_n: float
    tail_mass: float
    tail_bound: float
    tail_pass: bool
    m0: float
    floor_log_density: float
    floor_ratio: float
    floor_ceiling: float
    floor_ok: bool
    assumptions: AssumptionReport | None = None
    l_n: float | None = None
    c0: float | None = None
    min_signal_ratio: float | None = None


def build_condition_report(
    family: MixingFamily,
    tau: float,
    n: int,
    p: int,
    q: int,
    s0: int,
    u: float = 0.5,
    m0: float = 1.0,
    a_n: float | None = None,
    floor_ceiling: float = 10.0,
    x: np.ndarray | None = None,
    b0: np.ndarray | None = None,
    sigma0: np.ndarray | None = None,
    c0: float | None = None,
    subset_budget: int = 200,
    seed: int = 0,
) -> ConditionReport:
    """Assemble the full report; a_n defaults to epsilon_n / p."""
    eps = contraction_rate(n, p, q, s0)
    if a_n is None:
        a_n = eps / p
    mass, ok = check_tail_condition(family, tau, q, a_n, p, u)
    log_g, ratio = check_density_floor(family, tau, q, m0, p)
    assumptions = None
    if x is not None and b0 is not None and sigma0 is not None:
        assumptions = check_assumptions(
            x, b0, sigma0, s0, subset_budget=subset_budget,
            rng=np.random.default_rng(seed),
        )
    l_n = None
    min_signal = None
    if b0 is not None and sigma0 is not None:
        support = np.flatnonzero(np.abs(np.asarray(b0)).sum(axis=1) > 0)
        if support.size:
            rows = np.asarray(b0)[support]
            min_signal = float(np.linalg.norm(rows, axis=1).min() / eps)
            if c0 is not None:
                l_n = flatness_ln(family, tau, q, rows, np.asarray(sigma0), c0, eps)
    return ConditionReport(
        family=family_spec(family),
        tau=float(tau),
        n=n, p=p, q=q, s0=s0, u=u,
        epsilon_n=eps,
        a_n=float(a_n),
        tail_mass=mass,
        tail_bound=float(p) ** -(1.0 + u),
        tail_pass=ok,
        m0=float(m0),
        floor_log_density=log_g,
        floor_ratio=ratio,
        floor_ceiling=floor_ceiling,
        floor_ok=math.isfinite(ratio) and ratio < floor_ceiling,
        assumptions=assumptions,
        l_n=l_n,
        c0=c0,
        min_signal_ratio=min_signal,
    )


def report_items(report: ConditionReport) -> list[tuple[str, str]]:
    """Flatten a report into ordered (key, value) string pairs for emission."""

    def fmt(v) -> str:
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, float):
            return f"{v:.10g}"
        return str(v)

    items = [
        ("family", report.family),
        ("tau", fmt(report.tau)),
        ("n", fmt(report.n)),
        ("p", fmt(report.p)),
        ("q", fmt(report.q)),
        ("s0", fmt(report.s0)),
        ("u", fmt(report.u)),
        ("epsilon_n", fmt(report.epsilon_n)),
        ("a_n", fmt(report.a_n)),
        ("tail_mass", fmt(report.tail_mass)),
        ("tail_bound", fmt(report.tail_bound)),
        ("tail_pass", fmt(report.tail_pass)),
        ("m0", fmt(report.m0)),
        ("floor_log_density", fmt(report.floor_log_density)),
        ("floor_ratio", fmt(report.floor_ratio)),
        ("floor_ceiling", fmt(report.floor_ceiling)),
        ("floor_ok", fmt(report.floor_ok)),
    ]
    if report.assumptions is not None:
        a = report.assumptions
        for key, val in a.flags().items():
            items.append((f"assumption_{key}", fmt(val)))
        items.append(("a2_3_min_eigen_ratio", fmt(a.a2_3_min_ratio)))
        items.append(("sigma0_eig_min", fmt(a.sigma0_eig_min)))
        items.append(("sigma0_eig_max", fmt(a.sigma0_eig_max)))
        for key, val in sorted(a.ratios.items()):
            items.append((key, fmt(val)))
    if report.min_signal_ratio is not None:
        items.append(("min_signal_ratio", fmt(report.min_signal_ratio)))
    if report.l_n is not None:
        items.append(("c0", fmt(report.c0)))
        items.append(("l_n", fmt(report.l_n)))
    return items
