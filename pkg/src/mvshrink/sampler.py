"""Blocked Gibbs sampler for row-shrinkage multivariate regression.

Model: Y (n x q) = X (n x p) B (p x q) + E Sigma^(1/2) with iid standard
normal noise rows, row priors B_j | xi_j, Sigma ~ N_q(0, tau * xi_j * Sigma),
local variances xi_j iid from a mixing family, and Sigma inverse-Wishart.

One sweep updates, in fixed order, B -> xi -> zeta -> Sigma:

* B from its matrix-normal conditional, either by Cholesky of the p x p
  precision (cost cubic in p) or by the data-augmentation route that only
  factors an n x n system (cost linear in p), selected by ``fast_path``.
* xi_j from an exact inverse-gamma (student-t), an exact GIG under the
  gamma-gamma augmentation (beta-type families), or a stepping-out slice
  step on log xi (gdp, hib, horseshoe-plus).
* zeta_j (beta-type families only) from its gamma conditional.
* Sigma from the conjugate inverse-Wishart with df nu + n + p.

Identical data, hyperparameters, and config (including seed) reproduce the
retained draws bit for bit.
"""

from __future__ import annotations

import hashlib
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from threadpoolctl import threadpool_limits

from .errors import ConfigError, DataError, DomainError, LogicError, NumericalError
from .gig import gig_rvs
from .priors import (
    MixingFamily,
    default_tau,
    family_spec,
    log_unnormalized_mixing,
)
from .selection import row_scores

_TPBN_KINDS = ("tpbn", "horseshoe", "neg")
_SLICE_KINDS = ("gdp", "hib", "horseshoe-plus")

TINY_TAU_WARNING = 1e-12


def uses_augmentation(family: MixingFamily) -> bool:
    """Beta-type families carry the auxiliary rate vector zeta."""
    return family.kind in _TPBN_KINDS


@dataclass(frozen=True, eq=False)
class RegressionData:
    """Observed design matrix X (n x p) and responses Y (n x q)."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.ascontiguousarray(np.asarray(self.x, dtype=float))
        y = np.ascontiguousarray(np.asarray(self.y, dtype=float))
        if x.ndim != 2 or y.ndim != 2:
            raise DataError("X and Y must be two-dimensional")
        if x.shape[0] != y.shape[0]:
            raise DataError(
                f"X has {x.shape[0]} rows but Y has {y.shape[0]}; row counts must match"
            )
        if not (np.isfinite(x).all() and np.isfinite(y).all()):
            raise DataError("X and Y entries must all be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def q(self) -> int:
        return self.y.shape[1]


@dataclass(frozen=True, eq=False)
class HyperParams:
    """Prior settings: mixing family, global scale, inverse-Wishart (nu, Phi).

    ``tau=None`` means "resolve from (n, p) at fit time" via
    :func:`mvshrink.priors.default_tau`.
    """

    family: MixingFamily
    nu: float
    phi: np.ndarray
    tau: float | None = None

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float)
        if phi.ndim != 2 or phi.shape[0] != phi.shape[1]:
            raise ConfigError("Phi must be a square matrix")
        q = phi.shape[0]
        if self.nu <= q - 1:
            raise DomainError(f"nu must exceed q - 1 = {q - 1}")
        if not np.allclose(phi, phi.T, atol=1e-10):
            raise ConfigError("Phi must be symmetric")
        try:
            cholesky(phi, lower=True)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - scipy raises ValueError
            raise ConfigError("Phi must be positive definite") from exc
        except ValueError as exc:
            raise ConfigError("Phi must be positive definite") from exc
        if self.tau is not None and self.tau <= 0:
            raise DomainError("tau must be positive (or None for auto)")
        object.__setattr__(self, "phi", phi)

    def resolve_tau(self, n: int, p: int) -> float:
        tau = default_tau(n, p) if self.tau is None else float(self.tau)
        if tau < TINY_TAU_WARNING:
            warnings.warn(
                f"global scale tau={tau:.3e} is extremely small; local-scale"
                " updates may mix poorly",
                RuntimeWarning,
                stacklevel=2,
            )
        return tau


@dataclass(frozen=True)
class SamplerConfig:
    """Chain length, retention policy, seed, and update options."""

    iterations: int
    burn_in: int = 0
    thinning: int = 1
    seed: int = 0
    fast_path: str = "auto"  # auto | always | never
    fix_xi: float | None = None

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if not 0 <= self.burn_in < self.iterations:
            raise ConfigError("burn_in must satisfy 0 <= burn_in < iterations")
        if self.thinning < 1:
            raise ConfigError("thinning must be >= 1")
        if self.fast_path not in ("auto", "always", "never"):
            raise ConfigError("fast_path must be one of auto/always/never")
        if self.fix_xi is not None and self.fix_xi <= 0:
            raise ConfigError("fix_xi must be positive")

    @property
    def retained(self) -> int:
        return (self.iterations - self.burn_in) // self.thinning


@dataclass(eq=False)
class ChainState:
    """One sweep's latent state (B, Sigma, xi, zeta, tau)."""

    b: np.ndarray
    sigma: np.ndarray
    xi: np.ndarray
    tau: float
    zeta: np.ndarray | None = None


@dataclass(eq=False)
class PosteriorSamples:
    """Retained post-burn-in states plus run metadata."""

    b: np.ndarray  # (m, p, q)
    sigma: np.ndarray  # (m, q, q)
    xi: np.ndarray  # (m, p)
    tau: float
    zeta: np.ndarray | None = None  # (m, p) for beta-type families
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.b.shape[0]


def config_digest(hp: HyperParams, cfg: SamplerConfig) -> str:
    """Stable digest of the hyperparameters and sampler configuration."""
    parts = [
        family_spec(hp.family),
        "auto" if hp.tau is None else repr(float(hp.tau)),
        repr(float(hp.nu)),
        hashlib.sha256(np.ascontiguousarray(hp.phi).tobytes()).hexdigest(),
        str(cfg.iterations),
        str(cfg.burn_in),
        str(cfg.thinning),
        str(cfg.seed),
        cfg.fast_path,
        "none" if cfg.fix_xi is None else repr(float(cfg.fix_xi)),
    ]
    return hashlib.sha256("|".join(parts).encode()).hexdigest()


# --------------------------------------------------------------------------
# elementary draws


def sample_invwishart(df: float, scale: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draw from the inverse-Wishart IW(df, scale) by Bartlett decomposition."""
    scale = np.asarray(scale, dtype=float)
    q = scale.shape[0]
    if df <= q - 1:
        raise DomainError("inverse-Wishart needs df > q - 1")
    scale = 0.5 * (scale + scale.T)
    try:
        l = cholesky(scale, lower=True)
    except Exception as exc:
        raise NumericalError("inverse-Wishart scale matrix is not positive definite") from exc
    a = np.zeros((q, q))
    idx = np.tril_indices(q, k=-1)
    a[idx] = rng.standard_normal(idx[0].size)
    a[np.diag_indices(q)] = np.sqrt(rng.chisquare(df - np.arange(q)))
    u = solve_triangular(a, l.T, lower=True)  # A^{-1} L^T, so Sigma = U^T U
    return u.T @ u


def _chol_sigma(sigma: np.ndarray) -> np.ndarray:
    try:
        return cholesky(0.5 * (sigma + sigma.T), lower=True)
    except Exception as exc:
        raise NumericalError("Sigma is not positive definite") from exc


def coef_conditional_mean(
    state: ChainState, data: RegressionData, method: str = "auto"
) -> np.ndarray:
    """Deterministic part of the B conditional: (X'X + D^-1)^-1 X'Y.

    ``method`` selects the algebraic route ('naive', 'fast', or 'auto'); the
    two are equal up to rounding.
    """
    d = state.tau * state.xi
    x, y = data.x, data.y
    if _resolve_method(method, data) == "naive":
        a = x.T @ x + np.diag(1.0 / d)
        la = cholesky(0.5 * (a + a.T), lower=True)
        return cho_solve((la, True), x.T @ y)
    g = (x * d) @ x.T + np.eye(data.n)
    lg = cholesky(0.5 * (g + g.T), lower=True)
    return d[:, None] * (x.T @ cho_solve((lg, True), y))


def _resolve_method(method: str, data: RegressionData) -> str:
    if method == "auto":
        return "fast" if data.p > 2 * data.n else "naive"
    if method not in ("naive", "fast"):
        raise ConfigError("method must be auto/naive/fast")
    return method


def sample_b(
    state: ChainState,
    data: RegressionData,
    rng: np.random.Generator,
    method: str = "auto",
) -> np.ndarray:
    """Draw B from its matrix-normal full conditional MN(M, A^-1, Sigma)."""
    if not np.isfinite(state.xi).all() or (state.xi <= 0).any():
        raise NumericalError("xi must be positive and finite")
    d = state.tau * state.xi
    x, y = data.x, data.y
    n, p, q = data.n, data.p, data.q
    c_sigma = _chol_sigma(state.sigma)

    if _resolve_method(method, data) == "naive":
        a = x.T @ x + np.diag(1.0 / d)
        try:
            la = cholesky(0.5 * (a + a.T), lower=True)
        except Exception as exc:
            raise NumericalError("coefficient precision matrix failed to factor") from exc
        mean = cho_solve((la, True), x.T @ y)
        z = rng.standard_normal((p, q))
        return mean + solve_triangular(la.T, z, lower=False) @ c_sigma.T

    # whiten columns, then per-column augmentation: draw u ~ N(0, D),
    # delta ~ N(0, I_n), solve (X D X' + I) w = y_col - X u - delta,
    # and set beta_col = u + D X' w; cost is linear in p.
    y_w = solve_triangular(c_sigma, y.T, lower=True).T
    u = rng.standard_normal((p, q)) * np.sqrt(d)[:, None]
    delta = rng.standard_normal((n, q))
    g = (x * d) @ x.T + np.eye(n)
    try:
        lg = cholesky(0.5 * (g + g.T), lower=True)
    except Exception as exc:
        raise NumericalError("augmented n x n system failed to factor") from exc
    w = cho_solve((lg, True), y_w - x @ u - delta)
    b_w = u + d[:, None] * (x.T @ w)
    return b_w @ c_sigma.T


def sample_sigma(
    state: ChainState,
    data: RegressionData,
    hp: HyperParams,
    rng: np.random.Generator,
    df_bias: float = 0.0,
) -> np.ndarray:
    """Draw Sigma from IW(nu + n + p, Phi + (Y-XB)'(Y-XB) + B'D^-1 B).

    ``df_bias`` deliberately offsets the degrees of freedom; it exists only
    so joint-distribution validation can corrupt the kernel on purpose.
    """
    resid = data.y - data.x @ state.b
    d = state.tau * state.xi
    scale = hp.phi + resid.T @ resid + state.b.T @ (state.b / d[:, None])
    return sample_invwishart(hp.nu + data.n + data.p + df_bias, scale, rng)


def _slice_step_log(log_target, x0: float, rng, width: float = 1.0, max_expand: int = 50, stats=None):
    """One stepping-out slice update on y = log(x); returns the new x."""
    h = lambda y: log_target(math.exp(y)) + y
    y0 = math.log(x0)
    h0 = h(y0)
    if not np.isfinite(h0):
        raise NumericalError("slice sampler started from a zero-density point")
    level = h0 + math.log(1.0 - rng.random())
    left = y0 - width * rng.random()
    right = left + width
    for _ in range(max_expand):
        if h(left) <= level:
            break
        left -= width
        if stats is not None:
            stats["expansions"] += 1
    for _ in range(max_expand):
        if h(right) <= level:
            break
        right += width
        if stats is not None:
            stats["expansions"] += 1
    while True:
        y = left + (right - left) * rng.random()
        if h(y) > level:
            if stats is not None:
                stats["steps"] += 1
            return math.exp(y)
        if stats is not None:
            stats["shrinks"] += 1
        if y < y0:
            left = y
        else:
            right = y


def row_precision_quadratic(state: ChainState) -> np.ndarray:
    """chi_j = B_j Sigma^-1 B_j' / tau for every row, via one triangular solve."""
    c_sigma = _chol_sigma(state.sigma)
    w = solve_triangular(c_sigma, state.b.T, lower=True)
    return (w * w).sum(axis=0) / state.tau


def sample_xi(
    state: ChainState,
    hp: HyperParams,
    rng: np.random.Generator,
    slice_stats: dict | None = None,
) -> np.ndarray:
    """Draw every local variance xi_j from its full conditional.

    The target is pi(xi) * xi^(-q/2) * exp(-chi_j / (2 xi)) with
    chi_j = B_j Sigma^-1 B_j' / tau.  student-t is conjugate
    (inverse-gamma); beta-type families are GIG under the zeta
    augmentation; the remaining families take a slice step on log xi.
    """
    family = hp.family
    q = state.sigma.shape[0]
    chi = row_precision_quadratic(state)
    if not np.isfinite(chi).all():
        raise NumericalError("non-finite row quadratic form in xi update")

    if family.kind == "student-t":
        a = family.a
        return (a + 0.5 * chi) / rng.gamma(a + 0.5 * q, 1.0, chi.size)

    if uses_augmentation(family):
        if state.zeta is None:
            raise LogicError("beta-type families need the zeta augmentation in the state")
        u = 0.5 if family.kind == "horseshoe" else (1.0 if family.kind == "neg" else family.u)
        lam = u - 0.5 * q
        psi = 2.0 * state.zeta
        out = np.empty_like(chi)
        ok = (chi > 0.0) | (lam > 0.0)
        if ok.any():
            out[ok] = gig_rvs(lam, psi[ok], chi[ok], rng)
        if (~ok).any():
            # chi = 0 with lam <= 0: the GIG draw is undefined, take a slice
            # step on the same target from the current value
            for j in np.flatnonzero(~ok):
                zeta_j = state.zeta[j]
                log_t = lambda x: (lam - 1.0) * math.log(x) - zeta_j * x
                out[j] = _slice_step_log(log_t, state.xi[j], rng, stats=slice_stats)
        return out

    # gdp / hib / horseshoe-plus: slice sampling on log xi
    out = np.empty_like(chi)
    for j, (chi_j, xi_j) in enumerate(zip(chi, state.xi)):
        def log_t(x, c=chi_j):
            val = float(log_unnormalized_mixing(family, x)) - 0.5 * q * math.log(x)
            return val - 0.5 * c / x if c > 0 else val
        out[j] = _slice_step_log(log_t, xi_j, rng, stats=slice_stats)
    return out


def sample_zeta(state: ChainState, hp: HyperParams, rng: np.random.Generator) -> np.ndarray:
    """Draw the auxiliary rates zeta_j ~ Gamma(a + u, rate 1 + xi_j)."""
    family = hp.family
    if not uses_augmentation(family):
        raise LogicError(f"{family.kind} has no zeta augmentation")
    if family.kind == "horseshoe":
        u, a = 0.5, 0.5
    elif family.kind == "neg":
        u, a = 1.0, family.a
    else:
        u, a = family.u, family.a
    return rng.gamma(a + u, 1.0 / (1.0 + state.xi))


def initial_state(data: RegressionData, hp: HyperParams, tau: float, fix_xi=None) -> ChainState:
    """Prior-centered start: B = 0, Sigma at the prior mode, unit local scales."""
    q = data.q
    sigma0 = hp.phi / (hp.nu + q + 1.0)
    xi0 = np.full(data.p, 1.0 if fix_xi is None else float(fix_xi))
    zeta0 = np.ones(data.p) if uses_augmentation(hp.family) else None
    return ChainState(
        b=np.zeros((data.p, q)), sigma=sigma0, xi=xi0, tau=tau, zeta=zeta0
    )


def gibbs_sweep(
    state: ChainState,
    data: RegressionData,
    hp: HyperParams,
    rng: np.random.Generator,
    method: str = "auto",
    fix_xi: float | None = None,
    sigma_df_bias: float = 0.0,
    slice_stats: dict | None = None,
) -> ChainState:
    """One full sweep in fixed order B -> xi -> zeta -> Sigma."""
    b = sample_b(state, data, rng, method=method)
    work = ChainState(b=b, sigma=state.sigma, xi=state.xi, tau=state.tau, zeta=state.zeta)
    if fix_xi is None:
        work.xi = sample_xi(work, hp, rng, slice_stats=slice_stats)
        if uses_augmentation(hp.family):
            work.zeta = sample_zeta(work, hp, rng)
    work.sigma = sample_sigma(work, data, hp, rng, df_bias=sigma_df_bias)
    return work


def run_chain(data: RegressionData, hp: HyperParams, cfg: SamplerConfig) -> PosteriorSamples:
    """Run the blocked Gibbs sampler and return the retained states.

    Raises
    ------
    ConfigError
        On dimension mismatches between ``data`` and ``hp``.
    NumericalError
        If any update fails; the message carries the sweep index.
    """
    if hp.phi.shape[0] != data.q:
        raise ConfigError(
            f"Phi is {hp.phi.shape[0]}x{hp.phi.shape[0]} but Y has q={data.q} columns"
        )
    tau = hp.resolve_tau(data.n, data.p)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    method = "fast" if cfg.fast_path == "always" else (
        "never" if cfg.fast_path == "never" else "auto"
    )
    method = {"fast": "fast", "never": "naive", "auto": "auto"}[method]

    state = initial_state(data, hp, tau, cfg.fix_xi)
    m = cfg.retained
    keep_zeta = uses_augmentation(hp.family) and cfg.fix_xi is None
    b_out = np.empty((m, data.p, data.q))
    sigma_out = np.empty((m, data.q, data.q))
    xi_out = np.empty((m, data.p))
    zeta_out = np.empty((m, data.p)) if keep_zeta else None
    slice_stats = {"steps": 0, "expansions": 0, "shrinks": 0}

    start = time.perf_counter()
    kept = 0
    # the factors here are small enough that BLAS thread-pool handoffs cost
    # far more than they save; parallelism belongs at the replicate level
    with threadpool_limits(limits=1):
        for t in range(1, cfg.iterations + 1):
            try:
                state = gibbs_sweep(
                    state, data, hp, rng,
                    method=method, fix_xi=cfg.fix_xi, slice_stats=slice_stats,
                )
            except NumericalError as exc:
                raise NumericalError(f"sweep {t} failed: {exc}") from exc
            if t > cfg.burn_in and (t - cfg.burn_in) % cfg.thinning == 0 and kept < m:
                b_out[kept] = state.b
                sigma_out[kept] = state.sigma
                xi_out[kept] = state.xi
                if keep_zeta:
                    zeta_out[kept] = state.zeta
                kept += 1
    wall = time.perf_counter() - start

    meta = {
        "seed": cfg.seed,
        "config_digest": config_digest(hp, cfg),
        "iterations": cfg.iterations,
        "burn_in": cfg.burn_in,
        "thinning": cfg.thinning,
        "retained": m,
        "tau": tau,
        "family": family_spec(hp.family),
        "wall_seconds": wall,
        "slice_steps": slice_stats["steps"],
        "slice_expansions": slice_stats["expansions"],
        "slice_shrinks": slice_stats["shrinks"],
    }
    return PosteriorSamples(
        b=b_out, sigma=sigma_out, xi=xi_out, tau=tau, zeta=zeta_out, meta=meta
    )


@dataclass(eq=False)
class PosteriorSummary:
    """Element-wise posterior means, central credible intervals, row scores."""

    b_mean: np.ndarray
    sigma_mean: np.ndarray
    b_lower: np.ndarray
    b_upper: np.ndarray
    sigma_lower: np.ndarray
    sigma_upper: np.ndarray
    row_score_mean: np.ndarray
    level: float


def posterior_summary(samples: PosteriorSamples, level: float = 0.95) -> PosteriorSummary:
    """Summarize retained draws; interval endpoints are order statistics."""
    m = len(samples)
    if m == 0:
        raise LogicError("cannot summarize an empty sample collection")
    if not 0.0 < level < 1.0:
        raise DomainError("level must lie in (0, 1)")
    alpha = 1.0 - level
    # round before floor/ceil so level=0.9 yields rank 0.05*(m-1) exactly
    lo_idx = int(math.floor(round(0.5 * alpha * (m - 1), 9)))
    hi_idx = int(math.ceil(round((1.0 - 0.5 * alpha) * (m - 1), 9)))

    b_sorted = np.sort(samples.b, axis=0)
    s_sorted = np.sort(samples.sigma, axis=0)
    scores = np.stack(
        [row_scores(samples.b[t], samples.sigma[t]) for t in range(m)], axis=0
    )
    return PosteriorSummary(
        b_mean=samples.b.mean(axis=0),
        sigma_mean=samples.sigma.mean(axis=0),
        b_lower=b_sorted[lo_idx],
        b_upper=b_sorted[hi_idx],
        sigma_lower=s_sorted[lo_idx],
        sigma_upper=s_sorted[hi_idx],
        row_score_mean=scores.mean(axis=0),
        level=level,
    )
