"""Polynomial-tailed scale-mixture prior families and their global scale.

Each family is a mixing density pi(xi) on the local variance xi > 0 of a
Gaussian scale mixture.  Supported families (CLI spelling in parentheses):

    ==============  ==========================================  ==========
    family          unnormalized pi(xi)                         parameters
    ==============  ==========================================  ==========
    student-t       xi^(-a-1) exp(-a/xi)                        a
    tpbn            xi^(u-1) (1+xi)^(-a-u)                      u, a
    horseshoe       tpbn with u = a = 1/2                       --
    neg             tpbn with u = 1                             a
    gdp             exponential mixed over a gamma rate         a, eta
    hib             exponentially tilted, rescaled tpbn         u, a, s, phi2
    horseshoe-plus  xi^(-1/2) (xi-1)^(-1) log xi                --
    ==============  ==========================================  ==========

Every family decomposes as pi(xi) = K xi^(-r) L(xi) with tail exponent
r > 1, a fixed constant K, and a slowly varying factor L that stays inside
the closed-form envelope reported by :func:`slowly_varying_bounds` (for
horseshoe-plus the envelope holds on xi >= 1).  For hib the constant K is
pinned by matching the unnormalized density, which gives
K = 1/(max(1, phi2) * exp(s)) for every xi, so the envelope prefactor
absorbs all (s, phi2) dependence.

Densities returned by :func:`mixing_density` are normalized.  Families
without a closed-form normalizer (gdp, hib, horseshoe-plus) are normalized
once by adaptive quadrature and the constant is cached per parameter set.

The row-level marginal g_tau (a q-variate spherical density obtained by
mixing N(0, tau*xi*I_q) over xi) is evaluated by :func:`marginal_prior_density`.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import ConfigError, DomainError, NormalizationError, NumericalError

KINDS = ("student-t", "tpbn", "horseshoe", "neg", "gdp", "hib", "horseshoe-plus")

_REQUIRED_KEYS = {
    "student-t": ("a",),
    "tpbn": ("u", "a"),
    "horseshoe": (),
    "neg": ("a",),
    "gdp": ("a", "eta"),
    "hib": ("u", "a", "s", "phi2"),
    "horseshoe-plus": (),
}


class Diverges:
    """Marker returned where a marginal density value is not integrable."""

    def __repr__(self) -> str:  # pragma: no cover - cosmetic
        return "DIVERGES"


DIVERGES = Diverges()


@dataclass(frozen=True)
class MixingFamily:
    """A mixing-density family tag plus its shape parameters.

    Construct through :func:`student_t`, :func:`tpbn`, :func:`horseshoe`,
    :func:`neg`, :func:`gdp`, :func:`hib`, :func:`horseshoe_plus`, or
    :func:`parse_family`.
    """

    kind: str
    a: float | None = None
    u: float | None = None
    eta: float | None = None
    s: float | None = None
    phi2: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown family kind {self.kind!r}; valid: {KINDS}")
        for name in _REQUIRED_KEYS[self.kind]:
            value = getattr(self, name)
            if value is None or not np.isfinite(value):
                raise DomainError(f"{self.kind} requires finite parameter {name!r}")
            if name != "s" and value <= 0:
                raise DomainError(f"{self.kind} parameter {name!r} must be positive")


def student_t(a: float) -> MixingFamily:
    return MixingFamily("student-t", a=float(a))


def tpbn(u: float, a: float) -> MixingFamily:
    return MixingFamily("tpbn", u=float(u), a=float(a))


def horseshoe() -> MixingFamily:
    return MixingFamily("horseshoe")


def neg(a: float) -> MixingFamily:
    return MixingFamily("neg", a=float(a))


def gdp(a: float, eta: float) -> MixingFamily:
    return MixingFamily("gdp", a=float(a), eta=float(eta))


def hib(u: float, a: float, s: float, phi2: float) -> MixingFamily:
    return MixingFamily("hib", u=float(u), a=float(a), s=float(s), phi2=float(phi2))


def horseshoe_plus() -> MixingFamily:
    return MixingFamily("horseshoe-plus")


def parse_family(spec: str) -> MixingFamily:
    """Parse a family specification string such as ``tpbn:u=0.5,a=0.5``.

    The grammar is ``<kind>`` for parameter-free families and
    ``<kind>:key=value,key=value`` otherwise.  Unknown kinds or keys raise
    :class:`~mvshrink.errors.ConfigError` listing the valid choices.
    """
    text = spec.strip()
    kind, _, tail = text.partition(":")
    kind = kind.strip()
    if kind not in KINDS:
        raise ConfigError(f"unknown family {kind!r}; valid families: {', '.join(KINDS)}")
    required = _REQUIRED_KEYS[kind]
    params: dict[str, float] = {}
    if tail.strip():
        for item in tail.split(","):
            key, eq, value = item.partition("=")
            key = key.strip()
            if not eq or key not in required:
                raise ConfigError(
                    f"bad parameter {item.strip()!r} for family {kind!r}; "
                    f"valid keys: {', '.join(required) if required else '(none)'}"
                )
            try:
                params[key] = float(value)
            except ValueError:
                raise ConfigError(f"parameter {key!r} has non-numeric value {value.strip()!r}")
    missing = [k for k in required if k not in params]
    if missing:
        raise ConfigError(f"family {kind!r} is missing parameters: {', '.join(missing)}")
    return MixingFamily(kind, **params)


def family_spec(family: MixingFamily) -> str:
    """Canonical specification string; inverse of :func:`parse_family`."""
    required = _REQUIRED_KEYS[family.kind]
    if not required:
        return family.kind
    return family.kind + ":" + ",".join(f"{k}={getattr(family, k):g}" for k in required)


def _shape_ua(family: MixingFamily) -> tuple[float, float]:
    """Effective (u, a) for the beta-type families."""
    if family.kind == "horseshoe":
        return 0.5, 0.5
    if family.kind == "neg":
        return 1.0, family.a
    return family.u, family.a


def tail_exponent(family: MixingFamily) -> float:
    """Polynomial tail exponent r in pi(xi) = K xi^(-r) L(xi)."""
    if family.kind == "horseshoe-plus":
        return 1.25
    if family.kind == "horseshoe":
        return 1.5
    return family.a + 1.0


def _tail_constant(family: MixingFamily) -> float:
    if family.kind == "gdp":
        return 2.0 ** (family.a - 1.0) * math.gamma(family.a + 1.0)
    if family.kind == "hib":
        return 1.0 / (max(1.0, family.phi2) * math.exp(family.s))
    if family.kind == "horseshoe-plus":
        return 4.0
    return 1.0


# --- the GDP slowly varying integral -------------------------------------
#
# I(c) = int_0^inf t^a exp(-t - c sqrt(t)) dt with c = eta*sqrt(2/xi).
# The integrand has a sqrt cusp at t = 0, so fixed Gauss rules lose all
# accuracy for large c; the substitutions below make it smooth for any c.


def _gdp_integral(a: float, c: float) -> float:
    if c >= 1.0:
        f = lambda z: z ** (2.0 * a + 1.0) * np.exp(-z - (z / c) ** 2)
        value, _ = integrate.quad(f, 0.0, np.inf, epsabs=0.0, epsrel=1e-13, limit=300)
        return 2.0 * c ** (-(2.0 * a + 2.0)) * value
    f = lambda s: s ** (2.0 * a + 1.0) * np.exp(-s * s - c * s)
    value, _ = integrate.quad(f, 0.0, np.inf, epsabs=0.0, epsrel=1e-13, limit=300)
    return 2.0 * value


def _hsp_log_ratio(xi: np.ndarray) -> np.ndarray:
    """log(xi)/(xi - 1), with the removable singularity at xi = 1 filled in."""
    xi = np.asarray(xi, dtype=float)
    d = xi - 1.0
    near = np.abs(d) < 1e-6
    safe = np.where(near, 2.0, xi)
    out = np.log(safe) / (safe - 1.0)
    # series log(1+d)/d = 1 - d/2 + d^2/3 - ...
    return np.where(near, 1.0 - d / 2.0 + d * d / 3.0, out)


def _slow_varying(family: MixingFamily, xi: np.ndarray) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    if family.kind == "student-t":
        return np.exp(-family.a / xi)
    if family.kind in ("tpbn", "horseshoe", "neg"):
        u, a = _shape_ua(family)
        return np.exp((a + u) * (np.log(xi) - np.log1p(xi)))
    if family.kind == "hib":
        u, a, s, phi2 = family.u, family.a, family.s, family.phi2
        base = np.exp((a + u) * (np.log(xi) - np.log1p(xi)))
        tilt = np.exp(-s / (1.0 + xi)) / (phi2 + (1.0 - phi2) / (1.0 + xi))
        return max(1.0, phi2) * math.exp(s) * base * tilt
    if family.kind == "gdp":
        flat = np.atleast_1d(xi).ravel()
        vals = np.array(
            [_gdp_integral(family.a, family.eta * math.sqrt(2.0 / x)) for x in flat]
        ) / math.gamma(family.a + 1.0)
        return vals.reshape(np.shape(xi)) if np.ndim(xi) else float(vals[0])
    # horseshoe-plus
    return xi**0.75 * _hsp_log_ratio(xi) / 4.0


def _check_xi(xi) -> np.ndarray:
    arr = np.asarray(xi, dtype=float)
    if not np.isfinite(arr).all() or (arr <= 0).any():
        raise DomainError("xi must be finite and positive")
    return arr


def tail_decomposition(family: MixingFamily, xi):
    """Return (r, L(xi)) so that K * xi^(-r) * L(xi) is the unnormalized density.

    ``xi`` may be a scalar or an array; the tail exponent r is a scalar.
    """
    arr = _check_xi(xi)
    r = tail_exponent(family)
    value = _slow_varying(family, arr)
    return r, (float(value) if np.ndim(xi) == 0 else value)


def slowly_varying_bounds(family: MixingFamily, xi):
    """Closed-form (lower, upper) envelope for the slowly varying factor L.

    The caller asserts lower <= L(xi) <= upper; for horseshoe-plus the
    envelope is valid on xi >= 1, and for hib it requires s >= 0.
    """
    arr = _check_xi(xi)
    if family.kind == "student-t":
        lower, upper = 1.0 - family.a / arr, np.ones_like(arr)
    elif family.kind in ("tpbn", "horseshoe", "neg"):
        u, a = _shape_ua(family)
        lower, upper = 1.0 - (a + u) / arr, np.ones_like(arr)
    elif family.kind == "hib":
        lower = 1.0 - (family.a + family.u) / arr
        upper = np.full_like(arr, max(family.phi2, 1.0 / family.phi2) * math.exp(family.s))
    elif family.kind == "gdp":
        slope = math.sqrt(2.0) * family.eta * math.exp(
            special.gammaln(family.a + 1.5) - special.gammaln(family.a + 1.0)
        )
        lower, upper = 1.0 - slope / np.sqrt(arr), np.ones_like(arr)
    else:  # horseshoe-plus
        lower, upper = arr**-0.25 / 4.0, np.ones_like(arr)
    if np.ndim(xi) == 0:
        return float(lower), float(upper)
    return lower, upper


def log_unnormalized_mixing(family: MixingFamily, xi) -> np.ndarray:
    """log of K * xi^(-r) * L(xi) (the unnormalized mixing density)."""
    arr = _check_xi(xi)
    r = tail_exponent(family)
    with np.errstate(divide="ignore"):
        log_l = np.log(_slow_varying(family, arr))
    return math.log(_tail_constant(family)) - r * np.log(arr) + log_l


_NORMALIZER_CACHE: dict[MixingFamily, float] = {}
_NORMALIZER_LOCK = threading.Lock()


def _normalizer(family: MixingFamily) -> float:
    """Integral of the unnormalized density; closed form where available."""
    if family.kind == "student-t":
        return math.exp(special.gammaln(family.a) - family.a * math.log(family.a))
    if family.kind in ("tpbn", "horseshoe", "neg"):
        u, a = _shape_ua(family)
        return math.exp(special.betaln(u, a))
    if family in _NORMALIZER_CACHE:
        return _NORMALIZER_CACHE[family]
    with _NORMALIZER_LOCK:
        if family in _NORMALIZER_CACHE:
            return _NORMALIZER_CACHE[family]
        f = lambda x: math.exp(log_unnormalized_mixing(family, x))
        lo, err_lo = integrate.quad(f, 0.0, 1.0, epsabs=0.0, epsrel=1e-12, limit=400)
        hi, err_hi = integrate.quad(f, 1.0, np.inf, epsabs=0.0, epsrel=1e-12, limit=400)
        value, err = lo + hi, err_lo + err_hi
        if not np.isfinite(value) or value <= 0 or err > 1e-10 * value:
            raise NormalizationError(
                f"normalizer quadrature for {family_spec(family)} did not converge "
                f"(value={value!r}, abserr={err!r})"
            )
        _NORMALIZER_CACHE[family] = value
        return value


def mixing_density(family: MixingFamily, xi):
    """Normalized mixing density pi(xi), vectorized over xi.

    Parameters
    ----------
    family : MixingFamily
    xi : array_like
        Positive evaluation points.

    Returns
    -------
    float or ndarray
    """
    arr = _check_xi(xi)
    value = np.exp(log_unnormalized_mixing(family, arr)) / _normalizer(family)
    return float(value) if np.ndim(xi) == 0 else value


def log_mixing_density(family: MixingFamily, xi):
    """log of :func:`mixing_density` (computed without underflow in the tail)."""
    return log_unnormalized_mixing(family, xi) - math.log(_normalizer(family))


def sample_mixing(family: MixingFamily, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``size`` iid variates from the mixing density.

    Exact constructions are used for every family: inverse-gamma for
    student-t, the gamma-gamma ladder for the beta-type families, an
    exponential with gamma-mixed rate for gdp, products of half-Cauchy
    draws for horseshoe-plus, and beta-proposal rejection for hib.
    """
    if family.kind == "student-t":
        return family.a / rng.gamma(family.a, 1.0, size)
    if family.kind in ("tpbn", "horseshoe", "neg"):
        u, a = _shape_ua(family)
        zeta = rng.gamma(a, 1.0, size)
        return rng.gamma(u, 1.0 / zeta, size)
    if family.kind == "gdp":
        lam = rng.gamma(2.0 * family.a, 1.0 / family.eta, size)
        return rng.exponential(2.0 / lam**2, size)
    if family.kind == "horseshoe-plus":
        t1 = np.abs(rng.standard_cauchy(size))
        t2 = np.abs(rng.standard_cauchy(size))
        return (t1 * t2) ** 2
    # hib: kappa = 1/(1+xi) has density prop. to
    # kappa^(a-1) (1-kappa)^(u-1) exp(-s kappa) / (phi2 + (1-phi2) kappa)
    u, a, s, phi2 = family.u, family.a, family.s, family.phi2
    bound = max(1.0, math.exp(-s)) * max(1.0, 1.0 / phi2)
    out = np.empty(size)
    todo = np.arange(size)
    for _ in range(10_000):
        if todo.size == 0:
            return 1.0 / out - 1.0
        k = todo.size
        kappa = rng.beta(a, u, k)
        ratio = np.exp(-s * kappa) / (phi2 + (1.0 - phi2) * kappa) / bound
        acc = rng.random(k) < ratio
        out[todo[acc]] = kappa[acc]
        todo = todo[~acc]
    raise NumericalError("hib rejection sampler failed to terminate")


def _origin_exponent(family: MixingFamily) -> float:
    """Leading power of pi(xi) as xi -> 0 (ignoring slowly varying factors)."""
    if family.kind == "student-t":
        return math.inf  # essential zero at the origin
    if family.kind == "gdp":
        return 0.0
    if family.kind == "horseshoe-plus":
        return -0.5
    u, _ = _shape_ua(family)
    return u - 1.0


def marginal_diverges_at_origin(family: MixingFamily, q: int) -> bool:
    """Whether g_tau(0) = integral of xi^(-q/2) pi(xi) near 0 is infinite."""
    return _origin_exponent(family) - q / 2.0 <= -1.0


def marginal_prior_density(family: MixingFamily, tau: float, q: int, radius: float):
    """Marginal row-prior density g_tau at distance ``radius`` from the origin.

    g_tau is spherically symmetric, so the density at any q-vector x is a
    function of ||x|| alone:

        g_tau(r) = int_0^inf (2 pi tau xi)^(-q/2) exp(-r^2/(2 tau xi)) pi(xi) dxi

    Parameters
    ----------
    family : MixingFamily
    tau : float
        Global scale, positive.
    q : int
        Dimension, >= 1.
    radius : float
        ||x|| >= 0.

    Returns
    -------
    float or Diverges
        The density value, or :data:`DIVERGES` at radius 0 when the
        integrand is not integrable near the origin.

    Raises
    ------
    NumericalError
        If adaptive quadrature cannot reach the requested relative
        tolerance (1e-8).
    """
    if tau <= 0:
        raise DomainError("tau must be positive")
    if q < 1 or int(q) != q:
        raise DomainError("q must be a positive integer")
    if radius < 0:
        raise DomainError("radius must be nonnegative")
    q = int(q)
    if radius == 0.0 and marginal_diverges_at_origin(family, q):
        return DIVERGES

    r2 = radius * radius

    def integrand(w: float) -> float:
        xi = math.exp(w)
        log_val = (
            -0.5 * q * (math.log(2.0 * math.pi * tau) + w)
            - (r2 / (2.0 * tau * xi) if r2 > 0 else 0.0)
            + float(log_mixing_density(family, xi))
            + w
        )
        return math.exp(log_val) if log_val > -745.0 else 0.0

    peak = math.log(r2 / (tau * q)) if r2 > 0 else 0.0
    lo = min(peak, 0.0) - 80.0
    hi = max(peak, 0.0) + 260.0
    pts = sorted({p for p in (peak, 0.0) if lo < p < hi})
    value, err = integrate.quad(
        integrand, lo, hi, epsabs=0.0, epsrel=1e-8, limit=500, points=pts
    )
    if not np.isfinite(value) or value < 0 or (value > 0 and err > 1e-6 * value):
        raise NumericalError(
            f"marginal density quadrature failed for {family_spec(family)} "
            f"(tau={tau!r}, q={q}, radius={radius!r}, value={value!r}, abserr={err!r})"
        )
    return value


def default_tau(n: int, p: int) -> float:
    """Recommended global scale 1/(p * sqrt(n * log n)).

    Requires n >= 2 so the logarithm is positive.
    """
    if n < 2:
        raise DomainError("default_tau requires n >= 2")
    if p < 1:
        raise DomainError("default_tau requires p >= 1")
    return 1.0 / (p * math.sqrt(n * math.log(n)))


def theoretical_tau_max(a_n: float, p: int, r: float, u_prime: float) -> float:
    """Largest theoretically sanctioned global scale, a_n^2 * p^(-(1+u')/(r-1)).

    The theory only fixes this up to an unspecified constant, taken here as
    1; treat the output as an order-of-magnitude guide and use the
    condition checker as the authority.
    """
    if r <= 1.0:
        raise DomainError("tail exponent r must exceed 1")
    if a_n <= 0 or u_prime <= 0:
        raise DomainError("a_n and u_prime must be positive")
    if p < 1:
        raise DomainError("p must be >= 1")
    return a_n * a_n * float(p) ** (-(1.0 + u_prime) / (r - 1.0))
