"""Generalized inverse Gaussian random variates.

Samples from the three-parameter GIG density

    f(x) ∝ x^(lam-1) exp(-(psi*x + chi/x)/2),    x > 0,

vectorized over the parameters.  The workhorse is the two-parameter form
g(z) ∝ z^(lam-1) exp(-omega*(z + 1/z)/2) with omega = sqrt(psi*chi); the
three-parameter draw is sqrt(chi/psi) times a two-parameter draw.  Negative
orders use the reciprocal identity 1/GIG(lam, omega) ~ GIG(-lam, omega).

Three rejection regimes cover the parameter space (mode-shifted
ratio-of-uniforms for large order or large omega, plain ratio-of-uniforms
in the middle, and a three-piece proposal hat for small omega with order
in [0, 1)).  Draws are validated against moments and against
``scipy.stats.geninvgauss`` in the test suite; only correctness of the
sampled distribution is promised, not a particular algorithm.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError, NumericalError

_MAX_REJECTION_ROUNDS = 10_000


def _mode(lam, omega):
    # argmax of z^(lam-1) exp(-omega (z + 1/z)/2); form below is stable for lam < 1
    return np.where(
        lam >= 1.0,
        (np.sqrt((lam - 1.0) ** 2 + omega**2) + (lam - 1.0)) / omega,
        omega / (np.sqrt((1.0 - lam) ** 2 + omega**2) + (1.0 - lam)),
    )


def _log_kernel(z, lam, omega):
    return (lam - 1.0) * np.log(z) - 0.5 * omega * (z + 1.0 / z)


def _uniform_pos(rng, size):
    # uniform on (0, 1]: avoids log(0) in the acceptance step
    return 1.0 - rng.random(size)


def _rou_no_shift(lam, omega, rng):
    """Ratio-of-uniforms on the kernel itself: u in (0, u+], v in (0, v+]."""
    m = _mode(lam, omega)
    x_plus = (np.sqrt((lam + 1.0) ** 2 + omega**2) + (lam + 1.0)) / omega
    log_u_max = 0.5 * _log_kernel(m, lam, omega)
    log_v_max = np.log(x_plus) + 0.5 * _log_kernel(x_plus, lam, omega)

    out = np.empty_like(m)
    todo = np.arange(m.size)
    for _ in range(_MAX_REJECTION_ROUNDS):
        k = todo.size
        if k == 0:
            return out
        log_u = np.log(_uniform_pos(rng, k)) + log_u_max[todo]
        log_v = np.log(_uniform_pos(rng, k)) + log_v_max[todo]
        z = np.exp(log_v - log_u)
        acc = 2.0 * log_u <= _log_kernel(z, lam[todo], omega[todo])
        out[todo[acc]] = z[acc]
        todo = todo[~acc]
    raise NumericalError("GIG rejection sampler (plain RoU) failed to terminate")


def _rou_shift(lam, omega, rng):
    """Ratio-of-uniforms with the proposal recentred at the mode."""
    m = _mode(lam, omega)
    # extrema of (z - m) * sqrt(kernel) solve z^3 + a z^2 + b z + c = 0,
    # which has three real roots; the relevant pair brackets the mode.
    a = -2.0 * (lam + 1.0) / omega - m
    b = 2.0 * (lam - 1.0) * m / omega - 1.0
    c = m
    p = b - a * a / 3.0
    q = 2.0 * a**3 / 27.0 - a * b / 3.0 + c
    phi = np.arccos(np.clip(-(q / 2.0) * np.sqrt(-27.0 / p**3), -1.0, 1.0))
    radius = np.sqrt(-4.0 * p / 3.0)
    z_lo = radius * np.cos(phi / 3.0 + 4.0 * np.pi / 3.0) - a / 3.0
    z_hi = radius * np.cos(phi / 3.0) - a / 3.0

    log_u_max = 0.5 * _log_kernel(m, lam, omega)
    v_lo = (z_lo - m) * np.exp(0.5 * _log_kernel(z_lo, lam, omega) - log_u_max)
    v_hi = (z_hi - m) * np.exp(0.5 * _log_kernel(z_hi, lam, omega) - log_u_max)

    out = np.empty_like(m)
    todo = np.arange(m.size)
    for _ in range(_MAX_REJECTION_ROUNDS):
        k = todo.size
        if k == 0:
            return out
        u = _uniform_pos(rng, k)
        v = v_lo[todo] + (v_hi[todo] - v_lo[todo]) * rng.random(k)
        z = v / u + m[todo]
        pos = z > 0
        log_u = np.log(u) + log_u_max[todo]
        acc = np.zeros(k, dtype=bool)
        if pos.any():
            acc[pos] = 2.0 * log_u[pos] <= _log_kernel(
                z[pos], lam[todo][pos], omega[todo][pos]
            )
        out[todo[acc]] = z[acc]
        todo = todo[~acc]
    raise NumericalError("GIG rejection sampler (shifted RoU) failed to terminate")


def _three_piece(lam, omega, rng):
    """Rejection from a rectangle / power-law / exponential hat.

    Valid for 0 <= lam < 1 and small omega, where the kernel is dominated by

        g(m)                      on (0, x0]       (mode m <= x0)
        exp(-omega) z^(lam-1)     on (x0, x1]      (z + 1/z >= 2)
        x1^(lam-1) exp(-omega z/2) on (x1, inf)    (x1 >= 2/omega)

    with x0 = omega/(1-lam) and x1 = max(x0, 2/omega).
    """
    m = _mode(lam, omega)
    x0 = omega / (1.0 - lam)
    k0 = np.exp(_log_kernel(m, lam, omega))
    area0 = k0 * x0

    x1 = np.maximum(x0, 2.0 / omega)
    k1 = np.exp(-omega)
    mid = x0 < x1
    lam_zero = lam == 0.0
    safe_lam = np.where(lam_zero, 1.0, lam)
    area1 = np.where(
        mid,
        np.where(
            lam_zero,
            k1 * np.log(x1 / x0),
            k1 / safe_lam * (x1**safe_lam - x0**safe_lam),
        ),
        0.0,
    )

    k2 = x1 ** (lam - 1.0)
    area2 = 2.0 * k2 * np.exp(-0.5 * omega * x1) / omega
    total = area0 + area1 + area2

    out = np.empty_like(m)
    todo = np.arange(m.size)
    for _ in range(_MAX_REJECTION_ROUNDS):
        k = todo.size
        if k == 0:
            return out
        lam_t, om_t = lam[todo], omega[todo]
        a0, a1 = area0[todo], area1[todo]
        v = total[todo] * rng.random(k)

        in0 = v <= a0
        v1 = v - a0
        in1 = ~in0 & (v1 <= a1)
        in2 = ~(in0 | in1)
        v2 = v1 - a1

        z = np.empty(k)
        hat = np.empty(k)
        z[in0] = x0[todo][in0] * v[in0] / a0[in0]
        hat[in0] = k0[todo][in0]
        if in1.any():
            l1 = lam_t[in1]
            x0_1 = x0[todo][in1]
            k1_1 = k1[todo][in1]
            zero1 = l1 == 0.0
            safe1 = np.where(zero1, 1.0, l1)
            z[in1] = np.where(
                zero1,
                x0_1 * np.exp(v1[in1] / k1_1),
                (x0_1**safe1 + v1[in1] * safe1 / k1_1) ** (1.0 / safe1),
            )
            hat[in1] = k1_1 * z[in1] ** (l1 - 1.0)
        if in2.any():
            x1_2 = x1[todo][in2]
            om_2 = om_t[in2]
            k2_2 = k2[todo][in2]
            z[in2] = (
                -2.0
                / om_2
                * np.log(np.exp(-0.5 * om_2 * x1_2) - v2[in2] * om_2 / (2.0 * k2_2))
            )
            hat[in2] = k2_2 * np.exp(-0.5 * om_2 * z[in2])

        acc = np.log(rng.random(k) * hat) <= _log_kernel(z, lam_t, om_t)
        out[todo[acc]] = z[acc]
        todo = todo[~acc]
    raise NumericalError("GIG rejection sampler (three-piece hat) failed to terminate")


def _gig_two_param(lam, omega, rng):
    """Draws from z^(lam-1) exp(-omega (z + 1/z)/2) for lam >= 0, omega > 0."""
    out = np.empty_like(lam)
    heavy = (lam > 2.0) | (omega > 3.0)
    plain = ~heavy & ((lam >= 1.0 - 2.25 * omega**2) | (omega > 0.2))
    small = ~(heavy | plain)
    if heavy.any():
        out[heavy] = _rou_shift(lam[heavy], omega[heavy], rng)
    if plain.any():
        out[plain] = _rou_no_shift(lam[plain], omega[plain], rng)
    if small.any():
        out[small] = _three_piece(lam[small], omega[small], rng)
    return out


def gig_rvs(lam, psi, chi, rng):
    """Draw from GIG(lam, psi, chi), broadcasting all three parameters.

    Parameters
    ----------
    lam : array_like
        Order; any real value.
    psi, chi : array_like
        Nonnegative rate parameters.  At most one of the two may be zero
        per element: chi = 0 requires lam > 0 (gamma limit), psi = 0
        requires lam < 0 (inverse-gamma limit).
    rng : numpy.random.Generator

    Returns
    -------
    ndarray or float
        Draws with the broadcast shape of the inputs.
    """
    lam, psi, chi = np.broadcast_arrays(
        np.asarray(lam, dtype=float), np.asarray(psi, dtype=float), np.asarray(chi, dtype=float)
    )
    shape = lam.shape
    lam = np.atleast_1d(lam).ravel()
    psi = np.atleast_1d(psi).ravel()
    chi = np.atleast_1d(chi).ravel()
    if not (np.isfinite(lam).all() and np.isfinite(psi).all() and np.isfinite(chi).all()):
        raise DomainError("GIG parameters must be finite")
    if (psi < 0).any() or (chi < 0).any():
        raise DomainError("GIG rate parameters must be nonnegative")

    out = np.empty(lam.shape)
    chi_zero = chi == 0.0
    psi_zero = psi == 0.0
    if (chi_zero & psi_zero).any():
        raise DomainError("GIG requires psi > 0 or chi > 0")
    if (chi_zero & (lam <= 0)).any():
        raise DomainError("GIG with chi = 0 requires lam > 0 (gamma limit)")
    if (psi_zero & (lam >= 0)).any():
        raise DomainError("GIG with psi = 0 requires lam < 0 (inverse-gamma limit)")
    if chi_zero.any():
        out[chi_zero] = rng.gamma(lam[chi_zero], 2.0 / psi[chi_zero])
    if psi_zero.any():
        out[psi_zero] = chi[psi_zero] / (2.0 * rng.gamma(-lam[psi_zero], 1.0))

    core = ~(chi_zero | psi_zero)
    if core.any():
        omega = np.sqrt(psi[core] * chi[core])
        scale = np.sqrt(chi[core] / psi[core])
        neg = lam[core] < 0
        z = _gig_two_param(np.abs(lam[core]), omega, rng)
        z = np.where(neg, 1.0 / z, z)
        out[core] = scale * z

    return out.reshape(shape) if shape else float(out[0])
