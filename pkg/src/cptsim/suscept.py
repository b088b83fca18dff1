"""Probe susceptibilities: closed forms, saturation oracles, and numerical extraction.

The closed-form chi(1) and chi(3) below are written with the opposite detuning
sign from :func:`cptsim.lambda_system.lambda_hamiltonian`. The Taylor coefficients
of the steady-state coherence <s13> in the probe Rabi frequency therefore satisfy

    c_n(D) = chi_n(-D) = -conj(chi_n(D)),

with unit scale factor. :func:`sigma13_chi1` and :func:`sigma13_chi3` apply that
mapping so the two routes can be compared directly.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import DomainError, FitUnstable, NoFixedPoint
from .qops import Model
from .steady import solve_model

DEFAULT_OMEGA_SAMPLES = (0.002, 0.004, 0.006, 0.008)
FIT_COND_MAX = 1e12


def chi1_analytic(delta_p, theta, gamma_total=1.0):
    """Linear susceptibility ``2D / (2D (2D - i G) - Theta^2)`` (arbitrary units)."""
    d = np.asarray(delta_p, dtype=float)
    t = np.asarray(theta, dtype=float)
    if np.any((d == 0) & (t == 0)):
        raise DomainError("chi1 is singular at delta_p = theta = 0 (bare two-level pole)")
    out = 2 * d / (2 * d * (2 * d - 1j * gamma_total) - t**2)
    return out[()] if out.ndim == 0 else out


def chi3_analytic(delta_p, theta, gamma_31, gamma_32):
    """Third-order susceptibility, evaluated term by term as the closed form is written.

    Undefined at ``delta_p = 0`` (use :func:`chi3_at_resonance_limit`).
    """
    if gamma_31 <= 0:
        raise ValueError(f"gamma_31 must be > 0, got {gamma_31}")
    d = np.asarray(delta_p, dtype=float)
    t = np.asarray(theta, dtype=float)
    if np.any(d == 0):
        raise DomainError("chi3 has 1/delta_p terms; use chi3_at_resonance_limit at delta_p = 0")
    if gamma_32 > 0 and np.any(t == 0):
        raise DomainError("chi3 has a gamma_32/theta^2 term; theta must be > 0 when gamma_32 > 0")
    g = gamma_31 + gamma_32
    num = -1j * g * gamma_32 / (2 * d) + 3 * g - gamma_31 + gamma_31 * t**2 / (2 * d**2)
    if gamma_32 > 0:
        num = num + g**2 * gamma_32 / t**2
    shift = t**2 / (2 * d) - 2 * d
    den = gamma_31 * (shift - 1j * g) * (shift + 1j * g) ** 2
    out = num / den
    return out[()] if out.ndim == 0 else out


def chi3_at_resonance_limit(theta, gamma_31, gamma_32, step=None):
    """``chi3`` as ``delta_p -> 0``: symmetric evaluation at +-h and h/2, Richardson-combined."""
    h = 1e-6 * (gamma_31 + gamma_32) if step is None else step

    def sym(x):
        return 0.5 * (chi3_analytic(x, theta, gamma_31, gamma_32) + chi3_analytic(-x, theta, gamma_31, gamma_32))

    return (4 * sym(h / 2) - sym(h)) / 3


def chi3_im_series(delta_p, theta, gamma_31, gamma_32, legacy=False):
    """Small-theta expansion of ``Im chi3``: ``T0 + T_{-2} / theta^2 + A theta^2``.

    The default coefficients are the exact Laurent coefficients of
    :func:`chi3_analytic`. ``legacy=True`` evaluates the variant whose
    ``1/theta^2`` term carries ``(G^2 + 4 D^2)`` instead of ``(G^2 + 4 D^2)^2`` and whose
    ``A`` uses ``G^3`` in place of ``G^2`` (the two agree only for ``G = 1``).
    """
    if gamma_31 <= 0:
        raise ValueError(f"gamma_31 must be > 0, got {gamma_31}")
    d = np.asarray(delta_p, dtype=float)
    t = np.asarray(theta, dtype=float)
    if np.any(d == 0):
        raise DomainError("series has 1/delta_p^2 terms; delta_p must be nonzero")
    g = gamma_31 + gamma_32
    lor = g**2 + 4 * d**2
    const = -2 * g**2 * (g**2 + 2 * g * gamma_32 + 4 * d**2) / (gamma_31 * lor**3)
    if gamma_32 > 0:
        pole = -(g**3) * gamma_32 / (gamma_31 * t**2 * (lor if legacy else lor**2))
    else:
        pole = 0.0
    mid = g**3 if legacy else g**2
    a = 4 * g * (g**4 * (gamma_32 - 2 * gamma_31) / (16 * d**2) - mid * (3 * g + 2 * gamma_32) - d**2 * (9 * g + gamma_31))
    a = a / (gamma_31 * lor**4)
    out = const + pole + a * t**2
    return out[()] if np.ndim(out) == 0 else out


def sigma13_chi1(delta_p, theta, gamma_total=1.0):
    """``chi1`` mapped onto the <s13> coefficient convention (detuning mirrored)."""
    return chi1_analytic(-np.asarray(delta_p, dtype=float), theta, gamma_total)


def sigma13_chi3(delta_p, theta, gamma_31, gamma_32):
    return chi3_analytic(-np.asarray(delta_p, dtype=float), theta, gamma_31, gamma_32)


def two_level_p3(omega_p, delta_p, gamma_total):
    """Excited population of a driven two-level emitter, ``W^2 / (G^2 + 4 D^2 + 2 W^2)``."""
    if gamma_total <= 0:
        raise ValueError(f"gamma_total must be > 0, got {gamma_total}")
    w2 = np.abs(omega_p) ** 2
    return w2 / (gamma_total**2 + 4 * np.asarray(delta_p) ** 2 + 2 * w2)


class Saturation(NamedTuple):
    n: float
    p3: float
    cooperativity: float
    n0: float


def cavity_saturation(epsilon, g, kappa, gamma_3, tol=1e-14, max_iter=100_000) -> Saturation:
    """Self-consistent intracavity photon number for a two-level emitter at resonance.

    Iterates ``n = |(eps/kappa)(n + n0) / (n + n0 + 2 C n0)|^2`` from ``n = 0`` with
    ``C = 2 g^2 / (kappa G3)`` and saturation photon number ``n0 = G3^2 / (8 g^2)``.
    The inversion is ``<s33 - s11> = -n0 / (n + n0)``, giving ``p3 = n / (2 (n + n0))``.
    """
    if g <= 0 or kappa <= 0 or gamma_3 <= 0:
        raise ValueError("g, kappa and gamma_3 must be > 0")
    coop = 2 * g**2 / (kappa * gamma_3)
    n0 = gamma_3**2 / (8 * g**2)
    drive = (epsilon / kappa) ** 2

    def update(n):
        return drive * ((n + n0) / (n + n0 + 2 * coop * n0)) ** 2

    n, step, damp = 0.0, None, 1.0
    for _ in range(max_iter):
        new = (1 - damp) * n + damp * update(n)
        diff = new - n
        if abs(diff) < tol * max(1.0, n):
            n = new
            break
        if step is not None and diff * step < 0:
            damp = 0.5
        step, n = diff, new
    else:
        raise NoFixedPoint(f"photon-number iteration did not converge in {max_iter} steps")
    p3 = n / (2 * (n + n0))
    return Saturation(n, p3, coop, n0)


@dataclass(frozen=True)
class SusceptibilityOrders:
    delta_p: float
    c1: complex
    c3: complex
    c5: complex
    fit_residual: float


def fit_odd_orders(omegas: Sequence[float], values: Sequence[complex], delta_p: float = float("nan")) -> SusceptibilityOrders:
    """Least-squares fit of ``values`` to ``c1 W + c3 W^3 + c5 W^5``.

    The design matrix is built in ``W / max(W)`` so its conditioning reflects the
    spacing of the samples rather than their absolute scale.
    """
    w = np.asarray(omegas, dtype=float)
    y = np.asarray(values, dtype=complex)
    if w.size < 4 or np.unique(w).size != w.size or np.any(w <= 0):
        raise ValueError("need at least 4 distinct positive probe amplitudes")
    scale = w.max()
    x = w / scale
    design = np.stack([x, x**3, x**5], axis=1)
    cond = np.linalg.cond(design)
    if not np.isfinite(cond) or cond > FIT_COND_MAX:
        raise FitUnstable(f"design matrix condition number {cond:.3g} exceeds {FIT_COND_MAX:.0e}")
    coef, *_ = np.linalg.lstsq(design.astype(complex), y, rcond=None)
    resid = float(np.max(np.abs(design @ coef - y)))
    c1, c3, c5 = coef / scale ** np.array([1, 3, 5])
    return SusceptibilityOrders(float(delta_p), complex(c1), complex(c3), complex(c5), resid)


def extract_orders(
    factory: Callable[[float], Model],
    delta_p: float,
    omega_samples: Sequence[float] = DEFAULT_OMEGA_SAMPLES,
) -> SusceptibilityOrders:
    """Solve ``factory(W)`` for each probe amplitude and fit the odd orders of <s13>."""
    values = [solve_model(factory(w))[1].sigma13 for w in omega_samples]
    return fit_odd_orders(omega_samples, values, delta_p)
