"""MGF, CF, CGF, cumulants and raw moments of a reduced form.

All products of the type prod (1 - 2 w t)^(-nu/2) are evaluated as
exp(-0.5 sum nu log(1 - 2 w t)) so large degree counts cannot overflow
before the final exponentiation.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import optimize

from .errors import DomainError, InvalidInputError
from .forms import CumulantSet, MgfDomain, ReducedForm

DEFAULT_CUMULANT_ORDER = 8


def mgf_domain(red: ReducedForm) -> MgfDomain:
    """Open interval (t_L, t_R) of MGF existence.

    t_R = 1/(2 max positive weight), t_L = -1/(2 max |negative weight|);
    infinite when the corresponding sign is absent.
    """
    pos = red.omega[red.omega > 0]
    neg = red.omega[red.omega < 0]
    t_right = 1.0 / (2.0 * pos.max()) if pos.size else math.inf
    t_left = -1.0 / (2.0 * np.abs(neg).max()) if neg.size else -math.inf
    return MgfDomain(t_left, t_right)


def _require_in_domain(red: ReducedForm, t: float) -> None:
    dom = mgf_domain(red)
    if not dom.contains(t):
        raise DomainError(
            f"t={t} outside MGF domain ({dom.t_left}, {dom.t_right})",
            interval=(dom.t_left, dom.t_right),
        )


def log_mgf(red: ReducedForm, t: float) -> float:
    """Cumulant generating function K(t) = log M(t)."""
    _require_in_domain(red, t)
    w, nu, d2 = red.omega, red.nu, red.delta2
    g = 1.0 - 2.0 * w * t
    return float(
        -0.5 * np.sum(nu * np.log(g))
        + t * np.sum(d2 * w / g)
        + 0.5 * red.sigma_gauss**2 * t**2
        + red.const * t
    )


def mgf(red: ReducedForm, t: float) -> float:
    """Moment generating function, computed in log space.

    Saturates to inf rather than raising when the value exceeds the
    double range (t close to the domain boundary).
    """
    lv = log_mgf(red, t)
    return math.exp(lv) if lv < 709.0 else math.inf


def cf(red: ReducedForm, beta) -> complex | np.ndarray:
    """Characteristic function at real frequency beta (scalar or array)."""
    beta = np.asarray(beta, dtype=float)
    w, nu, d2 = red.omega, red.nu, red.delta2
    g = 1.0 - 2j * np.multiply.outer(beta, w)
    log_phi = (
        -0.5 * (np.log(g) * nu).sum(axis=-1)
        + 1j * beta * (d2 * w / g).sum(axis=-1)
        - 0.5 * (red.sigma_gauss * beta) ** 2
        + 1j * beta * red.const
    )
    out = np.exp(log_phi)
    return complex(out) if out.ndim == 0 else out


def cgf_derivative(red: ReducedForm, t: float, m: int) -> float:
    """m-th derivative of the CGF at t (m = 0 returns K(t) itself).

    K^(m)(t) = 2^(m-1) (m-1)! sum_l w^m [nu/(1-2wt)^m + m d2/(1-2wt)^(m+1)]
               + (sigma^2 t + const) [m=1] + sigma^2 [m=2].
    """
    if m < 0:
        raise InvalidInputError("derivative order m must be >= 0")
    if m == 0:
        return log_mgf(red, t)
    _require_in_domain(red, t)
    w, nu, d2 = red.omega, red.nu, red.delta2
    g = 1.0 - 2.0 * w * t
    core = 2.0 ** (m - 1) * math.factorial(m - 1) * np.sum(
        w**m * (nu / g**m + m * d2 / g ** (m + 1))
    )
    if m == 1:
        core += red.sigma_gauss**2 * t + red.const
    elif m == 2:
        core += red.sigma_gauss**2
    return float(core)


def cumulants(red: ReducedForm, order: int = DEFAULT_CUMULANT_ORDER) -> CumulantSet:
    """First ``order`` cumulants.

    kappa_1 = sum w (nu + d2) + const,
    kappa_2 = 2 sum w^2 (nu + 2 d2) + sigma^2,
    kappa_j = 2^(j-1) (j-1)! sum w^j (nu + j d2)   for j >= 3.
    The Gaussian part contributes to the first two only.
    """
    if order < 1:
        raise InvalidInputError("cumulant order must be >= 1")
    w, nu, d2 = red.omega, red.nu, red.delta2
    ks = np.empty(order)
    ks[0] = np.sum(w * (nu + d2)) + red.const
    if order >= 2:
        ks[1] = 2.0 * np.sum(w**2 * (nu + 2.0 * d2)) + red.sigma_gauss**2
    for j in range(3, order + 1):
        ks[j - 1] = 2.0 ** (j - 1) * math.factorial(j - 1) * np.sum(w**j * (nu + j * d2))
    return CumulantSet(ks)


def raw_moments(kappas: CumulantSet) -> np.ndarray:
    """Raw moments E[Q^k], k = 1..J, from cumulants by the Cauchy-product
    recursion m_k = sum_{l=0}^{k-1} C(k-1, l) m_l kappa_{k-l} (m_0 = 1)."""
    j = kappas.order
    m = np.zeros(j + 1)
    m[0] = 1.0
    for k in range(1, j + 1):
        m[k] = sum(math.comb(k - 1, l) * m[l] * kappas.get(k - l) for l in range(k))
    return m[1:]


def mean(red: ReducedForm) -> float:
    return cumulants(red, 1).get(1)


def variance(red: ReducedForm) -> float:
    return cumulants(red, 2).get(2)


def support(red: ReducedForm) -> tuple[float, float]:
    """Closure of the support: bounded on a side iff no weight of that sign
    and no Gaussian term."""
    lo = -math.inf
    hi = math.inf
    if red.sigma_gauss == 0.0:
        if not np.any(red.omega < 0):
            lo = red.const
        if not np.any(red.omega > 0):
            hi = red.const
    return lo, hi


def _cgf_prime_root(red: ReducedForm, y: float):
    """Solve K'(t) = y, returning None if y is outside the range of K'."""
    dom = mgf_domain(red)
    kp0 = cgf_derivative(red, 0.0, 1)
    if y == kp0:
        return 0.0
    side = 1.0 if y > kp0 else -1.0
    bound = dom.t_right if side > 0 else dom.t_left
    # expand toward the relevant boundary by halving the remaining gap
    t = 0.0
    for _ in range(200):
        t_next = t + side * max(abs(t), 1.0) if math.isinf(bound) else 0.5 * (t + bound)
        try:
            kp = cgf_derivative(red, t_next, 1)
        except (OverflowError, FloatingPointError):
            break
        if not math.isfinite(kp):
            break
        if (kp - y) * side >= 0:
            lo, hi = (t, t_next) if side > 0 else (t_next, t)
            return float(optimize.brentq(
                lambda s: cgf_derivative(red, s, 1) - y, lo, hi, xtol=1e-300, rtol=1e-15,
            ))
        t = t_next
    return None


def chernoff_log_tail(red: ReducedForm, y: float, side: str) -> float:
    """log of the Chernoff bound on a tail probability.

    side="right": log P(Q > y) <= inf_{t>0} K(t) - t y;
    side="left":  log P(Q <= y) <= inf_{t<0} K(t) - t y.
    Returns 0.0 when the bound is vacuous (y on the wrong side of the
    mean) and -inf when y is outside the support.
    """
    lo_s, hi_s = support(red)
    if side == "right":
        if y >= hi_s:
            return -math.inf
        if y <= cgf_derivative(red, 0.0, 1):
            return 0.0
    else:
        if y <= lo_s:
            return -math.inf
        if y >= cgf_derivative(red, 0.0, 1):
            return 0.0
    t = _cgf_prime_root(red, y)
    if t is None:
        # K' never reaches y inside the domain: push t toward the boundary
        dom = mgf_domain(red)
        bnd = dom.t_right if side == "right" else dom.t_left
        t = bnd * (1 - 1e-9) if math.isfinite(bnd) else math.copysign(1e8, bnd)
    return log_mgf(red, t) - t * y
