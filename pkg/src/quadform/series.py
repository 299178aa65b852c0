"""Exact and convergent-series CDF/PDF evaluation.

Two families:

* central forms with even degrees of freedom: the MGF is rational, a
  finite partial-fraction expansion gives closed-form CDF/PDF as mixtures
  of scaled chi-square distributions with even dofs;
* positive definite forms: infinite expansions in chi-square densities
  (Ruben), powers (Kotz) or Laguerre polynomials, driven by a shared
  exp-of-log-series coefficient recursion, with adaptive truncation.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special, stats

from .errors import ConvergenceFailureError, NotApplicableError
from .forms import (
    EffectiveForm,
    MethodResult,
    PartialFractionExpansion,
    ReducedForm,
    SeriesCoefficients,
)

K_MAX = 5000
HEURISTIC_RUN = 20          # consecutive tiny terms before the heuristic stop fires
KOTZ_MAX_Q_FACTOR = 10.0    # power series rejected beyond this multiple of the mean


def _require_central_even(red: ReducedForm, op: str) -> None:
    if red.sigma_gauss != 0.0:
        raise NotApplicableError(f"{op} requires sigma = 0", condition="sigma=0")
    if np.any(red.delta2 != 0.0):
        raise NotApplicableError(f"{op} requires a central form", condition="central")
    if np.any(red.nu % 2 != 0):
        raise NotApplicableError(
            f"{op} requires even degrees of freedom", condition="even degrees"
        )
    if red.n_groups == 0:
        raise NotApplicableError(f"{op} requires a chi-square part", condition="nonempty form")


def _exp_series(log_coeffs: np.ndarray, c0: float) -> np.ndarray:
    """Taylor coefficients of c0 * exp(sum_{n>=1} g_n s^n) up to len(g).

    Standard recursion n c_n = sum_{r=1}^{n} r g_r c_{n-r}.
    """
    n = log_coeffs.shape[0]
    c = np.zeros(n + 1)
    c[0] = c0
    for k in range(1, n + 1):
        acc = 0.0
        for r in range(1, k + 1):
            acc += r * log_coeffs[r - 1] * c[k - r]
        c[k] = acc / k
    return c


def partial_fractions(red: ReducedForm) -> PartialFractionExpansion:
    """Expand M(t) = prod (1-2 w_l t)^(-m_l) as sum A_lk (1-2 w_l t)^(-k).

    m_l = nu_l / 2 must be integers (even dofs).  For pole l the
    coefficients follow from the Taylor expansion, in s = 1 - 2 w_l t,
    of G_l(s) = prod_{j != l} (alpha_j + r_j s)^(-m_j) with
    r_j = w_j / w_l and alpha_j = 1 - r_j:  A_{l,k} = G_l^{(m_l - k)}(0)/(m_l-k)!.
    """
    _require_central_even(red, "partial fractions")
    omega = red.omega
    m = red.nu // 2
    terms = []
    for l, (w_l, m_l) in enumerate(zip(omega, m)):
        others = [j for j in range(omega.size) if j != l]
        order = int(m_l)
        if not others:
            coeffs = np.zeros(order)
            coeffs_full = np.concatenate(([1.0], coeffs))
        else:
            r = omega[others] / w_l
            alpha = 1.0 - r
            if np.any(alpha == 0.0):
                raise NotApplicableError(
                    "repeated weights must be grouped before partial fractions",
                    condition="distinct weights",
                )
            # log G_l(s) = sum_j -m_j [log alpha_j + log(1 + (r_j/alpha_j) s)]
            mj = m[others].astype(float)
            ratio = r / alpha
            g = np.array([
                -np.sum(mj * (-1.0) ** (n + 1) * ratio**n / n)
                for n in range(1, order)
            ]) if order > 1 else np.zeros(0)
            c0 = math.exp(-float(np.sum(mj * np.log(np.abs(alpha)))))
            sign = -1.0 if np.sum(mj[alpha < 0]) % 2 == 1 else 1.0
            c0 *= sign
            coeffs_full = _exp_series(g, c0)
        for k in range(1, order + 1):
            terms.append((float(w_l), int(k), float(coeffs_full[order - k])))
    return PartialFractionExpansion(tuple(terms))


def _alt_partial_fractions(red: ReducedForm):
    """Coefficients alpha_lk of 1/(z prod (1+w_l z)^(m_l)) = 1/z + sum alpha_lk/(1+w_l z)^k.

    Independent expansion used only to cross-check the finite-sum
    identity alpha_{l,k} = -w_l A_{l,k} + alpha_{l,k+1}.
    """
    _require_central_even(red, "partial fractions")
    omega = red.omega
    m = red.nu // 2
    out = {}
    for l, (w_l, m_l) in enumerate(zip(omega, m)):
        order = int(m_l)
        others = [j for j in range(omega.size) if j != l]
        # substitute s = 1 + w_l z, i.e. z = (s-1)/w_l:
        # H(z)(1+w_l z)^{m_l} = [w_l/(s-1)] prod_{j!=l} (alpha_j + r_j s)^{-m_j}
        # expand around s=0; the 1/(s-1) factor contributes -sum s^n.
        r = omega[others] / w_l
        alpha = 1.0 - r
        mj = m[others].astype(float)
        g_base = np.zeros(order - 1) if order > 1 else np.zeros(0)
        for n in range(1, order):
            g_base[n - 1] = -np.sum(mj * (-1.0) ** (n + 1) * (r / alpha) ** n / n) if others else 0.0
        if others:
            c0 = math.exp(-float(np.sum(mj * np.log(np.abs(alpha)))))
            if np.sum(mj[alpha < 0]) % 2 == 1:
                c0 = -c0
        else:
            c0 = 1.0
        prod_coeffs = _exp_series(g_base, c0) if order > 1 else np.array([c0])
        # multiply by -w_l * (1 + s + s^2 + ...)
        conv = -w_l * np.cumsum(prod_coeffs[:order])
        for k in range(1, order + 1):
            out[(l, k)] = float(conv[order - k])
    return out


def _scaled_chi2_cdf(q: np.ndarray, w: float, dof: int) -> np.ndarray:
    """CDF of w * chi2_dof at q (elementwise)."""
    if w > 0:
        return stats.chi2.cdf(q / w, dof)
    return stats.chi2.sf(q / w, dof)


def cdf_central_even(red: ReducedForm, q: float,
                     pfe: PartialFractionExpansion | None = None) -> MethodResult:
    """Closed-form CDF of a central even-dof form, exact up to floating point."""
    pfe = pfe if pfe is not None else partial_fractions(red)
    x = q - red.const
    val = sum(a * float(_scaled_chi2_cdf(np.asarray(x), w, 2 * k)) for w, k, a in pfe.terms)
    return MethodResult(
        value=min(max(val, 0.0), 1.0),
        error_bound=0.0,
        method="central_even",
        provenance="exact",
        diagnostics={"raw_value": val, "floating_point_caveat": True,
                     "n_terms": len(pfe.terms)},
    )


def pdf_central_even(red: ReducedForm, q: float,
                     pfe: PartialFractionExpansion | None = None) -> MethodResult:
    """Closed-form PDF of a central even-dof form."""
    pfe = pfe if pfe is not None else partial_fractions(red)
    x = q - red.const
    val = sum(
        a / abs(w) * float(stats.chi2.pdf(x / w, 2 * k)) for w, k, a in pfe.terms
    )
    return MethodResult(
        value=max(val, 0.0),
        error_bound=0.0,
        method="central_even",
        provenance="exact",
        diagnostics={"raw_value": val, "floating_point_caveat": True,
                     "n_terms": len(pfe.terms)},
    )


def _require_positive_definite(eff: EffectiveForm, op: str) -> None:
    if eff.sigma_gauss != 0.0:
        raise NotApplicableError(f"{op} requires sigma = 0", condition="sigma=0")
    if eff.n_terms == 0 or np.any(eff.lam <= 0.0):
        raise NotApplicableError(
            f"{op} requires a positive definite form", condition="all weights positive"
        )


def default_beta(eff: EffectiveForm, kind: str) -> float | None:
    """Free scale parameter: harmonic mean of extreme weights for the
    chi-square expansion, arithmetic mean for Laguerre, none for Kotz."""
    lmax, lmin = float(eff.lam.max()), float(eff.lam.min())
    if kind == "ruben":
        return 2.0 * lmax * lmin / (lmax + lmin)
    if kind == "laguerre":
        return 0.5 * (lmax + lmin)
    return None


_COEFF_CACHE: dict = {}


def series_coefficients(eff: EffectiveForm, kind: str, beta: float | None = None,
                        k_terms: int = 64) -> SeriesCoefficients:
    """First k_terms+1 expansion coefficients for one of the three series.

    All share the pipeline: expand log B(theta) = d0 + sum g_k theta^k for
    the appropriate change of variables theta(s), then exponentiate the
    series by the Cauchy-product recursion.  Coefficient sets are cached
    by value so grid evaluations reuse one expansion per form.
    """
    key = (kind, beta, k_terms, eff.lam.tobytes(), eff.h2.tobytes())
    cached = _COEFF_CACHE.get(key)
    if cached is not None:
        return cached
    out = _series_coefficients_impl(eff, kind, beta, k_terms)
    if len(_COEFF_CACHE) > 128:
        _COEFF_CACHE.clear()
    _COEFF_CACHE[key] = out
    return out


def _series_coefficients_impl(eff: EffectiveForm, kind: str, beta: float | None,
                              k_terms: int) -> SeriesCoefficients:
    _require_positive_definite(eff, f"{kind} series")
    lam, h2 = eff.lam, eff.h2
    n = eff.n_terms
    if kind == "ruben":
        beta = default_beta(eff, kind) if beta is None else float(beta)
        if not 0.0 < beta < 2.0 * lam.min():
            raise NotApplicableError(
                "chi-square expansion needs 0 < beta < 2 min(lam)", condition="beta range"
            )
        eta = 1.0 - beta / lam
        ks = np.arange(1, k_terms + 1)[:, None]
        d = (eta[None, :] ** ks).sum(axis=1) + ks[:, 0] * beta * (
            (h2 / lam)[None, :] * eta[None, :] ** (ks - 1)
        ).sum(axis=1)
        c0 = math.exp(-0.5 * float(h2.sum()) + 0.5 * float(np.log(beta / lam).sum()))
        c = _exp_series(d / (2.0 * np.arange(1, k_terms + 1)), c0)
    elif kind == "kotz":
        beta = None
        inv = 1.0 / (2.0 * lam)
        ks = np.arange(1, k_terms + 1)[:, None]
        d = 0.5 * ((1.0 - ks * h2[None, :]) * inv[None, :] ** ks).sum(axis=1)
        c0 = math.exp(-0.5 * float(h2.sum()) - 0.5 * float(np.log(2.0 * lam).sum()))
        c = _exp_series(d / np.arange(1, k_terms + 1), c0)
    elif kind == "laguerre":
        beta = default_beta(eff, kind) if beta is None else float(beta)
        if beta <= lam.max() / 2.0:
            raise NotApplicableError(
                "Laguerre series needs beta > max(lam)/2", condition="beta range"
            )
        gam = 1.0 - lam / beta
        ks = np.arange(1, k_terms + 1)[:, None]
        d = 0.5 * (
            (gam[None, :] ** ks).sum(axis=1)
            - ks[:, 0] / beta * ((lam * h2)[None, :] * gam[None, :] ** (ks - 1)).sum(axis=1)
        )
        c = _exp_series(d / np.arange(1, k_terms + 1), 1.0)
    else:
        raise NotApplicableError(f"unknown series kind {kind!r}", condition="kind")
    return SeriesCoefficients(kind=kind, beta=beta, c=c, d=d, n_vars=n)


def _extend(coeffs: SeriesCoefficients, eff: EffectiveForm, k_terms: int) -> SeriesCoefficients:
    if coeffs.c.shape[0] >= k_terms + 1:
        return coeffs
    return series_coefficients(eff, coeffs.kind, coeffs.beta, k_terms)


def _series_terms(coeffs: SeriesCoefficients, x: float, cumulative: bool) -> np.ndarray:
    """Per-term contributions of the truncated expansion at the shifted
    point x >= 0 (log-gamma arithmetic throughout)."""
    kind, beta, c = coeffs.kind, coeffs.beta, coeffs.c
    n = coeffs.n_vars
    kk = np.arange(c.shape[0])
    if kind == "ruben":
        y = x / beta
        if cumulative:
            base = stats.chi2.cdf(y, n + 2 * kk)
        else:
            base = stats.chi2.pdf(y, n + 2 * kk) / beta
        return c * base
    if kind == "kotz":
        if x == 0.0:
            out = np.zeros_like(c)
            if not cumulative and n == 2:
                out[0] = c[0]  # q^{N/2-1} = 1 at the origin for N = 2
            return out
        expo = (n / 2.0 + kk) if cumulative else (n / 2.0 + kk - 1.0)
        lg = special.gammaln(n / 2.0 + kk + (1.0 if cumulative else 0.0))
        return (-1.0) ** kk * c * np.exp(expo * math.log(x) - lg)
    # laguerre
    y = x / (2.0 * beta)
    if cumulative:
        # integrating the density term by parts gives
        # d/dy [y^{a} e^{-y} L_{k-1}^{(a)}(y)] = k y^{a-1} e^{-y} L_k^{(a-1)}(y)
        # with a = N/2, so the k-th CDF term carries L_{k-1}^{(N/2)}
        out = np.empty_like(c)
        out[0] = c[0] * stats.chi2.cdf(x / beta, n)
        if c.shape[0] > 1:
            k = kk[1:]
            lg = special.gammaln(k) - special.gammaln(n / 2.0 + k)
            lpow = (n / 2.0) * math.log(y) - y if y > 0 else -math.inf
            lag = special.eval_genlaguerre(k - 1, n / 2.0, y)
            out[1:] = c[1:] * np.exp(lg + lpow) * lag
        return out
    k = kk
    lg = special.gammaln(k + 1.0) - special.gammaln(n / 2.0 + k)
    if y > 0:
        lpow = (n / 2.0 - 1.0) * math.log(y) - y
    else:
        lpow = 0.0 if n == 2 else -math.inf
    lag = special.eval_genlaguerre(k, n / 2.0 - 1.0, y)
    return c * np.exp(lg + lpow) * lag / (2.0 * beta)


def ruben_truncation_bound(eff: EffectiveForm, beta: float, k_trunc: int, q: float) -> float:
    """Rigorous bound on the chi-square-expansion *density* truncation error
    for central forms with an even variable count.

    Uses |c_k| <= c0 * [theta^k] prod_{i<=N/2} (1 - xi_{2i-1} theta)^{-1}
    (xi = |1 - beta/lam| sorted descending, paired consecutively) and the
    Poisson-tail identity to sum the remainder in closed form.
    """
    _require_positive_definite(eff, "truncation bound")
    if np.any(eff.h2 != 0.0):
        raise NotApplicableError("bound requires a central form", condition="central")
    if eff.n_terms % 2 != 0:
        raise NotApplicableError(
            "bound requires an even number of variables", condition="even count"
        )
    lam = eff.lam
    n = eff.n_terms
    xi = np.sort(np.abs(1.0 - beta / lam))[::-1]
    reps = xi[0::2].astype(float).copy()
    # bound is continuous in xi; break ties so the pole expansion is defined
    for i in range(1, reps.size):
        while np.any(np.abs(reps[:i] - reps[i]) < 1e-9 * max(reps[0], 1e-300)):
            reps[i] *= 1.0 - 1e-7
    c0 = math.exp(0.5 * float(np.log(beta / lam).sum()))
    m = k_trunc + n // 2 - 1
    b = 2.0 * beta
    total = 0.0
    for i, a in enumerate(reps):
        delta_i = np.prod(reps[i] - np.delete(reps, i)) if reps.size > 1 else 1.0
        # h(q, a, b, m) = sum_{k>m} a^k q^k e^{-q/b} / (b^{k+1} k!)
        #              = e^{(a-1)q/b} P[Pois(aq/b) > m] / b
        z = a * q / b
        tail = (math.exp(z - q / b) * float(special.gammainc(m + 1, z))) / b if z > 0 else 0.0
        total += tail / delta_i if reps.size > 1 else tail
    return abs(c0 * total)


def _ruben_cdf_tail_bound(coeffs: SeriesCoefficients, eff: EffectiveForm, x: float) -> float | None:
    """Rigorous CDF remainder bound for the central even-count chi-square
    expansion: sum_{k>K} |c_k| F(...) <= F_{K+1}-term * geometric tail."""
    if np.any(eff.h2 != 0.0) or eff.n_terms % 2 != 0:
        return None
    lam = eff.lam
    beta = coeffs.beta
    n = eff.n_terms
    k_trunc = coeffs.c.shape[0] - 1
    xi = np.sort(np.abs(1.0 - beta / lam))[::-1]
    reps = xi[0::2].astype(float).copy()
    if np.any(reps >= 1.0):
        return None
    for i in range(1, reps.size):
        while np.any(np.abs(reps[:i] - reps[i]) < 1e-9 * max(reps[0], 1e-300)):
            reps[i] *= 1.0 - 1e-7
    c0 = math.exp(0.5 * float(np.log(beta / lam).sum()))
    lead = float(stats.chi2.cdf(x / beta, n + 2 * (k_trunc + 1)))
    total = 0.0
    for i, a in enumerate(reps):
        delta_i = np.prod(reps[i] - np.delete(reps, i)) if reps.size > 1 else 1.0
        geo = a ** (k_trunc + n // 2) / (1.0 - a)
        total += geo / delta_i if reps.size > 1 else geo
    return abs(c0 * total) * lead


def _evaluate_series(eff: EffectiveForm, q: float, kind: str, beta: float | None,
                     tol: float, cumulative: bool) -> MethodResult:
    x = q - eff.const
    name = f"{kind}_{'cdf' if cumulative else 'pdf'}"
    if x <= 0.0:
        return MethodResult(0.0, 0.0, name, "exact",
                            {"raw_value": 0.0, "note": "below support"})
    if kind == "kotz":
        k1 = float(np.sum(eff.lam * (1.0 + eff.h2)))
        if x > KOTZ_MAX_Q_FACTOR * max(k1, 0.0):
            raise NotApplicableError(
                "power series is ill-conditioned far beyond the mean "
                f"(q - const = {x:.3g} > {KOTZ_MAX_Q_FACTOR} * mean)",
                condition="q range",
            )
    coeffs = series_coefficients(eff, kind, beta, k_terms=64)
    central_even = bool(np.all(eff.h2 == 0.0)) and eff.n_terms % 2 == 0
    while True:
        terms = _series_terms(coeffs, x, cumulative)
        partial = float(np.cumsum(terms)[-1])
        k_used = terms.shape[0] - 1
        bound = None
        provenance = "heuristic"
        if kind == "ruben":
            if central_even:
                if cumulative:
                    bound = _ruben_cdf_tail_bound(coeffs, eff, x)
                else:
                    bound = ruben_truncation_bound(eff, coeffs.beta, k_used, x)
                if bound is not None:
                    provenance = "rigorous"
            if bound is None and cumulative:
                # residual mixture mass; rigorous only for a true mixture
                bound = abs(1.0 - float(coeffs.c.sum()))
                provenance = "rigorous" if np.all(coeffs.c >= 0.0) else "heuristic"
        if bound is None:
            bound = float(np.max(np.abs(terms[-HEURISTIC_RUN:])))
            provenance = "heuristic"
        tiny_run = np.all(np.abs(terms[-HEURISTIC_RUN:]) < tol / 100.0)
        if (provenance == "rigorous" and bound < tol) or tiny_run:
            if provenance != "rigorous":
                bound = float(np.max(np.abs(terms[-HEURISTIC_RUN:])))
            value = partial
            raw = value
            if cumulative:
                value = min(max(value, 0.0), 1.0)
            else:
                value = max(value, 0.0)
            return MethodResult(value, float(bound), name, provenance,
                                {"raw_value": raw, "k_truncation": k_used,
                                 "beta": coeffs.beta})
        if k_used >= K_MAX:
            res = MethodResult(partial, float(bound), name, provenance,
                               {"raw_value": partial, "k_truncation": k_used,
                                "beta": coeffs.beta})
            raise ConvergenceFailureError(
                f"{name} did not reach tol={tol} within {K_MAX} terms", result=res
            )
        coeffs = _extend(coeffs, eff, min(2 * (k_used + 1), K_MAX))


def cdf_series(eff: EffectiveForm, q: float, kind: str = "ruben",
               beta: float | None = None, tol: float = 1e-10) -> MethodResult:
    """Truncated-series CDF of a positive definite form at q."""
    return _evaluate_series(eff, q, kind, beta, tol, cumulative=True)


def pdf_series(eff: EffectiveForm, q: float, kind: str = "ruben",
               beta: float | None = None, tol: float = 1e-10) -> MethodResult:
    """Truncated-series PDF of a positive definite form at q."""
    return _evaluate_series(eff, q, kind, beta, tol, cumulative=False)
