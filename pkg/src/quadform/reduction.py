"""Reduction of raw quadratic forms to canonical chi-square representations.

The pipeline is: factor the covariance as Sigma = B B' (B rectangular,
full column rank r = rank(Sigma)), diagonalize B'AB = P diag(lambda) P',
complete the square per eigendirection.  Nonzero eigenvalues yield
scaled noncentral chi-square components; linear terms along zero
eigendirections collapse into one independent Gaussian.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateConstantError, InvalidInputError
from .forms import (
    EffectiveForm,
    FormClass,
    RawComplexForm,
    RawForm,
    ReducedForm,
    _check_hermitian,
)

ZERO_EIG_TOL = 1e-12       # |lambda| <= tol * max|lambda| counts as zero
GROUP_TOL = 1e-9           # relative gap for eigenvalue grouping
GAUSS_CLIP = 1e-12         # sigma (and |d_n|) below this * (1 + ||d||) clip to 0


def factor_covariance(sigma_mat, tol: float = ZERO_EIG_TOL):
    """Factor a PSD matrix as sigma_mat = B @ B.conj().T with B of full column rank.

    Returns (B, r) where r is the numerical rank: the count of
    eigenvalues above tol * max eigenvalue.  Built from the symmetric
    eigendecomposition with eigenvalue clipping at zero, so
    rank-deficient inputs are handled exactly.
    """
    sym = _check_hermitian(np.asarray(sigma_mat), "sigma_mat")
    w, u = np.linalg.eigh(sym)
    scale = max(float(w.max(initial=0.0)), 0.0)
    if scale <= 0.0:
        n = sym.shape[0]
        return np.zeros((n, 0), dtype=sym.dtype), 0
    if w.min() < -1e-8 * scale:
        raise InvalidInputError(f"sigma_mat is not PSD (min eigenvalue {w.min():.3e})")
    keep = w > tol * scale
    b = u[:, keep] * np.sqrt(np.clip(w[keep], 0.0, None))
    return b, int(keep.sum())


def _complete_square(lam_all, d, zero_tol):
    """Shared tail of the real/complex reductions.

    Splits eigendirections into nonzero/zero by relative threshold,
    clips negligible linear terms, and pools the zero-direction linear
    terms into a Gaussian variance.  Returns (lam, d_kept, sigma2).
    """
    lam_all = np.asarray(lam_all, dtype=float)
    scale = float(np.max(np.abs(lam_all), initial=0.0))
    nonzero = np.abs(lam_all) > zero_tol * scale if scale > 0 else np.zeros_like(lam_all, bool)
    d_norm = float(np.linalg.norm(d))
    d = np.where(np.abs(d) <= GAUSS_CLIP * (1.0 + d_norm), 0.0, d)
    sigma2 = float(np.sum(np.abs(d[~nonzero]) ** 2))
    return lam_all[nonzero], d[nonzero], sigma2


def _sort_descending(lam, h2):
    order = np.argsort(-lam, kind="stable")
    return lam[order], h2[order]


def reduce_real(form: RawForm, tol: float = ZERO_EIG_TOL) -> EffectiveForm:
    """Reduce x'Ax + b'x + c to sum lam_n chi2_1(h_n^2) + sigma N(0,1) + const.

    Weights are the nonzero eigenvalues of B'AB (equal to those of
    Sigma A), sorted descending so positive weights come first.  Raises
    DegenerateConstantError when no random part survives.
    """
    b_fac, _ = factor_covariance(form.sigma_mat, tol)
    m = b_fac.T @ form.a @ b_fac
    lam_all, p = np.linalg.eigh((m + m.T) / 2.0)
    d = p.T @ (b_fac.T @ (2.0 * form.a @ form.mu + form.b))
    c_prime = float(form.b @ form.mu + form.mu @ form.a @ form.mu + form.c)

    lam, d_kept, sigma2 = _complete_square(lam_all, d, tol)
    if lam.size == 0 and sigma2 == 0.0:
        raise DegenerateConstantError(c_prime)

    h = d_kept / (2.0 * lam) if lam.size else d_kept
    h2 = h**2
    const = c_prime - float(np.sum(lam * h2))
    sigma = np.sqrt(sigma2)
    if sigma < GAUSS_CLIP * (1.0 + float(np.linalg.norm(d))):
        sigma = 0.0
        if lam.size == 0:
            raise DegenerateConstantError(c_prime)
    lam, h2 = _sort_descending(lam, h2)
    return EffectiveForm(lam, h2, sigma, const)


def reduce_complex(form: RawComplexForm, tol: float = ZERO_EIG_TOL) -> ReducedForm:
    """Reduce a Hermitian complex form to a real reduced form.

    Each nonzero eigenvalue lambda_j of B^H A B contributes
    (lambda_j / 2) chi2_2(h_j^2) with h_j^2 = |d_j|^2 / (2 lambda_j^2),
    so all degrees of freedom are even.  Zero-direction linear terms give
    sigma = sqrt(sum |d_j|^2 / 2).
    """
    b_fac, _ = factor_covariance(form.sigma_mat, tol)
    m = b_fac.conj().T @ form.a @ b_fac
    lam_all, p = np.linalg.eigh((m + m.conj().T) / 2.0)
    d = p.conj().T @ (b_fac.conj().T @ (2.0 * form.a @ form.mu + form.b))
    c_prime = float(
        np.real(form.b.conj() @ form.mu)
        + np.real(form.mu.conj() @ form.a @ form.mu)
        + form.c
    )

    lam, d_kept, sigma2_raw = _complete_square(lam_all, d, tol)
    sigma2 = sigma2_raw / 2.0
    if lam.size == 0 and sigma2 == 0.0:
        raise DegenerateConstantError(c_prime)

    h2 = np.abs(d_kept) ** 2 / (2.0 * lam**2) if lam.size else np.zeros(0)
    const = c_prime - float(np.sum(np.abs(d_kept) ** 2 / (4.0 * lam))) if lam.size else c_prime
    sigma = np.sqrt(sigma2)
    if sigma < GAUSS_CLIP * (1.0 + float(np.linalg.norm(d))):
        sigma = 0.0
        if lam.size == 0:
            raise DegenerateConstantError(c_prime)
    lam, h2 = _sort_descending(lam, h2)
    eff = EffectiveForm(lam / 2.0, h2, sigma, const)
    red = group_eigenvalues(eff)
    # one complex variable per weight = two real degrees of freedom
    return ReducedForm(red.omega, 2 * red.nu, red.delta2, red.sigma_gauss, red.const)


def group_eigenvalues(eff: EffectiveForm, group_tol: float = GROUP_TOL) -> ReducedForm:
    """Cluster equal weights of an effective form into a reduced form.

    Single-linkage on the descending-sorted weights: consecutive values
    closer than group_tol * max|lam| join a cluster.  Cluster weight is
    the mean, multiplicity the count, noncentrality the sum of h^2.
    Grouping affects series efficiency only, never the distribution.
    """
    lam, h2 = _sort_descending(eff.lam, eff.h2)
    if lam.size == 0:
        return ReducedForm(
            np.zeros(0), np.zeros(0, dtype=int), np.zeros(0), eff.sigma_gauss, eff.const
        )
    scale = float(np.max(np.abs(lam)))
    omegas, nus, delta2s = [], [], []
    start = 0
    for i in range(1, lam.size + 1):
        if i == lam.size or abs(lam[i] - lam[i - 1]) > group_tol * scale:
            omegas.append(float(np.mean(lam[start:i])))
            nus.append(i - start)
            delta2s.append(float(np.sum(h2[start:i])))
            start = i
    return ReducedForm(
        np.array(omegas), np.array(nus, dtype=int), np.array(delta2s),
        eff.sigma_gauss, eff.const,
    )


def reduce_raw(form: RawForm, tol: float = ZERO_EIG_TOL,
               group_tol: float = GROUP_TOL) -> ReducedForm:
    """Convenience: reduce_real followed by group_eigenvalues."""
    return group_eigenvalues(reduce_real(form, tol), group_tol)


def classify(red: ReducedForm) -> FormClass:
    """Classification flags (centrality, definiteness, Gaussian term, even dofs)."""
    if red.n_groups == 0:
        definiteness = "positive"  # vacuous; no chi-square part
    elif np.all(red.omega > 0):
        definiteness = "positive"
    elif np.all(red.omega < 0):
        definiteness = "negative"
    else:
        definiteness = "indefinite"
    central = bool(np.all(red.delta2 == 0.0))
    return FormClass(
        centrality="central" if central else "noncentral",
        definiteness=definiteness,
        has_gaussian=red.sigma_gauss > 0.0,
        even_degrees=bool(np.all(red.nu % 2 == 0)),
    )
