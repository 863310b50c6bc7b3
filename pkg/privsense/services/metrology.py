"""
Quantum Fisher information, precision and privacy for FSG probes.

For isothermal FSG blocks the QFIM is F = a*I + b*J. Precision and privacy of a
linear function f = w.Theta are evaluated on that structure directly; dense matrices
(e.g. from the general-Gaussian oracle) go through an eigendecomposition.
"""
import logging
from typing import Optional, Sequence, Union

import numpy as np
from scipy import linalg

from privsense.config import settings
from privsense.errors import (
    DomainError,
    NumericalError,
    OutOfRangeError,
    SingularError,
    UndefinedError,
)
from privsense.models import (
    CovarianceState,
    FimInverse,
    FsgBlocks,
    PrecisionReport,
    QfimForm,
    StructuredFim,
    WeightSpectrum,
    WeightVector,
    readonly,
)
from privsense.services.fsg import isothermal_nu
from privsense.services.symplectic import symplectic_form

FimLike = Union[StructuredFim, np.ndarray]

RANGE_TOL = 1e-9


# --- QFIM of the FSG family ---

def structured_coefficients(eps1, eps2, gam1, gam2, form: QfimForm):
    """
    Vectorized (a, b) of the FSG QFIM.

    a = F11 - F12 is assembled from (eps-gam)(eps+gam) products so that it vanishes
    without cancellation on perfectly private states.
    """
    f1, f2 = eps1 - gam1, eps2 - gam2
    g1, g2 = eps1 + gam1, eps2 + gam2
    nu = np.sqrt(f1 * f2)
    q = np.sqrt(g1 * g2)
    spread = (np.sqrt(f1 * g1) - np.sqrt(f2 * g2)) ** 2
    gam_sq = gam1**2 + gam2**2
    if form == "pure-state":
        return (spread + 2.0 * (nu * q - 1.0)) / 2.0, gam_sq / 2.0
    denom = 1.0 + nu**2
    return (spread + 2.0 * nu * (q - nu)) / denom, gam_sq / denom


def qfim_fsg(blocks: FsgBlocks, form: Optional[QfimForm] = None) -> StructuredFim:
    """
    QFIM for phase encoding on an isothermal FSG state.

    'pure-state': F11 = (eps1^2+eps2^2)/2 - 1, F12 = (gam1^2+gam2^2)/2.
    'isothermal': F11 = (eps1^2+eps2^2-2nu^2)/(1+nu^2), F12 = (gam1^2+gam2^2)/(1+nu^2).
    The two agree for pure states.
    """
    form = settings.QFIM_FORM if form is None else form
    isothermal_nu(blocks)
    a, b = structured_coefficients(blocks.eps1, blocks.eps2, blocks.gam1, blocks.gam2, form)
    return StructuredFim(M=blocks.M, a=float(a), b=float(b))


# --- Structured inverse ---

def fim_inverse(F: StructuredFim, tol_rank: Optional[float] = None) -> FimInverse:
    tol = (settings.TOL_RANK if tol_rank is None else tol_rank) * max(abs(F.a), abs(F.b), 1.0)
    M, a, b = F.M, F.a, F.b
    collective = a + M * b

    if a > tol and collective > tol:
        return FimInverse(M=M, kind="regular", alpha=1.0 / a, beta=-b / (a * collective))
    if a > tol:
        # F = a (I - J/M)
        return FimInverse(M=M, kind="pseudo", alpha=1.0 / a, beta=-1.0 / (a * M))
    if collective > tol:
        # F = b J
        return FimInverse(M=M, kind="pseudo", alpha=0.0, beta=1.0 / (M * M * b))
    raise SingularError(f"Fisher matrix vanishes: a={a}, a+Mb={collective}")


def _dense_inverse_form(F: np.ndarray, w: np.ndarray, tol: float) -> float:
    """w^T F^+ w, requiring w to lie in range(F)."""
    F = 0.5 * (F + F.T)
    try:
        vals, vecs = linalg.eigh(F)
    except linalg.LinAlgError as e:
        raise NumericalError(f"Eigensolve of Fisher matrix failed: {e}")
    keep = vals > tol * max(float(np.max(np.abs(vals))), 1.0)
    if not np.any(keep):
        raise SingularError("Fisher matrix vanishes")
    coeffs = vecs.T @ w
    outside = float(np.linalg.norm(coeffs[~keep]))
    if outside > RANGE_TOL:
        raise OutOfRangeError(f"Weight vector has a component {outside:.3e} outside range(F)")
    return float(np.sum(coeffs[keep] ** 2 / vals[keep]))


def precision(F: FimLike, w: Optional[WeightVector] = None) -> float:
    """xi = [w^T F^-1 w]^-1, the inverse single-run Cramer-Rao variance of w.Theta."""
    if isinstance(F, np.ndarray):
        w = WeightVector.mean(F.shape[0]) if w is None else w
        return 1.0 / _dense_inverse_form(np.asarray(F, dtype=float), w.w, settings.TOL_RANK)

    w = WeightVector.mean(F.M) if w is None else w
    if w.M != F.M:
        raise DomainError(f"Weight vector has {w.M} entries, Fisher matrix is {F.M}x{F.M}")

    inverse = fim_inverse(F)
    M, a, b = F.M, F.a, F.b
    if inverse.kind == "regular":
        # ||w||^2 alpha + beta, rearranged so that mean weights give exactly M(a+Mb)
        xi_inv = w.spread / a + 1.0 / (M * (a + M * b))
    elif inverse.alpha == 0.0:
        outside = float(np.sqrt(w.spread))
        if outside > RANGE_TOL:
            raise OutOfRangeError(f"F is proportional to J; weight vector is {outside:.3e} away from the mean")
        xi_inv = inverse.beta
    else:
        raise OutOfRangeError("F annihilates the all-ones direction; no weighted sum is estimable")
    return 1.0 / xi_inv


# --- Privacy ---

def _require_trace(trace: float):
    if trace <= settings.TOL_RANK:
        raise UndefinedError(f"Privacy is undefined for a vanishing Fisher matrix (Tr F = {trace})")


def privacy_deficit(F: FimLike, w: Optional[WeightVector] = None) -> float:
    """1 - P, evaluated without cancellation for structured F."""
    if isinstance(F, np.ndarray):
        return 1.0 - privacy(F, w)

    w = WeightVector.mean(F.M) if w is None else w
    _require_trace(F.trace)
    M, a, b = F.M, F.a, F.b
    norm_sq = w.norm_sq
    return (norm_sq * (M - 1) * a + M * w.spread * b) / (norm_sq * M * (a + b))


def privacy(F: FimLike, w: Optional[WeightVector] = None) -> float:
    """P = Tr(W F) / (||w||^2 Tr F)."""
    if isinstance(F, np.ndarray):
        F = np.asarray(F, dtype=float)
        w = WeightVector.mean(F.shape[0]) if w is None else w
        trace = float(np.trace(F))
        _require_trace(trace)
        value = float(w.w @ F @ w.w) / (w.norm_sq * trace)
    else:
        value = 1.0 - privacy_deficit(F, w)

    if value > 1.0 + 1e-9:
        logging.warning(f"⚠️ Privacy {value} exceeds 1")
    return value


def closed_form_privacy_of_optimum(M: int, N_tot: float) -> float:
    if M < 2 or N_tot < 0:
        raise DomainError(f"Need M >= 2 and N_tot >= 0, got M={M}, N_tot={N_tot}")
    return 1.0 - (M - 1) / (1.0 + M + 2.0 * N_tot)


def optimal_sensing_residual(F: StructuredFim, N_tot: float) -> float:
    """[(F^-1)_11 - (F^-1)_12]/M + (F^-1)_12 - 1/(8N(N+1)); zero on the ultimate-precision state."""
    if N_tot <= 0:
        raise DomainError(f"N_tot must be positive, got {N_tot}")
    inverse = fim_inverse(F)
    return inverse.alpha / F.M + inverse.beta - 1.0 / (8.0 * N_tot * (N_tot + 1.0))


def precision_report(F: StructuredFim, w: Optional[WeightVector] = None) -> PrecisionReport:
    xi = precision(F, w)
    try:
        P = privacy(F, w)
    except UndefinedError:
        P = None
    mu = None
    if fim_inverse(F).alpha == 0.0:
        # F = b J = mu W for the mean
        mu = F.M * (F.a + F.M * F.b)
    return PrecisionReport(xi=xi, privacy=P, mu=mu)


def weight_matrix_spectrum(w: WeightVector) -> WeightSpectrum:
    vals, vecs = linalg.eigh(w.matrix())
    vec = vecs[:, -1]
    if np.sum(vec) < 0:
        vec = -vec
    nulls = int(np.sum(np.abs(vals[:-1]) <= 1e-12))
    return WeightSpectrum(principal=float(vals[-1]), principal_vec=readonly(vec), nulls=nulls)


# --- General Gaussian oracle ---

def qfim_general_gaussian(
    state: CovarianceState, dV: Sequence[np.ndarray], tol_rank: Optional[float] = None
) -> np.ndarray:
    """
    F_jk = 1/2 vec(dV_j)^T (V x V - Omega x Omega)^+ vec(dV_k) for zero-mean Gaussian states.

    Pure states make the superoperator singular; the pseudo-inverse is used and the
    derivatives must not leak into its null space.
    """
    tol = settings.TOL_RANK if tol_rank is None else tol_rank
    omega = symplectic_form(state.modes).omega
    K = np.kron(state.V, state.V) - np.kron(omega, omega)
    try:
        lam, U = linalg.eigh(K)
    except linalg.LinAlgError as e:
        raise NumericalError(f"Eigensolve of the QFIM superoperator failed: {e}")

    keep = lam > tol * float(lam[-1])
    vecs = np.stack([np.asarray(d, dtype=float).reshape(-1) for d in dV], axis=1)
    proj = U.T @ vecs

    norms = np.maximum(np.linalg.norm(vecs, axis=0), np.finfo(float).tiny)
    leak = np.linalg.norm(proj[~keep], axis=0) / norms
    if np.any(leak > 1e-6):
        condition = float(lam[-1] / lam[keep][0])
        raise NumericalError(
            f"Derivatives leak {float(np.max(leak)):.3e} into the singular subspace (condition estimate {condition:.3e})"
        )

    kept = proj[keep]
    F = 0.5 * (kept.T / lam[keep]) @ kept
    return 0.5 * (F + F.T)
