"""
Isothermal FSG states as a one-parameter family under the photon-number constraint.

Chart: with A = exp(2s) (collective mode) and B = exp(2t) (the M-1 orthogonal modes),
every state has symplectic eigenvalues nu = 1 + 2 n_th by construction and carries
    N_tot = [nu (cosh 2s + (M-1) cosh 2t) - M] / 2
photons. The free parameter is t in [-t_max, t_max] on the s >= 0 branch.
"""
from typing import Optional, Tuple

import numpy as np

from privsense.config import settings
from privsense.errors import DomainError
from privsense.models import FsgBlocks, FsgParams, PhotonBudget, QfimForm, SolveResult
from privsense.services.symplectic import fsg_symplectic_eigenvalues

_EPS = float(np.finfo(float).eps)


def chart_entries(M: int, nu, s, t) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized (eps1, eps2, gam1, gam2) for arrays of s and t."""
    A, B = np.exp(2.0 * np.asarray(s)), np.exp(2.0 * np.asarray(t))
    A_inv, B_inv = np.exp(-2.0 * np.asarray(s)), np.exp(-2.0 * np.asarray(t))
    eps1 = nu * (A + (M - 1) * B) / M
    gam1 = nu * (A - B) / M
    eps2 = nu * (A_inv + (M - 1) * B_inv) / M
    gam2 = nu * (A_inv - B_inv) / M
    return eps1, eps2, gam1, gam2


def blocks_from_params(p: FsgParams) -> FsgBlocks:
    eps1, eps2, gam1, gam2 = chart_entries(p.M, p.nu, p.s, p.t)
    return FsgBlocks(M=p.M, eps1=float(eps1), eps2=float(eps2), gam1=float(gam1), gam2=float(gam2))


def total_photons(blocks: FsgBlocks) -> float:
    return blocks.M * (blocks.eps1 + blocks.eps2 - 2.0) / 4.0


def collective_cosh(M: int, n_th: float, N_tot: float, t):
    """h = cosh 2s required by the photon constraint. Rounding just below 1 is clamped to 1."""
    nu = 1.0 + 2.0 * n_th
    budget = (2.0 * N_tot + M) / nu
    h = budget - (M - 1) * np.cosh(2.0 * np.asarray(t))
    slack = 8 * _EPS * budget
    return np.where((h < 1.0) & (h >= 1.0 - slack), 1.0, h)


def s_of_t(M: int, n_th: float, N_tot: float, t) -> np.ndarray:
    """Vectorized s >= 0 branch; NaN where the photon constraint has no solution."""
    h = collective_cosh(M, n_th, N_tot, t)
    with np.errstate(invalid="ignore"):
        return np.where(h >= 1.0, 0.5 * np.arccosh(np.maximum(h, 1.0)), np.nan)


def solve_s(M: int, n_th: float, N_tot: float, t: float) -> SolveResult:
    PhotonBudget(N_tot=N_tot).require_floor(M, n_th)
    h = float(collective_cosh(M, n_th, N_tot, t))
    if h < 1.0:
        return SolveResult(s=0.0, feasible=False)
    return SolveResult(s=float(0.5 * np.arccosh(h)), feasible=True)


def free_parameter_range(M: int, n_th: float, N_tot: float) -> float:
    """Largest |t| with a solution of the photon constraint."""
    PhotonBudget(N_tot=N_tot).require_floor(M, n_th)
    nu = 1.0 + 2.0 * n_th
    c = ((2.0 * N_tot + M) / nu - 1.0) / (M - 1)
    return float(0.5 * np.arccosh(max(c, 1.0)))


def optimal_precision_blocks(M: int, N_tot: float) -> FsgBlocks:
    """Pure state with the ultimate precision 8N(N+1) for the mean."""
    if N_tot < 0:
        raise DomainError(f"N_tot must be >= 0, got {N_tot}")
    root = np.sqrt(N_tot * (N_tot + 1.0))
    gam1 = (2.0 * N_tot + 2.0 * root) / M
    # 2(N - root)/M without cancellation
    gam2 = -2.0 * N_tot / (M * (N_tot + root)) if N_tot > 0 else 0.0
    return FsgBlocks(M=M, eps1=1.0 + gam1, eps2=1.0 + gam2, gam1=float(gam1), gam2=float(gam2))


def tmsv_blocks(N_tot: float) -> FsgBlocks:
    if N_tot < 0:
        raise DomainError(f"N_tot must be >= 0, got {N_tot}")
    gam = float(np.sqrt(N_tot * (N_tot + 2.0)))
    return FsgBlocks(M=2, eps1=1.0 + N_tot, eps2=1.0 + N_tot, gam1=gam, gam2=-gam)


def vacuum_blocks(M: int) -> FsgBlocks:
    return FsgBlocks(M=M, eps1=1.0, eps2=1.0, gam1=0.0, gam2=0.0)


def thermal_blocks(M: int, n_th: float) -> FsgBlocks:
    """Product thermal state, the only state at N_tot = M * n_th."""
    nu = 1.0 + 2.0 * n_th
    return FsgBlocks(M=M, eps1=nu, eps2=nu, gam1=0.0, gam2=0.0)


def isothermal_nu(blocks: FsgBlocks, tol: Optional[float] = None) -> float:
    """Common symplectic eigenvalue; DomainError if nu- and nu+ disagree."""
    tol = settings.TOL_ISOTHERMAL if tol is None else tol
    nu_minus, nu_plus = fsg_symplectic_eigenvalues(blocks)
    slack = sum(blocks.rounding_slack())
    if abs(nu_plus - nu_minus) > (tol + slack) * max(nu_minus, nu_plus):
        raise DomainError(f"Blocks are not isothermal: nu-={nu_minus}, nu+={nu_plus}")
    return nu_minus


def params_from_blocks(blocks: FsgBlocks) -> FsgParams:
    """Inverse chart: eps1-gam1 = nu e^{2t}, eps1+(M-1)gam1 = nu e^{2s}."""
    nu = isothermal_nu(blocks)
    f = blocks.factors()
    return FsgParams(
        M=blocks.M,
        n_th=max(0.0, (nu - 1.0) / 2.0),
        s=float(0.5 * np.log(f[2] / nu)),
        t=float(0.5 * np.log(f[0] / nu)),
    )


def privacy_condition_residual(blocks: FsgBlocks, form: Optional[QfimForm] = None) -> float:
    """(gam1^2+gam2^2) - (eps1^2+eps2^2-2 nu^2); zero iff F11 = F12. The pure-state form uses nu = 1."""
    form = settings.QFIM_FORM if form is None else form
    nu_sq = 1.0 if form == "pure-state" else isothermal_nu(blocks) ** 2
    residual = (blocks.gam1**2 + blocks.gam2**2) - (blocks.eps1**2 + blocks.eps2**2 - 2.0 * nu_sq)
    return float(residual)
