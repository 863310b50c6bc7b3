"""
Local homodyne detection on FSG probes: outcome covariance, its phase derivatives,
the classical Fisher matrix, the local-oscillator angle search and a Monte-Carlo
maximum-likelihood check of the Cramer-Rao bound.

All nodes share one local-oscillator angle theta_hd and the prior phases are zero.
Rotating every mode by theta is the same as shifting theta_hd by theta, which the
batched helpers below rely on.
"""
import logging
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg, stats

from privsense.config import settings
from privsense.errors import ConvergenceError, DegenerateError, NumericalError
from privsense.models import (
    FsgBlocks,
    HomodyneConfig,
    HomodyneResult,
    McConfig,
    McReport,
    QfimForm,
    StructuredFim,
    WeightVector,
)
from privsense.services import metrology, optimizer
from privsense.services.symplectic import assemble_covariance, phase_rotation

STRUCTURE_TOL = 1e-10
PEAK_WINDOW = 3  # coarse steps on each side of a candidate peak
PEAK_TIE_TOL = 1e-9
ZOOM_STOP = 1e-6


# --- Outcome covariance ---

def homodyne_cov(blocks: FsgBlocks, theta_hd: float, thetas: Optional[Sequence[float]] = None) -> np.ndarray:
    """Gamma_jk(Theta) = u^T R(theta_j) V_jk R(theta_k)^T u with u = (cos theta_hd, sin theta_hd)."""
    M = blocks.M
    thetas = np.zeros(M) if thetas is None else np.asarray(thetas, dtype=float)
    V = assemble_covariance(blocks).V
    R = phase_rotation(thetas)
    u = np.array([[np.cos(theta_hd)], [np.sin(theta_hd)]])
    U = np.kron(np.eye(M), u)
    gamma = U.T @ (R @ V @ R.T) @ U
    gamma = 0.5 * (gamma + gamma.T)

    eigs = linalg.eigvalsh(gamma)
    if eigs[0] < -1e-10 * max(1.0, float(eigs[-1])):
        raise NumericalError(f"Homodyne covariance is not positive definite (min eigenvalue {eigs[0]:.3e})")
    return gamma


def homodyne_cov_derivatives(blocks: FsgBlocks, theta_hd: float) -> List[np.ndarray]:
    """dGamma/dtheta_j at Theta = 0: (eps2-eps1) sin 2theta_hd on (j,j), (gam2-gam1) sin 2theta_hd / 2 on row/column j."""
    D = _derivative_batch(blocks, np.array([theta_hd]))[0]
    return [D[j] for j in range(blocks.M)]


def _gamma_batch(blocks: FsgBlocks, angles: np.ndarray) -> np.ndarray:
    c2, s2 = np.cos(angles) ** 2, np.sin(angles) ** 2
    diag = blocks.eps1 * c2 + blocks.eps2 * s2
    off = blocks.gam1 * c2 + blocks.gam2 * s2
    eye = np.eye(blocks.M, dtype=bool)
    return np.where(eye, diag[:, None, None], off[:, None, None])


def _derivative_batch(blocks: FsgBlocks, angles: np.ndarray) -> np.ndarray:
    """Shape (angles, j, M, M)."""
    M = blocks.M
    sin2 = np.sin(2.0 * angles)
    dd = (blocks.eps2 - blocks.eps1) * sin2
    do = 0.5 * (blocks.gam2 - blocks.gam1) * sin2
    D = np.zeros((angles.size, M, M, M))
    for j in range(M):
        D[:, j, j, :] = do[:, None]
        D[:, j, :, j] = do[:, None]
        D[:, j, j, j] = dd
    return D


# --- Fisher information ---

def gaussian_fisher(gamma: np.ndarray, dgamma: np.ndarray) -> np.ndarray:
    """
    F_jk = tr(Gamma^-1 dGamma_j Gamma^-1 dGamma_k) / 2 for a zero-mean Gaussian outcome model.
    Batched over leading axes: gamma (..., M, M), dgamma (..., P, M, M).
    """
    gamma = np.asarray(gamma, dtype=float)
    dgamma = np.asarray(dgamma, dtype=float)
    try:
        X = np.linalg.solve(gamma[..., None, :, :], dgamma)
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"Homodyne covariance inversion failed: {e}")
    F = 0.5 * np.einsum("...jab,...kba->...jk", X, X)
    return 0.5 * (F + np.swapaxes(F, -1, -2))


def as_structured(F: np.ndarray) -> Union[StructuredFim, np.ndarray]:
    """aI + bJ when the entries allow it, the dense matrix otherwise."""
    M = F.shape[0]
    diag = np.diag(F)
    off = F[~np.eye(M, dtype=bool)]
    scale = max(1.0, float(np.max(np.abs(F))))
    if np.ptp(diag) <= STRUCTURE_TOL * scale and np.ptp(off) <= STRUCTURE_TOL * scale:
        F11, F12 = float(np.mean(diag)), float(np.mean(off))
        return StructuredFim(M=M, a=F11 - F12, b=F12)
    logging.warning(f"⚠️ Homodyne Fisher matrix is not of the form aI + bJ; keeping it dense")
    return F


def homodyne_fim(blocks: FsgBlocks, theta_hd: float) -> Union[StructuredFim, np.ndarray]:
    gamma = homodyne_cov(blocks, theta_hd)
    dgamma = np.stack(homodyne_cov_derivatives(blocks, theta_hd))
    return as_structured(gaussian_fisher(gamma, dgamma))


def _fim_batch(blocks: FsgBlocks, angles: np.ndarray) -> np.ndarray:
    return gaussian_fisher(_gamma_batch(blocks, angles), _derivative_batch(blocks, angles))


def _xi_batch(F: np.ndarray, w: WeightVector) -> np.ndarray:
    """Direct criterion 1 / Tr(W F^+) per angle, using the aI + bJ structure."""
    M = F.shape[-1]
    F11 = np.mean(np.diagonal(F, axis1=-2, axis2=-1), axis=-1)
    F12 = (np.sum(F, axis=(-2, -1)) - M * F11) / (M * (M - 1))
    a, b = F11 - F12, F12
    collective = a + M * b
    if w.spread == 0.0:
        return M * collective
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(a > 0, 1.0 / (w.spread / a + 1.0 / (M * collective)), 0.0)


# --- Angle search ---

def _zoom_peak(score: Callable[[np.ndarray], np.ndarray], center: float, half_width: float) -> Tuple[float, float]:
    """
    Local re-gridding around a candidate peak, shrinking the window on every pass,
    then a golden search on the last bracket. Squeezed probes have peaks narrower than
    the coarse grid step, so the first window spans several coarse steps.
    """
    points = settings.HD_ZOOM_POINTS
    best_theta, best_value = center, float(score(np.array([center]))[0])
    while half_width > ZOOM_STOP:
        local = np.linspace(best_theta - half_width, best_theta + half_width, points)
        values = score(local)
        values = np.where(np.isfinite(values), values, -np.inf)
        i = int(np.argmax(values))
        if values[i] >= best_value:
            best_theta, best_value = float(local[i]), float(values[i])
        half_width = 2.0 * (local[1] - local[0])

    def scalar(theta: float) -> float:
        return float(score(np.array([theta]))[0])

    theta, value, _ = optimizer.golden_section_max(scalar, best_theta - half_width, best_theta + half_width, settings.OPT_TOL)
    if value >= best_value:
        best_theta, best_value = theta, value
    return best_theta, best_value


def _refine_peaks(score: Callable[[np.ndarray], np.ndarray], grid: np.ndarray, values: np.ndarray) -> Tuple[float, float]:
    """Refines the best few local maxima of a pi-periodic score; ties go to the smallest angle."""
    step = float(grid[1] - grid[0])
    finite = np.where(np.isfinite(values), values, -np.inf)
    peaks = np.flatnonzero((finite >= np.roll(finite, 1)) & (finite >= np.roll(finite, -1)) & np.isfinite(values))
    top = peaks[np.argsort(-finite[peaks], kind="stable")][: settings.HD_REFINE_CANDIDATES]

    refined = []
    for i in top:
        theta, value = _zoom_peak(score, float(grid[i]), PEAK_WINDOW * step)
        refined.append((theta % np.pi, value))

    best = max(value for _, value in refined)
    ties = [(theta, value) for theta, value in refined if value >= best - PEAK_TIE_TOL * max(1.0, abs(best))]
    return min(ties)


def optimize_homodyne_angle(blocks: FsgBlocks, w: Optional[WeightVector] = None) -> HomodyneResult:
    """
    theta_hd maximizing the proxy Tr(W F_HD), plus the direct minimizer of Tr(W F_HD^+)
    as a cross-check. Precision is evaluated at the proxy angle.
    """
    w = WeightVector.mean(blocks.M) if w is None else w
    grid = np.linspace(0.0, np.pi, settings.HD_GRID_POINTS, endpoint=False)
    F = _fim_batch(blocks, grid)
    proxy = np.einsum("i,nij,j->n", w.w, F, w.w)
    if float(np.max(proxy)) <= settings.TOL_RANK:
        raise DegenerateError("Homodyne Fisher information vanishes at every angle")

    def proxy_score(angles: np.ndarray) -> np.ndarray:
        return np.einsum("i,nij,j->n", w.w, _fim_batch(blocks, angles), w.w)

    def direct_score(angles: np.ndarray) -> np.ndarray:
        return _xi_batch(_fim_batch(blocks, angles), w)

    theta_star, _ = _refine_peaks(proxy_score, grid, proxy)
    theta_direct, _ = _refine_peaks(direct_score, grid, _xi_batch(F, w))

    fim = homodyne_fim(blocks, theta_star)
    if not isinstance(fim, StructuredFim):
        raise NumericalError("Homodyne Fisher matrix lost its aI + bJ structure")
    xi_hd = metrology.precision(fim, w)
    xi_direct = metrology.precision(homodyne_fim(blocks, theta_direct), w)

    result = HomodyneResult(
        theta_star=float(theta_star),
        fim=fim,
        xi_hd=xi_hd,
        theta_direct=float(theta_direct),
        xi_hd_direct=xi_direct,
    )
    if not result.proxy_agrees:
        logging.info(
            f"Proxy angle {theta_star:.6f} (xi={xi_hd:.6g}) differs from direct angle "
            f"{theta_direct:.6f} (xi={xi_direct:.6g})"
        )
    return result


def homodyne_precision_ratio(
    M: int,
    n_th: float,
    N_tot: float,
    w: Optional[WeightVector] = None,
    form: Optional[QfimForm] = None,
) -> float:
    """xi_HD / xi of the privacy-optimized state: what local homodyne keeps of the collective precision."""
    state = optimizer.maximize_privacy(M, n_th, N_tot, w, form)
    result = optimize_homodyne_angle(state.blocks, w)
    return result.xi_hd / state.xi


# --- Monte Carlo ---

def _sampling_factor(gamma: np.ndarray) -> np.ndarray:
    try:
        return linalg.cholesky(gamma, lower=True)
    except linalg.LinAlgError:
        vals, vecs = linalg.eigh(gamma)
        floor = -1e-12 * max(1.0, float(vals[-1]))
        if vals[0] < floor:
            raise NumericalError(f"Cannot sample from covariance with eigenvalue {vals[0]:.3e}")
        return vecs * np.sqrt(np.clip(vals, 0.0, None))


def mc_estimate(blocks: FsgBlocks, theta_hd: float, mc: McConfig) -> McReport:
    """
    Maximum-likelihood estimates of a common phase shift theta (true value 0) from
    mc.n_samples homodyne records per trial, compared with the Cramer-Rao bound
    1 / (n * 1^T F_HD 1).
    """
    config = HomodyneConfig(theta_hd=theta_hd)
    F = homodyne_fim(blocks, config.theta_hd)
    dense = F.dense() if isinstance(F, StructuredFim) else F
    ones = np.ones(blocks.M)
    xi_sym = float(ones @ dense @ ones)
    if xi_sym <= settings.TOL_RANK:
        raise ConvergenceError(f"Likelihood is flat at theta_hd={theta_hd}: no information on the common phase")
    crb = 1.0 / (mc.n_samples * xi_sym)

    factor = _sampling_factor(homodyne_cov(blocks, config.theta_hd))
    bracket = settings.MLE_BRACKET
    grid = np.linspace(-bracket, bracket, settings.MLE_GRID_POINTS)
    gammas = _gamma_batch(blocks, config.theta_hd + grid)
    _, logdets = np.linalg.slogdet(gammas)
    inverses = np.linalg.inv(gammas)

    estimates = np.empty(mc.trials)
    children = np.random.SeedSequence(mc.seed).spawn(mc.trials)
    for k, child in enumerate(children):
        rng = np.random.default_rng(child)
        X = rng.standard_normal((mc.n_samples, blocks.M)) @ factor.T
        S = X.T @ X / mc.n_samples

        loglik = -(logdets + np.einsum("gij,ji->g", inverses, S))
        i = int(np.argmax(loglik))
        if i == 0 or i == grid.size - 1:
            raise ConvergenceError(f"Trial {k}: likelihood maximum at the bracket boundary {grid[i]:+.3f}")

        def score(theta: float) -> float:
            g = _gamma_batch(blocks, np.array([config.theta_hd + theta]))[0]
            _, logdet = np.linalg.slogdet(g)
            return -(logdet + float(np.trace(np.linalg.solve(g, S))))

        estimates[k], _, _ = optimizer.golden_section_max(score, grid[i - 1], grid[i + 1], settings.OPT_TOL)

    var = float(np.var(estimates, ddof=1))
    dof = mc.trials - 1
    ci = (dof * var / stats.chi2.ppf(0.975, dof), dof * var / stats.chi2.ppf(0.025, dof))
    logging.info(f"MC: var={var:.4e}, crb={crb:.4e}, ratio={var / crb:.4f} over {mc.trials} trials")
    return McReport(
        empirical_var=var,
        crb=crb,
        ratio=var / crb,
        ci95=(float(ci[0]), float(ci[1])),
        ratio_ci95=(float(ci[0] / crb), float(ci[1] / crb)),
        n_samples=mc.n_samples,
        trials=mc.trials,
        seed=mc.seed,
        theta_hd=config.theta_hd,
    )
