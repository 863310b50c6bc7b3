"""
Covariance-level Gaussian linear algebra: symplectic form, FSG covariance assembly,
physicality, phase rotations and numeric oracles for spectra and determinants.
"""
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from privsense.config import settings
from privsense.errors import DomainError, NumericalError, PhysicalityError
from privsense.models import (
    CovarianceState,
    FsgBlocks,
    PhysicalityReport,
    SymplecticForm,
    readonly,
)

OMEGA_1 = np.array([[0.0, 1.0], [-1.0, 0.0]])


def symplectic_form(M: int) -> SymplecticForm:
    return SymplecticForm(M=M, omega=readonly(np.kron(np.eye(M), OMEGA_1)))


def assemble_covariance(blocks: FsgBlocks, tol_phys: Optional[float] = None) -> CovarianceState:
    M = blocks.M
    eps = np.diag([blocks.eps1, blocks.eps2])
    gam = np.diag([blocks.gam1, blocks.gam2])
    # J - I keeps the diagonal blocks exactly eps
    V = np.kron(np.eye(M), eps) + np.kron(np.ones((M, M)) - np.eye(M), gam)
    state = CovarianceState(modes=M, V=V)

    report = physicality_check(state, tol_phys)
    if not report.physical:
        raise PhysicalityError(
            f"Blocks {blocks.model_dump()} give V + i*Omega with min eigenvalue {report.min_eig:.3e}"
        )
    return state


def physicality_check(state: CovarianceState, tol_phys: Optional[float] = None) -> PhysicalityReport:
    """Uncertainty relation V + i*Omega >= 0, up to tol_phys."""
    tol = settings.TOL_PHYS if tol_phys is None else tol_phys
    omega = symplectic_form(state.modes).omega
    try:
        eigs = linalg.eigvalsh(state.V + 1j * omega)
    except linalg.LinAlgError as e:
        raise NumericalError(f"Eigensolve of V + i*Omega failed: {e}")
    min_eig = float(eigs[0])
    return PhysicalityReport(min_eig=min_eig, physical=min_eig >= -tol)


def symplectic_spectrum_numeric(state: CovarianceState) -> List[float]:
    """
    Symplectic eigenvalues from the Hermitian matrix i V^1/2 Omega V^1/2, which is similar to i*Omega*V.
    Its eigenvalues come in pairs +-nu_k; the positive half is returned in ascending order.
    """
    M = state.modes
    omega = symplectic_form(M).omega
    try:
        lam, U = linalg.eigh(state.V)
    except linalg.LinAlgError as e:
        raise NumericalError(f"Eigensolve of V failed: {e}")
    if lam[0] <= 0.0:
        raise PhysicalityError(f"V is not positive definite (min eigenvalue {lam[0]:.3e})")

    root = (U * np.sqrt(lam)) @ U.T
    try:
        nu = linalg.eigvalsh(1j * (root @ omega @ root))
    except linalg.LinAlgError as e:
        raise NumericalError(f"Eigensolve of i*Omega*V failed: {e}")

    negative, positive = -nu[:M][::-1], nu[M:]
    if not np.allclose(negative, positive, rtol=1e-8, atol=1e-12 * float(lam[-1])):
        raise NumericalError(f"Could not pair symplectic eigenvalues: {nu}")
    return [float(x) for x in positive]


def phase_rotation(thetas: Sequence[float]) -> np.ndarray:
    """Block-diagonal R(theta_j) = [[cos, sin], [-sin, cos]] per mode."""
    blocks = [np.array([[np.cos(th), np.sin(th)], [-np.sin(th), np.cos(th)]]) for th in thetas]
    return linalg.block_diag(*blocks)


def rotate_state(state: CovarianceState, thetas: Sequence[float]) -> CovarianceState:
    if len(thetas) != state.modes:
        raise DomainError(f"Expected {state.modes} angles, got {len(thetas)}")
    R = phase_rotation(thetas)
    return CovarianceState(modes=state.modes, V=R @ state.V @ R.T)


def phase_generators(state: CovarianceState) -> List[np.ndarray]:
    """dV/dtheta_j at Theta = 0 for the rotation convention above."""
    M = state.modes
    generators = []
    for j in range(M):
        G = np.zeros((2 * M, 2 * M))
        G[2 * j:2 * j + 2, 2 * j:2 * j + 2] = OMEGA_1
        generators.append(G @ state.V + state.V @ G.T)
    return generators


def fsg_determinant(blocks: FsgBlocks) -> float:
    """det V = (eps1+(M-1)gam1)(eps2+(M-1)gam2) [(eps1-gam1)(eps2-gam2)]^(M-1)."""
    f = blocks.factors()
    return float(f[2] * f[3] * (f[0] * f[1]) ** (blocks.M - 1))


def fsg_symplectic_eigenvalues(blocks: FsgBlocks) -> Tuple[float, float]:
    """(nu_minus, nu_plus); nu_minus has multiplicity M-1."""
    f = blocks.factors()
    if min(f) <= 0.0:
        raise DomainError(f"FSG block factors must be positive, got {f}")
    nu_minus = float(np.sqrt(f[0] * f[1]))
    nu_plus = float(np.sqrt(f[2] * f[3]))
    logging.debug(f"FSG symplectic eigenvalues M={blocks.M}: nu-={nu_minus}, nu+={nu_plus}")
    return nu_minus, nu_plus
