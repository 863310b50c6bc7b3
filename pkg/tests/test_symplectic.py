import numpy as np
import pytest
from pydantic import ValidationError

from privsense.errors import DomainError, PhysicalityError
from privsense.models import CovarianceState, FsgBlocks
from privsense.services import fsg
from privsense.services.symplectic import (
    assemble_covariance,
    fsg_determinant,
    fsg_symplectic_eigenvalues,
    phase_generators,
    phase_rotation,
    physicality_check,
    rotate_state,
    symplectic_form,
    symplectic_spectrum_numeric,
)


def test_symplectic_form_is_canonical():
    """Omega is antisymmetric and squares to -I."""
    omega = symplectic_form(3).omega
    assert omega.shape == (6, 6)
    assert np.array_equal(omega, -omega.T)
    assert np.allclose(omega @ omega, -np.eye(6))
    assert not omega.flags.writeable


def test_assembled_blocks_land_in_place():
    """Diagonal blocks are diag(eps1, eps2), every off-diagonal block is diag(gam1, gam2)."""
    blocks = FsgBlocks(M=3, eps1=3.0, eps2=1.5, gam1=1.0, gam2=-0.2)
    V = assemble_covariance(blocks).V
    for j in range(3):
        assert V[2 * j, 2 * j] == 3.0
        assert V[2 * j + 1, 2 * j + 1] == 1.5
        for k in range(3):
            if k != j:
                assert V[2 * j, 2 * k] == 1.0
                assert V[2 * j + 1, 2 * k + 1] == -0.2
                assert V[2 * j, 2 * k + 1] == 0.0


def test_vacuum_is_physical_and_saturates():
    """The vacuum sits exactly on the uncertainty boundary."""
    state = assemble_covariance(fsg.vacuum_blocks(4))
    report = physicality_check(state)
    assert report.physical
    assert abs(report.min_eig) < 1e-12


def test_sub_vacuum_state_is_flagged():
    """Uniform noise below vacuum violates V + i*Omega >= 0."""
    report = physicality_check(CovarianceState(V=0.5 * np.eye(4)))
    assert not report.physical
    assert report.min_eig == pytest.approx(-0.5)


def test_covariance_must_be_symmetric():
    with pytest.raises(ValidationError):
        CovarianceState(V=[[1.0, 0.3], [0.0, 1.0]])


def test_nonzero_first_moments_rejected():
    with pytest.raises(ValidationError):
        CovarianceState(V=np.eye(2), d=[0.1, 0.0])


def test_closed_form_spectrum_matches_numeric(random_blocks):
    """nu- (M-1 times) and nu+ agree with the numeric symplectic spectrum on random states."""
    for _ in range(1000):
        params, blocks = random_blocks()
        numeric = symplectic_spectrum_numeric(assemble_covariance(blocks))
        nu_minus, nu_plus = fsg_symplectic_eigenvalues(blocks)
        expected = sorted([nu_minus] * (params.M - 1) + [nu_plus])
        assert np.allclose(numeric, expected, rtol=1e-9, atol=0.0)


def test_chart_states_are_isothermal(random_blocks):
    """Every chart point has nu- = nu+ = 1 + 2 n_th."""
    for _ in range(100):
        params, blocks = random_blocks()
        nu_minus, nu_plus = fsg_symplectic_eigenvalues(blocks)
        assert nu_minus == pytest.approx(params.nu, rel=1e-12)
        assert nu_plus == pytest.approx(params.nu, rel=1e-12)


def test_block_determinant_matches_numeric(random_blocks):
    for _ in range(200):
        _, blocks = random_blocks()
        numeric = np.linalg.det(assemble_covariance(blocks).V)
        assert fsg_determinant(blocks) == pytest.approx(numeric, rel=1e-9)


def test_non_positive_factor_is_a_domain_error():
    """Unvalidated blocks with eps1 - gam1 < 0 are rejected by the closed form."""
    blocks = FsgBlocks.model_construct(M=2, eps1=1.0, eps2=1.0, gam1=2.0, gam2=0.0)
    with pytest.raises(DomainError):
        fsg_symplectic_eigenvalues(blocks)


def test_unphysical_blocks_rejected():
    with pytest.raises(ValidationError):
        FsgBlocks(M=2, eps1=0.5, eps2=0.5, gam1=0.0, gam2=0.0)


def test_assemble_raises_on_physicality_violation():
    """A strict tolerance turns rounding-level violations into errors."""
    blocks = fsg.vacuum_blocks(2)
    with pytest.raises(PhysicalityError):
        assemble_covariance(blocks, tol_phys=-1e-3)


def test_rotation_preserves_spectrum(random_blocks):
    params, blocks = random_blocks()
    state = assemble_covariance(blocks)
    rotated = rotate_state(state, np.linspace(0.1, 1.3, params.M))
    assert np.allclose(symplectic_spectrum_numeric(rotated), symplectic_spectrum_numeric(state), rtol=1e-9)


def test_rotation_is_orthogonal_and_symplectic():
    R = phase_rotation([0.3, -1.1])
    omega = symplectic_form(2).omega
    assert np.allclose(R @ R.T, np.eye(4))
    assert np.allclose(R @ omega @ R.T, omega)


def test_rotate_state_wrong_angle_count():
    state = assemble_covariance(fsg.vacuum_blocks(3))
    with pytest.raises(DomainError):
        rotate_state(state, [0.1, 0.2])


def test_phase_generators_match_finite_differences(random_blocks):
    """dV/dtheta_j against central differences of the rotated covariance."""
    params, blocks = random_blocks()
    state = assemble_covariance(blocks)
    h = 1e-6
    scale = float(np.max(np.abs(state.V)))
    for j, G in enumerate(phase_generators(state)):
        shift = np.zeros(params.M)
        shift[j] = h
        plus = rotate_state(state, shift).V
        minus = rotate_state(state, -shift).V
        assert np.allclose(G, (plus - minus) / (2 * h), atol=1e-6 * scale)
