import math

import numpy as np
import pytest
from pydantic import ValidationError

from privsense.errors import DomainError, InfeasibleError
from privsense.models import FsgBlocks, FsgParams
from privsense.services import fsg, metrology


def _photons_of_chart(params: FsgParams) -> float:
    return (params.nu * (math.cosh(2 * params.s) + (params.M - 1) * math.cosh(2 * params.t)) - params.M) / 2


def test_photon_count_of_chart(random_blocks):
    """Blocks carry [nu (cosh 2s + (M-1) cosh 2t) - M] / 2 photons."""
    for _ in range(100):
        params, blocks = random_blocks()
        assert fsg.total_photons(blocks) == pytest.approx(_photons_of_chart(params), rel=1e-12, abs=1e-12)


def test_solve_s_reference_value():
    """M=4, n_th=0, N=100, t=0: cosh 2s = 201."""
    result = fsg.solve_s(4, 0.0, 100.0, 0.0)
    assert result.feasible
    assert result.s == pytest.approx(math.acosh(201) / 2, rel=1e-12)
    assert result.s == pytest.approx(2.99823, abs=1e-5)


def test_solve_s_recovers_tmsv():
    """M=2, n_th=0, N=1: the symmetric solution s = -t is the two-mode squeezed vacuum."""
    t = -math.acosh(2) / 2
    result = fsg.solve_s(2, 0.0, 1.0, t)
    assert result.s == pytest.approx(0.658479, abs=1e-6)
    blocks = fsg.blocks_from_params(FsgParams(M=2, n_th=0.0, s=result.s, t=t))
    tmsv = fsg.tmsv_blocks(1.0)
    assert blocks.eps1 == pytest.approx(tmsv.eps1, rel=1e-12)
    assert blocks.gam1 == pytest.approx(tmsv.gam1, rel=1e-12)
    assert blocks.gam2 == pytest.approx(tmsv.gam2, rel=1e-12)


def test_solve_s_hits_the_budget(rng):
    """The solved state carries exactly N_tot photons anywhere inside [-t_max, t_max]."""
    for _ in range(200):
        M = int(rng.integers(2, 7))
        n_th = float(rng.uniform(0, 3))
        N_tot = M * n_th + float(rng.uniform(0.1, 200))
        t_max = fsg.free_parameter_range(M, n_th, N_tot)
        t = float(rng.uniform(-t_max, t_max))
        s = fsg.solve_s(M, n_th, N_tot, t).s
        blocks = fsg.blocks_from_params(FsgParams(M=M, n_th=n_th, s=s, t=t))
        assert fsg.total_photons(blocks) == pytest.approx(N_tot, rel=1e-10)


def test_thermal_floor_is_infeasible():
    with pytest.raises(InfeasibleError):
        fsg.solve_s(3, 1.0, 2.0, 0.0)
    with pytest.raises(InfeasibleError):
        fsg.free_parameter_range(3, 1.0, 2.0)


def test_free_parameter_range_reference_values():
    assert fsg.free_parameter_range(2, 0.0, 1.0) == pytest.approx(math.acosh(3) / 2, rel=1e-12)
    assert fsg.free_parameter_range(2, 0.0, 1.0) == pytest.approx(0.881374, abs=1e-6)
    assert fsg.free_parameter_range(4, 0.0, 100.0) == pytest.approx(2.45384, abs=1e-5)


def test_range_edge_has_no_collective_squeezing():
    """At |t| = t_max the constraint leaves s = 0."""
    t_max = fsg.free_parameter_range(5, 1.0, 40.0)
    for t in (-t_max, t_max):
        result = fsg.solve_s(5, 1.0, 40.0, t)
        assert result.feasible
        assert result.s == pytest.approx(0.0, abs=1e-6)


def test_thermal_floor_is_a_single_point():
    assert fsg.free_parameter_range(3, 1.0, 3.0) == 0.0
    assert fsg.solve_s(3, 1.0, 3.0, 0.0).s == 0.0


def test_s_of_t_marks_infeasible_t():
    t_max = fsg.free_parameter_range(3, 0.0, 10.0)
    s = fsg.s_of_t(3, 0.0, 10.0, np.array([0.0, t_max + 0.5]))
    assert np.isfinite(s[0])
    assert np.isnan(s[1])


def test_optimal_precision_state_is_pure():
    for M in range(2, 7):
        for N_tot in (0.5, 1.0, 2.0, 10.0, 100.0):
            blocks = fsg.optimal_precision_blocks(M, N_tot)
            assert fsg.isothermal_nu(blocks) == pytest.approx(1.0, rel=1e-9)
            assert fsg.total_photons(blocks) == pytest.approx(N_tot, rel=1e-12)


def test_tmsv_blocks():
    blocks = fsg.tmsv_blocks(3.0)
    assert blocks.M == 2
    assert blocks.eps1 == blocks.eps2 == 4.0
    assert blocks.gam1 == pytest.approx(math.sqrt(15.0))
    assert blocks.gam2 == -blocks.gam1
    assert fsg.total_photons(blocks) == pytest.approx(3.0)


def test_thermal_blocks_carry_the_floor():
    blocks = fsg.thermal_blocks(4, 2.5)
    assert fsg.total_photons(blocks) == pytest.approx(10.0)
    assert fsg.isothermal_nu(blocks) == pytest.approx(6.0)


def test_negative_budget_rejected():
    with pytest.raises(DomainError):
        fsg.tmsv_blocks(-1.0)
    with pytest.raises(ValidationError):
        fsg.solve_s(2, 0.0, -1.0, 0.0)


def test_non_isothermal_blocks_rejected():
    """nu-^2 = 2, nu+^2 = 4."""
    blocks = FsgBlocks(M=2, eps1=3.0, eps2=1.0, gam1=1.0, gam2=0.0)
    with pytest.raises(DomainError):
        fsg.isothermal_nu(blocks)
    with pytest.raises(DomainError):
        metrology.qfim_fsg(blocks)


def test_inverse_chart_round_trip(random_blocks):
    for _ in range(100):
        params, blocks = random_blocks()
        back = fsg.params_from_blocks(blocks)
        assert back.M == params.M
        assert back.n_th == pytest.approx(params.n_th, abs=1e-9)
        assert back.s == pytest.approx(params.s, abs=1e-9)
        assert back.t == pytest.approx(params.t, abs=1e-9)


def test_global_sign_flip_swaps_quadratures(random_blocks):
    """(s, t) -> (-s, -t) exchanges the x and p blocks and leaves the QFIM unchanged."""
    for _ in range(50):
        params, blocks = random_blocks()
        flipped = fsg.blocks_from_params(FsgParams(M=params.M, n_th=params.n_th, s=-params.s, t=-params.t))
        assert flipped.eps1 == pytest.approx(blocks.eps2, rel=1e-12)
        assert flipped.gam1 == pytest.approx(blocks.gam2, rel=1e-12, abs=1e-12)
        for form in ("pure-state", "isothermal"):
            F, G = metrology.qfim_fsg(blocks, form), metrology.qfim_fsg(flipped, form)
            assert G.F11 == pytest.approx(F.F11, rel=1e-9, abs=1e-12)
            assert G.F12 == pytest.approx(F.F12, rel=1e-9, abs=1e-12)


def test_privacy_condition_residual():
    """Zero for the TMSV (perfectly private), non-zero for the precision optimum."""
    assert fsg.privacy_condition_residual(fsg.tmsv_blocks(5.0)) == pytest.approx(0.0, abs=1e-10)
    assert abs(fsg.privacy_condition_residual(fsg.optimal_precision_blocks(4, 5.0))) > 1.0
