"""
Precision- and privacy-optimal states over the free parameter t.

Both searches run a coarse grid over [-t_max, t_max] (vectorized over the whole family)
and refine the best bracket with a golden-section search.
"""
import logging
import math
from typing import Callable, List, Optional, Tuple

import numpy as np

from privsense.config import settings
from privsense.errors import ConvergenceError, SingularError, UndefinedError
from privsense.models import (
    FsgParams,
    Objective,
    OptResult,
    QfimForm,
    ScanRow,
    StructuredFim,
    WeightVector,
)
from privsense.services import fsg, metrology

INV_PHI = (math.sqrt(5) - 1) / 2  # 1 / phi
INV_PHI_SQUARE = (3 - math.sqrt(5)) / 2  # 1 / phi^2

TIE_TOL = 1e-12
# arccosh near s = 0 leaves ~1e-9 noise in the secondary objective
SECONDARY_TIE_TOL = 1e-8


def golden_section_max(f: Callable[[float], float], a: float, b: float, tol: float) -> Tuple[float, float, int]:
    """
    Golden-section search for the maximum of a unimodal f on [a, b].
    Returns (x, f(x), iterations) with the final bracket narrower than tol.
    """
    a, b = min(a, b), max(a, b)
    h = b - a
    if h <= tol:
        x = 0.5 * (a + b)
        return x, f(x), 0

    # Required steps to achieve tolerance
    n = int(math.ceil(math.log(tol / h) / math.log(INV_PHI)))

    c = a + INV_PHI_SQUARE * h
    d = a + INV_PHI * h
    yc = f(c)
    yd = f(d)

    for k in range(n - 1):
        if not (math.isfinite(yc) and math.isfinite(yd)):
            raise ConvergenceError(f"Objective is not finite inside [{a}, {b}] at step {k}")
        if yc > yd:
            b = d
            d = c
            yd = yc
            h = INV_PHI * h
            c = a + INV_PHI_SQUARE * h
            yc = f(c)
        else:
            a = c
            c = d
            yc = yd
            h = INV_PHI * h
            d = a + INV_PHI * h
            yd = f(d)

    if yc > yd:
        a, b = a, d
    else:
        a, b = c, b
    if b - a > tol * (1 + 1e-9) + 4 * np.finfo(float).eps * max(abs(a), abs(b)):
        raise ConvergenceError(f"Golden-section bracket stalled at width {b - a}")
    x = 0.5 * (a + b)
    return x, f(x), n


def pick_best(grid: np.ndarray, primary: np.ndarray, secondary: np.ndarray) -> int:
    """
    Index of the best grid point: largest primary; ties (within TIE_TOL relative)
    go to the larger secondary (within SECONDARY_TIE_TOL), then to the smallest |t|.
    """
    finite = np.isfinite(primary)
    if not np.any(finite):
        raise ConvergenceError("Objective is undefined on the whole grid")
    best = float(np.max(primary[finite]))
    candidates = np.flatnonzero(finite & (primary >= best - TIE_TOL * max(1.0, abs(best))))

    sec = np.where(np.isfinite(secondary[candidates]), secondary[candidates], -np.inf)
    sec_best = float(np.max(sec))
    if math.isfinite(sec_best):
        candidates = candidates[sec >= sec_best - SECONDARY_TIE_TOL * max(1.0, abs(sec_best))]
    return int(candidates[np.argmin(np.abs(grid[candidates]))])


# --- Vectorized family evaluation ---

def family_values(
    M: int, n_th: float, N_tot: float, t: np.ndarray, w: WeightVector, form: QfimForm
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(s, xi, 1-P) along the family for an array of t; same formulas as metrology on single states."""
    nu = 1.0 + 2.0 * n_th
    s = fsg.s_of_t(M, n_th, N_tot, t)
    eps1, eps2, gam1, gam2 = fsg.chart_entries(M, nu, s, t)
    a, b = metrology.structured_coefficients(eps1, eps2, gam1, gam2, form)

    spread, norm_sq = w.spread, w.norm_sq
    collective = a + M * b
    with np.errstate(divide="ignore", invalid="ignore"):
        if spread == 0.0:
            xi = M * collective
        else:
            xi = np.where(a > 0, 1.0 / (spread / a + 1.0 / (M * collective)), 0.0)
        total = a + b
        deficit = np.where(
            M * total > settings.TOL_RANK,
            (norm_sq * (M - 1) * a + M * spread * b) / (norm_sq * M * total),
            np.nan,
        )
    return s, xi, deficit


def _ranked(objective: Objective, xi: np.ndarray, deficit: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    if objective == "precision":
        return xi, -deficit
    return -deficit, xi


def scan_free_parameter(
    M: int,
    n_th: float,
    N_tot: float,
    grid_points: int,
    w: Optional[WeightVector] = None,
    form: Optional[QfimForm] = None,
) -> List[ScanRow]:
    if grid_points < 3:
        raise ValueError(f"grid_points must be >= 3, got {grid_points}")
    w = WeightVector.mean(M) if w is None else w
    form = settings.QFIM_FORM if form is None else form
    t_max = fsg.free_parameter_range(M, n_th, N_tot)
    grid = np.linspace(-t_max, t_max, grid_points)
    _, xi, deficit = family_values(M, n_th, N_tot, grid, w, form)
    return [ScanRow(t=float(t), xi=float(x), privacy=float(1.0 - d)) for t, x, d in zip(grid, xi, deficit)]


def _state_at(
    objective: Objective,
    M: int,
    n_th: float,
    N_tot: float,
    t: float,
    w: WeightVector,
    form: QfimForm,
    xi_best: Optional[float],
    converged: bool,
    iterations: int,
) -> OptResult:
    s = fsg.solve_s(M, n_th, N_tot, t).s
    blocks = fsg.blocks_from_params(FsgParams(M=M, n_th=n_th, s=s, t=t))
    F = metrology.qfim_fsg(blocks, form)
    try:
        xi = metrology.precision(F, w)
    except SingularError:
        logging.warning(f"⚠️ Fisher matrix vanishes at M={M}, n_th={n_th}, N={N_tot}; precision is zero")
        xi = 0.0
    try:
        P = metrology.privacy(F, w)
    except UndefinedError:
        P = None

    if xi_best is None or xi_best == 0.0:
        ratio = 1.0
    else:
        ratio = xi / xi_best
    return OptResult(
        objective=objective,
        n_th=n_th,
        N_tot=N_tot,
        t_star=t,
        s_star=s,
        blocks=blocks,
        fim=F,
        xi=xi,
        privacy=P,
        ratio_to_best_xi=ratio,
        converged=converged,
        iterations=iterations,
    )


def _optimize(
    objective: Objective,
    M: int,
    n_th: float,
    N_tot: float,
    w: Optional[WeightVector],
    form: Optional[QfimForm],
    xi_best: Optional[float] = None,
) -> OptResult:
    w = WeightVector.mean(M) if w is None else w
    form = settings.QFIM_FORM if form is None else form
    t_max = fsg.free_parameter_range(M, n_th, N_tot)

    if t_max == 0.0:
        logging.info(f"Degenerate budget N={N_tot} = M*n_th, single thermal point")
        return _state_at(objective, M, n_th, N_tot, 0.0, w, form, None, True, 0)

    grid = np.union1d(np.linspace(-t_max, t_max, settings.OPT_GRID_POINTS), [0.0])
    _, xi, deficit = family_values(M, n_th, N_tot, grid, w, form)
    primary, secondary = _ranked(objective, xi, deficit)
    idx = pick_best(grid, primary, secondary)

    def score(t: float) -> float:
        _, x, d = family_values(M, n_th, N_tot, np.array([t]), w, form)
        return float(_ranked(objective, x, d)[0][0])

    lo, hi = grid[max(idx - 1, 0)], grid[min(idx + 1, grid.size - 1)]
    t_star, value, iterations = golden_section_max(score, lo, hi, settings.OPT_TOL)
    converged = True
    if not value >= primary[idx]:
        scale = max(1.0, abs(float(primary[idx])))
        if not value >= primary[idx] - TIE_TOL * scale:
            converged = False
            logging.warning(
                f"⚠️ Golden refinement of the {objective} optimum (M={M}, n_th={n_th}, N={N_tot}) "
                f"ended below the grid point; keeping t={grid[idx]}"
            )
        t_star = float(grid[idx])

    logging.debug(f"{objective} optimum M={M} n_th={n_th} N={N_tot}: t*={t_star} after {iterations} steps")
    return _state_at(objective, M, n_th, N_tot, float(t_star), w, form, xi_best, converged, iterations)


def maximize_precision(
    M: int,
    n_th: float,
    N_tot: float,
    w: Optional[WeightVector] = None,
    form: Optional[QfimForm] = None,
) -> OptResult:
    return _optimize("precision", M, n_th, N_tot, w, form)


def maximize_privacy(
    M: int,
    n_th: float,
    N_tot: float,
    w: Optional[WeightVector] = None,
    form: Optional[QfimForm] = None,
) -> OptResult:
    best = maximize_precision(M, n_th, N_tot, w, form)
    return _optimize("privacy", M, n_th, N_tot, w, form, xi_best=best.xi)
