import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, List, Optional, Sequence, Tuple

from .config import settings
from .errors import ConfigError, DegenerateError, InfeasibleError
from .models import McConfig, NGrid, Objective, OptResult, QfimForm, SweepConfig, SweepRecord
from .services import homodyne, optimizer
from .utils import load_sweep_config, resolve_output, write_csv, write_json

FIGURES = {
    2: ("precision", False),
    3: ("privacy", False),
    4: ("privacy", True),
}

SweepTask = Tuple[int, float, float, Objective, bool, Optional[QfimForm]]


def _optimize(objective: Objective, M: int, n_th: float, N_tot: float, form: Optional[QfimForm]) -> OptResult:
    if objective == "precision":
        return optimizer.maximize_precision(M, n_th, N_tot, form=form)
    return optimizer.maximize_privacy(M, n_th, N_tot, form=form)


def build_record(
    M: int,
    n_th: float,
    N_tot: float,
    objective: Objective,
    with_homodyne: bool = True,
    form: Optional[QfimForm] = None,
) -> Tuple[SweepRecord, Dict[str, Any]]:
    """
    Optimized state for one configuration as a SweepRecord, plus the diagnostics
    that do not belong in the CSV schema. Raises InfeasibleError below the thermal floor.
    """
    state = _optimize(objective, M, n_th, N_tot, form)
    extras: Dict[str, Any] = {"converged": state.converged, "iterations": state.iterations}

    theta_hd = xi_hd = r_hd = None
    if with_homodyne:
        try:
            hd = homodyne.optimize_homodyne_angle(state.blocks)
            theta_hd, xi_hd = hd.theta_star, hd.xi_hd
            r_hd = xi_hd / state.xi if state.xi > 0 else None
            extras.update(theta_hd_direct=hd.theta_direct, xi_hd_direct=hd.xi_hd_direct)
        except DegenerateError as e:
            logging.warning(f"⚠️ No homodyne information at M={M}, n_th={n_th}, N={N_tot}: {e}")

    record = SweepRecord(
        M=M,
        n_th=n_th,
        N_tot=N_tot,
        objective=objective,
        t_star=state.t_star,
        s_star=state.s_star,
        eps1=state.blocks.eps1,
        eps2=state.blocks.eps2,
        gam1=state.blocks.gam1,
        gam2=state.blocks.gam2,
        F11=state.fim.F11,
        F12=state.fim.F12,
        xi=state.xi,
        xi_ratio_to_opt=state.ratio_to_best_xi,
        privacy=state.privacy,
        one_minus_privacy=state.one_minus_privacy,
        theta_hd_star=theta_hd,
        xi_hd=xi_hd,
        r_hd=r_hd,
    )
    return record, extras


def _sweep_row(task: SweepTask) -> SweepRecord:
    M, n_th, N_tot, objective, with_homodyne, form = task
    try:
        record, _ = build_record(M, n_th, N_tot, objective, with_homodyne, form)
        return record
    except InfeasibleError as e:
        logging.debug(f"Infeasible row M={M}, n_th={n_th}, N={N_tot}: {e}")
        return SweepRecord(M=M, n_th=n_th, N_tot=N_tot, objective=objective, feasible=False)


def sweep_tasks(config: SweepConfig) -> List[SweepTask]:
    """Grid in lexicographic (M, n_th, N, objective) order."""
    return [
        (M, n_th, N_tot, objective, config.homodyne, config.qfim_form)
        for M in config.M_list
        for n_th in config.n_th_list
        for N_tot in config.N_grid.values()
        for objective in config.objectives()
    ]


def sweep_records(config: SweepConfig, workers: Optional[int] = None) -> List[SweepRecord]:
    workers = settings.WORKERS if workers is None else workers
    tasks = sweep_tasks(config)
    logging.info(f"Sweeping {len(tasks)} rows with {workers} worker(s)")
    if workers > 1:
        # map() keeps submission order
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_row, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    return [_sweep_row(task) for task in tasks]


# --- state ---
def run_state(
    M: int,
    n_th: float,
    N_tot: float,
    objective: Objective = "privacy",
    qfim_form: Optional[QfimForm] = None,
    out: Optional[str] = None,
) -> Dict[str, Any]:
    record, extras = build_record(M, n_th, N_tot, objective, True, qfim_form)
    report = {**record.model_dump(), **extras}
    if out:
        path = resolve_output(out)
        write_json(path, report)
        logging.info(f"State report written to {path}")
    return report


# --- sweep ---
def run_sweep(config: str, out: Optional[str] = None, workers: Optional[int] = None) -> Dict[str, Any]:
    sweep_config = load_sweep_config(config)
    path = resolve_output(out or sweep_config.output)
    rows = write_csv(path, sweep_records(sweep_config, workers))
    logging.info(f"Sweep written to {path}")
    return {"status": "success", "message": f"{rows} rows written to {path}", "outputs": [str(path)]}


# --- figures ---
def figure_config(which: int) -> SweepConfig:
    if which not in FIGURES:
        raise ConfigError(f"Unknown figure {which}; choose from {sorted(FIGURES)}")
    objective, with_homodyne = FIGURES[which]
    return SweepConfig(
        M_list=list(settings.FIGURE_M),
        n_th_list=list(settings.FIGURE_NTH),
        N_grid=NGrid(
            min=settings.FIGURE_N_MIN,
            max=settings.FIGURE_N_MAX,
            points=settings.FIGURE_N_POINTS,
            spacing="log",
        ),
        objective=objective,
        homodyne=with_homodyne,
        output=f"figures/fig{which}.csv",
    )


def run_figures(
    which: Sequence[int] = (2, 3, 4), outdir: Optional[str] = None, workers: Optional[int] = None
) -> Dict[str, Any]:
    outputs = []
    for fig in which:
        config = figure_config(fig)
        target = f"{outdir.rstrip('/')}/fig{fig}.csv" if outdir else config.output
        path = resolve_output(target)
        write_csv(path, sweep_records(config, workers))
        logging.info(f"Figure {fig} data written to {path}")
        outputs.append(str(path))
    return {"status": "success", "message": f"Wrote {', '.join(outputs)}", "outputs": outputs}


# --- mc ---
def run_mc(
    M: int,
    n_th: float,
    N_tot: float,
    samples: int,
    trials: int,
    seed: int,
    objective: Objective = "privacy",
    out: Optional[str] = None,
) -> Dict[str, Any]:
    mc = McConfig(n_samples=samples, trials=trials, seed=seed)
    state = _optimize(objective, M, n_th, N_tot, None)
    hd = homodyne.optimize_homodyne_angle(state.blocks)
    report = homodyne.mc_estimate(state.blocks, hd.theta_star, mc)
    payload = {
        "M": M,
        "n_th": n_th,
        "N_tot": N_tot,
        "objective": objective,
        "xi_hd": hd.xi_hd,
        **report.model_dump(mode="json"),
    }
    if out:
        path = resolve_output(out)
        write_json(path, payload)
        logging.info(f"Monte-Carlo report written to {path}")
    return payload
