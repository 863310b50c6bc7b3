from pathlib import Path
from typing import ClassVar, List, Literal

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="PRIVSENSE_", env_file=".env", env_file_encoding="utf-8", extra="ignore"
    )

    # Project Paths
    # __file__ = privsense/config.py
    # parent.parent = project root
    BASE_DIR: ClassVar[Path] = Path(__file__).resolve().parent.parent
    DATA_DIR: ClassVar[Path] = BASE_DIR / "data"

    LOG_LEVEL: str = "INFO"

    # Tolerances
    TOL_PHYS: float = 1e-9
    TOL_RANK: float = 1e-10
    TOL_ISOTHERMAL: float = 1e-8

    # Which closed form to use for the FSG QFIM (see metrology.qfim_fsg)
    QFIM_FORM: Literal["pure-state", "isothermal"] = "isothermal"

    # Optimizers
    OPT_GRID_POINTS: int = 2001
    OPT_TOL: float = 1e-10
    HD_GRID_POINTS: int = 1001
    HD_REFINE_CANDIDATES: int = 8
    HD_ZOOM_POINTS: int = 61
    MLE_BRACKET: float = 0.3
    MLE_GRID_POINTS: int = 61

    # Figure reproduction grids
    FIGURE_M: List[int] = [2, 3, 4, 5, 6]
    FIGURE_NTH: List[float] = [0.0, 1.0, 5.0]
    FIGURE_N_MIN: float = 1.0
    FIGURE_N_MAX: float = 1000.0
    FIGURE_N_POINTS: int = 25

    WORKERS: int = 1

    def ensure_dirs(self):
        self.DATA_DIR.mkdir(parents=True, exist_ok=True)
        (self.DATA_DIR / "figures").mkdir(parents=True, exist_ok=True)
        (self.DATA_DIR / "sweeps").mkdir(parents=True, exist_ok=True)


settings = Settings()
settings.ensure_dirs()
