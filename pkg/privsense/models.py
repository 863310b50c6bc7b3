"""
Domain models. All values are frozen pydantic models so they can be shared between sweep workers.

Array-valued models store read-only numpy arrays. Validation failures surface as
pydantic.ValidationError (a ValueError).
"""
import math
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .errors import InfeasibleError

QfimForm = Literal["pure-state", "isothermal"]
Objective = Literal["precision", "privacy"]

_EPS = float(np.finfo(float).eps)

FROZEN = ConfigDict(frozen=True)
FROZEN_ARRAYS = ConfigDict(frozen=True, arbitrary_types_allowed=True)


def readonly(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


# --- Symplectic core ---

class CovarianceState(BaseModel):
    """
    Zero-mean Gaussian state. Vacuum covariance is the identity, quadratures ordered (x1, p1, ..., xM, pM).
    Physicality is not enforced here; see symplectic.physicality_check.
    """
    model_config = FROZEN_ARRAYS

    modes: int = Field(ge=1)
    V: np.ndarray
    d: np.ndarray

    @model_validator(mode="before")
    @classmethod
    def _coerce(cls, data):
        if not isinstance(data, dict):
            return data
        data = dict(data)
        V = np.array(data.get("V"), dtype=float)
        if V.ndim != 2 or V.shape[0] != V.shape[1] or V.shape[0] == 0 or V.shape[0] % 2:
            raise ValueError(f"V must be a 2M x 2M matrix, got shape {V.shape}")
        scale = max(1.0, float(np.max(np.abs(V))))
        if float(np.max(np.abs(V - V.T))) > 1e-12 * scale:
            raise ValueError("V must be symmetric")
        data["V"] = readonly(0.5 * (V + V.T))
        data.setdefault("modes", V.shape[0] // 2)

        d = data.get("d")
        d = np.zeros(V.shape[0]) if d is None else np.array(d, dtype=float)
        if d.shape != (V.shape[0],) or np.any(d != 0.0):
            raise ValueError("first moments must be the zero vector of length 2M")
        data["d"] = readonly(d)
        return data

    @model_validator(mode="after")
    def _check_modes(self):
        if self.V.shape[0] != 2 * self.modes:
            raise ValueError(f"V has shape {self.V.shape}, expected {2 * self.modes}x{2 * self.modes}")
        return self


class SymplecticForm(BaseModel):
    model_config = FROZEN_ARRAYS

    M: int = Field(ge=1)
    omega: np.ndarray


class PhysicalityReport(BaseModel):
    model_config = FROZEN

    min_eig: float
    physical: bool


# --- FSG family ---

class FsgParams(BaseModel):
    """(M, n_th, s, t) chart of the isothermal FSG family. s squeezes the collective mode, t the orthogonal ones."""
    model_config = FROZEN

    M: int = Field(ge=2)
    n_th: float = Field(ge=0.0, allow_inf_nan=False)
    s: float = Field(allow_inf_nan=False)
    t: float = Field(allow_inf_nan=False)

    @property
    def nu(self) -> float:
        return 1.0 + 2.0 * self.n_th


class FsgBlocks(BaseModel):
    """2x2 blocks of an FSG covariance: diag(eps1, eps2) on the diagonal, diag(gam1, gam2) off it."""
    model_config = FROZEN

    M: int = Field(ge=2)
    eps1: float = Field(allow_inf_nan=False)
    eps2: float = Field(allow_inf_nan=False)
    gam1: float = Field(allow_inf_nan=False)
    gam2: float = Field(allow_inf_nan=False)

    def factors(self) -> Tuple[float, float, float, float]:
        """eps1-gam1, eps2-gam2, eps1+(M-1)gam1, eps2+(M-1)gam2."""
        m1 = self.M - 1
        return (
            self.eps1 - self.gam1,
            self.eps2 - self.gam2,
            self.eps1 + m1 * self.gam1,
            self.eps2 + m1 * self.gam2,
        )

    def rounding_slack(self) -> Tuple[float, float]:
        """Relative rounding bound on nu_minus**2 and nu_plus**2 computed from the stored entries."""
        f = self.factors()
        m1 = self.M - 1
        e1, e2, g1, g2 = abs(self.eps1), abs(self.eps2), abs(self.gam1), abs(self.gam2)
        minus = 2 * _EPS * ((e1 + g1) / abs(f[0]) + (e2 + g2) / abs(f[1]))
        plus = 2 * _EPS * ((e1 + m1 * g1) / abs(f[2]) + (e2 + m1 * g2) / abs(f[3]))
        return minus, plus

    @model_validator(mode="after")
    def _check_physical(self):
        f = self.factors()
        if min(f) <= 0.0:
            raise ValueError(f"block factors must be positive, got {f}")
        slack_minus, slack_plus = self.rounding_slack()
        if f[0] * f[1] < 1.0 - 1e-9 - slack_minus or f[2] * f[3] < 1.0 - 1e-9 - slack_plus:
            raise ValueError(
                f"symplectic eigenvalues below vacuum: nu-^2={f[0] * f[1]}, nu+^2={f[2] * f[3]}"
            )
        return self


class PhotonBudget(BaseModel):
    model_config = FROZEN

    N_tot: float = Field(ge=0.0, allow_inf_nan=False)

    def require_floor(self, M: int, n_th: float) -> "PhotonBudget":
        if self.N_tot < M * n_th:
            raise InfeasibleError(
                f"N_tot={self.N_tot} is below the thermal floor M*n_th={M * n_th}"
            )
        return self


class SolveResult(BaseModel):
    model_config = FROZEN

    s: float
    feasible: bool


# --- Metrology ---

class StructuredFim(BaseModel):
    """Fisher matrix a*I + b*J (a = F11 - F12, b = F12)."""
    model_config = FROZEN

    M: int = Field(ge=2)
    a: float = Field(allow_inf_nan=False)
    b: float = Field(allow_inf_nan=False)

    @model_validator(mode="after")
    def _check_psd(self):
        tol = 1e-12 * max(1.0, abs(self.a), abs(self.b))
        if self.a < -tol or self.a + self.M * self.b < -tol:
            raise ValueError(f"Fisher matrix is not PSD: a={self.a}, a+Mb={self.a + self.M * self.b}")
        return self

    @property
    def F11(self) -> float:
        return self.a + self.b

    @property
    def F12(self) -> float:
        return self.b

    @property
    def trace(self) -> float:
        return self.M * (self.a + self.b)

    def dense(self) -> np.ndarray:
        return self.a * np.eye(self.M) + self.b * np.ones((self.M, self.M))


class FimInverse(BaseModel):
    """alpha*I + beta*J; kind 'pseudo' marks a Moore-Penrose inverse."""
    model_config = FROZEN

    M: int
    kind: Literal["regular", "pseudo"]
    alpha: float
    beta: float

    def dense(self) -> np.ndarray:
        return self.alpha * np.eye(self.M) + self.beta * np.ones((self.M, self.M))


class WeightVector(BaseModel):
    """Positive weights of f = w.Theta, normalized to unit 1-norm."""
    model_config = FROZEN_ARRAYS

    w: np.ndarray

    @field_validator("w", mode="before")
    @classmethod
    def _coerce(cls, value):
        arr = np.array(value, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("weights must be a non-empty vector")
        if np.any(arr <= 0.0):
            raise ValueError("all weights must be positive")
        if abs(float(np.sum(arr)) - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {float(np.sum(arr))}")
        return readonly(arr)

    @classmethod
    def mean(cls, M: int) -> "WeightVector":
        return cls(w=np.full(M, 1.0 / M))

    @classmethod
    def normalized(cls, raw) -> "WeightVector":
        raw = np.asarray(raw, dtype=float)
        return cls(w=raw / np.sum(raw))

    @property
    def M(self) -> int:
        return int(self.w.size)

    @property
    def norm_sq(self) -> float:
        return float(self.w @ self.w)

    @property
    def spread(self) -> float:
        """||w - 1/M||^2 = ||w||^2 - 1/M, zero exactly for the mean."""
        dev = self.w - 1.0 / self.M
        return float(dev @ dev)

    def matrix(self) -> np.ndarray:
        return np.outer(self.w, self.w)


class WeightSpectrum(BaseModel):
    model_config = FROZEN_ARRAYS

    principal: float
    principal_vec: np.ndarray
    nulls: int


class PrecisionReport(BaseModel):
    model_config = FROZEN

    xi: float = Field(ge=0.0)
    privacy: Optional[float] = None
    mu: Optional[float] = None

    @property
    def privacy_defined(self) -> bool:
        return self.privacy is not None


# --- Optimizer ---

class OptResult(BaseModel):
    model_config = FROZEN

    objective: Objective
    n_th: float
    N_tot: float
    t_star: float
    s_star: float
    blocks: FsgBlocks
    fim: StructuredFim
    xi: float
    privacy: Optional[float]
    ratio_to_best_xi: float
    converged: bool
    iterations: int

    @model_validator(mode="after")
    def _check(self):
        b = self.blocks
        photons = b.M * (b.eps1 + b.eps2 - 2.0) / 4.0
        if abs(photons - self.N_tot) > 1e-8 * max(1.0, self.N_tot):
            raise ValueError(f"photon count {photons} differs from budget {self.N_tot}")
        if self.ratio_to_best_xi > 1.0 + 1e-9:
            raise ValueError(f"precision ratio {self.ratio_to_best_xi} exceeds 1")
        return self

    @property
    def one_minus_privacy(self) -> Optional[float]:
        return None if self.privacy is None else 1.0 - self.privacy


class ScanRow(BaseModel):
    model_config = FROZEN

    t: float
    xi: float
    privacy: float


# --- Homodyne ---

class HomodyneConfig(BaseModel):
    """Common local-oscillator angle. The prior Theta is always zero."""
    model_config = FROZEN

    theta_hd: float = Field(allow_inf_nan=False)


class McConfig(BaseModel):
    model_config = FROZEN

    n_samples: int = Field(ge=2)
    trials: int = Field(ge=2)
    seed: int = Field(ge=0, lt=2**64)


class HomodyneResult(BaseModel):
    model_config = FROZEN

    theta_star: float
    fim: StructuredFim
    xi_hd: float
    theta_direct: float
    xi_hd_direct: float

    @property
    def proxy_agrees(self) -> bool:
        return abs(self.xi_hd - self.xi_hd_direct) <= 1e-6 * max(abs(self.xi_hd_direct), 1e-300)


class McReport(BaseModel):
    model_config = FROZEN

    empirical_var: float
    crb: float
    ratio: float
    ci95: Tuple[float, float]
    ratio_ci95: Tuple[float, float]
    n_samples: int
    trials: int
    seed: int
    theta_hd: float


# --- CLI ---

class NGrid(BaseModel):
    model_config = FROZEN

    min: float = Field(ge=0.0)
    max: float = Field(ge=0.0)
    points: int = Field(ge=1)
    spacing: Literal["linear", "log"] = "log"

    @model_validator(mode="after")
    def _check(self):
        if self.max < self.min:
            raise ValueError("N_grid.max must be >= N_grid.min")
        if self.spacing == "log" and self.min <= 0.0:
            raise ValueError("log spacing needs N_grid.min > 0")
        return self

    def values(self) -> List[float]:
        if self.points == 1:
            return [float(self.min)]
        if self.spacing == "log":
            grid = np.geomspace(self.min, self.max, self.points)
        else:
            grid = np.linspace(self.min, self.max, self.points)
        return [float(x) for x in grid]


class SweepConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    M_list: List[int] = Field(min_length=1)
    n_th_list: List[float] = Field(min_length=1)
    N_grid: NGrid
    objective: Literal["precision", "privacy", "both"] = "both"
    homodyne: bool = False
    weights: Literal["mean"] = "mean"
    qfim_form: Optional[QfimForm] = None
    seed: int = Field(default=0, ge=0, lt=2**64)
    output: str = "sweeps/sweep.csv"

    @field_validator("M_list")
    @classmethod
    def _check_modes(cls, value):
        if any(m < 2 for m in value):
            raise ValueError("every M must be >= 2")
        return value

    @field_validator("n_th_list")
    @classmethod
    def _check_nth(cls, value):
        if any(n < 0 or not math.isfinite(n) for n in value):
            raise ValueError("every n_th must be finite and >= 0")
        return value

    def objectives(self) -> List[Objective]:
        return ["precision", "privacy"] if self.objective == "both" else [self.objective]


class SweepRecord(BaseModel):
    model_config = FROZEN

    M: int
    n_th: float
    N_tot: float
    objective: Objective
    t_star: Optional[float] = None
    s_star: Optional[float] = None
    eps1: Optional[float] = None
    eps2: Optional[float] = None
    gam1: Optional[float] = None
    gam2: Optional[float] = None
    F11: Optional[float] = None
    F12: Optional[float] = None
    xi: Optional[float] = None
    xi_ratio_to_opt: Optional[float] = None
    privacy: Optional[float] = None
    one_minus_privacy: Optional[float] = None
    theta_hd_star: Optional[float] = None
    xi_hd: Optional[float] = None
    r_hd: Optional[float] = None
    feasible: bool = True


SWEEP_HEADER: List[str] = list(SweepRecord.model_fields)
