"""
Normas regionais e veredito de observabilidade regional.
Matrizes de Gram de L² e H¹ sobre sub-retângulos, séries de erro, ajuste de decaimento
exponencial e patamar de erro.
"""

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Dict, Optional, Tuple
import math

import numpy as np
import structlog

from analysis.observer import TrajectoryRecord
from analysis.spectral import ModeSet, Rectangle
from utils.errors import DimensionMismatch, InsufficientSamples, NonPositiveSamples
from utils.quadrature import DEFAULT_TOL, initial_panels_for, refine_rect

logger = structlog.get_logger()

DEFAULT_TAIL = 0.2
POSITIVE_FLOOR = 1e-14
NOISE_FRACTION = 1e-9
VERDICT_RATE_FRACTION = 0.9
VERDICT_FLOOR_FRACTION = 1e-3


class NormKind(str, Enum):
    L2 = "L2"
    H1 = "H1"


@dataclass(frozen=True)
class DecayFit:
    """log‖e(t)‖ ≈ log F − σ·t na janela final."""

    sigma: float
    F: float
    rms_residual: float
    window: Tuple[float, float, int]

    def to_dict(self) -> Dict:
        return {
            "sigma": self.sigma,
            "F": self.F,
            "rms_residual": self.rms_residual,
            "window": {"t_start": self.window[0], "t_end": self.window[1], "samples": self.window[2]},
        }


@lru_cache(maxsize=64)
def regional_gram(mode_set: ModeSet, region: Rectangle, kind: NormKind = NormKind.H1, tol: float = DEFAULT_TOL) -> np.ndarray:
    """
    Matriz de Gram G[m, n] = ∫_ω φ_m φ_n (+ ∇φ_m·∇φ_n para H¹).

    O resultado é cacheado por (base, região, norma) e devolvido somente-leitura.
    """
    domain = mode_set.domain
    top_i = max((m.i for m in mode_set.modes), default=0)
    top_j = max((m.j for m in mode_set.modes), default=0)
    panels = max(
        initial_panels_for(2 * top_i * region.width / domain.width),
        initial_panels_for(2 * top_j * region.height / domain.height)
    )

    def evaluate(grid):
        X, Y = grid.points
        w = grid.weights[:, None]
        V = mode_set.values(X, Y)
        gram = V.T @ (w * V)
        if kind == NormKind.H1:
            gx, gy = mode_set.gradients(X, Y)
            gram = gram + gx.T @ (w * gx) + gy.T @ (w * gy)
        return gram

    gram = refine_rect(
        evaluate,
        [region.x_min, region.x_max],
        [region.y_min, region.y_max],
        tol=tol,
        initial_panels=panels
    )
    gram = 0.5 * (gram + gram.T)
    gram.setflags(write=False)
    return gram


def _quadratic_norms(coefficients: np.ndarray, gram: np.ndarray) -> np.ndarray:
    values = np.einsum("sn,nm,sm->s", coefficients, gram, coefficients)
    return np.sqrt(np.clip(values, 0.0, None))


def field_norm(coefficients: np.ndarray, mode_set: ModeSet, region: Rectangle, kind: NormKind = NormKind.H1) -> float:
    """Norma L² ou H¹ sobre `region` do campo Σ c_m φ_m."""
    coefficients = np.asarray(coefficients, dtype=float).ravel()
    if coefficients.size != mode_set.n_modes:
        raise DimensionMismatch(f"{coefficients.size} coeficientes para {mode_set.n_modes} modos")
    return float(_quadratic_norms(coefficients[None, :], regional_gram(mode_set, region, NormKind(kind)))[0])


def error_norm_series(
    trajectory: TrajectoryRecord,
    mode_set: ModeSet,
    region: Rectangle,
    kind: NormKind = NormKind.H1,
    *,
    target: str = "estimate",
    T: Optional[np.ndarray] = None
) -> np.ndarray:
    """
    Série temporal da norma do erro sobre `region`.

    Args:
        target: "estimate" para z − ẑ; "observer" para Tz − w (exige T quadrada); "state" para z
    """
    if target == "state":
        errors = trajectory.state_coeffs
    elif target == "observer":
        if T is None:
            raise DimensionMismatch("O erro do observador exige a matriz T")
        errors = trajectory.observer_error(T)
    else:
        errors = trajectory.estimation_error()

    if errors.shape[1] != mode_set.n_modes:
        raise DimensionMismatch(f"Erro com {errors.shape[1]} coordenadas para {mode_set.n_modes} modos")
    return _quadratic_norms(errors, regional_gram(mode_set, region, NormKind(kind)))


def _tail(values: np.ndarray, fraction: float) -> int:
    n = len(values)
    return n - max(1, int(math.ceil(fraction * n)))


def fit_decay(
    times: np.ndarray,
    values: np.ndarray,
    window: float = DEFAULT_TAIL,
    *,
    scale: Optional[np.ndarray] = None
) -> DecayFit:
    """
    Ajuste log-linear por mínimos quadrados nas últimas ⌈window·n⌉ amostras.

    Com `scale` (norma do estado na mesma região), amostras ≤ NOISE_FRACTION·scale estão
    no nível de arredondamento da simulação e ficam fora do ajuste.

    Raises:
        InsufficientSamples: Menos de 3 amostras na janela
        NonPositiveSamples: Menos de 3 amostras positivas acima do piso na janela
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    start = _tail(values, window)
    t = times[start:]
    v = values[start:]
    if t.size < 3:
        raise InsufficientSamples(f"Janela de ajuste com {t.size} amostras (mínimo 3)")

    positive = v > POSITIVE_FLOOR
    if scale is not None:
        positive &= v > NOISE_FRACTION * np.asarray(scale, dtype=float)[start:]
    if np.count_nonzero(positive) < 3:
        raise NonPositiveSamples("A janela de ajuste não tem 3 amostras positivas acima do piso numérico")

    t, logs = t[positive], np.log(v[positive])
    slope, intercept = np.polyfit(t, logs, 1)
    residual = logs - (slope * t + intercept)

    return DecayFit(
        sigma=float(-slope),
        F=float(math.exp(intercept)),
        rms_residual=float(np.sqrt(np.mean(residual ** 2))),
        window=(float(times[start]), float(times[-1]), int(len(values) - start))
    )


def error_floor(values: np.ndarray, tail: float = DEFAULT_TAIL) -> float:
    """Máximo da norma do erro na fração final da série."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise InsufficientSamples("Série de erro vazia")
    return float(np.max(values[_tail(values, tail):]))


def regional_verdict(fit: Optional[DecayFit], floor: float, initial_norm: float, reference_rate: float) -> bool:
    """
    ω-observável na prática: σ ≥ 0.9·σ_ref e patamar ≤ 10⁻³·‖e(0)‖.

    Sem ajuste (o erro caiu abaixo do mensurável na janela) vale só o critério do patamar.
    Erro inicial nulo não produz veredito positivo.
    """
    if not initial_norm > 0.0:
        return False
    if fit is None:
        return floor <= VERDICT_FLOOR_FRACTION * initial_norm
    return fit.sigma >= VERDICT_RATE_FRACTION * reference_rate and floor <= VERDICT_FLOOR_FRACTION * initial_norm
