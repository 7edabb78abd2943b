"""
Regras de quadratura de Gauss–Legendre compostas.
Integração em retângulos (produto tensorial) e ao longo de poligonais, com refinamento
por duplicação de painéis até que resultados sucessivos concordem.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence, Tuple
import math

import numpy as np
from scipy import special
import structlog

from .errors import GeometryError, QuadratureNonConvergence

logger = structlog.get_logger()

DEFAULT_ORDER = 8
DEFAULT_TOL = 1e-10
MAX_PANELS = 2 ** 10


@lru_cache(maxsize=16)
def gauss_legendre_rule(order: int = DEFAULT_ORDER) -> Tuple[np.ndarray, np.ndarray]:
    """Nós e pesos de Gauss–Legendre em [-1, 1]."""
    nodes, weights = special.roots_legendre(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def composite_rule(
    breaks: Sequence[float],
    panels: int,
    order: int = DEFAULT_ORDER
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Regra composta sobre os intervalos definidos por `breaks`.

    Cada intervalo [breaks[k], breaks[k+1]] é dividido em `panels` painéis iguais,
    de modo que pontos de quebra do integrando (quinas de perfis) caem sempre em
    fronteiras de painel.

    Args:
        breaks: Pontos de quebra ordenados (inclui as extremidades)
        panels: Número de painéis por intervalo
        order: Número de nós por painel

    Returns:
        Tupla (nós, pesos)
    """
    breaks = np.unique(np.asarray(breaks, dtype=float))
    if breaks.size < 2:
        raise GeometryError("Intervalo de integração degenerado")

    edges = np.concatenate(
        [np.linspace(a, b, panels + 1)[:-1] for a, b in zip(breaks[:-1], breaks[1:])]
        + [breaks[-1:]]
    )
    left, right = edges[:-1], edges[1:]
    half = 0.5 * (right - left)
    middle = 0.5 * (right + left)

    t, w = gauss_legendre_rule(order)
    nodes = (middle[:, None] + half[:, None] * t[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Grade de quadratura tensorial sobre um retângulo."""

    x_nodes: np.ndarray
    x_weights: np.ndarray
    y_nodes: np.ndarray
    y_weights: np.ndarray
    panels: int

    @classmethod
    def build(
        cls,
        x_breaks: Sequence[float],
        y_breaks: Sequence[float],
        panels: int = 1,
        order: int = DEFAULT_ORDER
    ) -> "QuadratureGrid":
        x_nodes, x_weights = composite_rule(x_breaks, panels, order)
        y_nodes, y_weights = composite_rule(y_breaks, panels, order)
        return cls(x_nodes, x_weights, y_nodes, y_weights, panels)

    @property
    def points(self) -> Tuple[np.ndarray, np.ndarray]:
        """Coordenadas achatadas (ordem 'ij': x varia mais devagar)."""
        X, Y = np.meshgrid(self.x_nodes, self.y_nodes, indexing="ij")
        return X.ravel(), Y.ravel()

    @property
    def weights(self) -> np.ndarray:
        return np.outer(self.x_weights, self.y_weights).ravel()

    @property
    def area(self) -> float:
        return float(self.x_weights.sum() * self.y_weights.sum())

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Integra valores amostrados nos pontos da grade (eixo 0)."""
        return np.tensordot(self.weights, np.asarray(values, dtype=float), axes=(0, 0))


def _converged(new: np.ndarray, old: np.ndarray, tol: float) -> Tuple[bool, float]:
    discrepancy = float(np.max(np.abs(np.asarray(new) - np.asarray(old)), initial=0.0))
    scale = max(1.0, float(np.max(np.abs(new), initial=0.0)))
    return discrepancy <= tol * scale, discrepancy


def initial_panels_for(cycles: float) -> int:
    """Número inicial de painéis para um integrando com `cycles` meias-ondas por intervalo."""
    if cycles <= 2:
        return 1
    return 2 ** int(math.ceil(math.log2(cycles / 2.0)))


def refine_rect(
    evaluate: Callable[[QuadratureGrid], np.ndarray],
    x_breaks: Sequence[float],
    y_breaks: Sequence[float],
    *,
    tol: float = DEFAULT_TOL,
    order: int = DEFAULT_ORDER,
    initial_panels: int = 1,
    max_panels: int = MAX_PANELS
) -> np.ndarray:
    """
    Duplica painéis até que duas avaliações sucessivas concordem.

    Args:
        evaluate: Função que recebe a grade e devolve a integral (escalar ou array)
        x_breaks: Pontos de quebra no eixo x
        y_breaks: Pontos de quebra no eixo y
        tol: Tolerância relativa entre refinamentos
        initial_panels: Painéis por intervalo na primeira avaliação
        max_panels: Limite de painéis por intervalo

    Returns:
        A integral convergida

    Raises:
        QuadratureNonConvergence: Se o limite de painéis for atingido
    """
    panels = max(1, initial_panels)
    previous = None
    discrepancy = float("nan")

    while panels <= max_panels:
        grid = QuadratureGrid.build(x_breaks, y_breaks, panels, order)
        result = np.asarray(evaluate(grid), dtype=float)

        if previous is not None:
            done, discrepancy = _converged(result, previous, tol)
            if done:
                return result

        previous = result
        panels *= 2

    logger.warning("Quadratura de área não convergiu", panels=max_panels, discrepancy=discrepancy)
    raise QuadratureNonConvergence(
        f"Quadratura não convergiu com {max_panels} painéis por eixo (discrepância {discrepancy:.3e})",
        panels=max_panels,
        discrepancy=discrepancy
    )


def integrate_rect(
    func: Callable[[np.ndarray, np.ndarray], np.ndarray],
    x_breaks: Sequence[float],
    y_breaks: Sequence[float],
    **kwargs
) -> np.ndarray:
    """Integra `func(X, Y)` (valores no eixo 0) sobre um retângulo."""
    return refine_rect(lambda grid: grid.integrate(func(*grid.points)), x_breaks, y_breaks, **kwargs)


def polyline_arclength(points: Sequence[Tuple[float, float]]) -> np.ndarray:
    """Comprimento de arco acumulado nos vértices de uma poligonal."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 2:
        raise GeometryError("Uma poligonal precisa de pelo menos 2 pontos (x, y)")

    lengths = np.hypot(np.diff(pts[:, 0]), np.diff(pts[:, 1]))
    if np.any(lengths <= 0.0):
        raise GeometryError("Poligonal com segmento de comprimento nulo")

    return np.concatenate([[0.0], np.cumsum(lengths)])


def integrate_curve(
    func: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray],
    points: Sequence[Tuple[float, float]],
    *,
    param_breaks: Sequence[float] = (),
    tol: float = DEFAULT_TOL,
    order: int = DEFAULT_ORDER,
    initial_panels: int = 1,
    max_panels: int = MAX_PANELS
) -> np.ndarray:
    """
    Integra `func(X, Y, s) ds` ao longo de uma poligonal parametrizada por comprimento de arco.

    Os vértices e `param_breaks` (em comprimento de arco) são sempre fronteiras de painel.
    """
    pts = np.asarray(points, dtype=float)
    cumulative = polyline_arclength(pts)
    total = cumulative[-1]

    extra = [b for b in param_breaks if 0.0 < b < total]
    breaks = np.concatenate([cumulative, extra])

    panels = max(1, initial_panels)
    previous = None
    discrepancy = float("nan")

    while panels <= max_panels:
        s, w = composite_rule(breaks, panels, order)
        X = np.interp(s, cumulative, pts[:, 0])
        Y = np.interp(s, cumulative, pts[:, 1])
        result = np.tensordot(w, np.asarray(func(X, Y, s), dtype=float), axes=(0, 0))

        if previous is not None:
            done, discrepancy = _converged(result, previous, tol)
            if done:
                return result

        previous = result
        panels *= 2

    logger.warning("Quadratura de curva não convergiu", panels=max_panels, discrepancy=discrepancy)
    raise QuadratureNonConvergence(
        f"Quadratura de linha não convergiu com {max_panels} painéis (discrepância {discrepancy:.3e})",
        panels=max_panels,
        discrepancy=discrepancy
    )
