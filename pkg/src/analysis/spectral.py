"""
Base espectral do Laplaciano de Neumann em retângulos.
Autovalores, autofunções cosseno normalizadas em L², gradientes e agrupamento por multiplicidade.
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple
import math

import numpy as np
import structlog

from utils.errors import ConfigurationError, GeometryError

logger = structlog.get_logger()

DEFAULT_GROUP_TOL = 1e-9
RATE_ROUNDING = 9

Point = Tuple[float, float]


@dataclass(frozen=True)
class Rectangle:
    """Retângulo aberto ]x_min, x_max[ × ]y_min, y_max[."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        for name in ("x_min", "x_max", "y_min", "y_max"):
            try:
                value = float(getattr(self, name))
            except (TypeError, ValueError):
                raise GeometryError(f"Coordenada não numérica: {name}", field=name)
            if not math.isfinite(value):
                raise GeometryError(f"Coordenada não finita: {name}", field=name)
            object.__setattr__(self, name, value)

        if not self.x_min < self.x_max:
            raise GeometryError(
                f"Retângulo degenerado: x_min={self.x_min} deve ser menor que x_max={self.x_max}"
            )
        if not self.y_min < self.y_max:
            raise GeometryError(
                f"Retângulo degenerado: y_min={self.y_min} deve ser menor que y_max={self.y_max}"
            )

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> Point:
        return (0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))

    def contains(self, point: Point, tol: float = 1e-12) -> bool:
        """Pertinência ao fecho do retângulo."""
        x, y = point
        return (self.x_min - tol <= x <= self.x_max + tol
                and self.y_min - tol <= y <= self.y_max + tol)

    def contains_rect(self, other: "Rectangle", tol: float = 1e-12) -> bool:
        return (other.x_min >= self.x_min - tol and other.x_max <= self.x_max + tol
                and other.y_min >= self.y_min - tol and other.y_max <= self.y_max + tol)

    def on_boundary(self, point: Point, tol: float = 1e-12) -> bool:
        x, y = point
        if not self.contains(point, tol):
            return False
        return (abs(x - self.x_min) <= tol or abs(x - self.x_max) <= tol
                or abs(y - self.y_min) <= tol or abs(y - self.y_max) <= tol)

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.x_min, self.x_max, self.y_min, self.y_max)


@dataclass(frozen=True, order=True)
class Mode:
    """Par de índices (i, j) de uma autofunção cosseno."""

    i: int
    j: int

    def __post_init__(self):
        if int(self.i) != self.i or int(self.j) != self.j or self.i < 0 or self.j < 0:
            raise ConfigurationError(f"Índices de modo inválidos: ({self.i}, {self.j})", field="mode")
        object.__setattr__(self, "i", int(self.i))
        object.__setattr__(self, "j", int(self.j))

    @property
    def label(self) -> str:
        return f"{self.i}_{self.j}"


def eigenvalue(domain: Rectangle, mode: Mode) -> float:
    """λ = −(i²/Lx² + j²/Ly²)·π²."""
    return -(mode.i ** 2 / domain.width ** 2 + mode.j ** 2 / domain.height ** 2) * math.pi ** 2


def _normalization(order: int, length: float) -> float:
    return 1.0 / math.sqrt(length) if order == 0 else math.sqrt(2.0 / length)


def _frequencies(domain: Rectangle, modes: Sequence[Mode]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    ax = np.array([m.i for m in modes], dtype=float) * math.pi / domain.width
    by = np.array([m.j for m in modes], dtype=float) * math.pi / domain.height
    norm = np.array(
        [_normalization(m.i, domain.width) * _normalization(m.j, domain.height) for m in modes],
        dtype=float
    )
    return ax, by, norm


def mode_values(domain: Rectangle, modes: Sequence[Mode], xs, ys) -> np.ndarray:
    """
    Avalia as autofunções em pontos.

    Args:
        domain: Retângulo que define a base
        modes: Modos a avaliar
        xs: Abscissas (array 1D)
        ys: Ordenadas (array 1D, mesmo tamanho)

    Returns:
        Matriz (pontos × modos)
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    ys = np.atleast_1d(np.asarray(ys, dtype=float))
    ax, by, norm = _frequencies(domain, modes)
    cx = np.cos(np.outer(xs - domain.x_min, ax))
    cy = np.cos(np.outer(ys - domain.y_min, by))
    return cx * cy * norm


def mode_gradients(domain: Rectangle, modes: Sequence[Mode], xs, ys) -> Tuple[np.ndarray, np.ndarray]:
    """Gradientes das autofunções: par de matrizes (pontos × modos)."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    ys = np.atleast_1d(np.asarray(ys, dtype=float))
    ax, by, norm = _frequencies(domain, modes)
    u = np.outer(xs - domain.x_min, ax)
    v = np.outer(ys - domain.y_min, by)
    gx = -ax * np.sin(u) * np.cos(v) * norm
    gy = -by * np.cos(u) * np.sin(v) * norm
    return gx, gy


def mode_laplacians(domain: Rectangle, modes: Sequence[Mode], xs, ys) -> np.ndarray:
    """Laplaciano analítico: Δφ = λ·φ."""
    lambdas = np.array([eigenvalue(domain, m) for m in modes], dtype=float)
    return mode_values(domain, modes, xs, ys) * lambdas


def eigenfunction_value(domain: Rectangle, mode: Mode, point: Point) -> float:
    return float(mode_values(domain, [mode], [point[0]], [point[1]])[0, 0])


def eigenfunction_gradient(domain: Rectangle, mode: Mode, point: Point) -> Tuple[float, float]:
    gx, gy = mode_gradients(domain, [mode], [point[0]], [point[1]])
    return float(gx[0, 0]), float(gy[0, 0])


def eigenfunction_laplacian(domain: Rectangle, mode: Mode, point: Point) -> float:
    return float(mode_laplacians(domain, [mode], [point[0]], [point[1]])[0, 0])


@dataclass(frozen=True)
class ModeSet:
    """Base truncada ordenada por taxa decrescente λ + c."""

    domain: Rectangle
    shift: float
    orders: Tuple[int, int]
    modes: Tuple[Mode, ...]
    eigenvalues: Tuple[float, ...]

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @property
    def rates(self) -> np.ndarray:
        return np.asarray(self.eigenvalues, dtype=float) + self.shift

    @property
    def labels(self) -> List[str]:
        return [m.label for m in self.modes]

    def index(self, mode: Mode) -> int:
        try:
            return self.modes.index(mode)
        except ValueError:
            raise ConfigurationError(f"Modo {mode.label} fora da truncagem {self.orders}", field="mode")

    def values(self, xs, ys) -> np.ndarray:
        return mode_values(self.domain, self.modes, xs, ys)

    def gradients(self, xs, ys) -> Tuple[np.ndarray, np.ndarray]:
        return mode_gradients(self.domain, self.modes, xs, ys)


def build_mode_set(domain: Rectangle, n1: int, n2: int, shift: float = 0.0) -> ModeSet:
    """
    Constrói a base de modos {(i, j) : 0 ≤ i ≤ n1, 0 ≤ j ≤ n2}.

    A ordem é determinística: taxa decrescente (arredondada), depois (i, j) lexicográfico.

    Args:
        domain: Retângulo da base
        n1: Ordem máxima em x
        n2: Ordem máxima em y
        shift: Coeficiente de reação c

    Returns:
        ModeSet ordenado

    Raises:
        ConfigurationError: Se as ordens forem negativas ou não inteiras
    """
    for name, value in (("truncation.n1", n1), ("truncation.n2", n2)):
        if isinstance(value, bool) or int(value) != value or value < 0:
            raise ConfigurationError(f"Ordem de truncagem inválida: {value}", field=name)
    if not math.isfinite(shift):
        raise ConfigurationError("Coeficiente de reação não finito", field="system.shift")

    candidates = [Mode(i, j) for i in range(int(n1) + 1) for j in range(int(n2) + 1)]
    lambdas = {m: eigenvalue(domain, m) for m in candidates}
    ordered = sorted(candidates, key=lambda m: (-round(lambdas[m] + shift, RATE_ROUNDING), m.i, m.j))

    mode_set = ModeSet(
        domain=domain,
        shift=float(shift),
        orders=(int(n1), int(n2)),
        modes=tuple(ordered),
        eigenvalues=tuple(lambdas[m] for m in ordered)
    )

    logger.debug("Base modal construída", modes=mode_set.n_modes, domain=domain.as_tuple(), shift=shift)
    return mode_set


@dataclass(frozen=True)
class EigenspaceGroup:
    """Modos que compartilham (numericamente) o mesmo autovalor."""

    lambda_: float
    members: Tuple[Mode, ...]
    indices: Tuple[int, ...]

    @property
    def multiplicity(self) -> int:
        return len(self.members)


def group_by_eigenvalue(mode_set: ModeSet, rel_tol: float = DEFAULT_GROUP_TOL) -> List[EigenspaceGroup]:
    """
    Agrupa modos consecutivos cujos autovalores coincidem dentro de rel_tol·max(1, |λ|).

    Os grupos herdam a ordem do ModeSet (taxa decrescente).
    """
    groups: List[EigenspaceGroup] = []
    if not mode_set.modes:
        return groups

    current = [0]
    for index in range(1, mode_set.n_modes):
        previous = mode_set.eigenvalues[current[-1]]
        value = mode_set.eigenvalues[index]
        if abs(previous - value) <= rel_tol * max(1.0, abs(previous)):
            current.append(index)
        else:
            groups.append(_make_group(mode_set, current))
            current = [index]
    groups.append(_make_group(mode_set, current))

    return groups


def _make_group(mode_set: ModeSet, indices: List[int]) -> EigenspaceGroup:
    return EigenspaceGroup(
        lambda_=mode_set.eigenvalues[indices[0]],
        members=tuple(mode_set.modes[k] for k in indices),
        indices=tuple(indices)
    )
