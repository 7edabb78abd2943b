"""
Modelos de sensores e operador de saída.
Cada sensor vira uma linha de coeficientes ⟨sensor, φ_m⟩ sobre uma base modal.
"""

from dataclasses import dataclass, field
from typing import Sequence, Tuple, Union
import math

import numpy as np
from scipy.interpolate import RegularGridInterpolator
import structlog

from analysis.spectral import Mode, ModeSet, Point, Rectangle, mode_values
from utils.errors import (
    ConfigurationError,
    DimensionMismatch,
    EmptySensorSet,
    GeometryError,
    QuadratureNonConvergence
)
from utils.quadrature import DEFAULT_TOL, initial_panels_for, integrate_curve, integrate_rect

logger = structlog.get_logger()

EDGES = ("bottom", "top", "left", "right")

Interval = Tuple[float, float]


# ==================== PERFIS ====================

@dataclass(frozen=True)
class Uniform:
    """Perfil constante igual a 1 no suporte."""

    kind = "uniform"

    def evaluate(self, bounds: Sequence[Interval], coords: Sequence[np.ndarray]) -> np.ndarray:
        return np.ones_like(np.asarray(coords[0], dtype=float))

    def breakpoints(self, bounds: Sequence[Interval]) -> Tuple[Tuple[float, ...], ...]:
        return tuple(() for _ in bounds)


@dataclass(frozen=True)
class SymmetricTriangle:
    """Tenda simétrica centrada em `center`; a meia-largura em cada eixo é a distância à borda mais próxima."""

    center: Tuple[float, ...]

    kind = "triangle"

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    def half_widths(self, bounds: Sequence[Interval]) -> Tuple[float, ...]:
        """Meias-larguras por eixo; o centro precisa estar no interior do suporte."""
        self._check_dims(bounds)
        widths = tuple(min(center - lo, hi - center) for (lo, hi), center in zip(bounds, self.center))
        if any(w <= 0.0 for w in widths):
            raise GeometryError(f"Centro do perfil triangular {self.center} não está no interior do suporte")
        return widths

    def evaluate(self, bounds: Sequence[Interval], coords: Sequence[np.ndarray]) -> np.ndarray:
        result = np.ones_like(np.asarray(coords[0], dtype=float))
        for half_width, center, u in zip(self.half_widths(bounds), self.center, coords):
            result = result * np.clip(1.0 - np.abs(np.asarray(u, dtype=float) - center) / half_width, 0.0, None)
        return result

    def breakpoints(self, bounds: Sequence[Interval]) -> Tuple[Tuple[float, ...], ...]:
        points = []
        for (lo, hi), half_width, center in zip(bounds, self.half_widths(bounds), self.center):
            points.append(tuple(p for p in (center - half_width, center, center + half_width) if lo < p < hi))
        return tuple(points)

    def _check_dims(self, bounds: Sequence[Interval]):
        if len(self.center) != len(bounds):
            raise GeometryError(
                f"Centro do perfil triangular tem dimensão {len(self.center)}, suporte tem {len(bounds)}"
            )


@dataclass(frozen=True)
class Tabulated:
    """Perfil amostrado em grade regular sobre o suporte, interpolado linearmente."""

    values: Tuple

    kind = "tabulated"

    def __post_init__(self):
        array = np.asarray(self.values, dtype=float)
        if array.ndim not in (1, 2) or min(array.shape) < 2:
            raise GeometryError("Perfil tabelado precisa de pelo menos 2 amostras por eixo")
        if np.any(array < 0.0) or not np.all(np.isfinite(array)):
            raise GeometryError("Perfil tabelado deve ser finito e não negativo")
        object.__setattr__(self, "values", _freeze(array))

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def _grids(self, bounds: Sequence[Interval]) -> Tuple[np.ndarray, ...]:
        array = self.array
        if array.ndim != len(bounds):
            raise GeometryError(f"Perfil tabelado {array.ndim}D usado num suporte {len(bounds)}D")
        return tuple(np.linspace(lo, hi, n) for (lo, hi), n in zip(bounds, array.shape))

    def evaluate(self, bounds: Sequence[Interval], coords: Sequence[np.ndarray]) -> np.ndarray:
        grids = self._grids(bounds)
        if len(grids) == 1:
            return np.interp(np.asarray(coords[0], dtype=float), grids[0], self.array)
        interpolator = RegularGridInterpolator(grids, self.array, bounds_error=False, fill_value=0.0)
        return interpolator(np.column_stack([np.asarray(c, dtype=float) for c in coords]))

    def breakpoints(self, bounds: Sequence[Interval]) -> Tuple[Tuple[float, ...], ...]:
        return tuple(tuple(grid[1:-1]) for grid in self._grids(bounds))


Profile = Union[Uniform, SymmetricTriangle, Tabulated]


def _freeze(array: np.ndarray):
    if array.ndim == 1:
        return tuple(float(v) for v in array)
    return tuple(_freeze(row) for row in array)


# ==================== SENSORES ====================

@dataclass(frozen=True)
class InteriorPoint:
    """Sensor pontual y(t) = z(b, t)."""

    x: float
    y: float

    kind = "point"

    @property
    def point(self) -> Point:
        return (self.x, self.y)


@dataclass(frozen=True)
class BoundaryPoint:
    """Sensor pontual localizado em ∂Ω."""

    x: float
    y: float

    kind = "boundary_point"

    @property
    def point(self) -> Point:
        return (self.x, self.y)


@dataclass(frozen=True)
class InteriorZone:
    """Sensor de zona: média ponderada de z sobre um retângulo suporte."""

    support: Rectangle
    profile: Profile = field(default_factory=Uniform)

    kind = "zone"

    @property
    def bounds(self) -> Tuple[Interval, Interval]:
        return ((self.support.x_min, self.support.x_max), (self.support.y_min, self.support.y_max))


@dataclass(frozen=True)
class BoundaryZone:
    """
    Sensor de zona em uma aresta do retângulo.

    `level` é a coordenada fixa da aresta (y para bottom/top, x para left/right);
    [start, end] é o intervalo percorrido ao longo da aresta.
    """

    edge: str
    level: float
    start: float
    end: float
    profile: Profile = field(default_factory=Uniform)

    kind = "boundary_zone"

    def __post_init__(self):
        if self.edge not in EDGES:
            raise GeometryError(f"Aresta desconhecida: {self.edge}", field="edge")
        if not self.start < self.end:
            raise GeometryError(f"Intervalo de aresta degenerado: [{self.start}, {self.end}]")

    @property
    def horizontal(self) -> bool:
        return self.edge in ("bottom", "top")

    @property
    def center(self) -> float:
        return 0.5 * (self.start + self.end)

    @property
    def length(self) -> float:
        return self.end - self.start

    @property
    def segment(self) -> Tuple[Point, Point]:
        if self.horizontal:
            return (self.start, self.level), (self.end, self.level)
        return (self.level, self.start), (self.level, self.end)


@dataclass(frozen=True)
class Filament:
    """Sensor filamento: integral de z ao longo de uma poligonal, por comprimento de arco."""

    points: Tuple[Point, ...]
    profile: Profile = field(default_factory=Uniform)

    kind = "filament"

    def __post_init__(self):
        object.__setattr__(self, "points", tuple((float(x), float(y)) for x, y in self.points))
        if len(self.points) < 2:
            raise GeometryError("Filamento precisa de pelo menos 2 pontos")

    @property
    def length(self) -> float:
        return float(sum(math.hypot(b[0] - a[0], b[1] - a[1]) for a, b in zip(self.points, self.points[1:])))


SensorSpec = Union[InteriorPoint, BoundaryPoint, InteriorZone, BoundaryZone, Filament]


# ==================== COEFICIENTES ====================

def _cycles(modes: Sequence[Mode], span: float, basis_length: float, axis: str) -> float:
    if not modes:
        return 0.0
    top = max(m.i if axis == "x" else m.j for m in modes)
    return top * span / basis_length


def sensor_coefficients(
    sensor: SensorSpec,
    modes: Sequence[Mode],
    basis_domain: Rectangle,
    *,
    tol: float = DEFAULT_TOL
) -> np.ndarray:
    """
    Calcula ⟨sensor, φ_m⟩ para cada modo da base de `basis_domain`.

    Args:
        sensor: O sensor
        modes: Modos a avaliar
        basis_domain: Retângulo que define as autofunções
        tol: Tolerância de convergência da quadratura

    Returns:
        Vetor de coeficientes (um por modo)

    Raises:
        QuadratureNonConvergence: Se a quadratura não convergir
    """
    modes = tuple(modes)

    if isinstance(sensor, (InteriorPoint, BoundaryPoint)):
        return mode_values(basis_domain, modes, [sensor.x], [sensor.y])[0]

    if isinstance(sensor, InteriorZone):
        bounds = sensor.bounds
        extra_x, extra_y = sensor.profile.breakpoints(bounds)
        panels = max(
            initial_panels_for(_cycles(modes, sensor.support.width, basis_domain.width, "x")),
            initial_panels_for(_cycles(modes, sensor.support.height, basis_domain.height, "y"))
        )

        def integrand(X, Y):
            weight = sensor.profile.evaluate(bounds, (X, Y))
            return mode_values(basis_domain, modes, X, Y) * weight[:, None]

        return integrate_rect(
            integrand,
            [bounds[0][0], *extra_x, bounds[0][1]],
            [bounds[1][0], *extra_y, bounds[1][1]],
            tol=tol,
            initial_panels=panels
        )

    if isinstance(sensor, BoundaryZone):
        bounds = ((sensor.start, sensor.end),)
        (extra,) = sensor.profile.breakpoints(bounds)
        basis_length = basis_domain.width if sensor.horizontal else basis_domain.height
        panels = initial_panels_for(_cycles(modes, sensor.length, basis_length, "x" if sensor.horizontal else "y"))

        def integrand(X, Y, s):
            along = X if sensor.horizontal else Y
            weight = sensor.profile.evaluate(bounds, (along,))
            return mode_values(basis_domain, modes, X, Y) * weight[:, None]

        return integrate_curve(
            integrand,
            sensor.segment,
            param_breaks=[p - sensor.start for p in extra],
            tol=tol,
            initial_panels=panels
        )

    if isinstance(sensor, Filament):
        total = sensor.length
        bounds = ((0.0, total),)
        (extra,) = sensor.profile.breakpoints(bounds)
        diagonal = math.hypot(basis_domain.width, basis_domain.height)
        top = max((max(m.i, m.j) for m in modes), default=0)
        panels = initial_panels_for(top * total / diagonal)

        def integrand(X, Y, s):
            weight = sensor.profile.evaluate(bounds, (s,))
            return mode_values(basis_domain, modes, X, Y) * weight[:, None]

        return integrate_curve(integrand, sensor.points, param_breaks=extra, tol=tol, initial_panels=panels)

    raise ConfigurationError(f"Tipo de sensor desconhecido: {type(sensor).__name__}", field="kind")


def sensor_coefficient(sensor: SensorSpec, mode: Mode, basis_domain: Rectangle) -> float:
    """Coeficiente de um único modo."""
    return float(sensor_coefficients(sensor, [mode], basis_domain)[0])


@dataclass(frozen=True, eq=False)
class OutputOperator:
    """Matriz C (q × N) com C[k, m] = ⟨sensor_k, φ_m⟩."""

    matrix: np.ndarray
    sensors: Tuple[SensorSpec, ...]
    basis_domain: Rectangle

    @property
    def q(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_modes(self) -> int:
        return self.matrix.shape[1]


def build_output_matrix(
    sensors: Sequence[SensorSpec],
    mode_set: ModeSet,
    *,
    tol: float = DEFAULT_TOL
) -> OutputOperator:
    """
    Monta o operador de saída sobre a base de `mode_set`.

    Raises:
        EmptySensorSet: Se não houver sensores
        QuadratureNonConvergence: Com o índice do sensor problemático
    """
    sensors = tuple(sensors)
    if not sensors:
        raise EmptySensorSet()

    rows = []
    for index, sensor in enumerate(sensors):
        try:
            rows.append(sensor_coefficients(sensor, mode_set.modes, mode_set.domain, tol=tol))
        except QuadratureNonConvergence as exc:
            exc.sensor_index = index
            raise

    matrix = np.vstack(rows) if mode_set.n_modes else np.zeros((len(sensors), 0))
    logger.debug("Operador de saída montado", sensors=len(sensors), modes=mode_set.n_modes)
    return OutputOperator(matrix=matrix, sensors=sensors, basis_domain=mode_set.domain)


def evaluate_output(operator: OutputOperator, coefficients: np.ndarray) -> np.ndarray:
    """y = C·a."""
    coefficients = np.asarray(coefficients, dtype=float)
    if coefficients.shape[-1] != operator.n_modes:
        raise DimensionMismatch(
            f"Vetor de coeficientes com {coefficients.shape[-1]} entradas, base com {operator.n_modes}"
        )
    return coefficients @ operator.matrix.T


def actuator_matrix(actuators: Sequence[SensorSpec], mode_set: ModeSet) -> np.ndarray:
    """Matriz de entrada B (N × p): atuadores têm a mesma geometria que sensores."""
    actuators = tuple(actuators)
    if not actuators:
        return np.zeros((mode_set.n_modes, 0))
    return build_output_matrix(actuators, mode_set).matrix.T

