"""
Análise de sensores estratégicos.
Teste de posto por autoespaço, predicados de posicionamento em forma fechada,
margem de observabilidade (Gramiano) e varredura de posicionamento.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple
import math

import numpy as np
from scipy import linalg
import structlog

from analysis.sensing import (
    BoundaryZone,
    Filament,
    InteriorPoint,
    InteriorZone,
    Profile,
    SensorSpec,
    SymmetricTriangle,
    Uniform,
    sensor_coefficients
)
from analysis.spectral import (
    DEFAULT_GROUP_TOL,
    EigenspaceGroup,
    Mode,
    ModeSet,
    Point,
    Rectangle,
    build_mode_set,
    group_by_eigenvalue
)
from utils.errors import (
    ConfigurationError,
    EmptySensorSet,
    GeometryError,
    NonPositiveHorizon
)

logger = structlog.get_logger()

DEFAULT_SIGMA_MIN = 0.01
DEFAULT_RANK_TOL = 1e-10
PREDICATE_TOL = 1e-12


class BasisKind(str, Enum):
    GLOBAL = "global"
    REGIONAL = "regional"


@dataclass(frozen=True)
class AnalysisBasis:
    """Base usada na análise: autofunções de Ω (global) ou de ω (regional)."""

    kind: BasisKind
    domain: Rectangle
    region: Optional[Rectangle] = None

    def __post_init__(self):
        if self.kind == BasisKind.REGIONAL:
            if self.region is None:
                raise GeometryError("Base regional exige uma região")
            if not self.domain.contains_rect(self.region):
                raise GeometryError("A região deve estar contida no domínio", field="region")

    @classmethod
    def global_basis(cls, domain: Rectangle) -> "AnalysisBasis":
        return cls(BasisKind.GLOBAL, domain)

    @classmethod
    def regional_basis(cls, domain: Rectangle, region: Rectangle) -> "AnalysisBasis":
        return cls(BasisKind.REGIONAL, domain, region)

    @property
    def basis_domain(self) -> Rectangle:
        return self.region if self.kind == BasisKind.REGIONAL else self.domain

    def mode_set(self, orders: Tuple[int, int], shift: float) -> ModeSet:
        return build_mode_set(self.basis_domain, orders[0], orders[1], shift)


# ==================== MODOS LENTOS ====================

def select_slow_groups(
    groups: Sequence[EigenspaceGroup],
    shift: float,
    *,
    count: Optional[int] = None,
    sigma_min: float = DEFAULT_SIGMA_MIN
) -> List[EigenspaceGroup]:
    """
    Seleciona os autoespaços lentos.

    Com `count` explícito retorna os `count` primeiros grupos; caso contrário,
    todos os grupos com taxa λ + c > −σ_min.
    """
    if count is not None:
        if count < 0 or count > len(groups):
            raise ConfigurationError(
                f"Número de grupos lentos {count} fora de [0, {len(groups)}]",
                field="slow.groups"
            )
        return list(groups[:count])
    return [g for g in groups if g.lambda_ + shift > -sigma_min]


def slow_indices(groups: Sequence[EigenspaceGroup]) -> Tuple[int, ...]:
    """Índices (no ModeSet) dos modos pertencentes aos grupos dados."""
    return tuple(index for group in groups for index in group.indices)


def minimum_sensor_count(
    mode_set: ModeSet,
    groups: Optional[int] = None,
    *,
    sigma_min: float = DEFAULT_SIGMA_MIN,
    group_tol: float = DEFAULT_GROUP_TOL
) -> int:
    """r = maior multiplicidade entre os grupos lentos: limite inferior do número de sensores."""
    slow = select_slow_groups(group_by_eigenvalue(mode_set, group_tol), mode_set.shift, count=groups, sigma_min=sigma_min)
    return _largest_multiplicity(slow)


def _largest_multiplicity(groups: Sequence[EigenspaceGroup]) -> int:
    return max((g.multiplicity for g in groups), default=0)


# ==================== TESTE DE POSTO ====================

@dataclass(frozen=True)
class GroupRank:
    """Resultado do teste de posto para um autoespaço."""

    lambda_: float
    multiplicity: int
    rank: int
    smallest_singular_value: float
    members: Tuple[str, ...]
    null_modes: Tuple[str, ...]

    @property
    def full_rank(self) -> bool:
        return self.rank == self.multiplicity

    def to_dict(self) -> Dict:
        return {
            "lambda": self.lambda_,
            "multiplicity": self.multiplicity,
            "rank": self.rank,
            "smallest_singular_value": self.smallest_singular_value,
            "members": list(self.members),
            "null_modes": list(self.null_modes),
            "full_rank": self.full_rank,
        }


@dataclass(frozen=True)
class StrategicReport:
    """Veredito do teste de sensores estratégicos sobre os autoespaços lentos."""

    q: int
    r: int
    per_group: Tuple[GroupRank, ...]
    verdict: bool
    margin: float

    @property
    def offending_modes(self) -> Tuple[str, ...]:
        return tuple(
            label
            for group in self.per_group if not group.full_rank
            for label in (group.null_modes or group.members)
        )

    def to_dict(self) -> Dict:
        return {
            "q": self.q,
            "r": self.r,
            "verdict": self.verdict,
            "margin": self.margin,
            "offending_modes": list(self.offending_modes),
            "groups": [g.to_dict() for g in self.per_group],
        }


def group_matrix(group: EigenspaceGroup, sensors: Sequence[SensorSpec], basis_domain: Rectangle) -> np.ndarray:
    """G_n (q × r_n) com G_n[k, j] = ⟨sensor_k, φ_{n,j}⟩."""
    return np.array([sensor_coefficients(s, group.members, basis_domain) for s in sensors], dtype=float)


def check_strategic(
    sensors: Sequence[SensorSpec],
    mode_set: ModeSet,
    basis: AnalysisBasis,
    *,
    groups: Optional[int] = None,
    sigma_min: float = DEFAULT_SIGMA_MIN,
    rank_tol: float = DEFAULT_RANK_TOL,
    group_tol: float = DEFAULT_GROUP_TOL
) -> StrategicReport:
    """
    Testa posto(G_n) = r_n para todo autoespaço lento.

    O posto numérico conta valores singulares acima de rank_tol vezes o maior valor
    singular entre todos os G_n lentos.

    Args:
        sensors: Sensores candidatos
        mode_set: Base modal da análise
        basis: Base (global ou regional); deve corresponder a mode_set.domain
        groups: Número explícito de grupos lentos (opcional)
        sigma_min: Limiar de taxa para modos lentos
        rank_tol: Tolerância relativa de posto

    Returns:
        StrategicReport

    Raises:
        EmptySensorSet: Se não houver sensores
        GeometryError: Se a base não corresponder ao ModeSet
    """
    sensors = tuple(sensors)
    if not sensors:
        raise EmptySensorSet()
    if mode_set.domain != basis.basis_domain:
        raise GeometryError("A base modal não corresponde ao domínio da análise")

    all_groups = group_by_eigenvalue(mode_set, group_tol)
    slow = select_slow_groups(all_groups, mode_set.shift, count=groups, sigma_min=sigma_min)

    matrices = [group_matrix(g, sensors, mode_set.domain) for g in slow]
    spectra = [linalg.svdvals(G) for G in matrices]
    reference = max((float(s[0]) for s in spectra if s.size), default=0.0)
    threshold = rank_tol * reference if reference > 0.0 else rank_tol

    per_group = []
    for group, G, spectrum in zip(slow, matrices, spectra):
        rank = int(np.sum(spectrum > threshold))
        r_n = group.multiplicity
        smallest = float(spectrum[r_n - 1]) if spectrum.size >= r_n else 0.0
        column_norms = np.linalg.norm(G, axis=0)
        per_group.append(GroupRank(
            lambda_=group.lambda_,
            multiplicity=r_n,
            rank=rank,
            smallest_singular_value=smallest,
            members=tuple(m.label for m in group.members),
            null_modes=tuple(m.label for m, c in zip(group.members, column_norms) if c <= threshold)
        ))

    q = len(sensors)
    r = _largest_multiplicity(slow)
    verdict = q >= r and all(g.full_rank for g in per_group)
    margin = min((g.smallest_singular_value for g in per_group), default=math.inf)

    report = StrategicReport(q=q, r=r, per_group=tuple(per_group), verdict=verdict, margin=margin)
    logger.debug(
        "Teste de posto concluído",
        basis=basis.kind.value,
        sensors=q,
        slow_groups=len(slow),
        verdict=verdict,
        margin=margin
    )
    return report


# ==================== PREDICADOS DE POSICIONAMENTO ====================

@dataclass(frozen=True)
class VanishingMode:
    mode: Mode
    axis: str
    reason: str


@dataclass(frozen=True)
class PlacementVerdict:
    """Modos cujo fator cosseno se anula na posição do sensor."""

    vanishing_modes: Tuple[VanishingMode, ...] = field(default_factory=tuple)

    @property
    def is_bad(self) -> bool:
        return bool(self.vanishing_modes)

    @property
    def labels(self) -> Tuple[str, ...]:
        return tuple(dict.fromkeys(v.mode.label for v in self.vanishing_modes))


def _half_integer(value: float, tol: float = PREDICATE_TOL) -> bool:
    return abs(value - math.floor(value) - 0.5) <= tol


def _candidate_modes(max_orders: Tuple[int, int], modes: Optional[Sequence[Mode]]) -> Sequence[Mode]:
    if modes is not None:
        return modes
    return [Mode(i, j) for i in range(max_orders[0] + 1) for j in range(max_orders[1] + 1)]


def _axis_check(order: int, position: float, lower: float, length: float) -> Optional[str]:
    if order == 0:
        return None
    value = order * (position - lower) / length
    if _half_integer(value):
        return f"{order}·(b − início)/L = {value:.6g} é semi-inteiro"
    return None


def placement_predicate_point(
    domain: Rectangle,
    point: Point,
    max_orders: Tuple[int, int],
    modes: Optional[Sequence[Mode]] = None
) -> PlacementVerdict:
    """
    Predicado em forma fechada para um sensor pontual em b.

    O modo (i, j) se anula em b quando i·(b₁ − x_min)/L₁ ou j·(b₂ − y_min)/L₂ é semi-inteiro.
    """
    bx, by = point
    found = []
    for mode in _candidate_modes(max_orders, modes):
        reason = _axis_check(mode.i, bx, domain.x_min, domain.width)
        if reason:
            found.append(VanishingMode(mode, "x", reason))
        reason = _axis_check(mode.j, by, domain.y_min, domain.height)
        if reason:
            found.append(VanishingMode(mode, "y", reason))
    return PlacementVerdict(tuple(found))


def symmetry_center(profile: Profile, support_center: Tuple[float, ...]) -> Tuple[float, ...]:
    """
    Centro de simetria do perfil: o centro do suporte (uniforme) ou o da tenda.

    Raises:
        GeometryError: Se o perfil não for simétrico (tabelado)
    """
    if isinstance(profile, Uniform):
        return tuple(support_center)
    if isinstance(profile, SymmetricTriangle):
        if len(profile.center) != len(support_center):
            raise GeometryError("Centro do perfil triangular com dimensão incompatível com o suporte")
        return profile.center
    raise GeometryError("O predicado em forma fechada exige um perfil simétrico")


def placement_predicate_zone(
    domain: Rectangle,
    center: Point,
    profile: Profile,
    max_orders: Tuple[int, int],
    modes: Optional[Sequence[Mode]] = None
) -> PlacementVerdict:
    """Zona interior com perfil simétrico em torno de μ₀: mesma condição do ponto em μ₀."""
    return placement_predicate_point(domain, symmetry_center(profile, tuple(center)), max_orders, modes)


def placement_predicate_boundary_zone(
    domain: Rectangle,
    edge: str,
    center: float,
    max_orders: Tuple[int, int],
    modes: Optional[Sequence[Mode]] = None
) -> PlacementVerdict:
    """Zona de fronteira: só o eixo ao longo da aresta entra na condição."""
    horizontal = edge in ("bottom", "top")
    found = []
    for mode in _candidate_modes(max_orders, modes):
        if horizontal:
            reason = _axis_check(mode.i, center, domain.x_min, domain.width)
        else:
            reason = _axis_check(mode.j, center, domain.y_min, domain.height)
        if reason:
            found.append(VanishingMode(mode, "x" if horizontal else "y", reason))
    return PlacementVerdict(tuple(found))


def placement_predicate_filament(
    domain: Rectangle,
    filament: Filament,
    max_orders: Tuple[int, int],
    modes: Optional[Sequence[Mode]] = None
) -> PlacementVerdict:
    """Filamento retilíneo alinhado a um eixo, com perfil simétrico: condição do ponto no centro de simetria."""
    if len(filament.points) != 2:
        raise GeometryError("O predicado de filamento exige um único segmento")
    (x0, y0), (x1, y1) = filament.points
    if x0 != x1 and y0 != y1:
        raise GeometryError("O predicado de filamento exige um segmento alinhado a um eixo")
    (s,) = symmetry_center(filament.profile, (0.5 * filament.length,))
    fraction = s / filament.length
    point = (x0 + fraction * (x1 - x0), y0 + fraction * (y1 - y0))
    return placement_predicate_point(domain, point, max_orders, modes)


def placement_predicate(
    domain: Rectangle,
    sensor: SensorSpec,
    max_orders: Tuple[int, int],
    modes: Optional[Sequence[Mode]] = None
) -> Optional[PlacementVerdict]:
    """Despacha para o predicado do tipo de sensor (None se não houver forma fechada)."""
    if isinstance(sensor, InteriorPoint):
        return placement_predicate_point(domain, sensor.point, max_orders, modes)
    if isinstance(sensor, InteriorZone):
        try:
            return placement_predicate_zone(domain, sensor.support.center, sensor.profile, max_orders, modes)
        except GeometryError:
            return None
    if isinstance(sensor, BoundaryZone):
        try:
            (center,) = symmetry_center(sensor.profile, (sensor.center,))
        except GeometryError:
            return None
        return placement_predicate_boundary_zone(domain, sensor.edge, center, max_orders, modes)
    if isinstance(sensor, Filament):
        try:
            return placement_predicate_filament(domain, sensor, max_orders, modes)
        except GeometryError:
            return None
    return None


# ==================== MARGEM DE OBSERVABILIDADE ====================

def observability_gramian(
    C: np.ndarray,
    rates: np.ndarray,
    indices: Sequence[int],
    horizon: float
) -> np.ndarray:
    """
    Gramiano de observabilidade do bloco lento em [0, T].

    W_mn = (CᵀC)_mn · (e^{(r_m + r_n)T} − 1)/(r_m + r_n), com limite T quando a soma se anula.
    """
    if not horizon > 0.0:
        raise NonPositiveHorizon(f"Horizonte deve ser positivo: {horizon}", field="analysis.horizon")

    idx = list(indices)
    C_s = np.asarray(C, dtype=float)[:, idx]
    r = np.asarray(rates, dtype=float)[idx]
    S = r[:, None] + r[None, :]
    degenerate = np.abs(S) < 1e-14
    kernel = np.where(degenerate, horizon, np.expm1(S * horizon) / np.where(degenerate, 1.0, S))
    return (C_s.T @ C_s) * kernel


def gramian_margin(C: np.ndarray, rates: np.ndarray, indices: Sequence[int], horizon: float) -> float:
    """Menor autovalor do Gramiano lento, truncado em 0 (+inf sem modos lentos)."""
    if not horizon > 0.0:
        raise NonPositiveHorizon(f"Horizonte deve ser positivo: {horizon}", field="analysis.horizon")
    if len(indices) == 0:
        return math.inf
    W = observability_gramian(C, rates, indices, horizon)
    return max(0.0, float(linalg.eigvalsh(W)[0]))


def observability_margin(
    sensors: Sequence[SensorSpec],
    mode_set: ModeSet,
    indices: Sequence[int],
    horizon: float
) -> float:
    """
    Margem de observabilidade dos modos lentos em [0, T].

    Args:
        sensors: Sensores
        mode_set: Base modal
        indices: Índices dos modos lentos no ModeSet
        horizon: Horizonte T > 0

    Returns:
        λ_min do Gramiano lento (≥ 0; +inf se não houver modos lentos)
    """
    sensors = tuple(sensors)
    if not sensors:
        raise EmptySensorSet()
    if not horizon > 0.0:
        raise NonPositiveHorizon(f"Horizonte deve ser positivo: {horizon}", field="analysis.horizon")
    if len(indices) == 0:
        return math.inf

    modes = [mode_set.modes[k] for k in indices]
    C_s = np.array([sensor_coefficients(s, modes, mode_set.domain) for s in sensors], dtype=float)
    rates = mode_set.rates[list(indices)]
    return gramian_margin(C_s, rates, range(len(indices)), horizon)


# ==================== VARREDURA ====================

@dataclass(frozen=True)
class ScanRow:
    x: float
    y: float
    margin_global: float
    margin_regional: float
    predicate_flag: bool


@dataclass(frozen=True)
class ScanSetup:
    """Tudo o que um nó da varredura precisa (serializável para processos)."""

    domain: Rectangle
    region: Rectangle
    template: SensorSpec
    global_modes: ModeSet
    regional_modes: ModeSet
    global_slow: Tuple[int, ...]
    regional_slow: Tuple[int, ...]
    horizon: float


def build_scan_setup(
    domain: Rectangle,
    region: Rectangle,
    orders: Tuple[int, int],
    shift: float,
    template: SensorSpec,
    *,
    horizon: float = 1.0,
    groups: Optional[int] = None,
    sigma_min: float = DEFAULT_SIGMA_MIN,
    group_tol: float = DEFAULT_GROUP_TOL
) -> ScanSetup:
    if not isinstance(template, (InteriorPoint, InteriorZone)):
        raise ConfigurationError("A varredura aceita apenas modelos pontuais ou de zona interior", field="sensors.0.kind")
    if not horizon > 0.0:
        raise NonPositiveHorizon(f"Horizonte deve ser positivo: {horizon}", field="analysis.horizon")

    global_modes = AnalysisBasis.global_basis(domain).mode_set(orders, shift)
    regional_modes = AnalysisBasis.regional_basis(domain, region).mode_set(orders, shift)
    global_slow = select_slow_groups(group_by_eigenvalue(global_modes, group_tol), shift, count=groups, sigma_min=sigma_min)
    regional_slow = select_slow_groups(group_by_eigenvalue(regional_modes, group_tol), shift, count=groups, sigma_min=sigma_min)

    return ScanSetup(
        domain=domain,
        region=region,
        template=template,
        global_modes=global_modes,
        regional_modes=regional_modes,
        global_slow=slow_indices(global_slow),
        regional_slow=slow_indices(regional_slow),
        horizon=horizon
    )


def scan_nodes(domain: Rectangle, resolution: int) -> List[Point]:
    """Nós de uma grade regular res × res no fecho de Ω (x varia mais devagar)."""
    if isinstance(resolution, bool) or int(resolution) != resolution or resolution < 2:
        raise ConfigurationError(f"Resolução da varredura inválida: {resolution}", field="scan.resolution")
    xs = np.linspace(domain.x_min, domain.x_max, int(resolution))
    ys = np.linspace(domain.y_min, domain.y_max, int(resolution))
    return [(float(x), float(y)) for x in xs for y in ys]


def place_template(template: SensorSpec, node: Point, domain: Rectangle) -> SensorSpec:
    """Recentra o modelo de sensor no nó (zonas são recortadas ao domínio; tendas sobre ∂Ω viram pontos)."""
    if isinstance(template, InteriorPoint):
        return InteriorPoint(*node)

    half_w = 0.5 * template.support.width
    half_h = 0.5 * template.support.height
    support = Rectangle(
        max(domain.x_min, node[0] - half_w),
        min(domain.x_max, node[0] + half_w),
        max(domain.y_min, node[1] - half_h),
        min(domain.y_max, node[1] + half_h)
    )
    profile = template.profile
    if isinstance(profile, SymmetricTriangle):
        if support.on_boundary(node, 0.0):
            # tenda de meia-largura nula: o limite é a leitura pontual no nó
            return InteriorPoint(*node)
        profile = SymmetricTriangle(node)
    return InteriorZone(support, profile)


def evaluate_scan_node(setup: ScanSetup, node: Point) -> ScanRow:
    """Margens global e regional e flag do predicado para um nó."""
    sensor = place_template(setup.template, node, setup.domain)
    margin_global = observability_margin([sensor], setup.global_modes, setup.global_slow, setup.horizon)
    margin_regional = observability_margin([sensor], setup.regional_modes, setup.regional_slow, setup.horizon)

    slow_modes = [setup.global_modes.modes[k] for k in setup.global_slow]
    verdict = placement_predicate_point(setup.domain, node, setup.global_modes.orders, slow_modes)

    return ScanRow(
        x=node[0],
        y=node[1],
        margin_global=margin_global,
        margin_regional=margin_regional,
        predicate_flag=verdict.is_bad
    )


def placement_scan(setup: ScanSetup, resolution: int) -> List[ScanRow]:
    """Varredura sequencial da grade; as linhas seguem a ordem de `scan_nodes`."""
    rows = [evaluate_scan_node(setup, node) for node in scan_nodes(setup.domain, resolution)]
    logger.info("Varredura concluída", nodes=len(rows))
    return rows
