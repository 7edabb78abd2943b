"""
Verificações de geometria e de parâmetros.
Garante que regiões e sensores respeitem o domínio antes de qualquer cálculo.
"""

from typing import Optional
import math

import structlog

from analysis.sensing import (
    BoundaryPoint,
    BoundaryZone,
    Filament,
    InteriorPoint,
    InteriorZone,
    SensorSpec,
    SymmetricTriangle
)
from analysis.spectral import Rectangle
from .errors import ConfigurationError, GeometryError

logger = structlog.get_logger()

GEOMETRY_TOL = 1e-12


def check_region_inside(region: Rectangle, domain: Rectangle) -> bool:
    """
    Verifica se ω ⊆ Ω.

    Raises:
        GeometryError: Se a região sair do domínio
    """
    if not domain.contains_rect(region, GEOMETRY_TOL):
        raise GeometryError(
            f"A região {region.as_tuple()} não está contida no domínio {domain.as_tuple()}",
            field="region"
        )
    return True


def check_positive(name: str, value: float, line: Optional[int] = None) -> float:
    """Exige um número finito e estritamente positivo."""
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value) or value <= 0:
        raise ConfigurationError(f"Valor deve ser um número positivo: {value!r}", field=name, line=line)
    return float(value)


def edge_level(domain: Rectangle, edge: str) -> float:
    """Coordenada fixa de uma aresta do retângulo."""
    levels = {
        "bottom": domain.y_min,
        "top": domain.y_max,
        "left": domain.x_min,
        "right": domain.x_max,
    }
    if edge not in levels:
        raise GeometryError(f"Aresta desconhecida: {edge}", field="edge")
    return levels[edge]


def _triangle_inside(profile, bounds) -> bool:
    """Perfis triangulares precisam do centro no interior do suporte (meia-largura positiva)."""
    if not isinstance(profile, SymmetricTriangle):
        return True
    try:
        profile.half_widths(bounds)
    except GeometryError:
        return False
    return True


def check_sensor_geometry(
    sensor: SensorSpec,
    domain: Rectangle,
    field: Optional[str] = None,
    line: Optional[int] = None
) -> bool:
    """
    Verifica se o sensor está no fecho de Ω e é coerente com o seu tipo.

    Args:
        sensor: O sensor
        domain: O domínio Ω
        field: Prefixo do campo na configuração (para mensagens)
        line: Linha do campo no arquivo de cenário

    Returns:
        True se válido

    Raises:
        GeometryError: Se a geometria for inválida
    """
    def fail(message: str):
        raise GeometryError(message, field=field, line=line)

    if isinstance(sensor, InteriorPoint):
        if not domain.contains(sensor.point, GEOMETRY_TOL):
            fail(f"Sensor pontual {sensor.point} fora do domínio")

    elif isinstance(sensor, BoundaryPoint):
        if not domain.on_boundary(sensor.point, GEOMETRY_TOL):
            fail(f"Sensor de fronteira {sensor.point} não está em ∂Ω")

    elif isinstance(sensor, InteriorZone):
        if not domain.contains_rect(sensor.support, GEOMETRY_TOL):
            fail(f"Suporte {sensor.support.as_tuple()} fora do domínio")
        if not _triangle_inside(sensor.profile, sensor.bounds):
            fail("Centro do perfil triangular fora do interior do suporte")

    elif isinstance(sensor, BoundaryZone):
        if abs(sensor.level - edge_level(domain, sensor.edge)) > GEOMETRY_TOL:
            fail(f"A zona de fronteira não está sobre a aresta {sensor.edge}")
        lo, hi = (domain.x_min, domain.x_max) if sensor.horizontal else (domain.y_min, domain.y_max)
        if sensor.start < lo - GEOMETRY_TOL or sensor.end > hi + GEOMETRY_TOL:
            fail(f"Intervalo [{sensor.start}, {sensor.end}] sai da aresta {sensor.edge}")
        if not _triangle_inside(sensor.profile, ((sensor.start, sensor.end),)):
            fail("Centro do perfil triangular fora do intervalo da aresta")

    elif isinstance(sensor, Filament):
        for point in sensor.points:
            if not domain.contains(point, GEOMETRY_TOL):
                fail(f"Vértice {point} do filamento fora do domínio")
        if not _triangle_inside(sensor.profile, ((0.0, sensor.length),)):
            fail("Centro do perfil triangular fora do comprimento do filamento")

    else:
        raise ConfigurationError(f"Tipo de sensor desconhecido: {type(sensor).__name__}", field=field, line=line)

    return True
