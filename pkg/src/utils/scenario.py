"""
Cenários: leitura, validação e eco da configuração.
Um cenário é um objeto JSON plano com chaves pontuadas (`domain.x_max`, `sensors.0.kind`)
que sobrepõe os padrões de config.json.
"""

import json
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np
import structlog

from analysis.observer import ExplicitGain, GainSpec, InputSchedule, RiccatiGain, ShiftGain
from analysis.sensing import (
    BoundaryPoint,
    BoundaryZone,
    Filament,
    InteriorPoint,
    InteriorZone,
    Profile,
    SensorSpec,
    SymmetricTriangle,
    Tabulated,
    Uniform
)
from analysis.spectral import Mode, ModeSet, Rectangle
from .errors import ConfigurationError, NonPositiveHorizon
from .validation import check_positive, check_region_inside, check_sensor_geometry, edge_level

logger = structlog.get_logger()

PROJECT_ROOT = Path(__file__).resolve().parents[2]
DEFAULTS_FILE = PROJECT_ROOT / "config.json"

SENSOR_KINDS = ("point", "zone", "boundary_zone", "boundary_point", "filament")
PROFILE_KINDS = ("uniform", "triangle", "tabulated")
PROFILE_FIELDS = {"profile", "profile_center", "profile_values"}
KIND_FIELDS = {
    "point": {"x", "y"},
    "boundary_point": {"x", "y"},
    "zone": {"x_min", "x_max", "y_min", "y_max"} | PROFILE_FIELDS,
    "boundary_zone": {"edge", "start", "end"} | PROFILE_FIELDS,
    "filament": {"points"} | PROFILE_FIELDS,
}
INDEXED_KEY = re.compile(r"^(sensors|actuators)\.(\d+)\.([a-z_]+)$")
JSON_KEY = re.compile(r'"((?:[^"\\]|\\.)*)"\s*:')


@dataclass(frozen=True)
class EstimatorChoice:
    kind: str = "identity"
    rates: Optional[Tuple[float, ...]] = None


@dataclass(frozen=True)
class InitialCondition:
    kind: str = "random"
    values: Optional[Tuple[float, ...]] = None
    mode: Optional[Tuple[int, int]] = None
    scale: float = 1.0
    observer: Optional[Tuple[float, ...]] = None


@dataclass(frozen=True)
class Scenario:
    """Todos os dados de uma execução."""

    domain: Rectangle
    region: Rectangle
    shift: float
    truncation: Tuple[int, int]
    sigma_min: float
    slow_groups: Optional[int]
    horizon: float
    rank_tol: float
    group_tol: float
    sensors: Tuple[SensorSpec, ...]
    actuators: Tuple[SensorSpec, ...]
    gain: GainSpec
    allow_undetectable: bool
    estimator: EstimatorChoice
    initial: InitialCondition
    inputs: Optional[InputSchedule]
    t_final: float
    dt: float
    scan_resolution: int
    scan_workers: Optional[int]
    output_dir: str
    seed: int


# ==================== LEITURA ====================

def load_defaults(path: Path = DEFAULTS_FILE) -> Dict[str, Any]:
    """Carrega os padrões planos de config.json."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            defaults = json.load(f)
    except FileNotFoundError:
        raise ConfigurationError(f"Arquivo de padrões não encontrado: {path}")
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"Arquivo de padrões inválido: {e.msg}", line=e.lineno)

    if not isinstance(defaults, dict):
        raise ConfigurationError("config.json deve conter um objeto JSON")
    return defaults


def key_lines(text: str) -> Dict[str, int]:
    """Linha (base 1) da primeira ocorrência de cada chave num texto JSON."""
    lines: Dict[str, int] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        for match in JSON_KEY.finditer(line):
            lines.setdefault(match.group(1), number)
    return lines


def load_scenario(path: Optional[Path] = None, defaults: Optional[Dict[str, Any]] = None) -> Scenario:
    """
    Lê um arquivo de cenário e o combina com os padrões.

    Args:
        path: Caminho do arquivo (None usa só os padrões)
        defaults: Padrões já carregados (opcional)

    Returns:
        Scenario validado

    Raises:
        ConfigurationError: Com campo e linha do problema
    """
    if path is None:
        return parse_scenario({}, {}, defaults)

    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigurationError(f"Não foi possível ler o cenário {path}: {e.strerror}")

    try:
        flat = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"JSON inválido: {e.msg}", line=e.lineno)

    if not isinstance(flat, dict):
        raise ConfigurationError("O cenário deve ser um objeto JSON plano", line=1)

    scenario = parse_scenario(flat, key_lines(text), defaults)
    logger.info("Cenário carregado", path=str(path), sensors=len(scenario.sensors))
    return scenario


class _Fields:
    """Acesso tipado às chaves do cenário, com campo e linha nos erros."""

    def __init__(self, flat: Mapping[str, Any], lines: Mapping[str, int]):
        self.flat = flat
        self.lines = lines

    def fail(self, key: str, message: str, error=ConfigurationError):
        raise error(message, field=key, line=self.lines.get(key))

    def raw(self, key: str) -> Any:
        return self.flat.get(key)

    def number(self, key: str, *, allow_none: bool = False) -> Optional[float]:
        value = self.flat.get(key)
        if value is None and allow_none:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(key, f"Esperado um número, recebido {value!r}")
        return float(value)

    def positive(self, key: str) -> float:
        return check_positive(key, self.flat.get(key), self.lines.get(key))

    def integer(self, key: str, *, minimum: int = 0, allow_none: bool = False) -> Optional[int]:
        value = self.flat.get(key)
        if value is None and allow_none:
            return None
        if isinstance(value, bool) or not isinstance(value, int):
            self.fail(key, f"Esperado um inteiro, recebido {value!r}")
        if value < minimum:
            self.fail(key, f"Valor deve ser ≥ {minimum}: {value}")
        return value

    def text(self, key: str, choices: Optional[Tuple[str, ...]] = None) -> str:
        value = self.flat.get(key)
        if not isinstance(value, str):
            self.fail(key, f"Esperado um texto, recebido {value!r}")
        if choices and value not in choices:
            self.fail(key, f"Valor {value!r} inválido; opções: {', '.join(choices)}")
        return value

    def boolean(self, key: str) -> bool:
        value = self.flat.get(key)
        if not isinstance(value, bool):
            self.fail(key, f"Esperado true/false, recebido {value!r}")
        return value

    def numbers(self, key: str, *, allow_none: bool = True) -> Optional[Tuple[float, ...]]:
        value = self.flat.get(key)
        if value is None and allow_none:
            return None
        if not isinstance(value, list) or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in value):
            self.fail(key, f"Esperada uma lista de números, recebido {value!r}")
        return tuple(float(v) for v in value)

    def matrix(self, key: str, *, allow_none: bool = True) -> Optional[Tuple[Tuple[float, ...], ...]]:
        value = self.flat.get(key)
        if value is None and allow_none:
            return None
        if not isinstance(value, list) or not value or any(not isinstance(row, list) for row in value):
            self.fail(key, f"Esperada uma lista de listas de números, recebido {value!r}")
        rows = []
        for row in value:
            if any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in row):
                self.fail(key, f"Entrada não numérica em {row!r}")
            rows.append(tuple(float(v) for v in row))
        if len({len(row) for row in rows}) != 1:
            self.fail(key, "Todas as linhas devem ter o mesmo tamanho")
        return tuple(rows)

    def rectangle(self, prefix: str) -> Rectangle:
        values = [self.number(f"{prefix}.{name}") for name in ("x_min", "x_max", "y_min", "y_max")]
        try:
            return Rectangle(*values)
        except ConfigurationError as e:
            self.fail(f"{prefix}.x_min", e.message, type(e))


def _indexed_entries(fields: _Fields, collection: str) -> List[Dict[str, str]]:
    """Agrupa as chaves `<collection>.<k>.<campo>` por índice, exigindo índices contíguos."""
    entries: Dict[int, Dict[str, str]] = {}
    for key in fields.flat:
        match = INDEXED_KEY.match(key)
        if not match or match.group(1) != collection:
            continue
        index, attribute = int(match.group(2)), match.group(3)
        if attribute != "kind" and attribute not in set().union(*KIND_FIELDS.values()):
            fields.fail(key, f"Campo de sensor desconhecido: {attribute}")
        entries.setdefault(index, {})[attribute] = key

    if sorted(entries) != list(range(len(entries))):
        first = min(set(range(len(entries) + 1)) - set(entries))
        fields.fail(f"{collection}.{first}.kind", f"Índices de {collection} devem ser contíguos a partir de 0")
    return [entries[k] for k in range(len(entries))]


def _parse_profile(fields: _Fields, prefix: str, attrs: Dict[str, str], center) -> Profile:
    kind = fields.text(attrs["profile"], PROFILE_KINDS) if "profile" in attrs else "uniform"

    if kind == "uniform":
        return Uniform()

    if kind == "triangle":
        if "profile_center" in attrs:
            values = fields.numbers(attrs["profile_center"], allow_none=False)
            if len(values) != len(center):
                fields.fail(attrs["profile_center"], f"Centro do perfil deve ter {len(center)} coordenada(s)")
            return SymmetricTriangle(values)
        return SymmetricTriangle(tuple(center))

    key = attrs.get("profile_values", f"{prefix}.profile_values")
    value = fields.raw(key)
    if value is None:
        fields.fail(key, "Perfil tabelado exige profile_values")
    try:
        return Tabulated(value)
    except (ConfigurationError, ValueError, TypeError) as e:
        fields.fail(key, getattr(e, "message", str(e)))


def _parse_sensor(fields: _Fields, prefix: str, attrs: Dict[str, str], domain: Rectangle) -> SensorSpec:
    kind_key = attrs.get("kind", f"{prefix}.kind")
    kind = fields.text(kind_key, SENSOR_KINDS)

    for attribute, key in attrs.items():
        if attribute != "kind" and attribute not in KIND_FIELDS[kind]:
            fields.fail(key, f"Campo {attribute!r} não se aplica a sensores do tipo {kind!r}")

    def required(name: str) -> str:
        if name not in attrs:
            fields.fail(f"{prefix}.{name}", f"Campo obrigatório ausente para sensores do tipo {kind!r}")
        return attrs[name]

    try:
        if kind in ("point", "boundary_point"):
            x = fields.number(required("x"))
            y = fields.number(required("y"))
            sensor = InteriorPoint(x, y) if kind == "point" else BoundaryPoint(x, y)

        elif kind == "zone":
            for name in ("x_min", "x_max", "y_min", "y_max"):
                required(name)
            support = fields.rectangle(prefix)
            sensor = InteriorZone(support, _parse_profile(fields, prefix, attrs, support.center))

        elif kind == "boundary_zone":
            edge = fields.text(required("edge"), ("bottom", "top", "left", "right"))
            start = fields.number(required("start"))
            end = fields.number(required("end"))
            profile = _parse_profile(fields, prefix, attrs, (0.5 * (start + end),))
            sensor = BoundaryZone(edge, edge_level(domain, edge), start, end, profile)

        else:
            value = fields.raw(required("points"))
            if (not isinstance(value, list) or len(value) < 2
                    or any(not isinstance(p, list) or len(p) != 2 for p in value)):
                fields.fail(attrs["points"], "Filamento exige uma lista de pares [x, y] (mínimo 2)")
            points = tuple((float(p[0]), float(p[1])) for p in value)
            length = Filament(points).length
            sensor = Filament(points, _parse_profile(fields, prefix, attrs, (0.5 * length,)))

    except ConfigurationError as e:
        if e.field is None:
            fields.fail(kind_key, e.message, type(e))
        raise

    check_sensor_geometry(sensor, domain, field=prefix, line=fields.lines.get(kind_key))
    return sensor


def _parse_gain(fields: _Fields) -> GainSpec:
    kind = fields.text("gain.kind", ("riccati", "shift", "explicit"))
    try:
        if kind == "riccati":
            return RiccatiGain(fields.number("gain.rho"))
        if kind == "shift":
            return ShiftGain(fields.number("gain.sigma_target"))
        matrix = fields.matrix("gain.matrix")
        if matrix is None:
            fields.fail("gain.matrix", "Ganho explícito exige gain.matrix")
        return ExplicitGain(matrix)
    except ConfigurationError as e:
        if e.line is None and e.field:
            fields.fail(e.field, e.message, type(e))
        raise


def _parse_estimator(fields: _Fields) -> EstimatorChoice:
    kind = fields.text("estimator.kind", ("identity", "general"))
    rates = fields.numbers("estimator.rates")
    if kind == "general" and not rates:
        fields.fail("estimator.rates", "O estimador geral exige estimator.rates")
    return EstimatorChoice(kind, rates if kind == "general" else None)


def _parse_initial(fields: _Fields) -> InitialCondition:
    kind = fields.text("initial.kind", ("random", "explicit", "mode"))
    values = fields.numbers("initial.values")
    mode = fields.raw("initial.mode")
    if kind == "explicit" and values is None:
        fields.fail("initial.values", "Condição inicial explícita exige initial.values")
    if kind == "mode":
        if (not isinstance(mode, list) or len(mode) != 2
                or any(isinstance(v, bool) or not isinstance(v, int) or v < 0 for v in mode)):
            fields.fail("initial.mode", f"Esperado um par [i, j] de inteiros, recebido {mode!r}")
    return InitialCondition(
        kind=kind,
        values=values if kind == "explicit" else None,
        mode=tuple(mode) if kind == "mode" else None,
        scale=fields.number("initial.scale"),
        observer=fields.numbers("initial.observer")
    )


def _parse_inputs(fields: _Fields, actuators: int) -> Optional[InputSchedule]:
    kind = fields.text("input.kind", ("zero", "piecewise"))
    if kind == "zero":
        return None
    if actuators == 0:
        fields.fail("input.kind", "Entrada constante por partes exige pelo menos um atuador")
    times = fields.numbers("input.times")
    values = fields.matrix("input.values")
    if times is None or values is None:
        fields.fail("input.times", "Entrada constante por partes exige input.times e input.values")
    if len(values[0]) != actuators:
        fields.fail("input.values", f"Cada linha de input.values deve ter {actuators} valor(es)")
    try:
        return InputSchedule(times, values)
    except ConfigurationError as e:
        fields.fail(e.field or "input.times", e.message)


def parse_scenario(
    flat: Mapping[str, Any],
    lines: Optional[Mapping[str, int]] = None,
    defaults: Optional[Dict[str, Any]] = None
) -> Scenario:
    """
    Combina chaves planas com os padrões e valida tudo.

    Raises:
        ConfigurationError: Chave desconhecida, tipo errado ou violação geométrica
    """
    defaults = load_defaults() if defaults is None else defaults
    lines = lines or {}

    for key in flat:
        if key not in defaults and not INDEXED_KEY.match(key):
            raise ConfigurationError(f"Chave desconhecida: {key}", field=key, line=lines.get(key))

    merged = dict(defaults)
    merged.update(flat)
    fields = _Fields(merged, lines)

    domain = fields.rectangle("domain")
    region = fields.rectangle("region")
    try:
        check_region_inside(region, domain)
    except ConfigurationError as e:
        fields.fail("region.x_min", e.message, type(e))

    sensors = tuple(
        _parse_sensor(fields, f"sensors.{k}", attrs, domain)
        for k, attrs in enumerate(_indexed_entries(fields, "sensors"))
    )
    actuators = tuple(
        _parse_sensor(fields, f"actuators.{k}", attrs, domain)
        for k, attrs in enumerate(_indexed_entries(fields, "actuators"))
    )

    horizon = fields.number("analysis.horizon")
    if not horizon > 0.0:
        fields.fail("analysis.horizon", f"Horizonte deve ser positivo: {horizon}", NonPositiveHorizon)

    t_final = fields.positive("time.t_final")
    dt = fields.positive("time.dt")
    if dt > t_final:
        fields.fail("time.dt", f"dt={dt} maior que t_final={t_final}")

    sigma_min = fields.number("slow.sigma_min")
    if sigma_min < 0.0:
        fields.fail("slow.sigma_min", f"σ_min deve ser ≥ 0: {sigma_min}")

    resolution = fields.integer("scan.resolution", minimum=2)
    output_dir = fields.text("output.dir")

    return Scenario(
        domain=domain,
        region=region,
        shift=fields.number("system.shift"),
        truncation=(fields.integer("truncation.n1"), fields.integer("truncation.n2")),
        sigma_min=sigma_min,
        slow_groups=fields.integer("slow.groups", allow_none=True),
        horizon=horizon,
        rank_tol=fields.positive("analysis.rank_tol"),
        group_tol=fields.positive("analysis.group_tol"),
        sensors=sensors,
        actuators=actuators,
        gain=_parse_gain(fields),
        allow_undetectable=fields.boolean("gain.allow_undetectable"),
        estimator=_parse_estimator(fields),
        initial=_parse_initial(fields),
        inputs=_parse_inputs(fields, len(actuators)),
        t_final=t_final,
        dt=dt,
        scan_resolution=resolution,
        scan_workers=fields.integer("scan.workers", minimum=1, allow_none=True),
        output_dir=output_dir,
        seed=fields.integer("seed")
    )


# ==================== ECO ====================

def _profile_to_flat(profile: Profile) -> Dict[str, Any]:
    if isinstance(profile, SymmetricTriangle):
        return {"profile": "triangle", "profile_center": list(profile.center)}
    if isinstance(profile, Tabulated):
        return {"profile": "tabulated", "profile_values": profile.array.tolist()}
    return {"profile": "uniform"}


def sensor_to_flat(sensor: SensorSpec) -> Dict[str, Any]:
    """Campos planos de um sensor (sem o prefixo `sensors.<k>.`)."""
    if isinstance(sensor, (InteriorPoint, BoundaryPoint)):
        return {"kind": sensor.kind, "x": sensor.x, "y": sensor.y}
    if isinstance(sensor, InteriorZone):
        x_min, x_max, y_min, y_max = sensor.support.as_tuple()
        return {"kind": "zone", "x_min": x_min, "x_max": x_max, "y_min": y_min, "y_max": y_max,
                **_profile_to_flat(sensor.profile)}
    if isinstance(sensor, BoundaryZone):
        return {"kind": "boundary_zone", "edge": sensor.edge, "start": sensor.start, "end": sensor.end,
                **_profile_to_flat(sensor.profile)}
    return {"kind": "filament", "points": [list(p) for p in sensor.points], **_profile_to_flat(sensor.profile)}


def scenario_to_flat(scenario: Scenario, defaults: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """
    Eco completo do cenário em chaves planas.

    Reanalisar o resultado com parse_scenario devolve um Scenario igual.
    """
    flat = dict(load_defaults() if defaults is None else defaults)

    for prefix, rect in (("domain", scenario.domain), ("region", scenario.region)):
        for name, value in zip(("x_min", "x_max", "y_min", "y_max"), rect.as_tuple()):
            flat[f"{prefix}.{name}"] = value

    gain = scenario.gain
    flat.update({
        "system.shift": scenario.shift,
        "truncation.n1": scenario.truncation[0],
        "truncation.n2": scenario.truncation[1],
        "slow.sigma_min": scenario.sigma_min,
        "slow.groups": scenario.slow_groups,
        "analysis.horizon": scenario.horizon,
        "analysis.rank_tol": scenario.rank_tol,
        "analysis.group_tol": scenario.group_tol,
        "gain.kind": gain.kind,
        "gain.allow_undetectable": scenario.allow_undetectable,
        "estimator.kind": scenario.estimator.kind,
        "estimator.rates": list(scenario.estimator.rates) if scenario.estimator.rates else None,
        "initial.kind": scenario.initial.kind,
        "initial.values": list(scenario.initial.values) if scenario.initial.values is not None else None,
        "initial.mode": list(scenario.initial.mode) if scenario.initial.mode is not None else None,
        "initial.scale": scenario.initial.scale,
        "initial.observer": list(scenario.initial.observer) if scenario.initial.observer is not None else None,
        "time.t_final": scenario.t_final,
        "time.dt": scenario.dt,
        "scan.resolution": scenario.scan_resolution,
        "scan.workers": scenario.scan_workers,
        "output.dir": scenario.output_dir,
        "seed": scenario.seed,
    })

    if isinstance(gain, RiccatiGain):
        flat["gain.rho"] = gain.rho
    elif isinstance(gain, ShiftGain):
        flat["gain.sigma_target"] = gain.sigma_target
    else:
        flat["gain.matrix"] = [list(row) for row in gain.matrix]

    if scenario.inputs is None:
        flat["input.kind"] = "zero"
    else:
        flat["input.kind"] = "piecewise"
        flat["input.times"] = list(scenario.inputs.times)
        flat["input.values"] = [list(row) for row in scenario.inputs.values]

    for collection, items in (("sensors", scenario.sensors), ("actuators", scenario.actuators)):
        for index, sensor in enumerate(items):
            for name, value in sensor_to_flat(sensor).items():
                flat[f"{collection}.{index}.{name}"] = value

    return flat


def apply_overrides(
    scenario: Scenario,
    *,
    out: Optional[str] = None,
    resolution: Optional[int] = None,
    seed: Optional[int] = None,
    workers: Optional[int] = None
) -> Scenario:
    """Aplica as opções da linha de comando sobre o cenário."""
    changes: Dict[str, Any] = {}
    if out is not None:
        changes["output_dir"] = str(out)
    if resolution is not None:
        if resolution < 2:
            raise ConfigurationError(f"Resolução deve ser ≥ 2: {resolution}", field="--resolution")
        changes["scan_resolution"] = resolution
    if seed is not None:
        if seed < 0:
            raise ConfigurationError(f"Semente deve ser ≥ 0: {seed}", field="--seed")
        changes["seed"] = seed
    if workers is not None:
        if workers < 1:
            raise ConfigurationError(f"Workers deve ser ≥ 1: {workers}", field="--workers")
        changes["scan_workers"] = workers
    return replace(scenario, **changes) if changes else scenario


# ==================== CONDIÇÕES INICIAIS ====================

def initial_coefficients(initial: InitialCondition, mode_set: ModeSet, seed: int) -> np.ndarray:
    """
    Coeficientes iniciais do estado na base dada.

    Raises:
        ConfigurationError: Se os valores não casarem com a base
    """
    n = mode_set.n_modes
    if initial.kind == "random":
        return initial.scale * np.random.default_rng(seed).standard_normal(n)

    if initial.kind == "explicit":
        if len(initial.values) != n:
            raise ConfigurationError(
                f"initial.values tem {len(initial.values)} entradas, a base tem {n} modos",
                field="initial.values"
            )
        return initial.scale * np.asarray(initial.values, dtype=float)

    coefficients = np.zeros(n)
    coefficients[mode_set.index(Mode(*initial.mode))] = initial.scale
    return coefficients


def initial_observer(initial: InitialCondition, k: int) -> Optional[np.ndarray]:
    """Estado inicial do observador (None = zeros)."""
    if initial.observer is None:
        return None
    if len(initial.observer) != k:
        raise ConfigurationError(
            f"initial.observer tem {len(initial.observer)} entradas, o observador tem {k}",
            field="initial.observer"
        )
    return np.asarray(initial.observer, dtype=float)
