"""
Comandos de análise de sensores.
`check` testa se os sensores são estratégicos (bases global e regional) e
`scan` varre a posição de um sensor sobre uma grade do domínio.
"""

from functools import partial
from typing import Any, Dict, List, Optional

import structlog

from analysis.sensing import InteriorPoint, SensorSpec
from analysis.strategic import (
    build_scan_setup,
    evaluate_scan_node,
    minimum_sensor_count,
    observability_margin,
    placement_predicate,
    scan_nodes
)
from utils.pool import default_workers, run_bounded
from utils.reports import write_scan_csv
from utils.scenario import Scenario
from .base import CommandGroup, Sections, command
from .pipeline import (
    ScenarioModel,
    build_model,
    global_basis,
    regional_basis,
    sensors_section,
    strategic_report
)

logger = structlog.get_logger()


def _predicates(scenario: Scenario, model: ScenarioModel) -> List[Optional[Dict[str, Any]]]:
    """Predicado em forma fechada por sensor, restrito aos modos lentos de Ω."""
    slow_modes = [model.mode_set.modes[k] for k in model.slow]
    entries = []
    for sensor in model.output.sensors:
        verdict = placement_predicate(scenario.domain, sensor, scenario.truncation, slow_modes)
        if verdict is None:
            entries.append(None)
            continue
        entries.append({
            "bad": verdict.is_bad,
            "modes": list(verdict.labels),
            "reasons": [
                {"mode": v.mode.label, "axis": v.axis, "reason": v.reason}
                for v in verdict.vanishing_modes
            ],
        })
    return entries


def _scan_template(scenario: Scenario) -> SensorSpec:
    if scenario.sensors:
        return scenario.sensors[0]
    return InteriorPoint(*scenario.domain.center)


class AnalysisCommands(CommandGroup):
    """Teste estratégico e varredura de posicionamento."""

    @command("check")
    async def check(self, scenario: Scenario) -> Sections:
        """
        Testa os sensores do cenário nas bases global (Ω) e regional (ω).

        Returns:
            Seções `strategic`, `minimum_sensors`, `margins` e `predicates`
        """
        models = {
            "global": build_model(scenario, global_basis(scenario)),
            "regional": build_model(scenario, regional_basis(scenario)),
        }

        strategic = {}
        minimum = {}
        margins = {}
        for name, model in models.items():
            report = strategic_report(scenario, model)
            strategic[name] = report.to_dict()
            minimum[name] = minimum_sensor_count(
                model.mode_set,
                scenario.slow_groups,
                sigma_min=scenario.sigma_min,
                group_tol=scenario.group_tol
            )
            margins[name] = observability_margin(
                model.output.sensors, model.mode_set, model.slow, scenario.horizon
            )

        await logger.ainfo(
            "Teste estratégico concluído",
            global_verdict=strategic["global"]["verdict"],
            regional_verdict=strategic["regional"]["verdict"]
        )
        return {
            "status": "ok",
            "sensors": sensors_section(scenario.sensors),
            "strategic": strategic,
            "minimum_sensors": minimum,
            "margins": {"horizon": scenario.horizon, **margins},
            "predicates": _predicates(scenario, models["global"]),
        }

    @command("scan")
    async def scan(self, scenario: Scenario) -> Sections:
        """
        Varre o modelo de sensor (primeiro sensor ou ponto no centro) sobre uma grade res × res.

        Escreve `scan.csv`; a ordem das linhas não depende do número de workers.
        """
        template = _scan_template(scenario)
        setup = build_scan_setup(
            scenario.domain,
            scenario.region,
            scenario.truncation,
            scenario.shift,
            template,
            horizon=scenario.horizon,
            groups=scenario.slow_groups,
            sigma_min=scenario.sigma_min,
            group_tol=scenario.group_tol
        )
        nodes = scan_nodes(scenario.domain, scenario.scan_resolution)
        workers = scenario.scan_workers or default_workers()

        await logger.ainfo("Iniciando varredura", nodes=len(nodes), workers=workers)
        rows = await run_bounded(partial(evaluate_scan_node, setup), nodes, workers)

        path = write_scan_csv(self.output_dir(scenario) / "scan.csv", rows)
        flagged = [r for r in rows if r.predicate_flag]

        return {
            "status": "ok",
            "scan": {
                "template": sensors_section([template])[0],
                "resolution": scenario.scan_resolution,
                "rows": len(rows),
                "flagged": len(flagged),
                "margin_global": {
                    "min": min(r.margin_global for r in rows),
                    "max": max(r.margin_global for r in rows),
                },
                "margin_regional": {
                    "min": min(r.margin_regional for r in rows),
                    "max": max(r.margin_regional for r in rows),
                },
                "flagged_margin_global_max": max((r.margin_global for r in flagged), default=None),
            },
            "files": [path.name],
        }


async def setup(app):
    """Registra o grupo no toolkit."""
    await app.add_group(AnalysisCommands(app))
