"""
Montagem e escrita de relatórios.
Relatório JSON determinístico por execução e arquivos CSV de trajetória, normas e varredura.
"""

import csv
import json
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np
import structlog

logger = structlog.get_logger()

TOOL_NAME = "neumann-observer"
__version__ = "1.0.0"


def _clean(value: Any) -> Any:
    """Converte tipos numpy e valores não finitos para JSON estrito."""
    if isinstance(value, Mapping):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


def build_run_report(command: str, seed: Optional[int], config: Dict[str, Any], **sections) -> Dict[str, Any]:
    """
    Monta o relatório de uma execução.

    Args:
        command: Nome do subcomando
        seed: Semente usada
        config: Eco completo da configuração
        **sections: Seções específicas do comando

    Returns:
        Dicionário pronto para serialização
    """
    report: Dict[str, Any] = {
        "tool": TOOL_NAME,
        "version": __version__,
        "command": command,
        "seed": seed,
    }
    report.update(sections)
    report["config"] = config
    return _clean(report)


def error_report(command: str, seed: Optional[int], config: Dict[str, Any], error: Dict[str, Any]) -> Dict[str, Any]:
    """Relatório de uma execução que falhou."""
    return build_run_report(command, seed, config, status="error", errors=[error])


def render_report(report: Dict[str, Any]) -> str:
    """Serializa o relatório (chaves na ordem de inserção, indentação 2)."""
    return json.dumps(_clean(report), indent=2, ensure_ascii=False)


def write_report(report: Dict[str, Any], out_dir: Path, command: str) -> Path:
    """Escreve `<out>/<command>_report.json`."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{command}_report.json"
    path.write_text(render_report(report) + "\n", encoding="utf-8")
    logger.info("Relatório escrito", path=str(path))
    return path


def _format(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_rows(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format(v) for v in row])
    logger.info("CSV escrito", path=str(path))
    return path


def trajectory_header(mode_labels: Sequence[str], outputs: int) -> List[str]:
    return (
        ["t"]
        + [f"a_{label}" for label in mode_labels]
        + [f"zhat_{label}" for label in mode_labels]
        + [f"y_{k}" for k in range(outputs)]
    )


def write_trajectory_csv(path: Path, record) -> Path:
    """Colunas: t, coeficientes do estado, coeficientes da estimativa, saídas."""
    header = trajectory_header(record.mode_labels, record.outputs.shape[1])
    rows = (
        [t, *state, *estimate, *output]
        for t, state, estimate, output in zip(
            record.times, record.state_coeffs, record.estimate_coeffs, record.outputs
        )
    )
    return _write_rows(path, header, rows)


NORM_COLUMNS = ("err_L2_omega", "err_H1_omega", "err_L2_Omega", "err_H1_Omega")


def write_norm_csv(path: Path, times: np.ndarray, series: Mapping[str, np.ndarray]) -> Path:
    """Colunas: t e as quatro séries de norma do erro (regional e global, L² e H¹)."""
    columns = [series[name] for name in NORM_COLUMNS]
    rows = ([t, *values] for t, *values in zip(times, *columns))
    return _write_rows(path, ["t", *NORM_COLUMNS], rows)


def write_scan_csv(path: Path, rows) -> Path:
    """Colunas: x, y, margin_global, margin_regional, predicate_flag."""
    header = ["x", "y", "margin_global", "margin_regional", "predicate_flag"]
    return _write_rows(
        path,
        header,
        ([r.x, r.y, r.margin_global, r.margin_regional, r.predicate_flag] for r in rows)
    )
