"""
Arquivo de execuções em SQLite.
Registra opcionalmente cada execução do CLI (comando, resumo da configuração e relatório).
"""

import hashlib
import json
import os
from typing import Any, Dict, List, Optional

import aiosqlite
import structlog

logger = structlog.get_logger()


def scenario_digest(config: Dict[str, Any]) -> str:
    """SHA-256 do eco canônico da configuração."""
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def archive_url_from_env() -> Optional[str]:
    """Caminho do arquivo a partir de RUNS_DB (None desativa o arquivamento)."""
    return os.getenv("RUNS_DB") or None


class RunArchive:
    """Classe principal para o arquivo de execuções."""

    def __init__(self, db_url: str = "runs.db"):
        self.db_url = db_url
        self.conn = None

    async def connect(self):
        """Estabelece conexão com o banco de dados."""
        try:
            self.conn = await aiosqlite.connect(self.db_url)
            self.conn.row_factory = aiosqlite.Row
            await logger.ainfo("Conectado ao SQLite", database=self.db_url)
            await self.create_tables()
        except Exception as e:
            await logger.aerror("Erro ao conectar ao banco de dados", error=str(e))
            raise

    async def close(self):
        """Fecha a conexão com o banco de dados."""
        if self.conn:
            await self.conn.close()
            self.conn = None
            await logger.ainfo("Conexão com banco de dados fechada")

    async def create_tables(self):
        """Cria as tabelas necessárias."""
        schema = """
        CREATE TABLE IF NOT EXISTS runs (
            id INTEGER PRIMARY KEY AUTOINCREMENT,
            command TEXT NOT NULL,
            scenario_digest TEXT NOT NULL,
            exit_code INTEGER NOT NULL,
            report TEXT NOT NULL,
            created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP
        );

        CREATE INDEX IF NOT EXISTS idx_runs_command ON runs(command);
        CREATE INDEX IF NOT EXISTS idx_runs_digest ON runs(scenario_digest);
        """

        await self.conn.executescript(schema)
        await self.conn.commit()
        await logger.ainfo("Tabelas criadas/verificadas com sucesso")

    async def save_run(self, command: str, report: Dict[str, Any], exit_code: int) -> int:
        """
        Registra uma execução.

        Args:
            command: Nome do subcomando
            report: Relatório completo (inclui o eco da configuração)
            exit_code: Código de saída

        Returns:
            ID da execução
        """
        try:
            cursor = await self.conn.execute(
                """INSERT INTO runs (command, scenario_digest, exit_code, report)
                   VALUES (?, ?, ?, ?)""",
                (
                    command,
                    scenario_digest(report.get("config", {})),
                    exit_code,
                    json.dumps(report, default=str)
                )
            )
            await self.conn.commit()
            await logger.ainfo("Execução arquivada", command=command, run_id=cursor.lastrowid)
            return cursor.lastrowid
        except Exception as e:
            await logger.aerror("Erro ao arquivar execução", command=command, error=str(e))
            raise

    async def get_runs(self, command: Optional[str] = None, limit: int = 50) -> List[Dict]:
        """Retorna as execuções mais recentes, opcionalmente filtradas por comando."""
        query = "SELECT id, command, scenario_digest, exit_code, created_at FROM runs"
        params: List[Any] = []

        if command:
            query += " WHERE command = ?"
            params.append(command)

        query += " ORDER BY id DESC LIMIT ?"
        params.append(limit)

        async with self.conn.execute(query, params) as cursor:
            rows = await cursor.fetchall()
            return [dict(row) for row in rows]

    async def get_run(self, run_id: int) -> Optional[Dict]:
        """Retorna uma execução pelo ID, com o relatório decodificado."""
        async with self.conn.execute("SELECT * FROM runs WHERE id = ?", (run_id,)) as cursor:
            row = await cursor.fetchone()
            if not row:
                return None
            run = dict(row)
            run["report"] = json.loads(run["report"])
            return run

    async def count_runs(self, command: Optional[str] = None) -> int:
        """Conta as execuções arquivadas."""
        if command:
            query, params = "SELECT COUNT(*) FROM runs WHERE command = ?", (command,)
        else:
            query, params = "SELECT COUNT(*) FROM runs", ()

        async with self.conn.execute(query, params) as cursor:
            row = await cursor.fetchone()
            return int(row[0])
