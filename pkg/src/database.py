"""SQLite ledger of analysis runs."""

import sqlite3
from typing import Iterable, Optional


class Database:
    """SQLite database recording analyze runs and their multipliers."""

    def __init__(self, db_path: str):
        self.db_path = db_path
        self.conn = sqlite3.connect(db_path)
        self.conn.row_factory = sqlite3.Row
        self._create_tables()

    def _create_tables(self):
        """Create database tables if they don't exist."""
        self.conn.executescript("""
            CREATE TABLE IF NOT EXISTS runs (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                command TEXT,
                network_path TEXT,
                inputs_digest TEXT,
                seed INTEGER,
                rtol REAL,
                atol REAL,
                started_at TEXT DEFAULT CURRENT_TIMESTAMP,
                completed_at TEXT,
                status TEXT DEFAULT 'running',
                verdict TEXT,
                period REAL,
                max_residual REAL,
                error TEXT
            );

            CREATE TABLE IF NOT EXISTS multipliers (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                run_id INTEGER REFERENCES runs(id),
                source TEXT,
                position INTEGER,
                re REAL,
                im REAL,
                modulus REAL
            );

            CREATE INDEX IF NOT EXISTS idx_multipliers_run ON multipliers(run_id);
        """)
        self.conn.commit()

    def start_run(
        self,
        command: str,
        network_path: str,
        inputs_digest: str,
        seed: int,
        rtol: float,
        atol: float,
    ) -> int:
        """Record the start of a run and return its id."""
        cursor = self.conn.execute(
            """INSERT INTO runs (command, network_path, inputs_digest, seed, rtol, atol)
            VALUES (?, ?, ?, ?, ?, ?)""",
            (command, network_path, inputs_digest, seed, rtol, atol),
        )
        self.conn.commit()
        return cursor.lastrowid

    def complete_run(
        self,
        run_id: int,
        status: str,
        verdict: Optional[str] = None,
        period: Optional[float] = None,
        max_residual: Optional[float] = None,
        error: Optional[str] = None,
    ):
        self.conn.execute(
            """UPDATE runs SET completed_at = CURRENT_TIMESTAMP, status = ?, verdict = ?,
            period = ?, max_residual = ?, error = ? WHERE id = ?""",
            (status, verdict, period, max_residual, error, run_id),
        )
        self.conn.commit()

    def add_multipliers(self, run_id: int, source: str, values: Iterable[complex]):
        rows = [
            (run_id, source, i, complex(z).real, complex(z).imag, abs(complex(z)))
            for i, z in enumerate(values)
        ]
        self.conn.executemany(
            """INSERT INTO multipliers (run_id, source, position, re, im, modulus)
            VALUES (?, ?, ?, ?, ?, ?)""",
            rows,
        )
        self.conn.commit()

    def get_run(self, run_id: int) -> Optional[dict]:
        row = self.conn.execute("SELECT * FROM runs WHERE id = ?", (run_id,)).fetchone()
        return dict(row) if row else None

    def get_multipliers(self, run_id: int, source: Optional[str] = None) -> list[complex]:
        """Stored multipliers of a run in their recorded order."""
        if source is None:
            rows = self.conn.execute(
                "SELECT re, im FROM multipliers WHERE run_id = ? ORDER BY source, position", (run_id,)
            ).fetchall()
        else:
            rows = self.conn.execute(
                "SELECT re, im FROM multipliers WHERE run_id = ? AND source = ? ORDER BY position",
                (run_id, source),
            ).fetchall()
        return [complex(r["re"], r["im"]) for r in rows]

    def get_latest_run(self) -> Optional[dict]:
        row = self.conn.execute("SELECT * FROM runs ORDER BY id DESC LIMIT 1").fetchone()
        return dict(row) if row else None

    def close(self):
        """Close database connection."""
        self.conn.close()
