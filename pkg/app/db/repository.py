import sqlite3
from contextlib import closing
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional


def to_iso(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def now_iso() -> str:
    return to_iso(datetime.now(timezone.utc))


class RunRepository:
    """Training-run history: one row per run, one row per finished epoch."""

    def __init__(self, db_path: str) -> None:
        self.db_path = db_path
        Path(db_path).parent.mkdir(parents=True, exist_ok=True)

    def connect(self) -> sqlite3.Connection:
        conn = sqlite3.connect(self.db_path, timeout=30, check_same_thread=False)
        conn.row_factory = sqlite3.Row
        conn.execute("PRAGMA foreign_keys = ON;")
        conn.execute("PRAGMA journal_mode = WAL;")
        return conn

    def init_schema(self) -> None:
        with closing(self.connect()) as conn, conn:
            conn.executescript(
                """
                CREATE TABLE IF NOT EXISTS runs (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    kind TEXT NOT NULL CHECK(kind IN ('arg', 'frame')),
                    seed INTEGER NOT NULL,
                    config_json TEXT NOT NULL,
                    started_at TEXT NOT NULL,
                    ended_at TEXT,
                    best_metric REAL,
                    checkpoint_path TEXT,
                    status TEXT NOT NULL CHECK(status IN ('running', 'completed', 'failed'))
                );

                CREATE TABLE IF NOT EXISTS epochs (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    run_id INTEGER NOT NULL,
                    epoch INTEGER NOT NULL CHECK(epoch >= 0),
                    train_loss REAL NOT NULL,
                    dev_metric REAL,
                    created_at TEXT NOT NULL,
                    FOREIGN KEY(run_id) REFERENCES runs(id)
                );

                CREATE INDEX IF NOT EXISTS idx_epochs_run ON epochs(run_id, epoch);
                """
            )

    def start_run(self, kind: str, seed: int, config_json: str) -> int:
        with closing(self.connect()) as conn, conn:
            cur = conn.execute(
                """
                INSERT INTO runs (kind, seed, config_json, started_at, status)
                VALUES (?, ?, ?, ?, 'running')
                """,
                (kind, seed, config_json, now_iso()),
            )
            return int(cur.lastrowid)

    def record_epoch(self, run_id: int, epoch: int, train_loss: float, dev_metric: Optional[float]) -> None:
        with closing(self.connect()) as conn, conn:
            conn.execute(
                """
                INSERT INTO epochs (run_id, epoch, train_loss, dev_metric, created_at)
                VALUES (?, ?, ?, ?, ?)
                """,
                (run_id, epoch, float(train_loss), None if dev_metric is None else float(dev_metric), now_iso()),
            )

    def finish_run(
        self, run_id: int, best_metric: Optional[float], checkpoint_path: Optional[str], status: str = "completed"
    ) -> None:
        with closing(self.connect()) as conn, conn:
            conn.execute(
                "UPDATE runs SET ended_at = ?, best_metric = ?, checkpoint_path = ?, status = ? WHERE id = ?",
                (now_iso(), best_metric, checkpoint_path, status, run_id),
            )

    def get_run(self, run_id: int) -> Optional[Dict[str, Any]]:
        with closing(self.connect()) as conn:
            row = conn.execute("SELECT * FROM runs WHERE id = ?", (run_id,)).fetchone()
        return _run_dict(row) if row is not None else None

    def list_runs(self, limit: int = 20) -> List[Dict[str, Any]]:
        with closing(self.connect()) as conn:
            rows = conn.execute("SELECT * FROM runs ORDER BY id DESC LIMIT ?", (limit,)).fetchall()
        return [_run_dict(row) for row in rows]

    def run_epochs(self, run_id: int) -> List[Dict[str, Any]]:
        with closing(self.connect()) as conn:
            rows = conn.execute(
                "SELECT epoch, train_loss, dev_metric, created_at FROM epochs WHERE run_id = ? ORDER BY epoch",
                (run_id,),
            ).fetchall()
        return [
            {
                "epoch": int(row["epoch"]),
                "train_loss": float(row["train_loss"]),
                "dev_metric": float(row["dev_metric"]) if row["dev_metric"] is not None else None,
                "created_at": str(row["created_at"]),
            }
            for row in rows
        ]


def _run_dict(row: sqlite3.Row) -> Dict[str, Any]:
    return {
        "run_id": int(row["id"]),
        "kind": str(row["kind"]),
        "seed": int(row["seed"]),
        "started_at": str(row["started_at"]),
        "ended_at": str(row["ended_at"] or ""),
        "best_metric": float(row["best_metric"]) if row["best_metric"] is not None else None,
        "checkpoint_path": str(row["checkpoint_path"] or ""),
        "status": str(row["status"]),
    }
