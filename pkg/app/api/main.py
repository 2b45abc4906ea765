import logging
from typing import Any, Dict, List, Optional

from fastapi import FastAPI, HTTPException, Query
from pydantic import BaseModel

from app.core.config import get_settings
from app.core.errors import CheckpointError, DataValidationError
from app.core.logging import setup_logging
from app.db.repository import RunRepository
from app.training.predict import EnsembleParser


setup_logging()
settings = get_settings()
logger = logging.getLogger("SegRNN.api")

repo: Optional[RunRepository] = None
if settings.db_path:
    repo = RunRepository(settings.db_path)
    repo.init_schema()

_parser: Dict[str, EnsembleParser] = {}

app = FastAPI(
    title="SegRNN Parser API",
    version="1.0.0",
    description="Frame-semantic parsing with ensembled segmental RNNs, plus training history.",
)


class ParseRequest(BaseModel):
    tokens: List[str]
    pos: List[str]
    target: List[int]
    lu: str
    frame: Optional[str] = None


def get_parser() -> EnsembleParser:
    if "default" not in _parser:
        if not settings.arg_checkpoints:
            raise HTTPException(status_code=503, detail="No argument checkpoints configured.")
        try:
            _parser["default"] = EnsembleParser.from_checkpoints(settings.arg_checkpoints, settings.frame_checkpoints)
        except CheckpointError as exc:
            logger.error("Could not load checkpoints: %s", exc)
            raise HTTPException(status_code=503, detail=f"Checkpoints unavailable: {exc}") from exc
    return _parser["default"]


def get_repo() -> RunRepository:
    if repo is None:
        raise HTTPException(status_code=503, detail="Run history is disabled (SEGRNN_DB_PATH is empty).")
    return repo


@app.get("/")
def root() -> Dict[str, Any]:
    return {
        "service": "segrnn-api",
        "status": "ok",
        "message": "Use /health, /parse or /docs",
    }


@app.get("/health")
def health() -> Dict[str, Any]:
    return {
        "status": "ok",
        "service": "segrnn-api",
        "arg_members": len(settings.arg_checkpoints),
        "frame_members": len(settings.frame_checkpoints),
    }


@app.get("/runs")
def list_runs(limit: int = Query(default=20, ge=1, le=200)) -> Dict[str, Any]:
    return {"limit": limit, "items": get_repo().list_runs(limit)}


@app.get("/runs/{run_id}/epochs")
def run_epochs(run_id: int) -> Dict[str, Any]:
    repository = get_repo()
    run = repository.get_run(run_id)
    if run is None:
        raise HTTPException(status_code=404, detail="Run not found.")
    return {"run": run, "items": repository.run_epochs(run_id)}


@app.post("/parse")
def parse(request: ParseRequest) -> Dict[str, Any]:
    if not request.tokens or len(request.tokens) != len(request.pos):
        raise HTTPException(status_code=400, detail="tokens must be nonempty and as long as pos.")
    if len(request.target) != 2 or not 0 <= request.target[0] <= request.target[1] < len(request.tokens):
        raise HTTPException(status_code=400, detail="target must be [start, end] inside the sentence.")

    parser = get_parser()
    if request.frame is None and not parser.frame_models:
        raise HTTPException(status_code=503, detail="No frame checkpoints configured; pass a frame.")
    try:
        return parser.parse(request.tokens, request.pos, (request.target[0], request.target[1]), request.lu, request.frame)
    except DataValidationError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
