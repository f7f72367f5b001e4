from __future__ import annotations
import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from .. import __version__
from ..errors import InputError
from ..models import RunManifest

logger = logging.getLogger(__name__)

DEFAULT_MANIFEST = "run_manifest.json"


def manifest_path(explicit: str | None, out: str | None) -> Path:
    """--manifest wins, then ``<out>.manifest.json``, then the working directory."""
    if explicit:
        return Path(explicit)
    if out and out != "-":
        return Path(f"{out}.manifest.json")
    return Path(DEFAULT_MANIFEST)


def build_manifest(command: str, argv: list[str], config: dict[str, Any], seed: int | None) -> RunManifest:
    return RunManifest(
        command=command,
        argv=list(argv),
        config=json.loads(json.dumps(config, default=str)),
        seed=seed,
        version=__version__,
        timestamp=datetime.now(timezone.utc).isoformat(),
    )


def write_manifest(manifest: RunManifest, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(manifest.model_dump_json(indent=2), encoding="utf-8")
    logger.info("run manifest written to %s", path)
    return path


def load_manifest(path: str | Path) -> RunManifest:
    path = Path(path)
    try:
        return RunManifest.model_validate_json(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise InputError(f"manifest not found: {path}") from None
    except ValueError as e:
        raise InputError(f"{path}: not a run manifest ({e})") from None
