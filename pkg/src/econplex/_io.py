"""Atomic, hash-stamped output files."""
from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path


def atomic_write(path, text: str) -> Path:
    """Write ``text`` to a temp file next to ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_csv(path, body: str, config_sha256: str) -> Path:
    """CSV with a leading ``# config_sha256=...`` comment line."""
    return atomic_write(path, f"# config_sha256={config_sha256}\n{body}")


def write_json(path, payload: dict, config_sha256: str) -> Path:
    payload = {"config_sha256": config_sha256, **payload}
    return atomic_write(path, json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n")


def write_text(path, body: str, config_sha256: str) -> Path:
    return atomic_write(path, f"config_sha256={config_sha256}\n{body}")


def read_config_hash(path) -> str | None:
    """Recover the hash stamped into an output file, if any."""
    path = Path(path)
    first = path.read_text(encoding="utf-8").splitlines()[:1]
    if path.suffix == ".json":
        return json.loads(path.read_text(encoding="utf-8")).get("config_sha256")
    if first:
        line = first[0].lstrip("# ")
        if line.startswith("config_sha256="):
            return line.split("=", 1)[1]
    return None
