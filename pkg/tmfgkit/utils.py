"""Shared helpers: .env loading, logging setup and output locations."""

from __future__ import annotations

import hashlib
import logging
import os
from pathlib import Path
from typing import Optional

PACKAGE_DIR = Path(__file__).resolve().parent
ROOT_DIR = PACKAGE_DIR.parent

LOG_FORMAT = "[%(asctime)s] %(levelname)s: %(message)s"
LOG_DATEFMT = "%H:%M:%S"


def load_env_file(*candidates: Path) -> None:
    """Populate os.environ with values from the first existing .env file."""
    for env_path in candidates:
        if not env_path or not env_path.is_file():
            continue
        for raw_line in env_path.read_text(encoding="utf-8").splitlines():
            line = raw_line.strip()
            if not line or line.startswith("#") or "=" not in line:
                continue
            key, value = line.split("=", 1)
            key = key.strip()
            value = value.strip()
            if not key:
                continue
            if value and value[0] == value[-1] and value[0] in {"'", '"'}:
                value = value[1:-1]
            os.environ.setdefault(key, value)
        break


def load_default_env() -> None:
    load_env_file(ROOT_DIR / ".env", Path.cwd() / ".env")


def setup_logging(verbose: bool = False) -> None:
    level_name = os.getenv("TMFG_LOG_LEVEL")
    if verbose:
        level = logging.DEBUG
    elif level_name:
        level = getattr(logging, level_name.upper(), logging.INFO)
    else:
        level = logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, datefmt=LOG_DATEFMT)


def resolve_output_path(path: str) -> Path:
    """Relative outputs land under TMFG_OUTPUT_DIR when it is set."""
    candidate = Path(path).expanduser()
    if candidate.is_absolute():
        return candidate
    base = os.getenv("TMFG_OUTPUT_DIR")
    if base:
        return Path(base).expanduser() / candidate
    return candidate


def default_workers() -> int:
    raw = os.getenv("TMFG_WORKERS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def file_digest(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return "sha256:" + digest.hexdigest()


def text_digest(text: str) -> str:
    return "sha256:" + hashlib.sha256(text.encode("utf-8")).hexdigest()


def is_remote(path: Optional[str]) -> bool:
    return bool(path) and path.lower().startswith(("http://", "https://"))
