import os
import re
from pathlib import Path
from typing import Dict, Union

from loguru import logger

from .colors import Colors

ANSI_ESCAPE = re.compile(r"\033\[[0-9;]*m")

PathLike = Union[str, Path]


class OutputError(OSError):
    """Raised when an output file cannot be written."""

    def __init__(self, path: PathLike, reason: str):
        super().__init__(f"{Colors.ERROR}cannot write {path}: {reason}{Colors.RESET}")
        self.path = str(path)


def strip_ansi(text: str) -> str:
    return ANSI_ESCAPE.sub("", text)


def resolve_path(base: PathLike, relative: PathLike) -> Path:
    """`relative` against the directory holding `base`, unless already absolute."""
    path = Path(os.path.expanduser(str(relative)))
    return path if path.is_absolute() else Path(base).parent / path


def write_outputs(directory: PathLike, files: Dict[str, str]) -> Dict[str, Path]:
    """Write each name -> text pair under `directory`, creating it if needed."""
    target = Path(directory)
    written = {}
    try:
        target.mkdir(parents=True, exist_ok=True)
        for name, text in sorted(files.items()):
            path = target / name
            path.write_text(text, encoding="utf-8")
            written[name] = path
            logger.info(f"[OUTPUT] wrote {path}")
    except OSError as e:
        raise OutputError(target, e.strerror or str(e)) from None
    return written


def key_values(pairs: Dict[str, object]) -> str:
    """Machine-readable `key: value` lines in insertion order."""
    return "".join(f"{key}: {value}\n" for key, value in pairs.items())
