"""Line-delimited JSON I/O helpers used by every file-backed stage."""

from __future__ import annotations

import glob as globlib
import hashlib
import json
import os
from collections.abc import Iterable, Iterator
from pathlib import Path


def expand_glob(pattern: str | Path) -> list[Path]:
    """Resolve a glob pattern to a sorted list of existing file paths."""
    return sorted(Path(p) for p in globlib.glob(str(pattern)) if os.path.isfile(p))


def iter_lines(paths: Iterable[str | Path]) -> Iterator[tuple[Path, int, str]]:
    """Yield (path, line_number, line) for every non-empty line, in file order."""
    for path in paths:
        path = Path(path)
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if line:
                    yield path, lineno, line


def read_jsonl(path: str | Path) -> Iterator[dict]:
    """Yield each line of a JSONL file as a dict."""
    for _, _, line in iter_lines([path]):
        yield json.loads(line)


def write_lines(path: str | Path, lines: Iterable[str]) -> int:
    """Write lines to a file atomically (tmp + rename). Returns line count."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    count = 0
    with open(tmp, "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(line)
            fh.write("\n")
            count += 1
    os.replace(tmp, path)
    return count


def write_json(path: str | Path, obj) -> None:
    """Write a JSON document atomically with sorted keys."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, ensure_ascii=False, sort_keys=True, indent=2)
        fh.write("\n")
    os.replace(tmp, path)


def read_json(path: str | Path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
