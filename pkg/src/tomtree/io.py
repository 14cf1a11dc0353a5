"""Flat-file formats: JSONL trees, CSV contours, CSV paths, key=value configs.

All decimal output uses repr (shortest round-trip form, up to 17 significant
digits) so that save/load is lossless for the values produced here.
"""

from __future__ import annotations

import json
import warnings
from typing import List

from .chrono import ChronoTree, Individual, InvalidTreeError
from .contour import (
    InvalidContourError,
    PLJContour,
    contour_from_sizes,
    contour_sizes,
)
from .levy import SampledPath

__all__ = [
    "load_tree",
    "save_tree",
    "load_contour",
    "save_contour",
    "save_path",
    "load_config",
    "save_config",
]

_TREE_KEYS = ("id", "parent", "birth", "death", "speed")


def save_tree(tree: ChronoTree, path: str) -> None:
    """One individual per line; canonical field order."""
    with open(path, "w") as fh:
        for ind in sorted(tree.individuals.values(), key=lambda i: i.id):
            rec = {
                "id": ind.id,
                "parent": ind.parent,
                "birth": ind.birth,
                "death": ind.death,
                "speed": ind.speed,
            }
            fh.write(json.dumps(rec) + "\n")


def load_tree(path: str) -> ChronoTree:
    """Parse and validate a JSONL tree; errors name the offending line."""
    inds: List[Individual] = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: malformed line: {exc}") from None
            try:
                inds.append(
                    Individual(
                        id=int(rec["id"]),
                        parent=None if rec.get("parent") is None else int(rec["parent"]),
                        birth=float(rec["birth"]),
                        death=float(rec["death"]),
                        speed=float(rec.get("speed", 1.0)),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad record: {exc}") from None
    tree = ChronoTree(inds)
    if tree.violations:
        raise InvalidTreeError(tree.violations)
    return tree


def save_contour(c: PLJContour, path: str) -> None:
    with open(path, "w") as fh:
        fh.write("kind,a,b\n")
        for kind, a, b in contour_sizes(c):
            if kind == "J":
                fh.write(f"J,{a!r},\n")
            else:
                fh.write(f"F,{a!r},{b!r}\n")


def load_contour(path: str) -> PLJContour:
    """Parse a contour CSV; non-canonical but valid input is canonicalized
    with a warning."""
    items = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header.replace(" ", "") != "kind,a,b":
            raise InvalidContourError(f"{path}:1: expected header 'kind,a,b'")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise InvalidContourError(f"{path}:{lineno}: expected 3 columns")
            kind = parts[0].strip().upper()
            if kind == "J":
                size = float(parts[1])
                if size < 0:
                    raise InvalidContourError(f"{path}:{lineno}: negative jump size")
                items.append(("J", size))
            elif kind == "F":
                items.append(("F", float(parts[1]), float(parts[2])))
            else:
                raise InvalidContourError(f"{path}:{lineno}: unknown kind {parts[0]!r}")
    c = contour_from_sizes(items)
    if len(c.prims) != len(items):
        warnings.warn(f"{path}: contour was not canonical; merged on load")
    return c


def save_path(sp: SampledPath, path: str) -> None:
    """Breakpoint rows t,x with header comments for flags."""
    with open(path, "w") as fh:
        fh.write(f"# {sp.kind}\n")
        if sp.step is not None:
            fh.write(f"# step={sp.step!r}\n")
        if sp.killed_at is not None:
            fh.write(f"# killed_at={sp.killed_at!r}\n")
        fh.write("t,x\n")
        for t, v in zip(sp.times, sp.values):
            fh.write(f"{t!r},{v!r}\n")


def save_config(cfg: dict, path: str) -> None:
    with open(path, "w") as fh:
        for k in sorted(cfg):
            fh.write(f"{k}={cfg[k]}\n")


def load_config(path: str) -> dict:
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            k, _, v = line.partition("=")
            out[k.strip()] = v.strip()
    return out
