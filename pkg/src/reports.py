"""Deterministic JSON and CSV writers for analysis outputs."""

import cmath
import csv
import json
import math
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from src.dynamics import PeriodicOrbit
from src.network import Network


def _plain(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value


def _encode(value: Any, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    close = " " * (indent * level)
    if value is None:
        return "null"
    if value is True:
        return "true"
    if value is False:
        return "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        # JSON has no NaN or infinity
        return format(value, ".17g") if math.isfinite(value) else "null"
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, list):
        if not value:
            return "[]"
        items = ",\n".join(pad + _encode(v, indent, level + 1) for v in value)
        return "[\n" + items + "\n" + close + "]"
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = ",\n".join(
            pad + json.dumps(k, ensure_ascii=False) + ": " + _encode(value[k], indent, level + 1)
            for k in sorted(value)
        )
        return "{\n" + items + "\n" + close + "}"
    raise TypeError(f"cannot serialise {type(value).__name__}")


def to_json(value: Any, indent: int = 2) -> str:
    """JSON text with sorted keys and floats at 17 significant digits."""
    return _encode(_plain(value), indent, 0) + "\n"


def write_json(value: Any, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(to_json(value), encoding="utf-8")
    return path


def write_orbit_csv(orbit: PeriodicOrbit, net: Network, path: str | Path, samples: int) -> Path:
    """One period on a uniform grid; one `node<i>_dim<j>` column per state coordinate."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    times = orbit.grid(samples)
    states = np.atleast_2d(orbit(times))
    header = ["t"]
    for node in net.nodes:
        header.extend(f"node{node.id}_dim{k}" for k in range(node.state_dim))
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for t, row in zip(times, states):
            writer.writerow([format(float(t), ".17g"), *(format(float(v), ".17g") for v in row)])
    return path


def orbit_metadata(orbit: PeriodicOrbit) -> dict:
    return {
        "period": orbit.period,
        "closure_residual": orbit.closure_residual,
        "anchor": orbit.anchor,
    }


def write_multipliers_csv(groups: dict[str, Iterable[complex]], path: str | Path) -> Path:
    """Rows of `magnitude,angle,re,im,source`, groups in the order given."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["magnitude", "angle", "re", "im", "source"])
        for source, values in groups.items():
            for z in values:
                z = complex(z)
                numbers = (abs(z), cmath.phase(z), z.real, z.imag)
                writer.writerow([*(format(v, ".17g") for v in numbers), source])
    return path
