"""Grids of scalar observables, their CSV/JSON forms and the parallel runner."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__

WORKERS_ENV = "MUXCTL_WORKERS"


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
        if n < 1:
            raise ValueError(f"{WORKERS_ENV} must be >= 1")
        return n
    return os.cpu_count() or 1


def parallel_map(fn: Callable, items: Sequence, workers: int | None = None) -> list:
    """Map ``fn`` over ``items``; results come back in item order.

    ``fn`` must be a picklable top-level callable when ``workers`` > 1.
    """
    workers = default_workers() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


def config_hash(obj: Any) -> str:
    """sha256 of a canonical JSON rendering (or of raw bytes/str)."""
    if isinstance(obj, bytes):
        data = obj
    elif isinstance(obj, str):
        data = obj.encode()
    else:
        data = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str).encode()
    return hashlib.sha256(data).hexdigest()


def provenance(config: Any = None, seed: int | None = None, **extra) -> dict:
    meta = {"tool": "muxctl", "version": __version__, "config_sha256": config_hash(config), "seed": seed}
    meta.update(extra)
    return meta


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


@dataclass
class SweepResult:
    """Observables on a rectangular 1D or 2D grid.

    ``values[name]`` has shape ``tuple(len(axis) for axis in axes)``. NaN marks
    points that were skipped (for example ambiguous state labels).
    """

    axis_names: list[str]
    axes: list[np.ndarray]
    values: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.axis_names) != len(self.axes) or len(self.axes) not in (1, 2):
            raise ValueError("need one or two named axes")
        self.axes = [np.asarray(a, dtype=float) for a in self.axes]
        shape = tuple(len(a) for a in self.axes)
        for k, v in self.values.items():
            v = np.asarray(v, dtype=float)
            if v.shape != shape:
                raise ValueError(f"observable {k!r} has shape {v.shape}, expected {shape}")
            self.values[k] = v

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(a) for a in self.axes)

    def rows(self):
        names = list(self.values)
        for idx in np.ndindex(*self.shape):
            coords = [self.axes[d][i] for d, i in enumerate(idx)]
            yield coords + [self.values[n][idx] for n in names]

    def to_csv(self) -> str:
        buf = io.StringIO()
        for k in sorted(self.meta):
            buf.write(f"# {k}: {json.dumps(self.meta[k], sort_keys=True, default=str)}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.axis_names + list(self.values))
        for row in self.rows():
            w.writerow([_fmt(x) for x in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, n_axes: int | None = None) -> "SweepResult":
        meta = {}
        body = []
        for line in text.splitlines():
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition(":")
                try:
                    meta[key.strip()] = json.loads(val.strip())
                except json.JSONDecodeError:
                    meta[key.strip()] = val.strip()
            elif line.strip():
                body.append(line)
        reader = csv.reader(body)
        header = next(reader)
        data = np.array([[float(x) for x in r] for r in reader], dtype=float).reshape(-1, len(header))
        if n_axes is None:
            n_axes = int(meta.get("n_axes", 1))
        names = header[:n_axes]
        axes = []
        for d in range(n_axes):
            col = data[:, d]
            _, first = np.unique(col, return_index=True)
            axes.append(col[np.sort(first)])
        shape = tuple(len(a) for a in axes)
        values = {h: data[:, n_axes + i].reshape(shape) for i, h in enumerate(header[n_axes:])}
        return cls(names, axes, values, meta)

    def to_json(self) -> dict:
        def clean(a):
            return [None if not np.isfinite(x) else float(x) for x in np.ravel(a)]

        return {
            "_meta": self.meta,
            "axes": {n: [float(x) for x in a] for n, a in zip(self.axis_names, self.axes)},
            "axis_order": self.axis_names,
            "shape": list(self.shape),
            "values": {k: clean(v) for k, v in self.values.items()},
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SweepResult":
        names = obj["axis_order"]
        axes = [np.asarray(obj["axes"][n]) for n in names]
        shape = tuple(obj["shape"])
        values = {
            k: np.array([np.nan if x is None else x for x in v], dtype=float).reshape(shape)
            for k, v in obj["values"].items()
        }
        return cls(names, axes, values, obj.get("_meta", {}))
