"""Recorded trial signals and their CSV representation."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

HEADER = ("t", "fx", "fy", "fz", "tx", "ty", "tz", "theta_x", "theta_y", "depth")
COLUMNS = {name: i for i, name in enumerate(HEADER)}


class TraceFormatError(ValueError):
    """Malformed trace file; ``line`` is 1-based when known."""

    def __init__(self, msg: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


@dataclass
class Trace:
    """Rows of ``t, fx, fy, fz, tx, ty, tz, theta_x, theta_y, depth``.

    Units are s, N, Nm, deg (unsigned tilt), mm.  ``meta`` holds free-form
    string metadata (strategy, seed, phase, plugin_end).
    """

    data: np.ndarray
    meta: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float).reshape(-1, len(HEADER))
        t = self.data[:, 0]
        if len(t) > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("trace timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.data)

    def __getattr__(self, name):
        if name in COLUMNS:
            return self.data[:, COLUMNS[name]]
        raise AttributeError(name)

    def __eq__(self, other):
        return (isinstance(other, Trace) and self.meta == other.meta
                and np.array_equal(self.data, other.data))

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0]) if len(self) else 0.0

    @property
    def plugin_end(self) -> float | None:
        v = self.meta.get("plugin_end")
        return float(v) if v not in (None, "") else None

    def segment(self, phase: str) -> "Trace":
        """Slice out the ``plugin`` or ``plugout`` part of a combined trace."""
        end = self.plugin_end
        if end is None:
            if self.meta.get("phase") in ("plugin", "plugout") or not len(self):
                return self
            i = int(np.argmax(self.depth)) + 1
            end = float(self.t[i - 1])
        mask = self.t <= end if phase == "plugin" else self.t > end
        meta = dict(self.meta, phase=phase)
        meta.pop("plugin_end", None)
        return Trace(self.data[mask], meta)

    def with_meta(self, **kw) -> "Trace":
        return Trace(self.data.copy(), {**self.meta, **{k: str(v) for k, v in kw.items()}})


class TraceRecorder:
    """Append-only row buffer; cheaper than growing arrays per sample."""

    def __init__(self):
        self.rows: list[tuple] = []

    def add(self, t, wrench, tilt, depth):
        self.rows.append((t, *wrench, tilt[0], tilt[1], depth))

    def build(self, **meta) -> Trace:
        return Trace(np.array(self.rows, dtype=float).reshape(-1, len(HEADER)),
                     {k: str(v) for k, v in meta.items()})


def format_trace(trace: Trace) -> str:
    buf = io.StringIO()
    for key, value in trace.meta.items():
        buf.write(f"# {key}={value}\n")
    buf.write(",".join(HEADER) + "\n")
    for row in trace.data:
        buf.write(",".join(repr(float(v)) for v in row) + "\n")
    return buf.getvalue()


def save_trace(trace: Trace, path) -> None:
    Path(path).write_text(format_trace(trace))


def parse_trace(text: str) -> Trace:
    meta: dict[str, str] = {}
    rows = []
    header_seen = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if line.startswith("#"):
            if header_seen:
                raise TraceFormatError("metadata after header", lineno)
            key, sep, value = line[1:].strip().partition("=")
            if not sep:
                raise TraceFormatError("metadata lines must be '# key=value'", lineno)
            meta[key.strip()] = value.strip()
            continue
        if not header_seen:
            cols = tuple(c.strip() for c in next(csv.reader([line])))
            if cols != HEADER:
                raise TraceFormatError(f"header mismatch: expected {','.join(HEADER)}", lineno)
            header_seen = True
            continue
        fields = line.split(",")
        if len(fields) != len(HEADER):
            raise TraceFormatError(f"expected {len(HEADER)} fields, got {len(fields)}", lineno)
        try:
            rows.append([float(f) for f in fields])
        except ValueError as exc:
            raise TraceFormatError(f"non-numeric field ({exc})", lineno) from None
    if not header_seen:
        raise TraceFormatError("missing header")
    try:
        return Trace(np.array(rows, dtype=float).reshape(-1, len(HEADER)), meta)
    except ValueError as exc:
        raise TraceFormatError(str(exc)) from None


def load_trace(path) -> Trace:
    return parse_trace(Path(path).read_text())
