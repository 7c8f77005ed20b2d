"""Sampled (time, current, voltage) records and their CSV format."""

from __future__ import annotations

import hashlib
import io
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

CSV_HEADER = "time_s,current_a,voltage_v"


@dataclass(frozen=True)
class Segment:
    """A labeled block of rows starting at ``start``.

    ``soc_start``/``soc_end`` are negative-electrode bulk stoichiometries at the
    block boundaries, used to check continuity when blocks are chained.
    """

    label: str
    start: int
    soc_start: float | None = None
    soc_end: float | None = None


@dataclass(frozen=True, eq=False)
class TimeSeries:
    time_s: np.ndarray
    current_a: np.ndarray
    voltage_v: np.ndarray
    segments: tuple[Segment, ...] = ()
    marks: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        t = np.ascontiguousarray(self.time_s, dtype=float)
        i = np.ascontiguousarray(self.current_a, dtype=float)
        v = np.ascontiguousarray(self.voltage_v, dtype=float)
        if not (t.ndim == i.ndim == v.ndim == 1 and t.size == i.size == v.size):
            raise ValueError("time, current and voltage must be 1-D arrays of equal length")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("time must be strictly increasing")
        segments = tuple(self.segments) or ((Segment("series", 0),) if t.size else ())
        starts = [s.start for s in segments]
        if t.size and (starts[0] != 0 or any(b <= a for a, b in zip(starts, starts[1:])) or starts[-1] >= t.size):
            raise ValueError(f"bad segment starts {starts} for {t.size} rows")
        for arr in (t, i, v):
            arr.setflags(write=False)
        object.__setattr__(self, "time_s", t)
        object.__setattr__(self, "current_a", i)
        object.__setattr__(self, "voltage_v", v)
        object.__setattr__(self, "segments", segments)
        object.__setattr__(self, "marks", tuple((str(label), int(row)) for label, row in self.marks))

    def __len__(self):
        return self.time_s.size

    @property
    def segment_starts(self) -> np.ndarray:
        return np.array([s.start for s in self.segments], dtype=np.int64)

    @property
    def duration_s(self) -> float:
        return float(self.time_s[-1] - self.time_s[0]) if len(self) else 0.0

    @property
    def duration_h(self) -> float:
        return self.duration_s / 3600.0

    def segment_slices(self):
        ends = [s.start for s in self.segments[1:]] + [len(self)]
        return [(seg, slice(seg.start, end)) for seg, end in zip(self.segments, ends)]

    def with_voltage(self, voltage_v) -> "TimeSeries":
        return TimeSeries(self.time_s, self.current_a, voltage_v, self.segments, self.marks)

    # -- IO ----------------------------------------------------------------

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        buf.write(CSV_HEADER + "\n")
        for t, i, v in zip(self.time_s.tolist(), self.current_a.tolist(), self.voltage_v.tolist()):
            buf.write(f"{t:.17g},{i:.17g},{v:.17g}\n")
        return buf.getvalue()

    def checksum(self) -> str:
        return hashlib.sha256(self.to_csv_text().encode()).hexdigest()

    def write(self, path) -> Path:
        """Write ``path`` (CSV) and the segment/phase marks to ``<stem>.segments.json``."""
        path = Path(path)
        path.write_text(self.to_csv_text())
        meta = {"segments": [asdict(s) for s in self.segments], "marks": [list(m) for m in self.marks]}
        segments_path(path).write_text(json.dumps(meta, indent=1) + "\n")
        return path

    @classmethod
    def read(cls, path) -> "TimeSeries":
        path = Path(path)
        with open(path) as fh:
            header = fh.readline().strip()
            if header != CSV_HEADER:
                raise ValueError(f"{path}: expected header {CSV_HEADER!r}, got {header!r}")
            data = np.loadtxt(fh, delimiter=",", ndmin=2) if path.stat().st_size > len(header) + 1 else np.empty((0, 3))
        seg_file = segments_path(path)
        segments, marks = (), ()
        if seg_file.exists():
            meta = json.loads(seg_file.read_text())
            segments = tuple(Segment(**s) for s in meta.get("segments", []))
            marks = tuple((label, row) for label, row in meta.get("marks", []))
        return cls(data[:, 0], data[:, 1], data[:, 2], segments, marks)


def segments_path(csv_path) -> Path:
    csv_path = Path(csv_path)
    return csv_path.with_name(csv_path.stem + ".segments.json")
