"""Per-record energy time series and its CSV serialization."""
from __future__ import annotations

from dataclasses import dataclass, field
import csv
import io

import numpy as np

from .variational import WellLabel

__all__ = ["EnergySeries", "CSV_COLUMNS", "format_float"]

CSV_COLUMNS = ("t", "E", "J", "I", "L2", "Lp_g", "damping_integral", "label")

# columns kept in memory only; they feed the diagnostics
_EXTRA = ("grad_sq", "a", "b", "uv", "kinetic", "dt")


def format_float(x: float) -> str:
    """17 significant digits: lossless for IEEE doubles."""
    return format(float(x), ".17g")


@dataclass
class EnergySeries:
    t: list = field(default_factory=list)
    E: list = field(default_factory=list)
    J: list = field(default_factory=list)
    I: list = field(default_factory=list)
    L2: list = field(default_factory=list)
    Lp_g: list = field(default_factory=list)
    damping_integral: list = field(default_factory=list)
    label: list = field(default_factory=list)
    grad_sq: list = field(default_factory=list)
    a: list = field(default_factory=list)
    b: list = field(default_factory=list)
    uv: list = field(default_factory=list)
    kinetic: list = field(default_factory=list)
    dt: list = field(default_factory=list)

    def append(self, **row) -> None:
        if self.t and not row["t"] > self.t[-1]:
            raise ValueError(f"time must increase: {row['t']} after {self.t[-1]}")
        for name in CSV_COLUMNS + _EXTRA:
            getattr(self, name).append(row.get(name, np.nan))

    def __len__(self) -> int:
        return len(self.t)

    def column(self, name: str) -> np.ndarray:
        if name == "label":
            return np.array([str(lab.value) for lab in self.label])
        return np.asarray(getattr(self, name), dtype=float)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for k in range(len(self)):
            row = [format_float(getattr(self, c)[k]) for c in CSV_COLUMNS[:-1]]
            writer.writerow(row + [self.label[k].value])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, text: str) -> "EnergySeries":
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header {header}")
        out = cls()
        for row in reader:
            vals = {c: float(x) for c, x in zip(CSV_COLUMNS[:-1], row[:-1])}
            out.append(label=WellLabel(row[-1]), **vals)
        return out
