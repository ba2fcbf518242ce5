"""Probability vectors over integer distances, with entropy and total variation."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidParameters, SupportMismatch

NORM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class DistanceDistribution:
    """Masses on the contiguous distance range ``[support_min, support_max]``."""

    support_min: int
    support_max: int
    mass: np.ndarray

    def __post_init__(self):
        mass = np.array(self.mass, dtype=float)
        if mass.ndim != 1 or len(mass) != self.support_max - self.support_min + 1:
            raise InvalidParameters("mass length must match the support")
        if np.any(mass < 0) or not np.all(np.isfinite(mass)):
            raise InvalidParameters("masses must be finite and nonnegative")
        if abs(mass.sum() - 1.0) > NORM_TOL * max(1, len(mass)):
            raise InvalidParameters(f"masses sum to {float(mass.sum())!r}, not 1")
        mass.setflags(write=False)
        object.__setattr__(self, "mass", mass)

    @classmethod
    def from_weights(cls, support_min: int, weights) -> "DistanceDistribution":
        w = np.asarray(weights, dtype=float)
        total = w.sum()
        if not total > 0 or not np.isfinite(total):
            raise InvalidParameters("weights must have a positive finite sum")
        return cls(support_min, support_min + len(w) - 1, w / total)

    @classmethod
    def uniform(cls, ell_min: int, ell_max: int) -> "DistanceDistribution":
        return cls.from_weights(ell_min, np.ones(ell_max - ell_min + 1))

    @classmethod
    def point_mass(cls, ell: int) -> "DistanceDistribution":
        return cls(ell, ell, np.ones(1))

    @property
    def ells(self) -> np.ndarray:
        return np.arange(self.support_min, self.support_max + 1)

    def __len__(self):
        return len(self.mass)

    def __getitem__(self, ell: int) -> float:
        if self.support_min <= ell <= self.support_max:
            return float(self.mass[ell - self.support_min])
        return 0.0

    def to_dict(self) -> dict[int, float]:
        return {int(l): float(m) for l, m in zip(self.ells, self.mass)}

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["ell", "mass"])
        for l, m in zip(self.ells, self.mass):
            w.writerow([int(l), repr(float(m))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, path) -> "DistanceDistribution":
        rows = [r for r in csv.DictReader(_data_lines(Path(path).read_text()))]
        ells = [int(r["ell"]) for r in rows]
        if ells != list(range(ells[0], ells[0] + len(ells))):
            raise InvalidParameters("distribution CSV must list a contiguous, increasing support")
        return cls(ells[0], ells[-1], [float(r["mass"]) for r in rows])


def _data_lines(text: str) -> list[str]:
    return [ln for ln in text.splitlines() if ln and not ln.startswith("#")]


def entropy(d) -> float:
    """Shannon entropy in nats, with ``0 log 0 = 0``.

    Accepts a :class:`DistanceDistribution` or any probability vector.
    """
    p = d.mass if isinstance(d, DistanceDistribution) else np.asarray(d, dtype=float)
    nz = p[p > 0]
    return float(-np.sum(nz * np.log(nz))) + 0.0


def total_variation(p, q) -> float:
    if isinstance(p, DistanceDistribution) and isinstance(q, DistanceDistribution):
        if (p.support_min, p.support_max) != (q.support_min, q.support_max):
            raise SupportMismatch(
                f"supports differ: [{p.support_min},{p.support_max}] vs [{q.support_min},{q.support_max}]")
        a, b = p.mass, q.mass
    else:
        a = getattr(p, "mass", np.asarray(p, dtype=float))
        b = getattr(q, "mass", np.asarray(q, dtype=float))
        if a.shape != b.shape:
            raise SupportMismatch(f"shapes differ: {a.shape} vs {b.shape}")
    return float(min(1.0, 0.5 * np.abs(a - b).sum()))


def nats_to_bits(h: float) -> float:
    return h / math.log(2)
