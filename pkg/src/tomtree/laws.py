"""Distributions on (0, inf) used both for individual lifetimes and for the
jump sizes of the compound-Poisson part of a spectrally positive Levy process.

Every law exposes a sampler, the mean, the Laplace transform
L(lam) = E[exp(-lam * J)] and an exponential tilt: tilting by b > 0 maps the
law with density p(dx) to e^{-bx} p(dx) / Z, which is what the conjugation
Psi -> Psi(. + b) does to the jump measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["Exponential", "Fixed", "Table", "parse_law"]


@dataclass(frozen=True)
class Exponential:
    """Exponential law with rate theta (mean 1/theta)."""

    theta: float

    def __post_init__(self):
        if not self.theta > 0:
            raise ValueError("Exponential rate must be positive")

    def sample(self, rng: np.random.Generator, size=None):
        return rng.exponential(1.0 / self.theta, size=size)

    def mean(self) -> float:
        return 1.0 / self.theta

    def laplace(self, lam: float) -> float:
        return self.theta / (self.theta + lam)

    def tilt(self, b: float):
        # e^{-bx} theta e^{-theta x} dx has mass theta/(theta+b)
        return Exponential(self.theta + b), self.theta / (self.theta + b)

    def cli_text(self) -> str:
        return f"exp:{self.theta!r}"


@dataclass(frozen=True)
class Fixed:
    """Point mass at x > 0 (deterministic lifetimes / jump sizes)."""

    x: float

    def __post_init__(self):
        if not self.x > 0:
            raise ValueError("Fixed value must be positive")

    def sample(self, rng: np.random.Generator, size=None):
        if size is None:
            return self.x
        return np.full(size, self.x)

    def mean(self) -> float:
        return self.x

    def laplace(self, lam: float) -> float:
        return math.exp(-lam * self.x)

    def tilt(self, b: float):
        return Fixed(self.x), math.exp(-b * self.x)

    def cli_text(self) -> str:
        return f"fixed:{self.x!r}"


@dataclass(frozen=True)
class Table:
    """Finite discrete law given by atoms xs with weights ps (normalized)."""

    xs: tuple
    ps: tuple

    def __post_init__(self):
        if len(self.xs) != len(self.ps) or not self.xs:
            raise ValueError("Table needs matching nonempty atom/weight lists")
        if any(x <= 0 for x in self.xs) or any(p <= 0 for p in self.ps):
            raise ValueError("Table atoms and weights must be positive")
        total = float(sum(self.ps))
        if abs(total - 1.0) > 1e-12:
            object.__setattr__(self, "ps", tuple(p / total for p in self.ps))

    def sample(self, rng: np.random.Generator, size=None):
        return rng.choice(np.asarray(self.xs), size=size, p=np.asarray(self.ps))

    def mean(self) -> float:
        return float(sum(x * p for x, p in zip(self.xs, self.ps)))

    def laplace(self, lam: float) -> float:
        return float(sum(p * math.exp(-lam * x) for x, p in zip(self.xs, self.ps)))

    def tilt(self, b: float):
        weights = [p * math.exp(-b * x) for x, p in zip(self.xs, self.ps)]
        mass = float(sum(weights))
        return Table(self.xs, tuple(w / mass for w in weights)), mass

    def cli_text(self) -> str:
        atoms = ",".join(f"{x!r}@{p!r}" for x, p in zip(self.xs, self.ps))
        return f"table:{atoms}"


def parse_law(text: str):
    """Parse a law string: ``exp:theta``, ``fixed:x`` or ``table:x1@p1,x2@p2``."""
    kind, _, arg = text.partition(":")
    kind = kind.strip().lower()
    if kind in ("exp", "exponential"):
        return Exponential(float(arg))
    if kind == "fixed":
        return Fixed(float(arg))
    if kind == "table":
        xs, ps = [], []
        for item in arg.split(","):
            x, _, p = item.partition("@")
            xs.append(float(x))
            ps.append(float(p))
        return Table(tuple(xs), tuple(ps))
    raise ValueError(f"unknown law string {text!r}")
