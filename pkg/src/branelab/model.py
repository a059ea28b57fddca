"""Coordinate models R^a x T^b and deterministic sample plans."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.stats import qmc

LINE = "line"
CIRCLE = "circle"

# circle coordinates all have period 1; angles enter fields as 2*pi*k*theta
PERIOD = 1.0


@dataclass(frozen=True)
class ManifoldModel:
    """An explicit product of line and circle factors with named coordinates.

    coords is a tuple of (name, kind) pairs, kind in {"line", "circle"}.
    Coordinate order is significant: forms and vectors are stored
    componentwise against this order.
    """

    coords: tuple[tuple[str, str], ...]

    def __post_init__(self):
        names = [n for n, _ in self.coords]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate coordinate names: {names}")
        for n, kind in self.coords:
            if kind not in (LINE, CIRCLE):
                raise ValueError(f"bad coordinate kind {kind!r} for {n!r}")
            if not n.isidentifier():
                raise ValueError(f"bad coordinate name {n!r}")

    @property
    def dim(self) -> int:
        return len(self.coords)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.coords)

    def kind(self, i: int) -> str:
        return self.coords[i][1]

    def is_circle(self, i: int) -> bool:
        return self.coords[i][1] == CIRCLE

    @property
    def circle_indices(self) -> tuple[int, ...]:
        return tuple(i for i, (_, k) in enumerate(self.coords) if k == CIRCLE)

    @property
    def line_indices(self) -> tuple[int, ...]:
        return tuple(i for i, (_, k) in enumerate(self.coords) if k == LINE)

    def index(self, name: str) -> int:
        for i, (n, _) in enumerate(self.coords):
            if n == name:
                return i
        raise KeyError(f"no coordinate {name!r} in {self.names}")

    def wrap(self, point: np.ndarray) -> np.ndarray:
        """Reduce circle coordinates mod 1; line coordinates untouched."""
        out = np.array(point, dtype=float)
        for i in self.circle_indices:
            out[..., i] = out[..., i] % PERIOD
        return out


def model_from_names(spec: Iterable[tuple[str, str]]) -> ManifoldModel:
    return ManifoldModel(tuple((n, k) for n, k in spec))


def product_model(a: ManifoldModel, b: ManifoldModel) -> ManifoldModel:
    """Concatenate coordinates; colliding names in b get a prime suffix."""
    taken = set(n for n, _ in a.coords)
    renamed = []
    for n, k in b.coords:
        fresh = n
        while fresh in taken:
            fresh += "_p"
        taken.add(fresh)
        renamed.append((fresh, k))
    return ManifoldModel(a.coords + tuple(renamed))


def extend_with_circle(a: ManifoldModel, name: str = "q") -> ManifoldModel:
    return ManifoldModel(a.coords + ((name, CIRCLE),))


def extend_with_line(a: ManifoldModel, name: str) -> ManifoldModel:
    return ManifoldModel(a.coords + ((name, LINE),))


@dataclass(frozen=True)
class SamplePlan:
    """Low-discrepancy evaluation points for SAMPLED-mode checks.

    Halton sequence, scrambled with a fixed seed, so reports are
    deterministic for a given (count, seed, box).
    """

    count: int = 256
    seed: int = 0
    box: tuple[float, float] = (-1.0, 1.0)

    def points(self, model: ManifoldModel) -> np.ndarray:
        sampler = qmc.Halton(d=model.dim, scramble=True, seed=self.seed)
        u = sampler.random(self.count)
        pts = np.empty_like(u)
        lo, hi = self.box
        for i in range(model.dim):
            if model.is_circle(i):
                pts[:, i] = u[:, i] * PERIOD
            else:
                pts[:, i] = lo + (hi - lo) * u[:, i]
        return pts


@dataclass(frozen=True)
class FlowOptions:
    """Fixed-step RK4 controls for the q-parametrized flows."""

    step: float = 1.0 / 1024.0
    # halved-step endpoint comparison on this many points, for the error stat
    error_probe: int = 8


@dataclass(frozen=True)
class Tolerances:
    """Shared numeric thresholds.

    exact_zero: max |coefficient| for a term-algebra field to count as zero.
    sampled: pointwise residual threshold for SAMPLED-mode verdicts.
    subspace: principal-angle threshold for kernel / span comparisons.
    condition_limit: Gram condition number above which a form is treated
    as degenerate at a point (raises, never a silent pass).
    """

    exact_zero: float = 1e-10
    sampled: float = 1e-8
    subspace: float = 1e-8
    condition_limit: float = 1e8
    svd_rank_rel: float = 1e-8


DEFAULT_TOL = Tolerances()
DEFAULT_PLAN = SamplePlan()
DEFAULT_FLOW = FlowOptions()
