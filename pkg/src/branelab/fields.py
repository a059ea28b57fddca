"""Trigonometric-polynomial scalar and vector fields on product models.

A field is a finite sum of terms

    coeff * prod_i x_i^p_i * {cos|sin}(2*pi * sum_j k_j x_j)

with integer powers p and integer frequencies k (k nonzero only on circle
coordinates).  Sums, products, partial derivatives, circle averages and
definite antiderivatives stay inside the class, so closedness and kernel
identities can be certified by exact coefficient arithmetic instead of
sampling.

Canonical form: terms are keyed by (powers, freqs, phase), frequencies are
sign-normalized (first nonzero entry positive, a sin flip absorbs the sign),
sin with zero frequency is dropped, and coefficients below PRUNE_EPS are
pruned.  Two fields are equal as functions iff their canonical term dicts
agree up to the pruning threshold.

Powers on circle coordinates are permitted (needed transiently for
antiderivatives in the deformation builder) but flag the field as not
globally defined on the torus factor; see has_circle_powers.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .model import ManifoldModel

COS = 0
SIN = 1

TWO_PI = 2.0 * math.pi

# pruning threshold used during canonicalization
PRUNE_EPS = 1e-12

Key = tuple[tuple[int, ...], tuple[int, ...], int]


def _norm_term(powers, freqs, phase, coeff):
    """Sign-normalize the frequency vector; None if the term is zero."""
    if not any(freqs):
        if phase == SIN:
            return None
        return (powers, freqs, COS), coeff
    first = next(k for k in freqs if k != 0)
    if first < 0:
        freqs = tuple(-k for k in freqs)
        if phase == SIN:
            coeff = -coeff
    return (powers, freqs, phase), coeff


def _canonical(raw: dict[Key, float], prune: float | None = None) -> tuple:
    eps = PRUNE_EPS if prune is None else prune
    acc: dict[Key, float] = {}
    for (powers, freqs, phase), coeff in raw.items():
        normed = _norm_term(powers, freqs, phase, coeff)
        if normed is None:
            continue
        key, c = normed
        acc[key] = acc.get(key, 0.0) + c
    items = tuple(sorted((k, c) for k, c in acc.items() if abs(c) > eps))
    return items


@dataclass(frozen=True)
class ScalarField:
    model: ManifoldModel
    terms: tuple[tuple[Key, float], ...]

    # -- constructors ----------------------------------------------------

    @staticmethod
    def build(model: ManifoldModel, raw: dict[Key, float],
              prune: float | None = None) -> "ScalarField":
        return ScalarField(model, _canonical(raw, prune))

    @staticmethod
    def zero(model: ManifoldModel) -> "ScalarField":
        return ScalarField(model, ())

    @staticmethod
    def constant(model: ManifoldModel, c: float) -> "ScalarField":
        z = (0,) * model.dim
        return ScalarField.build(model, {(z, z, COS): float(c)})

    @staticmethod
    def coordinate(model: ManifoldModel, i: int) -> "ScalarField":
        z = (0,) * model.dim
        p = tuple(1 if j == i else 0 for j in range(model.dim))
        return ScalarField.build(model, {(p, z, COS): 1.0})

    @staticmethod
    def monomial(model: ManifoldModel, powers, coeff: float = 1.0) -> "ScalarField":
        z = (0,) * model.dim
        return ScalarField.build(model, {(tuple(powers), z, COS): float(coeff)})

    @staticmethod
    def _trig(model, freqs, phase, coeff):
        freqs = tuple(int(k) for k in freqs)
        for j, k in enumerate(freqs):
            if k != 0 and not model.is_circle(j):
                raise ValueError(
                    f"frequency on line coordinate {model.names[j]!r}")
        z = (0,) * model.dim
        return ScalarField.build(model, {(z, freqs, phase): float(coeff)})

    @staticmethod
    def cosine(model: ManifoldModel, freqs, coeff: float = 1.0) -> "ScalarField":
        return ScalarField._trig(model, freqs, COS, coeff)

    @staticmethod
    def sine(model: ManifoldModel, freqs, coeff: float = 1.0) -> "ScalarField":
        return ScalarField._trig(model, freqs, SIN, coeff)

    # -- structure -------------------------------------------------------

    @property
    def has_circle_powers(self) -> bool:
        circ = set(self.model.circle_indices)
        return any(p[i] for (p, _, _), _ in self.terms for i in circ)

    def max_coeff(self) -> float:
        return max((abs(c) for _, c in self.terms), default=0.0)

    def is_zero(self, tol: float = 1e-10) -> bool:
        return self.max_coeff() <= tol

    def is_constant(self, tol: float = 1e-10) -> bool:
        return (self - self.constant_part()).is_zero(tol)

    def constant_part(self) -> "ScalarField":
        z = (0,) * self.model.dim
        c = dict(self.terms).get((z, z, COS), 0.0)
        return ScalarField.constant(self.model, c)

    def constant_value(self, tol: float = 1e-10) -> float:
        """The value of a constant field; raises if not constant."""
        if not self.is_constant(tol):
            raise ValueError("field is not constant")
        z = (0,) * self.model.dim
        return dict(self.terms).get((z, z, COS), 0.0)

    # -- algebra ---------------------------------------------------------

    def __add__(self, other):
        other = _coerce(self.model, other)
        raw: dict[Key, float] = dict(self.terms)
        for k, c in other.terms:
            raw[k] = raw.get(k, 0.0) + c
        return ScalarField.build(self.model, raw)

    __radd__ = __add__

    def __neg__(self):
        return ScalarField(self.model, tuple((k, -c) for k, c in self.terms))

    def __sub__(self, other):
        return self + (-_coerce(self.model, other))

    def __rsub__(self, other):
        return _coerce(self.model, other) + (-self)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            if other == 0:
                return ScalarField.zero(self.model)
            return ScalarField.build(
                self.model, {k: c * other for k, c in self.terms})
        return field_mul(self, other)

    __rmul__ = __mul__

    def __str__(self):
        from .grammar import field_to_text
        return field_to_text(self)

    # -- evaluation ------------------------------------------------------

    def eval(self, point) -> float:
        point = np.asarray(point, dtype=float)
        return float(self.eval_batch(point[None, :])[0])

    def eval_batch(self, points: np.ndarray) -> np.ndarray:
        P, K, ph, co = _compiled(self)
        points = np.asarray(points, dtype=float)
        if co.size == 0:
            return np.zeros(points.shape[0])
        mono = np.prod(points[:, None, :] ** P[None, :, :], axis=2)
        arg = TWO_PI * (points @ K.T)
        trig = np.where(ph[None, :] == COS, np.cos(arg), np.sin(arg))
        return (mono * trig) @ co


def _coerce(model: ManifoldModel, x) -> ScalarField:
    if isinstance(x, ScalarField):
        if x.model != model:
            raise ValueError("fields live on different models")
        return x
    if isinstance(x, (int, float)):
        return ScalarField.constant(model, x)
    raise TypeError(f"cannot treat {type(x)} as a scalar field")


@functools.lru_cache(maxsize=8192)
def _compiled(f: ScalarField):
    n, d = len(f.terms), f.model.dim
    P = np.zeros((n, d), dtype=np.int64)
    K = np.zeros((n, d), dtype=np.int64)
    ph = np.zeros(n, dtype=np.int64)
    co = np.zeros(n, dtype=float)
    for t, ((powers, freqs, phase), c) in enumerate(f.terms):
        P[t] = powers
        K[t] = freqs
        ph[t] = phase
        co[t] = c
    P.setflags(write=False)
    K.setflags(write=False)
    return P, K, ph, co


def field_mul(a: ScalarField, b: ScalarField) -> ScalarField:
    """Product, rewritten to canonical form via product-to-sum identities."""
    if a.model != b.model:
        raise ValueError("fields live on different models")
    raw: dict[Key, float] = {}

    def put(powers, freqs, phase, coeff):
        normed = _norm_term(powers, freqs, phase, coeff)
        if normed is None:
            return
        key, c = normed
        raw[key] = raw.get(key, 0.0) + c

    for (p1, k1, f1), c1 in a.terms:
        for (p2, k2, f2), c2 in b.terms:
            p = tuple(x + y for x, y in zip(p1, p2))
            c = c1 * c2
            if not any(k1):
                put(p, k2, f2, c)
                continue
            if not any(k2):
                put(p, k1, f1, c)
                continue
            diff = tuple(x - y for x, y in zip(k1, k2))
            summ = tuple(x + y for x, y in zip(k1, k2))
            if f1 == COS and f2 == COS:
                put(p, diff, COS, 0.5 * c)
                put(p, summ, COS, 0.5 * c)
            elif f1 == SIN and f2 == SIN:
                put(p, diff, COS, 0.5 * c)
                put(p, summ, COS, -0.5 * c)
            elif f1 == SIN and f2 == COS:
                put(p, diff, SIN, 0.5 * c)
                put(p, summ, SIN, 0.5 * c)
            else:  # cos * sin
                put(p, diff, SIN, -0.5 * c)
                put(p, summ, SIN, 0.5 * c)
    return ScalarField.build(a.model, raw)


def partial(a: ScalarField, i: int) -> ScalarField:
    """Exact partial derivative in coordinate i."""
    raw: dict[Key, float] = {}

    def put(key_coeff):
        if key_coeff is None:
            return
        key, c = key_coeff
        raw[key] = raw.get(key, 0.0) + c

    for (p, k, phase), c in a.terms:
        if p[i] > 0:
            p2 = tuple(x - 1 if j == i else x for j, x in enumerate(p))
            put(_norm_term(p2, k, phase, c * p[i]))
        if k[i] != 0:
            if phase == COS:
                put(_norm_term(p, k, SIN, -TWO_PI * k[i] * c))
            else:
                put(_norm_term(p, k, COS, TWO_PI * k[i] * c))
    return ScalarField.build(a.model, raw)


def circle_average(a: ScalarField, i: int) -> ScalarField:
    """Exact average over the circle coordinate i."""
    if not a.model.is_circle(i):
        raise ValueError(f"{a.model.names[i]!r} is not a circle coordinate")
    raw: dict[Key, float] = {}
    for (p, k, phase), c in a.terms:
        if p[i] != 0:
            raise ValueError(
                "cannot average a field with a power on the circle coordinate")
        if k[i] != 0:
            continue
        raw[(p, k, phase)] = raw.get((p, k, phase), 0.0) + c
    return ScalarField.build(a.model, raw)


def q_antiderivative(a: ScalarField, i: int) -> ScalarField:
    """Definite integral from 0 to x_i along circle coordinate i.

    Terms constant in x_i pick up a power of x_i, so the result may carry
    circle powers (has_circle_powers) and is then only well defined on the
    universal cover of that factor.
    """
    if not a.model.is_circle(i):
        raise ValueError(f"{a.model.names[i]!r} is not a circle coordinate")
    raw: dict[Key, float] = {}

    def put(key_coeff):
        if key_coeff is None:
            return
        key, c = key_coeff
        raw[key] = raw.get(key, 0.0) + c

    for (p, k, phase), c in a.terms:
        if p[i] != 0:
            raise ValueError("field already carries a power on this coordinate")
        if k[i] == 0:
            p2 = tuple(x + 1 if j == i else x for j, x in enumerate(p))
            put(((p2, k, phase), c))
            continue
        k0 = tuple(0 if j == i else x for j, x in enumerate(k))
        scale = c / (TWO_PI * k[i])
        if phase == COS:
            put(_norm_term(p, k, SIN, scale))
            put(_norm_term(p, k0, SIN, -scale))
        else:
            put(_norm_term(p, k, COS, -scale))
            put(_norm_term(p, k0, COS, scale))
    return ScalarField.build(a.model, raw)


def substitute(a: ScalarField, i: int, value: float) -> ScalarField:
    """Freeze coordinate i at a constant; the result no longer depends on it."""
    raw: dict[Key, float] = {}

    def put(key_coeff):
        if key_coeff is None:
            return
        key, c = key_coeff
        raw[key] = raw.get(key, 0.0) + c

    for (p, k, phase), c in a.terms:
        factor = float(value) ** p[i] if p[i] else 1.0
        p2 = tuple(0 if j == i else x for j, x in enumerate(p))
        if k[i] == 0:
            put(((p2, k, phase), c * factor))
            continue
        k2 = tuple(0 if j == i else x for j, x in enumerate(k))
        phi = TWO_PI * k[i] * value
        cphi, sphi = math.cos(phi), math.sin(phi)
        if phase == COS:
            put(_norm_term(p2, k2, COS, c * factor * cphi))
            put(_norm_term(p2, k2, SIN, -c * factor * sphi))
        else:
            put(_norm_term(p2, k2, SIN, c * factor * cphi))
            put(_norm_term(p2, k2, COS, c * factor * sphi))
    return ScalarField.build(a.model, raw)


def reindex(a: ScalarField, target: ManifoldModel, mapping) -> ScalarField:
    """Transport a field to another model; mapping[i] = target index of
    source coordinate i.  Kinds must match."""
    raw: dict[Key, float] = {}
    for (p, k, phase), c in a.terms:
        p2 = [0] * target.dim
        k2 = [0] * target.dim
        for i, j in enumerate(mapping):
            if a.model.kind(i) != target.kind(j):
                raise ValueError("coordinate kinds differ under reindex")
            p2[j] = p[i]
            k2[j] = k[i]
        key = (tuple(p2), tuple(k2), phase)
        raw[key] = raw.get(key, 0.0) + c
    return ScalarField.build(target, raw)


@dataclass(frozen=True)
class VectorField:
    model: ManifoldModel
    components: tuple[ScalarField, ...]

    def __post_init__(self):
        if len(self.components) != self.model.dim:
            raise ValueError("component count does not match model dimension")
        for c in self.components:
            if c.model != self.model:
                raise ValueError("component on a different model")

    @staticmethod
    def from_components(model, comps) -> "VectorField":
        out = []
        for c in comps:
            if isinstance(c, (int, float)):
                c = ScalarField.constant(model, c)
            out.append(c)
        return VectorField(model, tuple(out))

    @staticmethod
    def basis(model: ManifoldModel, i: int) -> "VectorField":
        return VectorField.from_components(
            model, [1.0 if j == i else 0.0 for j in range(model.dim)])

    @staticmethod
    def from_constant(model: ManifoldModel, vec) -> "VectorField":
        return VectorField.from_components(model, [float(v) for v in vec])

    def is_constant(self, tol: float = 1e-10) -> bool:
        return all(c.is_constant(tol) for c in self.components)

    def constant_vector(self) -> np.ndarray:
        return np.array([c.constant_value() for c in self.components])

    def eval(self, point) -> np.ndarray:
        return np.array([c.eval(point) for c in self.components])

    def eval_batch(self, points) -> np.ndarray:
        return np.stack([c.eval_batch(points) for c in self.components], axis=1)

    def __add__(self, other):
        return VectorField(self.model, tuple(
            a + b for a, b in zip(self.components, other.components)))

    def __sub__(self, other):
        return VectorField(self.model, tuple(
            a - b for a, b in zip(self.components, other.components)))

    def __neg__(self):
        return VectorField(self.model, tuple(-a for a in self.components))

    def __mul__(self, g):
        return VectorField(self.model, tuple(c * g for c in self.components))

    __rmul__ = __mul__

    def __str__(self):
        from .grammar import vector_to_text
        return vector_to_text(self)


def bracket(x: VectorField, y: VectorField) -> VectorField:
    """Lie bracket [x, y], componentwise x(y^i) - y(x^i)."""
    comps = []
    for i in range(x.model.dim):
        acc = ScalarField.zero(x.model)
        for j in range(x.model.dim):
            acc = acc + x.components[j] * partial(y.components[i], j)
            acc = acc - y.components[j] * partial(x.components[i], j)
        comps.append(acc)
    return VectorField(x.model, tuple(comps))


def directional(x: VectorField, f: ScalarField) -> ScalarField:
    """Derivative of f along x."""
    acc = ScalarField.zero(x.model)
    for j in range(x.model.dim):
        acc = acc + x.components[j] * partial(f, j)
    return acc
