"""Differential forms, endomorphism fields and distributions on product models.

Forms are stored componentwise against strictly increasing coordinate index
tuples, with trig-polynomial coefficient fields, so the exterior calculus
(wedge, d, contraction, Lie derivative) is exact coefficient arithmetic.
Numeric Gram evaluation at sample points backs the SAMPLED-mode checks.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .fields import ScalarField, VectorField, partial
from .model import DEFAULT_TOL, ManifoldModel


class DegenerateFormError(Exception):
    """A form required to be nondegenerate failed the condition-number gate."""


def _sort_sign(idx):
    """Sort an index tuple, returning (sign, sorted) or (None, ()) on repeats."""
    idx = list(idx)
    sign = 1
    for a in range(1, len(idx)):
        b = a
        while b > 0 and idx[b - 1] > idx[b]:
            idx[b - 1], idx[b] = idx[b], idx[b - 1]
            sign = -sign
            b -= 1
    for a in range(len(idx) - 1):
        if idx[a] == idx[a + 1]:
            return None, ()
    return sign, tuple(idx)


@dataclass(frozen=True)
class DifferentialForm:
    model: ManifoldModel
    degree: int
    coeffs: tuple[tuple[tuple[int, ...], ScalarField], ...]

    @staticmethod
    def build(model: ManifoldModel, degree: int, raw) -> "DifferentialForm":
        """raw maps index tuples (any order, repeats allowed) to fields."""
        acc: dict[tuple[int, ...], ScalarField] = {}
        for idx, f in raw.items():
            if isinstance(f, (int, float)):
                f = ScalarField.constant(model, f)
            if len(idx) != degree:
                raise ValueError(f"index {idx} has wrong length for degree {degree}")
            sign, key = _sort_sign(idx)
            if sign is None:
                continue
            g = f if sign > 0 else -f
            acc[key] = acc[key] + g if key in acc else g
        items = tuple(sorted(
            (k, f) for k, f in acc.items() if f.terms))
        return DifferentialForm(model, degree, items)

    @staticmethod
    def zero(model: ManifoldModel, degree: int) -> "DifferentialForm":
        return DifferentialForm(model, degree, ())

    @staticmethod
    def from_scalar(f: ScalarField) -> "DifferentialForm":
        return DifferentialForm.build(f.model, 0, {(): f})

    @staticmethod
    def basis(model: ManifoldModel, idx) -> "DifferentialForm":
        idx = tuple(idx)
        return DifferentialForm.build(
            model, len(idx), {idx: ScalarField.constant(model, 1.0)})

    def coeff(self, idx) -> ScalarField:
        sign, key = _sort_sign(tuple(idx))
        if sign is None:
            return ScalarField.zero(self.model)
        for k, f in self.coeffs:
            if k == key:
                return f if sign > 0 else -f
        return ScalarField.zero(self.model)

    def is_zero(self, tol: float = 1e-10) -> bool:
        return all(f.is_zero(tol) for _, f in self.coeffs)

    def max_coeff(self) -> float:
        return max((f.max_coeff() for _, f in self.coeffs), default=0.0)

    def is_constant(self, tol: float = 1e-10) -> bool:
        return all(f.is_constant(tol) for _, f in self.coeffs)

    def __add__(self, other):
        if self.degree != other.degree or self.model != other.model:
            raise ValueError("degree or model mismatch")
        raw = {k: f for k, f in self.coeffs}
        for k, f in other.coeffs:
            raw[k] = raw[k] + f if k in raw else f
        return DifferentialForm.build(self.model, self.degree, raw)

    def __neg__(self):
        return DifferentialForm(self.model, self.degree,
                                tuple((k, -f) for k, f in self.coeffs))

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, g):
        return DifferentialForm.build(
            self.model, self.degree, {k: f * g for k, f in self.coeffs})

    __rmul__ = __mul__

    def __str__(self):
        from .grammar import form_to_text
        return form_to_text(self)

    # -- numeric evaluation ---------------------------------------------

    def gram_at(self, point) -> np.ndarray:
        """Antisymmetric matrix of a 2-form at a point."""
        return self.gram_batch(np.asarray(point, float)[None, :])[0]

    def gram_batch(self, points) -> np.ndarray:
        if self.degree != 2:
            raise ValueError("gram matrices are for 2-forms")
        points = np.asarray(points, float)
        n, d = points.shape[0], self.model.dim
        G = np.zeros((n, d, d))
        for (i, j), f in self.coeffs:
            v = f.eval_batch(points)
            G[:, i, j] += v
            G[:, j, i] -= v
        return G

    def constant_gram(self) -> np.ndarray | None:
        """The Gram matrix if every coefficient is constant, else None."""
        if self.degree != 2 or not self.is_constant():
            return None
        d = self.model.dim
        G = np.zeros((d, d))
        for (i, j), f in self.coeffs:
            v = f.constant_value()
            G[i, j] += v
            G[j, i] -= v
        return G

    def eval_on(self, vectors, point) -> float:
        """Evaluate a k-form on k constant tangent vectors at a point."""
        vecs = [np.asarray(v, float) for v in vectors]
        if len(vecs) != self.degree:
            raise ValueError("wrong number of vectors")
        total = 0.0
        for idx, f in self.coeffs:
            sub = np.array([[v[i] for v in vecs] for i in idx])
            total += f.eval(point) * np.linalg.det(sub)
        return total


def gram_fields(B: DifferentialForm) -> list[list[ScalarField]]:
    """Full antisymmetric matrix of coefficient fields of a 2-form."""
    d = B.model.dim
    Z = ScalarField.zero(B.model)
    G = [[Z for _ in range(d)] for _ in range(d)]
    for (i, j), f in B.coeffs:
        G[i][j] = G[i][j] + f
        G[j][i] = G[j][i] - f
    return G


def wedge(a: DifferentialForm, b: DifferentialForm) -> DifferentialForm:
    if a.model != b.model:
        raise ValueError("model mismatch")
    raw: dict[tuple[int, ...], ScalarField] = {}
    for I, f in a.coeffs:
        for J, g in b.coeffs:
            sign, key = _sort_sign(I + J)
            if sign is None:
                continue
            h = (f * g) * sign
            raw[key] = raw[key] + h if key in raw else h
    return DifferentialForm.build(a.model, a.degree + b.degree, raw)


def ext_d(a: DifferentialForm) -> DifferentialForm:
    return _d_along(a, range(a.model.dim))


def horizontal_d(a: DifferentialForm, active) -> DifferentialForm:
    """Exterior derivative using only the listed coordinate directions."""
    return _d_along(a, active)


def _d_along(a: DifferentialForm, directions) -> DifferentialForm:
    raw: dict[tuple[int, ...], ScalarField] = {}
    for I, f in a.coeffs:
        for j in directions:
            if j in I:
                continue
            df = partial(f, j)
            if not df.terms:
                continue
            sign, key = _sort_sign((j,) + I)
            g = df if sign > 0 else -df
            raw[key] = raw[key] + g if key in raw else g
    return DifferentialForm.build(a.model, a.degree + 1, raw)


def d_scalar(f: ScalarField) -> DifferentialForm:
    return ext_d(DifferentialForm.from_scalar(f))


def interior(x: VectorField, a: DifferentialForm) -> DifferentialForm:
    """Contraction in the first slot, (interior(x, a))(v...) = a(x, v...)."""
    if a.degree == 0:
        raise ValueError("cannot contract a 0-form")
    raw: dict[tuple[int, ...], ScalarField] = {}
    for I, f in a.coeffs:
        for pos, i in enumerate(I):
            comp = x.components[i]
            if not comp.terms:
                continue
            key = I[:pos] + I[pos + 1:]
            g = (comp * f) * ((-1) ** pos)
            raw[key] = raw[key] + g if key in raw else g
    return DifferentialForm.build(a.model, a.degree - 1, raw)


def lie_derivative(x: VectorField, a: DifferentialForm) -> DifferentialForm:
    """Cartan formula, d(i_x a) + i_x(d a)."""
    out = interior(x, ext_d(a))
    if a.degree > 0:
        out = out + ext_d(interior(x, a))
    return out


def apply_form(a: DifferentialForm, vectors) -> ScalarField:
    """Evaluate a k-form on k vector fields, result a scalar field."""
    vecs = list(vectors)
    if len(vecs) != a.degree:
        raise ValueError("wrong number of vector fields")
    acc = ScalarField.zero(a.model)
    for idx, f in a.coeffs:
        for perm in itertools.permutations(range(len(idx))):
            sign, _ = _sort_sign(perm)
            prod = f
            for row, p in enumerate(perm):
                prod = prod * vecs[p].components[idx[row]]
            acc = acc + prod * sign
    return acc


def sharp(omega: DifferentialForm, xi: DifferentialForm, point=None,
          tol=DEFAULT_TOL):
    """Solve interior(X, omega) = xi for X.

    With a constant-coefficient omega the solve is done once on the Gram
    matrix and X is returned as a VectorField (exact up to the linear
    solve).  Otherwise a point is required and the numeric solution there
    is returned.  Degeneracy past the condition limit raises.
    """
    if omega.degree != 2 or xi.degree != 1:
        raise ValueError("sharp expects a 2-form and a 1-form")
    W = omega.constant_gram()
    if W is not None and point is None:
        _condition_gate(W, "constant form")
        Winv_T = np.linalg.inv(W.T)
        comps = []
        for i in range(omega.model.dim):
            acc = ScalarField.zero(omega.model)
            for j in range(omega.model.dim):
                c = Winv_T[i, j]
                if c != 0.0:
                    acc = acc + xi.coeff((j,)) * c
            comps.append(acc)
        return VectorField(omega.model, tuple(comps))
    if point is None:
        raise ValueError("non-constant omega needs an evaluation point")
    Wp = omega.gram_at(point)
    _condition_gate(Wp, f"point {np.asarray(point).tolist()}")
    rhs = np.array([xi.coeff((j,)).eval(point) for j in range(omega.model.dim)])
    return np.linalg.solve(Wp.T, rhs)


def _condition_gate(W: np.ndarray, where: str, limit=DEFAULT_TOL.condition_limit):
    s = np.linalg.svd(W, compute_uv=False)
    if s[-1] == 0.0 or s[0] / s[-1] > limit:
        cond = "inf" if s[-1] == 0.0 else f"{s[0] / s[-1]:.3g}"
        raise DegenerateFormError(
            f"form degenerate at {where}: condition number {cond}")


@dataclass(frozen=True)
class EndoField:
    """Endomorphism of the tangent bundle; entries[i][j] is the d/dx_i
    component of the image of d/dx_j."""

    model: ManifoldModel
    entries: tuple[tuple[ScalarField, ...], ...]

    @staticmethod
    def from_matrix(model: ManifoldModel, mat) -> "EndoField":
        mat = np.asarray(mat, float)
        rows = tuple(
            tuple(ScalarField.constant(model, mat[i, j])
                  for j in range(model.dim))
            for i in range(model.dim))
        return EndoField(model, rows)

    @staticmethod
    def from_fields(model: ManifoldModel, rows) -> "EndoField":
        return EndoField(model, tuple(tuple(r) for r in rows))

    @staticmethod
    def identity(model: ManifoldModel) -> "EndoField":
        return EndoField.from_matrix(model, np.eye(model.dim))

    def matrix_at(self, point) -> np.ndarray:
        d = self.model.dim
        return np.array([[self.entries[i][j].eval(point) for j in range(d)]
                         for i in range(d)])

    def constant_matrix(self) -> np.ndarray | None:
        if not all(f.is_constant() for row in self.entries for f in row):
            return None
        d = self.model.dim
        return np.array([[self.entries[i][j].constant_value()
                          for j in range(d)] for i in range(d)])

    def apply(self, x: VectorField) -> VectorField:
        comps = []
        for i in range(self.model.dim):
            acc = ScalarField.zero(self.model)
            for j in range(self.model.dim):
                acc = acc + self.entries[i][j] * x.components[j]
            comps.append(acc)
        return VectorField(self.model, tuple(comps))

    def compose(self, other: "EndoField") -> "EndoField":
        d = self.model.dim
        rows = []
        for i in range(d):
            row = []
            for j in range(d):
                acc = ScalarField.zero(self.model)
                for k in range(d):
                    acc = acc + self.entries[i][k] * other.entries[k][j]
                row.append(acc)
            rows.append(tuple(row))
        return EndoField(self.model, tuple(rows))

    def square(self) -> "EndoField":
        return self.compose(self)

    def __add__(self, other):
        return EndoField(self.model, tuple(
            tuple(a + b for a, b in zip(ra, rb))
            for ra, rb in zip(self.entries, other.entries)))

    def __sub__(self, other):
        return EndoField(self.model, tuple(
            tuple(a - b for a, b in zip(ra, rb))
            for ra, rb in zip(self.entries, other.entries)))

    def is_zero(self, tol: float = 1e-10) -> bool:
        return all(f.is_zero(tol) for row in self.entries for f in row)

    def max_coeff(self) -> float:
        return max((f.max_coeff() for row in self.entries for f in row),
                   default=0.0)

    def pullback_oneform(self, xi: DifferentialForm) -> DifferentialForm:
        """(I^* xi)(v) = xi(I v)."""
        raw = {}
        for j in range(self.model.dim):
            acc = ScalarField.zero(self.model)
            for i in range(self.model.dim):
                acc = acc + xi.coeff((i,)) * self.entries[i][j]
            raw[(j,)] = acc
        return DifferentialForm.build(self.model, 1, raw)

    def pullback_twoform(self, B: DifferentialForm) -> DifferentialForm:
        """(I^* B)(v, w) = B(I v, I w)."""
        G = gram_fields(B)
        d = self.model.dim
        raw = {}
        for a in range(d):
            for b in range(a + 1, d):
                acc = ScalarField.zero(self.model)
                for i in range(d):
                    for j in range(d):
                        acc = acc + self.entries[i][a] * G[i][j] * self.entries[j][b]
                raw[(a, b)] = acc
        return DifferentialForm.build(self.model, 2, raw)


def endo_from_pair(omega: DifferentialForm, F: DifferentialForm) -> EndoField:
    """The endomorphism I with omega(I v, w) = F(v, w).

    Needs a constant-coefficient nondegenerate omega; F may vary.  On the
    matrix level I = W^{-1} G with W, G the Gram matrices.
    """
    W = omega.constant_gram()
    if W is None:
        raise ValueError("endo_from_pair needs a constant-coefficient omega")
    _condition_gate(W, "constant form")
    Winv = np.linalg.inv(W)
    G = gram_fields(F)
    d = omega.model.dim
    rows = []
    for i in range(d):
        row = []
        for j in range(d):
            acc = ScalarField.zero(omega.model)
            for k in range(d):
                c = Winv[i, k]
                if c != 0.0:
                    acc = acc + G[k][j] * c
            row.append(acc)
        rows.append(tuple(row))
    return EndoField(omega.model, tuple(rows))


def two_form_from(omega: DifferentialForm, I: EndoField) -> DifferentialForm:
    """Recover F with F(v, w) = omega(I v, w); inverse of endo_from_pair."""
    G = gram_fields(omega)
    d = omega.model.dim
    raw = {}
    for a in range(d):
        for b in range(a + 1, d):
            acc = ScalarField.zero(omega.model)
            for i in range(d):
                acc = acc + I.entries[i][a] * G[i][b]
            raw[(a, b)] = acc
    return DifferentialForm.build(omega.model, 2, raw)


def is_type_11(B: DifferentialForm, I: EndoField, plan=None,
               tol: float = 1e-10, mode: str = "auto") -> bool:
    """Whether B(I v, I w) = B(v, w) identically.

    mode "exact" decides by coefficient arithmetic; "sampled" by Gram
    residuals at plan points; "auto" prefers exact (always available for
    trig-polynomial data).
    """
    delta = I.pullback_twoform(B) - B
    if mode in ("auto", "exact"):
        return delta.is_zero(tol)
    if plan is None:
        raise ValueError("sampled mode needs a plan")
    pts = plan.points(B.model)
    res = np.abs(delta.gram_batch(pts)).max()
    return bool(res <= DEFAULT_TOL.sampled)


def restrict_to_frame(B: DifferentialForm, frame, point=None):
    """Matrix of a 2-form against a frame.

    With point: numeric len(frame) x len(frame) matrix.  Without: matrix of
    scalar fields (frame vectors as VectorFields).
    """
    if point is not None:
        E = np.column_stack([
            v.eval(point) if isinstance(v, VectorField) else np.asarray(v, float)
            for v in frame]) if frame else np.zeros((B.model.dim, 0))
        G = B.gram_at(point)
        return E.T @ G @ E
    n = len(frame)
    out = [[None] * n for _ in range(n)]
    for a in range(n):
        for b in range(n):
            out[a][b] = apply_form(B, [frame[a], frame[b]])
    return out


@dataclass(frozen=True)
class Distribution:
    """A subbundle given by a global frame of vector fields (possibly empty)."""

    model: ManifoldModel
    frame: tuple[VectorField, ...]

    @property
    def rank(self) -> int:
        return len(self.frame)

    def matrix_at(self, point) -> np.ndarray:
        if not self.frame:
            return np.zeros((self.model.dim, 0))
        return np.column_stack([v.eval(point) for v in self.frame])

    def constant_matrix(self) -> np.ndarray | None:
        if not all(v.is_constant() for v in self.frame):
            return None
        if not self.frame:
            return np.zeros((self.model.dim, 0))
        return np.column_stack([v.constant_vector() for v in self.frame])

    def independent_at(self, point, rel: float = 1e-8) -> bool:
        if not self.frame:
            return True
        s = np.linalg.svd(self.matrix_at(point), compute_uv=False)
        return s[-1] > rel * max(s[0], 1.0)


def joint_frame_ok(e: Distribution, g: Distribution, point,
                   rel: float = 1e-8) -> bool:
    """The union of both frames spans a space of full joint rank at point."""
    M = np.column_stack([e.matrix_at(point), g.matrix_at(point)])
    if M.shape[1] == 0:
        return True
    s = np.linalg.svd(M, compute_uv=False)
    return s[-1] > rel * max(s[0], 1.0)


def kernel_basis(G: np.ndarray, rel: float = 1e-8) -> np.ndarray:
    """Orthonormal basis of the null space of a square matrix."""
    u, s, vt = np.linalg.svd(G)
    if s.size == 0:
        return np.eye(G.shape[0])
    null = s <= rel * max(s[0], 1.0)
    return vt[null].T


def max_principal_angle(A: np.ndarray, B: np.ndarray) -> float:
    """Largest principal angle between the column spans (radians)."""
    if A.shape[1] != B.shape[1]:
        return float(np.pi / 2) if (A.shape[1] or B.shape[1]) else 0.0
    if A.shape[1] == 0:
        return 0.0
    return float(np.max(scipy.linalg.subspace_angles(A, B)))


def span_residual(E: np.ndarray, v: np.ndarray) -> float:
    """Distance from v to the column span of E, relative to |v| (0 if v=0)."""
    nv = np.linalg.norm(v)
    if nv == 0.0:
        return 0.0
    if E.shape[1] == 0:
        return 1.0
    sol, *_ = np.linalg.lstsq(E, v, rcond=None)
    return float(np.linalg.norm(E @ sol - v) / nv)
