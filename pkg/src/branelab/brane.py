"""Brane verification: space-filling check, general kernel-comparison check,
the generalized-tangent-bundle oracle on the product ambient model, and
local normal forms.

A candidate packages a claimed brane: the closed 2-forms (omega, F) on Y
together with declared frames for the common kernel E and a complement G.
check_brane verifies the claim directly; check_brane_via_J verifies it by
J-invariance of the isotropic subspace tau_F inside T M + T*M over the
product ambient model, and the two must agree.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import ScalarField, VectorField, reindex
from .forms import (DegenerateFormError, DifferentialForm, Distribution,
                    endo_from_pair, ext_d, joint_frame_ok, kernel_basis,
                    max_principal_angle, two_form_from)
from .model import (DEFAULT_PLAN, DEFAULT_TOL, LINE, ManifoldModel,
                    SamplePlan, extend_with_line, product_model)
from .report import EXACT, SAMPLED, CheckResult


class RankDropError(Exception):
    """A form lost rank at a sample point where constant rank was required."""


@dataclass(frozen=True)
class BraneCandidate:
    model_Y: ManifoldModel
    omega: DifferentialForm
    F: DifferentialForm
    E_frame: Distribution
    G_frame: Distribution

    def __post_init__(self):
        if self.E_frame.rank + self.G_frame.rank != self.model_Y.dim:
            raise ValueError("rank(E) + rank(G) must equal dim(Y)")
        if (self.model_Y.dim - self.E_frame.rank) % 4 != 0:
            raise ValueError("transverse rank must be a multiple of 4")
        for form in (self.omega, self.F):
            if form.model != self.model_Y or form.degree != 2:
                raise ValueError("omega and F must be 2-forms on model_Y")


@dataclass(frozen=True)
class AmbientModel:
    """Gotay-style product ambient: Y times one line fiber per E direction."""

    model_M: ManifoldModel
    omega_M: DifferentialForm
    n_base: int  # leading coordinates of model_M form Y

    def __post_init__(self):
        if not ext_d(self.omega_M).is_zero():
            raise ValueError("ambient 2-form must be closed")


def ambient_for(c: BraneCandidate) -> AmbientModel:
    """Ambient model Y x R^k with omega_M = omega + sum d(eta_a) ^ dt_a.

    Built for candidates whose E-frame is constant: each E direction gets a
    conjugate line fiber t_a, and omega_M couples them through the dual
    coframe eta_a of the E-frame, reducing to omega_N + dq^dt in the
    codimension-one product case.
    """
    EC = c.E_frame.constant_matrix()
    GC = c.G_frame.constant_matrix()
    if EC is None or GC is None:
        raise ValueError("ambient assembly needs constant frames")
    n, k = c.model_Y.dim, c.E_frame.rank
    M = c.model_Y
    taken = {name for name, _ in M.coords}
    for a in range(k):
        name = f"t{a + 1}"
        while name in taken:
            name = "_" + name
        taken.add(name)
        M = extend_with_line(M, name)
    # dual coframe rows of the E part of the joint frame
    P = np.column_stack([GC, EC]) if (GC.size or EC.size) else np.eye(n)
    D = np.linalg.inv(P)
    raw = {}
    lifted = _lift(c.omega, M, list(range(n)))
    for a in range(k):
        eta = D[c.G_frame.rank + a]
        for i in range(n):
            if eta[i] != 0.0:
                key = (i, n + a)
                f = ScalarField.constant(M, eta[i])
                raw[key] = raw[key] + f if key in raw else f
    omega_M = lifted + DifferentialForm.build(M, 2, raw)
    return AmbientModel(M, omega_M, n)


def _lift(form: DifferentialForm, target: ManifoldModel, mapping):
    raw = {}
    for idx, f in form.coeffs:
        key = tuple(mapping[i] for i in idx)
        raw[key] = reindex(f, target, mapping)
    return DifferentialForm.build(target, form.degree, raw)


def lift_form(form: DifferentialForm, target: ManifoldModel, mapping) -> DifferentialForm:
    return _lift(form, target, mapping)


def check_space_filling(omega: DifferentialForm, F: DifferentialForm,
                        plan: SamplePlan = DEFAULT_PLAN,
                        tol=DEFAULT_TOL) -> CheckResult:
    """closed omega, closed F, nondegenerate omega, and (omega^-1 F)^2 = -Id."""
    exact = omega.is_constant() and F.is_constant()
    res = CheckResult("space_filling", EXACT if exact else SAMPLED, False)
    res.conditions["closed_omega"] = ext_d(omega).is_zero(tol.exact_zero)
    res.conditions["closed_F"] = ext_d(F).is_zero(tol.exact_zero)
    res.residuals["d_omega"] = ext_d(omega).max_coeff()
    res.residuals["d_F"] = ext_d(F).max_coeff()

    model = omega.model
    nondeg = True
    squares = True
    if exact:
        W = omega.constant_gram()
        s = np.linalg.svd(W, compute_uv=False)
        nondeg = s[-1] > 0 and s[0] / s[-1] <= tol.condition_limit
        res.details["omega_condition"] = float(
            s[0] / s[-1]) if s[-1] > 0 else float("inf")
        if nondeg:
            I = np.linalg.solve(W, F.constant_gram())
            r = np.abs(I @ I + np.eye(model.dim)).max()
            squares = r <= tol.exact_zero
            res.residuals["I_squared_plus_id"] = float(r)
            res.details["I_matrix"] = I.tolist()
    else:
        pts = plan.points(model)
        WG = omega.gram_batch(pts)
        FG = F.gram_batch(pts)
        worst = 0.0
        worst_at = 0
        for i in range(pts.shape[0]):
            s = np.linalg.svd(WG[i], compute_uv=False)
            if s[-1] == 0 or s[0] / s[-1] > tol.condition_limit:
                nondeg = False
                res.add_witness(pts[i], float("inf"), "degenerate_omega")
                continue
            I = np.linalg.solve(WG[i], FG[i])
            r = np.abs(I @ I + np.eye(model.dim)).max()
            if r > worst:
                worst, worst_at = r, i
            if r > tol.sampled:
                squares = False
        res.residuals["I_squared_plus_id"] = worst
        if not squares:
            res.add_witness(pts[worst_at], worst, "I_square")
    res.conditions["nondegenerate"] = bool(nondeg)
    res.conditions["I_squares_minus_id"] = bool(squares)
    res.passed = all(res.conditions.values())
    return res


def validate_candidate(c: BraneCandidate, plan: SamplePlan = DEFAULT_PLAN,
                       tol=DEFAULT_TOL) -> None:
    pts = plan.points(c.model_Y)
    for i in range(min(pts.shape[0], 32)):
        if not joint_frame_ok(c.E_frame, c.G_frame, pts[i], tol.subspace):
            raise ValueError(
                f"E and G frames dependent at sample {pts[i].tolist()}")


def check_brane(c: BraneCandidate, plan: SamplePlan = DEFAULT_PLAN,
                tol=DEFAULT_TOL) -> CheckResult:
    """Kernels of omega and F both equal span(E); both forms closed;
    transverse endomorphism squares to -Id on the G-frame."""
    validate_candidate(c, plan, tol)
    exact = (c.omega.is_constant() and c.F.is_constant()
             and all(v.is_constant() for v in c.E_frame.frame)
             and all(v.is_constant() for v in c.G_frame.frame))
    res = CheckResult("brane", EXACT if exact else SAMPLED, False)
    res.conditions["omega_closed"] = ext_d(c.omega).is_zero(tol.exact_zero)
    res.conditions["F_closed"] = ext_d(c.F).is_zero(tol.exact_zero)
    res.residuals["d_omega"] = ext_d(c.omega).max_coeff()
    res.residuals["d_F"] = ext_d(c.F).max_coeff()

    pts = plan.points(c.model_Y)
    k = c.E_frame.rank
    kernels_ok = True
    squares_ok = True
    worst_kernel = 0.0
    worst_square = 0.0
    WG = c.omega.gram_batch(pts)
    FG = c.F.gram_batch(pts)
    for i in range(pts.shape[0]):
        E = c.E_frame.matrix_at(pts[i])
        for label, G in (("omega", WG[i]), ("F", FG[i])):
            nul = kernel_basis(G, tol.subspace)
            if nul.shape[1] != k:
                raise RankDropError(
                    f"{label} kernel rank {nul.shape[1]} != {k} at sample "
                    f"{pts[i].tolist()}")
            ang = max_principal_angle(nul, E) if k else 0.0
            worst_kernel = max(worst_kernel, ang)
            if ang > tol.subspace:
                kernels_ok = False
                res.add_witness(pts[i], ang, f"kernel_{label}")
        # transverse complex structure on the G-frame
        Gm = c.G_frame.matrix_at(pts[i])
        if Gm.shape[1]:
            Wg = Gm.T @ WG[i] @ Gm
            Fg = Gm.T @ FG[i] @ Gm
            s = np.linalg.svd(Wg, compute_uv=False)
            if s[-1] == 0 or s[0] / s[-1] > tol.condition_limit:
                raise DegenerateFormError(
                    f"omega degenerate on G at sample {pts[i].tolist()}")
            I = np.linalg.solve(Wg, Fg)
            r = np.abs(I @ I + np.eye(Gm.shape[1])).max()
            worst_square = max(worst_square, r)
            if r > tol.sampled:
                squares_ok = False
                res.add_witness(pts[i], r, "transverse_square")
    res.conditions["kernels_equal"] = kernels_ok
    res.conditions["transverse_I_squares"] = squares_ok
    res.residuals["kernel_angle"] = worst_kernel
    res.residuals["transverse_square"] = worst_square
    res.passed = all(res.conditions.values())
    return res


def tau_F_subspace(c: BraneCandidate, ambient: AmbientModel,
                   p) -> np.ndarray:
    """Basis of {(X, xi): X tangent to Y, xi restricted to TY = i_X F} at p.

    Columns live in R^{2 dim M}; p is a point of M (fiber coordinates are
    ignored by the constant-coefficient data used here).
    """
    m = ambient.model_M.dim
    n = ambient.n_base
    FG = c.F.gram_at(np.asarray(p, float)[:n])
    cols = []
    for i in range(n):
        v = np.zeros(2 * m)
        v[i] = 1.0
        v[m:m + n] = FG[i, :]
        cols.append(v)
    for a in range(m - n):
        v = np.zeros(2 * m)
        v[m + n + a] = 1.0
        cols.append(v)
    return np.column_stack(cols)


def split_pairing_gram(basis: np.ndarray) -> np.ndarray:
    """Gram matrix of <(X,xi),(Z,eta)> = (xi(Z) + eta(X))/2 on the columns."""
    m2 = basis.shape[0]
    m = m2 // 2
    X = basis[:m]
    Xi = basis[m:]
    return 0.5 * (Xi.T @ X + X.T @ Xi)


def check_brane_via_J(c: BraneCandidate, ambient: AmbientModel | None = None,
                      plan: SamplePlan = DEFAULT_PLAN,
                      tol=DEFAULT_TOL) -> CheckResult:
    """Brane test via J-invariance of tau_F in TM + T*M.

    J(X, xi) = (-omega_M^-1 xi, omega_M X); the candidate passes iff
    J tau_F = tau_F at every sample (and the ambient form is closed, which
    the AmbientModel construction guarantees).
    """
    if ambient is None:
        ambient = ambient_for(c)
    res = CheckResult("brane_via_J", SAMPLED, False)
    # J-invariance is pointwise linear algebra; closedness is checked
    # separately so the verdict matches check_brane on non-closed inputs
    res.conditions["omega_closed"] = ext_d(c.omega).is_zero(tol.exact_zero)
    res.conditions["F_closed"] = ext_d(c.F).is_zero(tol.exact_zero)
    m = ambient.model_M.dim
    n = ambient.n_base
    pts = plan.points(c.model_Y)
    worst = 0.0
    ok = True
    for i in range(pts.shape[0]):
        p = np.zeros(m)
        p[:n] = pts[i]
        W = ambient.omega_M.gram_at(p)
        s = np.linalg.svd(W, compute_uv=False)
        if s[-1] == 0 or s[0] / s[-1] > tol.condition_limit:
            raise DegenerateFormError(
                f"ambient omega degenerate at sample {p.tolist()}")
        Wmap = W.T  # matrix of v -> i_v omega
        J = np.zeros((2 * m, 2 * m))
        J[:m, m:] = -np.linalg.inv(Wmap)
        J[m:, :m] = Wmap
        basis = tau_F_subspace(c, ambient, p)
        Q, _ = np.linalg.qr(basis)
        img = J @ basis
        resid = img - Q @ (Q.T @ img)
        scale = max(np.linalg.norm(img, axis=0).max(), 1.0)
        r = float(np.linalg.norm(resid, axis=0).max() / scale)
        worst = max(worst, r)
        if r > tol.subspace:
            ok = False
            res.add_witness(pts[i], r, "J_invariance")
    res.conditions["J_invariant"] = ok
    res.residuals["J_residual"] = worst
    res.passed = all(res.conditions.values())
    return res


def local_normal_form(n: int, k: int) -> BraneCandidate:
    """The local model: 2n pairs of transverse coordinates carrying the
    standard commuting pair of constant forms, plus k kernel directions."""
    if n < 1 or k < 0:
        raise ValueError("need n >= 1, k >= 0")
    coords = []
    for j in range(1, 2 * n + 1):
        coords.append((f"x{j}", LINE))
    for j in range(1, 2 * n + 1):
        coords.append((f"y{j}", LINE))
    for a in range(1, k + 1):
        coords.append((f"t{a}", LINE))
    model = ManifoldModel(tuple(coords))

    def xi(j):  # x_j, 1-based
        return j - 1

    def yi(j):
        return 2 * n + j - 1

    omega_raw = {}
    F_raw = {}
    for j in range(1, n + 1):
        a, b = 2 * j - 1, 2 * j
        omega_raw[(xi(a), yi(b))] = 1.0
        omega_raw[(yi(a), xi(b))] = 1.0
        F_raw[(xi(a), xi(b))] = 1.0
        F_raw[(yi(a), yi(b))] = -1.0
    omega = DifferentialForm.build(model, 2, omega_raw)
    F = DifferentialForm.build(model, 2, F_raw)
    E = Distribution(model, tuple(
        VectorField.basis(model, 4 * n + a) for a in range(k)))
    G = Distribution(model, tuple(
        VectorField.basis(model, i) for i in range(4 * n)))
    return BraneCandidate(model, omega, F, E, G)


def product_candidate(c1: BraneCandidate, c2: BraneCandidate) -> BraneCandidate:
    """Product brane: forms add after lifting, frames concatenate."""
    model = product_model(c1.model_Y, c2.model_Y)
    n1 = c1.model_Y.dim
    m1 = list(range(n1))
    m2 = [n1 + i for i in range(c2.model_Y.dim)]
    omega = _lift(c1.omega, model, m1) + _lift(c2.omega, model, m2)
    F = _lift(c1.F, model, m1) + _lift(c2.F, model, m2)

    def lift_dist(d: Distribution, mapping):
        vecs = []
        for v in d.frame:
            comps = [ScalarField.zero(model)] * model.dim
            for i, f in enumerate(v.components):
                comps[mapping[i]] = reindex(f, model, mapping)
            vecs.append(VectorField(model, tuple(comps)))
        return vecs

    E = Distribution(model, tuple(
        lift_dist(c1.E_frame, m1) + lift_dist(c2.E_frame, m2)))
    G = Distribution(model, tuple(
        lift_dist(c1.G_frame, m1) + lift_dist(c2.G_frame, m2)))
    return BraneCandidate(model, omega, F, E, G)


def charbrane_roundtrip(omega: DifferentialForm, F: DifferentialForm,
                        tol: float = 1e-10) -> bool:
    """F -> I -> omega composed-with I reproduces F (constant omega)."""
    I = endo_from_pair(omega, F)
    return (two_form_from(omega, I) - F).is_zero(tol)
