"""Graph deformations: kernel field, circle flow, transported forms."""

import math

import numpy as np
import pytest

from branelab.forms import DifferentialForm, Distribution, ext_d, interior
from branelab.grammar import parse_form, parse_vector
from branelab.model import (CIRCLE, LINE, FlowOptions, SamplePlan,
                            extend_with_circle, model_from_names)
from branelab.nearby import (BraneObstruction, closed1f_check,
                             closed1f_residual, convergence_order, flow,
                             graph_deformation, invariance_check, kernel_field,
                             kernel_field_at, mapping_torus_check,
                             melanie_check, omega_f, slicewise_hamiltonian,
                             transport_brane)

LAM = float(math.sqrt(2) - 1)

N_MIX = model_from_names([("x1", CIRCLE), ("y1", LINE),
                          ("x2", LINE), ("y2", LINE)])
OMEGA_N = parse_form("dx1^dy2 + dy1^dx2", N_MIX)
F_N = parse_form("dx1^dx2 - dy1^dy2", N_MIX)


def shear():
    return graph_deformation(N_MIX, OMEGA_N, F_N, f"{LAM!r}*y2")


def wavy(eps=0.05):
    return graph_deformation(
        N_MIX, OMEGA_N, F_N,
        f"{eps!r}*sin(2*pi*x1)*sin(2*pi*q) + {LAM!r}*y2")


def test_factory_parses_f_on_extended_model():
    g = shear()
    assert g.y_model.dim == 5
    assert g.q_index == 4
    assert g.f.model == g.y_model


def test_omega_f_is_base_form_minus_d_f_dq():
    g = shear()
    w = omega_f(g)
    manual = g.lift(OMEGA_N) - ext_d(
        DifferentialForm.build(g.y_model, 1, {(4,): g.f}))
    assert (w - manual).is_zero(1e-12)


def test_kernel_field_annihilates_deformed_form():
    for g in (shear(), wavy()):
        rem = interior(kernel_field(g), omega_f(g))
        assert rem.is_zero(1e-10)


def test_slicewise_hamiltonian_shear_is_circle_translation():
    X = slicewise_hamiltonian(shear())
    assert np.allclose(X.constant_vector(),
                       [LAM, 0.0, 0.0, 0.0, 0.0], atol=1e-15)


def test_kernel_field_at_matches_symbolic(rng):
    g = wavy()
    Z = kernel_field(g)
    for p in rng.uniform(0, 1, size=(5, 5)):
        assert np.allclose(kernel_field_at(g, p), Z.eval(p), atol=1e-12)


def test_flow_of_shear_is_exact_translation():
    g = shear()
    pts = SamplePlan(count=32, seed=1).points(N_MIX)
    fr = flow(g, 0.0, 1.0, pts)
    expect = pts.copy()
    expect[:, 0] = (expect[:, 0] - LAM) % 1.0
    got = fr.images_wrapped(N_MIX)
    assert np.abs(got - expect).max() < 1e-12
    assert np.abs(fr.jacobians - np.eye(4)).max() < 1e-12
    assert fr.error_estimate < 1e-12


def test_flow_segments_compose():
    g = wavy()
    pts = SamplePlan(count=8, seed=2).points(N_MIX)
    ab = flow(g, 0.0, 0.5, pts)
    bc = flow(g, 0.5, 1.0, ab.images)
    whole = flow(g, 0.0, 1.0, pts)
    assert np.abs(bc.images - whole.images).max() < 1e-11


def test_flow_jacobian_matches_finite_difference():
    g = wavy()
    p = np.array([[0.3, 0.2, -0.1, 0.4]])
    J = flow(g, 0.0, 1.0, p).jacobians[0]
    h = 1e-6
    for i in range(4):
        e = np.zeros(4); e[i] = h
        plus = flow(g, 0.0, 1.0, p + e).images[0]
        minus = flow(g, 0.0, 1.0, p - e).images[0]
        assert np.abs((plus - minus) / (2 * h) - J[:, i]).max() < 1e-6


def test_flow_preserves_base_symplectic_form():
    fr = flow(wavy(), 0.0, 1.0, SamplePlan(count=16, seed=3).points(N_MIX))
    assert fr.symplectic_residuals.max() < 1e-10


def test_invariance_holds_for_shear():
    fr = flow(shear(), 0.0, 1.0, SamplePlan(count=32, seed=1).points(N_MIX))
    assert invariance_check(F_N, fr, 1e-9).passed


def test_invariance_fails_for_vertical_push():
    """f = eps cos(2 pi x1) shears y2 by a slope that twists F_N."""
    g = graph_deformation(N_MIX, OMEGA_N, F_N, "0.01*cos(2*pi*x1)")
    fr = flow(g, 0.0, 1.0, SamplePlan(count=32, seed=1).points(N_MIX))
    rec = invariance_check(F_N, fr, 1e-9)
    assert not rec.passed
    assert rec.witnesses  # worst offending sample is reported


def test_transport_kernel_and_slice():
    t = transport_brane(shear(), F_N)
    assert t.kernel_check().passed
    assert t.zero_slice_check().passed
    assert t.fd_exterior_check().passed


def test_transport_matrix_agrees_between_exact_and_grid():
    # q-modulated shear: slicewise translations, so time-1 invariance holds,
    # but the transported matrix genuinely varies with q
    g = graph_deformation(
        N_MIX, OMEGA_N, F_N, f"({LAM!r} + 0.3*sin(2*pi*q))*y2")
    t = transport_brane(g, F_N)
    p = np.array([0.31, 0.17, -0.42, 0.55, 0.633])
    exact = t.matrix_at(p, exact=True)
    interp = t.matrix_at(p, exact=False)
    assert np.abs(exact - interp).max() < 5e-3
    snapped, batch = t.matrices_at(p[None, :])
    assert np.abs(batch[0] - t.matrix_at(snapped[0], exact=True)).max() < 1e-9


def test_transport_obstruction_raised_for_twisting_f():
    g = graph_deformation(N_MIX, OMEGA_N, F_N, "0.01*cos(2*pi*x1)")
    with pytest.raises(BraneObstruction) as err:
        transport_brane(g, F_N)
    assert err.value.residual is not None


def test_closed1f_shear_passes_quadratic_fails():
    assert closed1f_check(shear()).passed
    g2 = graph_deformation(N_MIX, OMEGA_N, F_N, "x1^2")
    rec = closed1f_check(g2)
    assert not rec.passed
    assert "per_q_max" in rec.details


def test_closed1f_residual_of_quadratic_is_explicit():
    """f = x1^2 leaves the closed 2-form residual -2 dx1^dy1 exactly."""
    g = graph_deformation(N_MIX, OMEGA_N, F_N, "x1^2")
    beta = closed1f_residual(g)
    expect = parse_form("-2*dx1^dy1", g.y_model)
    assert (beta - expect).is_zero(1e-12)


def test_melanie_rejects_nonhorizontal_form():
    y5 = extend_with_circle(N_MIX, "q")
    F = parse_form("dx1^dq", y5)
    E = Distribution(y5, (parse_vector("d_q", y5),))
    G = Distribution(y5, tuple(
        parse_vector(f"d_{n}", y5) for n in ("x1", "y1", "x2", "y2")))
    with pytest.raises(ValueError):
        melanie_check(F, E, G)


def test_melanie_verdict_tracks_closedness():
    y5 = extend_with_circle(N_MIX, "q")
    F = parse_form("dx1^dx2 - dy1^dy2", y5)
    E = Distribution(y5, (parse_vector("d_q", y5),))
    G = Distribution(y5, tuple(
        parse_vector(f"d_{n}", y5) for n in ("x1", "y1", "x2", "y2")))
    good = melanie_check(F, E, G)
    assert good.passed and good.conditions["dF_zero"]
    bad = melanie_check(F + parse_form("cos(2*pi*q)*dx1^dy1", y5), E, G)
    assert not bad.passed
    assert not bad.conditions["ii_holonomy_invariant"]
    assert not bad.conditions["dF_zero"]


def test_mapping_torus_still_and_shear():
    still = graph_deformation(N_MIX, OMEGA_N, F_N, "0")
    rec0 = mapping_torus_check(still, F_N)
    assert rec0.passed
    assert max(rec0.residuals.values()) == 0.0
    rec1 = mapping_torus_check(shear(), F_N)
    assert rec1.passed
    assert max(rec1.residuals.values()) <= 1e-8


def test_convergence_order_nonlinear_at_least_rk4():
    pts = SamplePlan(count=6, seed=4).points(N_MIX)
    order = convergence_order(wavy(0.2), pts, 1.0)
    assert order >= 3.9


def test_convergence_order_degenerate_sequence_raises():
    with pytest.raises(ValueError):
        convergence_order(shear(), SamplePlan(count=4, seed=4).points(N_MIX), 1.0)


def test_flow_options_step_controls_node_count():
    g = wavy()
    pts = np.array([[0.1, 0.0, 0.0, 0.0]])
    fr = flow(g, 0.0, 1.0, pts, FlowOptions(step=1 / 128))
    assert fr.steps == 128
