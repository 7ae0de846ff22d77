"""Sensitivity system: du/dalpha, chained quantity derivatives, bounds."""

import numpy as np
import pytest

from conftest import (
    aligned_table,
    assert_fd_match,
    cyclic_pool,
    fd_orbit_quantities,
    minimage,
    obstacle_perimeters,
    shift_family,
)

from openbilliard.deform import (
    AlphaDerivatives,
    BoundConstants,
    alpha_rhs,
    bound_constants,
    du_dalpha,
    du_dalpha_second_fd,
    quantity_derivs,
    scaled_sensitivity_matrix,
)
from openbilliard.orbit import find_orbit, length_gradient, length_hessian

WORDS = [(1, 2), (1, 3), (1, 2, 3), (1, 2, 1, 3), (1, 2, 3, 2), (1, 2, 3, 1, 3, 2)]


def test_static_table_gives_zero_derivatives(std6, std6_pool):
    for word in WORDS[:3]:
        orb = find_orbit(std6, word, 0.0)
        assert np.allclose(alpha_rhs(std6, orb), 0.0, atol=1e-14)
        assert np.allclose(du_dalpha(std6, orb), 0.0, atol=1e-14)
        derivs = quantity_derivs(std6, orb)
        for arr in (derivs.du, derivs.dp, derivs.dd, derivs.dkappa,
                    derivs.dcos_phi, derivs.dgamma):
            assert np.allclose(arr, 0.0, atol=1e-13)
    consts = bound_constants(std6, std6_pool)
    assert consts.du_bound == 0.0
    assert consts.rhs_bound == 0.0
    assert consts.multiplicity == 0


def test_untouched_word_has_zero_sensitivity(rad6):
    # obstacle 1 deforms but the word never visits it
    orb = find_orbit(rad6, (2, 3), 0.1)
    assert np.allclose(alpha_rhs(rad6, orb), 0.0, atol=1e-14)
    assert np.allclose(du_dalpha(rad6, orb), 0.0, atol=1e-14)
    derivs = quantity_derivs(rad6, orb)
    assert np.allclose(derivs.dd, 0.0, atol=1e-13)
    assert np.allclose(derivs.dkappa, 0.0, atol=1e-13)


@pytest.mark.parametrize("family", ["radius", "shift", "dilation"])
def test_du_matches_finite_differences(family, rad6, shift6, exp6):
    table = {"radius": rad6, "shift": shift6, "dilation": exp6}[family]
    for alpha in (0.0, 0.15):
        for word in WORDS:
            orb = find_orbit(table, word, alpha)
            du = du_dalpha(table, orb)
            fd = fd_orbit_quantities(table, word, alpha)["du"]
            assert_fd_match(du, fd, rel=1e-5, abs_floor=1e-8,
                            label=f"{family} du {word} at {alpha}")


@pytest.mark.parametrize("family", ["radius", "shift", "dilation"])
def test_quantity_derivs_match_finite_differences(family, rad6, shift6, exp6):
    table = {"radius": rad6, "shift": shift6, "dilation": exp6}[family]
    alpha = 0.1
    for word in WORDS:
        orb = find_orbit(table, word, alpha)
        derivs = quantity_derivs(table, orb)
        fd = fd_orbit_quantities(table, word, alpha)
        for name in ("du", "dp", "dd", "dkappa", "dcos_phi", "dgamma"):
            assert_fd_match(getattr(derivs, name), fd[name],
                            rel=1e-4, abs_floor=1e-7,
                            label=f"{family} {name} {word}")


def test_rhs_matches_gradient_alpha_differences(rad6, shift6):
    # unscaled rows are the mixed alpha/u second derivatives of total length
    h = 1e-6
    for table in (rad6, shift6):
        for word in [(1, 2), (1, 2, 3), (1, 3, 1, 2)]:
            orb = find_orbit(table, word, 0.05)
            raw = alpha_rhs(table, orb) * orb.cos_phi
            up = length_gradient(table, word, orb.u, 0.05 + h)
            dn = length_gradient(table, word, orb.u, 0.05 - h)
            fd = (up - dn) / (2.0 * h)
            assert_fd_match(raw, fd, rel=1e-5, abs_floor=1e-8,
                            label=f"rhs {word}")


def test_scaled_system_reproduces_hessian(rad6):
    # the scaled matrix is the length Hessian conjugated by diag(cos phi)
    for word in [(1, 2), (1, 2, 3), (1, 2, 3, 2, 1, 3)]:
        orb = find_orbit(rad6, word, 0.2)
        A = scaled_sensitivity_matrix(orb).to_dense()
        D = np.diag(orb.cos_phi)
        H = length_hessian(rad6, word, orb.u, 0.2).to_dense()
        assert np.max(np.abs(D @ A @ D - H)) <= 1e-11


def test_stationarity_is_preserved_to_first_order(rad6):
    # moving along (u + h du, alpha + h) keeps the gradient O(h^2)
    word = (1, 2, 3, 2)
    alpha, h = 0.0, 1e-5
    orb = find_orbit(rad6, word, alpha)
    du = du_dalpha(rad6, orb)
    g = length_gradient(rad6, word, orb.u + h * du, alpha + h)
    assert np.max(np.abs(g)) <= 50.0 * h * h


def test_aligned_radius_chord_oracle():
    # unit-rate radius growth of obstacle 1, chord running along x:
    # the gap shrinks at rate 1 and the bounce stays at normal incidence
    table = aligned_table("radius")
    orb = find_orbit(table, (1, 2), 0.0)
    derivs = quantity_derivs(table, orb)
    assert np.allclose(derivs.du, 0.0, atol=1e-12)
    assert np.allclose(derivs.dd, [-1.0, -1.0], atol=1e-10)
    assert derivs.dkappa[0] == pytest.approx(-1.0, abs=1e-10)  # kappa = 1/(1+alpha)
    assert derivs.dkappa[1] == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(derivs.dcos_phi, 0.0, atol=1e-12)
    assert derivs.dgamma[0] == pytest.approx(-2.0, abs=1e-10)
    assert derivs.dgamma[1] == pytest.approx(0.0, abs=1e-12)


def test_aligned_shift_chord_oracle():
    # obstacle 1 translates toward obstacle 2 along the chord direction:
    # the rhs vanishes by symmetry, only the chord length responds
    table = aligned_table("shift-x")
    orb = find_orbit(table, (1, 2), 0.0)
    assert np.allclose(alpha_rhs(table, orb), 0.0, atol=1e-12)
    derivs = quantity_derivs(table, orb)
    assert np.allclose(derivs.du, 0.0, atol=1e-12)
    assert np.allclose(derivs.dd, [-1.0, -1.0], atol=1e-10)
    assert np.allclose(derivs.dkappa, 0.0, atol=1e-12)
    assert np.allclose(derivs.dgamma, 0.0, atol=1e-12)


def test_shift_response_is_linear_in_direction():
    tables = {v: shift_family(vx=v[0], vy=v[1]) for v in
              [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0)]}
    word = (1, 2, 3, 2)
    dus = {}
    for v, table in tables.items():
        orb = find_orbit(table, word, 0.0)
        dus[v] = du_dalpha(table, orb)
    combined = dus[(1.0, 0.0)] + dus[(0.0, 1.0)]
    assert np.allclose(combined, dus[(1.0, 1.0)], atol=1e-9)


def test_second_derivative_estimate_matches_parameter_curvature(rad6):
    word = (1, 2, 3)
    alpha, h = 0.05, 1e-3
    d2 = du_dalpha_second_fd(rad6, word, alpha)
    perims = obstacle_perimeters(rad6, word, alpha)
    u0 = find_orbit(rad6, word, alpha).u
    up = find_orbit(rad6, word, alpha + h).u
    dn = find_orbit(rad6, word, alpha - h).u
    fd2 = (minimage(up - u0, perims) - minimage(u0 - dn, perims)) / (h * h)
    assert_fd_match(d2, fd2, rel=1e-3, abs_floor=1e-5, label="d2u")


def test_derivative_payload_roundtrip(rad6):
    orb = find_orbit(rad6, (1, 2, 3), 0.0)
    derivs = quantity_derivs(rad6, orb)
    assert isinstance(derivs, AlphaDerivatives)
    payload = derivs.to_payload()
    for key in ("du", "dp", "dd", "dkappa", "dcos_phi", "dgamma"):
        assert key in payload
        assert np.allclose(payload[key], np.asarray(getattr(derivs, key)))


def test_bounds_hold_over_word_pool(rad6):
    pool = cyclic_pool(rad6, 0.0, 8)
    consts = bound_constants(rad6, pool)
    assert isinstance(consts, BoundConstants)
    assert consts.multiplicity == 1
    for field in ("du_bound", "dp_bound", "dd_bound", "dkappa_bound",
                  "dcos_bound", "dgamma_bound", "rhs_bound"):
        value = getattr(consts, field)
        assert np.isfinite(value) and value > 0.0
    for orb in pool:
        derivs = quantity_derivs(rad6, orb)
        assert np.all(np.abs(derivs.du) <= consts.du_bound_at(orb.cos_phi) + 1e-12)
        assert np.all(np.abs(alpha_rhs(rad6, orb) * orb.cos_phi)
                      <= consts.rhs_bound + 1e-12)
        assert np.all(np.linalg.norm(derivs.dp, axis=1) <= consts.dp_bound + 1e-12)
        assert np.all(np.abs(derivs.dd) <= consts.dd_bound + 1e-12)
        assert np.all(np.abs(derivs.dkappa) <= consts.dkappa_bound + 1e-12)
        assert np.all(np.abs(derivs.dcos_phi) <= consts.dcos_bound + 1e-12)
        assert np.all(np.abs(derivs.dgamma) <= consts.dgamma_bound + 1e-12)


def test_multiple_deformed_obstacles_widen_constants(exp6):
    pool = cyclic_pool(exp6, 0.0, 4)
    consts = bound_constants(exp6, pool)
    assert consts.multiplicity == 2
    for orb in pool:
        derivs = quantity_derivs(exp6, orb)
        assert np.all(np.abs(derivs.du) <= consts.du_bound_at(orb.cos_phi) + 1e-12)
        assert np.all(np.abs(derivs.dd) <= consts.dd_bound + 1e-12)
