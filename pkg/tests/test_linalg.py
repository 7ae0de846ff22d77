"""Cyclic tridiagonal solver and the diagonal-dominance certificate."""

import numpy as np
import pytest

from openbilliard.errors import DominanceError, NumericalError
from openbilliard.linalg import CyclicTridiagonal, cyclic_tridiag_solve, varah_bound


def random_dominant(rng, n, slack=0.5):
    off = rng.uniform(-1.0, 1.0, size=n)
    mass = np.abs(off) + np.abs(np.roll(off, -1))
    diag = mass + slack + rng.uniform(0.0, 2.0, size=n)
    return CyclicTridiagonal(diag, off)


def test_dense_expansion_small_case():
    m = CyclicTridiagonal([2.5, 2.5], [0.25, 0.25])
    # n = 2: both couplings address the same pair and add up
    assert np.allclose(m.to_dense(), [[2.5, 0.5], [0.5, 2.5]])
    assert np.allclose(np.linalg.eigvalsh(m.to_dense()), [2.0, 3.0])
    x = m.solve(np.array([1.0, 0.0]))
    assert np.allclose(x, [5.0 / 12.0, -1.0 / 12.0])


def test_matvec_agrees_with_dense():
    rng = np.random.default_rng(7)
    for n in (2, 3, 4, 5, 8, 17):
        m = random_dominant(rng, n)
        x = rng.normal(size=n)
        assert np.allclose(m.matvec(x), m.to_dense() @ x, atol=1e-13)


def test_solve_matches_dense_solve():
    rng = np.random.default_rng(11)
    for n in (2, 3, 4, 5, 6, 9, 32, 101):
        m = random_dominant(rng, n)
        b = rng.normal(size=n)
        x = m.solve(b)
        assert np.allclose(x, np.linalg.solve(m.to_dense(), b), atol=1e-10)
        assert np.max(np.abs(b - m.matvec(x))) <= 1e-12 * max(1.0, np.max(np.abs(b)))


def test_solve_residual_certificate():
    rng = np.random.default_rng(3)
    m = random_dominant(rng, 40)
    b = rng.normal(size=40)
    x = m.solve(b, residual_tol=1e-13)
    resid = np.max(np.abs(b - m.matvec(x)))
    assert resid <= 1e-13 * np.max(np.abs(b))


def test_varah_bound_controls_inverse_norm():
    rng = np.random.default_rng(23)
    for n in (2, 3, 5, 12, 40):
        m = random_dominant(rng, n)
        inv_norm = np.linalg.norm(np.linalg.inv(m.to_dense()), np.inf)
        assert inv_norm <= varah_bound(m) + 1e-12


def test_varah_bound_attained_on_symmetric_pair():
    # equioscillating 2x2 case: the bound is exact
    m = CyclicTridiagonal([2.5, 2.5], [0.25, 0.25])
    assert m.dominance_margin() == pytest.approx(2.0)
    assert varah_bound(m) == pytest.approx(0.5)
    inv_norm = np.linalg.norm(np.linalg.inv(m.to_dense()), np.inf)
    assert inv_norm == pytest.approx(0.5, abs=1e-15)


def test_dominance_rejection():
    m = CyclicTridiagonal([1.0, 1.0, 1.0], [0.8, 0.8, 0.8])
    assert not m.is_dominant()
    with pytest.raises(DominanceError):
        cyclic_tridiag_solve(m, np.ones(3))
    with pytest.raises(DominanceError):
        varah_bound(m)


def test_dominant_path_and_shape_checks():
    m = CyclicTridiagonal([3.0, 3.0, 3.0, 3.0], [1.0, 1.0, 1.0, 1.0])
    x = cyclic_tridiag_solve(m, np.array([1.0, 2.0, 3.0, 4.0]))
    assert np.allclose(m.matvec(x), [1.0, 2.0, 3.0, 4.0])
    with pytest.raises(ValueError):
        m.solve(np.ones(3))
    with pytest.raises(ValueError):
        CyclicTridiagonal([1.0], [1.0])
    with pytest.raises(ValueError):
        CyclicTridiagonal([1.0, 2.0], [1.0])


def test_singular_fallback_raises_numerical_error():
    # exactly singular symmetric system: rank deficiency must be reported
    m = CyclicTridiagonal([2.0, 2.0, 2.0, 2.0], [-1.0, -1.0, -1.0, -1.0])
    ones = np.ones(4)
    assert np.allclose(m.matvec(ones), 0.0)  # kernel vector
    with pytest.raises((NumericalError, np.linalg.LinAlgError)):
        m.solve(np.array([1.0, 0.0, 0.0, 0.0]))
