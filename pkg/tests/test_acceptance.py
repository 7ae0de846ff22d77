"""End-to-end acceptance checks, one per shipped guarantee.

Each test is a single pass/fail line.  The reference configurations are the
unit-disk triangle tables from conftest; the last test drives a seeded
battery of randomized validated geometries through every derivative path.
"""

import math
import time

import numpy as np

from conftest import cyclic_pool, fd_orbit_quantities

from openbilliard import (
    BilliardError,
    BilliardTable,
    Circle,
    ConstantPotential,
    Ellipse,
    OrbitCache,
    PolarHarmonic,
    bound_constants,
    bowen_root,
    count_fix,
    cycle_curvatures,
    dimension_derivative,
    dimension_report,
    du_dalpha,
    enumerate_cyclic_words,
    find_orbit,
    k_bounds,
    length_gradient,
    length_hessian,
    pool_stats,
    pressure_transfer_matrix,
    quantity_derivs,
    scaled_sensitivity_matrix,
    total_length,
    validate_table,
    varah_bound,
)

LOG2 = math.log(2.0)


def test_c1_dimension_lies_in_pool_bracket_within_30s(std6, std6_pool):
    start = time.perf_counter()
    rpt = dimension_report(std6, alpha=0.0, depth=8, jobs=1)
    elapsed = time.perf_counter() - start

    # independent bracket from the chord and curvature extremes of the
    # n <= 8 rotation-class pool
    stats = pool_stats(std6_pool)
    k_lo, k_hi = k_bounds(std6_pool)
    lower = 2.0 * LOG2 / math.log1p(stats.d_max * k_hi)
    upper = 2.0 * LOG2 / math.log1p(stats.d_min * k_lo)

    assert lower <= rpt.dimension <= upper
    assert rpt.lower <= rpt.dimension <= rpt.upper
    assert elapsed < 30.0, f"depth-8 dimension run took {elapsed:.1f}s"


def test_c2_word_count_identity_and_entropy(std6):
    # closed-form count of admissible cyclic words, in exact integers
    for n in range(2, 13):
        expected = 2 ** n + 2 * (-1) ** n
        assert count_fix(3, n) == expected
        assert len(enumerate_cyclic_words(3, n)) == expected
    # pressure of the zero potential is the entropy log 2 at any depth
    for depth in (4, 7):
        est = pressure_transfer_matrix(std6, 0.0, depth, jobs=1)
        assert abs(est.value - LOG2) <= 1e-10


def test_c3_constant_potential_root_is_one():
    root, est, _, _ = bowen_root(ConstantPotential(3, LOG2), depth=6)
    assert abs(root - 1.0) <= 1e-10
    assert abs(est.value) <= 1e-10


def test_c4_sensitivity_matches_fd_on_three_families(rad6, shift6, exp6):
    start = time.perf_counter()
    bad = []
    for name, table in (("radius", rad6), ("shift", shift6),
                        ("expansion", exp6)):
        pool = cyclic_pool(table, 0.0, 6)
        consts = bound_constants(table, pool)
        for orb in pool:
            du = du_dalpha(table, orb)
            fd = fd_orbit_quantities(table, orb.symbols, 0.0)["du"]
            tol = np.maximum(1e-4 * np.abs(fd), 1e-8)
            if np.any(np.abs(du - fd) > tol):
                worst = np.max(np.abs(du - fd) - tol)
                bad.append(f"{name} {orb.symbols}: du excess {worst:.2e}")
            cap = consts.du_bound_at(orb.cos_phi) * (1.0 + 1e-12)
            if np.any(np.abs(du) > cap):
                bad.append(f"{name} {orb.symbols}: derivative bound violated")
    elapsed = time.perf_counter() - start
    assert not bad, "\n".join(bad)
    assert elapsed < 60.0, f"three-family sweep took {elapsed:.1f}s"


def test_c5_varah_certificate_on_every_solved_orbit(std6, rad6, std6_pool):
    for orb in list(std6_pool) + cyclic_pool(rad6, 0.1, 6):
        mat = scaled_sensitivity_matrix(orb)
        margin = mat.dominance_margin()
        assert margin >= 2.0 * float(np.min(orb.kappa)) - 1e-12
        inv_norm = np.max(np.abs(np.linalg.inv(mat.to_dense())).sum(axis=1))
        assert inv_norm <= 1.0 / margin + 1e-12
        assert varah_bound(mat) + 1e-15 >= inv_norm
    # the bouncing chord attains the bound exactly
    mat = scaled_sensitivity_matrix(find_orbit(std6, (1, 2), 0.0))
    assert varah_bound(mat) == 0.5
    inv_norm = np.max(np.abs(np.linalg.inv(mat.to_dense())).sum(axis=1))
    assert abs(inv_norm - 0.5) <= 1e-12


def test_c6_front_fixed_point_matches_forward_iteration(std6, std6_pool):
    for orb in std6_pool:
        k, residual = cycle_curvatures(orb)
        assert residual <= 1e-12
        k_fwd = 1.0
        for _ in range(80):
            for d_j, g_j in zip(orb.d, orb.gamma):
                k_fwd = k_fwd / (1.0 + d_j * k_fwd) + g_j
        assert abs(k_fwd - k[0]) <= 1e-10, orb.symbols
    # two-disk closed form for the bouncing chord
    k, _ = cycle_curvatures(find_orbit(std6, (1, 2), 0.0))
    assert abs(k[0] - (1.0 + math.sqrt(1.5))) <= 1e-10


def test_c7_dimension_derivative_fd_check_and_bounded_sweep(rad6, shift6):
    for name, table in (("radius", rad6), ("shift", shift6)):
        analytic, fd = dimension_derivative(table, alpha=0.0, depth=8, jobs=1,
                                            cache=OrbitCache(), fd_step=1e-3)
        err = abs(analytic - fd)
        assert err <= max(1e-3, 0.01 * abs(fd)), f"{name}: excess {err:.2e}"

    start = time.perf_counter()
    cache = OrbitCache()
    for a in np.linspace(-0.2, 0.3, 21):
        rpt = dimension_report(rad6, alpha=float(a), depth=8, jobs=1,
                               cache=cache)
        assert abs(rpt.d_dimension) <= rpt.derivative_bound, f"alpha={a}"
    elapsed = time.perf_counter() - start
    assert elapsed < 300.0, f"21-point sweep took {elapsed:.1f}s"


def test_c8_dimension_is_scaling_invariant(std6, scaled12):
    kw = dict(depth=8, jobs=1, derivative=False, bracket=False,
              convergence=False)
    twice = dimension_report(scaled12, alpha=0.0, **kw)
    once = dimension_report(std6, alpha=0.0, **kw)
    assert abs(once.dimension - twice.dimension) < 1e-6


KINDS = ("radius", "shift", "harmonic", "ellipse")


def _random_table(rng):
    """Random validated three-obstacle table with one deformed obstacle."""
    for _ in range(60):
        base = rng.uniform(3.2, 4.5)
        angles = (np.array([0.5, 0.5 + 2.0 / 3.0, 0.5 + 4.0 / 3.0]) * np.pi
                  + rng.uniform(-0.2, 0.2, 3))
        rad = base + rng.uniform(-0.15, 0.15, 3)
        radii = rng.uniform(0.8, 1.2, 3)
        kind = KINDS[int(rng.integers(0, len(KINDS)))]
        target = int(rng.integers(0, 3))
        obs = []
        for i in range(3):
            cx, cy = rad[i] * math.cos(angles[i]), rad[i] * math.sin(angles[i])
            r = radii[i]
            if i != target:
                obs.append(Circle((cx,), (cy,), (r,)))
            elif kind == "radius":
                obs.append(Circle((cx,), (cy,), (r, rng.uniform(-0.4, 0.4))))
            elif kind == "shift":
                obs.append(Circle((cx, rng.uniform(-0.4, 0.4)),
                                  (cy, rng.uniform(-0.4, 0.4)), (r,)))
            elif kind == "harmonic":
                obs.append(PolarHarmonic(
                    (cx,), (cy,), (r,),
                    cosines=((0.0,), (0.0, rng.uniform(-0.25, 0.25)),
                             (0.0, rng.uniform(-0.1, 0.1)))))
            else:
                obs.append(Ellipse(
                    (cx,), (cy,),
                    (r * rng.uniform(1.0, 1.2), rng.uniform(-0.3, 0.3)),
                    (r,), angle=(rng.uniform(0.0, math.pi),)))
        table = BilliardTable(obs, -0.08, 0.08)
        checks = validate_table(table, alpha_samples=(-0.08, 0.0, 0.08),
                                hull_samples=256)
        if all(c.passed for c in checks):
            return table, kind
    raise AssertionError("could not draw a valid random table")


def _random_word(rng):
    while True:
        n = int(rng.integers(2, 7))
        word = [int(rng.integers(1, 4))]
        for _ in range(n - 1):
            succ = [s for s in (1, 2, 3) if s != word[-1]]
            word.append(succ[int(rng.integers(0, 2))])
        if word[0] != word[-1]:
            return tuple(word)


def test_c9_randomized_finite_difference_battery():
    rng = np.random.default_rng(20260818)
    failures = []
    cases = 0
    while cases < 100:
        table, kind = _random_table(rng)
        word = _random_word(rng)
        alpha = float(rng.uniform(-0.05, 0.05))
        label = f"case {cases} [{kind} {word} alpha={alpha:.4f}]"
        cases += 1
        try:
            orb = find_orbit(table, word, alpha)
        except BilliardError as exc:
            failures.append(f"{label}: solve failed ({exc})")
            continue

        n = orb.n
        u0 = orb.u + rng.uniform(-0.05, 0.05, n)
        step = 1e-6

        grad = length_gradient(table, word, u0, alpha)
        fd_grad = np.empty(n)
        for j in range(n):
            up, um = u0.copy(), u0.copy()
            up[j] += step
            um[j] -= step
            fd_grad[j] = (total_length(table, word, up, alpha)
                          - total_length(table, word, um, alpha)) / (2 * step)
        if np.max(np.abs(grad - fd_grad)) > 1e-5:
            failures.append(f"{label}: gradient off by "
                            f"{np.max(np.abs(grad - fd_grad)):.2e}")

        hess = length_hessian(table, word, u0, alpha).to_dense()
        fd_hess = np.empty((n, n))
        for j in range(n):
            up, um = u0.copy(), u0.copy()
            up[j] += step
            um[j] -= step
            fd_hess[:, j] = (length_gradient(table, word, up, alpha)
                             - length_gradient(table, word, um, alpha)) / (2 * step)
        if np.max(np.abs(hess - fd_hess)) > 1e-5:
            failures.append(f"{label}: hessian off by "
                            f"{np.max(np.abs(hess - fd_hess)):.2e}")

        derivs = quantity_derivs(table, orb)
        fd = fd_orbit_quantities(table, word, alpha)
        for key in ("du", "dp", "dd", "dkappa", "dcos_phi", "dgamma"):
            got = np.asarray(getattr(derivs, key), dtype=float)
            want = np.asarray(fd[key], dtype=float)
            tol = np.maximum(1e-4 * np.abs(want), 1e-7)
            if np.any(np.abs(got - want) > tol):
                worst = np.max(np.abs(got - want) - tol)
                failures.append(f"{label}: {key} excess {worst:.2e}")

    assert cases >= 100
    assert not failures, f"{len(failures)} failures:\n" + "\n".join(failures)
