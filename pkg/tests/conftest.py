"""Shared fixtures: reference tables, deformation families, FD helpers.

All reference tables are built from three unit disks on an equilateral
triangle of side 6 (center spacing 6, gap 4 between neighbors), which keeps
every table comfortably inside the no-eclipse regime.  Deforming variants
attach a polynomial alpha dependence to one obstacle (or, for the dilation
family, to all three).
"""

import json
import math

import numpy as np
import pytest

from openbilliard import BilliardTable, Circle, find_orbit
from openbilliard.symbolic import enumerate_cyclic_words

ALPHA_LO, ALPHA_HI = -0.2, 0.3


def triangle_centers(side):
    """Vertices of an equilateral triangle with the given side length."""
    rad = side / math.sqrt(3.0)
    angles = [0.5 * math.pi + k * 2.0 * math.pi / 3.0 for k in range(3)]
    return [(rad * math.cos(a), rad * math.sin(a)) for a in angles]


def static_table(side=6.0, radius=1.0):
    obs = [Circle((x,), (y,), (radius,)) for x, y in triangle_centers(side)]
    return BilliardTable(obs)


def radius_family(side=6.0, rate=1.0, lo=ALPHA_LO, hi=ALPHA_HI):
    """Obstacle 1 grows as radius = 1 + rate * alpha; others static."""
    cs = triangle_centers(side)
    obs = [Circle((cs[0][0],), (cs[0][1],), (1.0, rate))]
    obs += [Circle((x,), (y,), (1.0,)) for x, y in cs[1:]]
    return BilliardTable(obs, lo, hi)


def shift_family(side=6.0, vx=1.0, vy=0.0, lo=ALPHA_LO, hi=ALPHA_HI):
    """Obstacle 1 translates by alpha * (vx, vy); others static."""
    cs = triangle_centers(side)
    obs = [Circle((cs[0][0], vx), (cs[0][1], vy), (1.0,))]
    obs += [Circle((x,), (y,), (1.0,)) for x, y in cs[1:]]
    return BilliardTable(obs, lo, hi)


def dilation_family(side=6.0, lo=ALPHA_LO, hi=ALPHA_HI):
    """All centers scale by (1 + alpha/side): the triangle side is side+alpha."""
    obs = [Circle((x, x / side), (y, y / side), (1.0,))
           for x, y in triangle_centers(side)]
    return BilliardTable(obs, lo, hi, allow_multiple_deformed=True)


def aligned_table(deform=None, lo=ALPHA_LO, hi=ALPHA_HI):
    """Triangle rotated so the chord between obstacles 1 and 2 runs along x.

    deform: None (static), "shift-x" (obstacle 1 moves toward obstacle 2 at
    unit rate), or "radius" (obstacle 1 radius = 1 + alpha).
    """
    cs = [(-3.0, 0.0), (3.0, 0.0), (0.0, 3.0 * math.sqrt(3.0))]
    if deform == "shift-x":
        first = Circle((cs[0][0], 1.0), (cs[0][1],), (1.0,))
    elif deform == "radius":
        first = Circle((cs[0][0],), (cs[0][1],), (1.0, 1.0))
    else:
        first = Circle((cs[0][0],), (cs[0][1],), (1.0,))
    obs = [first] + [Circle((x,), (y,), (1.0,)) for x, y in cs[1:]]
    if deform is None:
        return BilliardTable(obs)
    return BilliardTable(obs, lo, hi)


@pytest.fixture(scope="session")
def std6():
    return static_table(6.0, 1.0)


@pytest.fixture(scope="session")
def rad6():
    return radius_family()


@pytest.fixture(scope="session")
def shift6():
    return shift_family()


@pytest.fixture(scope="session")
def exp6():
    return dilation_family()


@pytest.fixture(scope="session")
def std60():
    return static_table(60.0, 1.0)


@pytest.fixture(scope="session")
def scaled12():
    # the side-6 table scaled by 2: dimension must be identical
    return static_table(12.0, 2.0)


@pytest.fixture(scope="session")
def std6_pool(std6):
    """Solved orbits for every cyclic word class with n <= 8 on the static table."""
    return cyclic_pool(std6, 0.0, 8)


def cyclic_pool(table, alpha, depth, dedupe=True):
    """Solve one orbit per cyclic word (per rotation class when dedupe)."""
    seen = set()
    orbits = []
    for n in range(2, depth + 1):
        for word in enumerate_cyclic_words(table.m, n):
            if dedupe:
                key = canonical(word)
                if key in seen:
                    continue
                seen.add(key)
            orbits.append(find_orbit(table, word, alpha))
    return orbits


def canonical(word):
    w = tuple(word)
    return min(w[r:] + w[:r] for r in range(len(w)))


def obstacle_perimeters(table, word, alpha):
    return np.array([table.obstacle(s).perimeter(alpha) for s in word])


def minimage(delta, perims):
    """Difference of arclength charts reduced to the nearest image."""
    return np.mod(delta + 0.5 * perims, perims) - 0.5 * perims


def fd_orbit_quantities(table, word, alpha, step=1e-5):
    """Central finite differences across alpha of all per-bounce quantities."""
    hi = find_orbit(table, word, alpha + step)
    lo = find_orbit(table, word, alpha - step)
    perims = obstacle_perimeters(table, word, alpha)
    inv = 1.0 / (2.0 * step)
    return {
        "du": minimage(hi.u - lo.u, perims) * inv,
        "dp": (hi.points - lo.points) * inv,
        "dd": (hi.d - lo.d) * inv,
        "dkappa": (hi.kappa - lo.kappa) * inv,
        "dcos_phi": (hi.cos_phi - lo.cos_phi) * inv,
        "dgamma": (hi.gamma - lo.gamma) * inv,
    }


def assert_fd_match(analytic, fd, rel=1e-4, abs_floor=1e-7, label=""):
    """Entrywise |analytic - fd| <= max(rel * |fd|, abs_floor)."""
    analytic = np.asarray(analytic, dtype=float)
    fd = np.asarray(fd, dtype=float)
    tol = np.maximum(rel * np.abs(fd), abs_floor)
    err = np.abs(analytic - fd)
    assert np.all(err <= tol), (
        f"{label}: worst excess {np.max(err - tol):.3e}\n"
        f"analytic = {analytic}\nfd       = {fd}")


def write_config(path, table, extra=None):
    cfg = table.to_config()
    if extra:
        cfg.update(extra)
    path.write_text(json.dumps(cfg, indent=1))
    return str(path)
