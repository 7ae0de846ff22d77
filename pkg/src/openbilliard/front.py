"""Convex-front curvature along periodic orbits and the expansion potential.

A convex wave front traveling along an orbit flattens on each free flight
and gains curvature 2 kappa / cos phi at each reflection.  Around a
periodic orbit this one-step recurrence has a unique positive periodic
solution, found here as the attracting fixed point of the cycle's Moebius
product.  The per-bounce unstable expansion factor is 1 + d k, and its
logarithm is the potential whose pressure root gives the dimension.

Indexing matches the orbit arrays: k[j] is the front curvature entering
chord j (the chord from bounce j-1 to bounce j), so one step is

    k[j+1] = k[j] / (1 + d[j] k[j]) + gamma[j]

flight along chord j followed by reflection at bounce j.  The expansion
factor a_u[j] = 1 + d[j] k[j] and the potential value psi_u[j] belong to
bounce j.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ValidationError
from .orbit import PoolStats

CYCLE_RESIDUAL_TOL = 1e-12


def _moebius_step(k, d, gamma):
    return k / (1.0 + d * k) + gamma


def cycle_curvatures(orbit, base=0):
    """Periodic front curvatures around the orbit, entering each chord.

    Composes the cycle's Moebius maps starting at ``base``, takes the
    positive fixed point of the product, and propagates it around once.
    """
    n = orbit.n
    d = np.roll(orbit.d, -base)
    gamma = np.roll(orbit.gamma, -base)
    # one step k -> k/(1+dk) + gamma is [[1+gamma d, gamma], [d, 1]]
    M = np.eye(2)
    for j in range(n):
        step = np.array([[1.0 + gamma[j] * d[j], gamma[j]], [d[j], 1.0]])
        M = step @ M
        M /= np.max(np.abs(M))        # Moebius action is scale invariant
    A, B = M[0]
    C, Dm = M[1]
    disc = (A - Dm) ** 2 + 4.0 * B * C
    if C <= 0.0 or disc < 0.0:
        raise NumericalError("cycle Moebius product lost positivity")
    k0 = ((A - Dm) + math.sqrt(disc)) / (2.0 * C)
    k = np.empty(n)
    k[0] = k0
    for j in range(n - 1):
        k[j + 1] = _moebius_step(k[j], d[j], gamma[j])
    wrap = _moebius_step(k[n - 1], d[n - 1], gamma[n - 1])
    residual = abs(wrap - k0)
    if residual > CYCLE_RESIDUAL_TOL * max(1.0, abs(k0)):
        raise NumericalError(
            f"front curvature failed to close up: residual {residual:.3e}")
    if np.any(k <= 0.0):
        raise NumericalError("nonpositive front curvature on a cycle")
    return np.roll(k, base), residual


@dataclass(frozen=True)
class FrontData:
    """Front curvatures and expansion data around one periodic orbit."""

    k: np.ndarray
    a_u: np.ndarray
    a_s: np.ndarray
    psi_u: np.ndarray
    psi_s: np.ndarray
    beta: np.ndarray
    residual: float

    @property
    def unstable_multiplier(self):
        return float(np.exp(np.sum(self.psi_u)))

    def to_payload(self):
        return {"k": self.k.tolist(), "psi_u": self.psi_u.tolist(),
                "residual": self.residual}


def front_data(orbit):
    """Curvatures, expansion factors and potential values for one orbit."""
    k, residual = cycle_curvatures(orbit)
    a_u = 1.0 + orbit.d * k
    psi_u = np.log(a_u)
    beta = 1.0 / a_u**2
    return FrontData(k=k, a_u=a_u, a_s=1.0 / a_u, psi_u=psi_u,
                     psi_s=-psi_u, beta=beta, residual=residual)


def dk_dalpha(orbit, front, derivs):
    """Derivative of the periodic front curvatures along the deformation.

    Linearizing the one-step map gives dk[j+1] = beta[j] dk[j] + eta[j]
    with per-step forcing eta; the periodic solution is the geometric sum
    of forcings weighted by downstream contraction factors.
    """
    beta = front.beta
    eta = derivs.dgamma - front.k**2 * beta * derivs.dd
    n = orbit.n
    # suffix products of beta after each step, suf[i] = prod_{l>i} beta[l]
    suf = np.ones(n)
    if n > 1:
        suf[:-1] = np.cumprod(beta[::-1])[:-1][::-1]
    total = float(np.prod(beta))
    dk = np.empty(n)
    dk[0] = float(np.dot(suf, eta)) / (1.0 - total)
    for j in range(n - 1):
        dk[j + 1] = beta[j] * dk[j] + eta[j]
    return dk


def dpsi_dalpha(orbit, front, derivs, dk=None):
    """Derivative of the per-bounce expansion potential along the deformation."""
    if dk is None:
        dk = dk_dalpha(orbit, front, derivs)
    return (front.k * derivs.dd + orbit.d * dk) / front.a_u


def k_bounds(pool, tol=1e-14, max_iter=200):
    """Interval certain to contain every periodic front curvature of the pool.

    Starts from the absorbing interval [gamma_min, gamma_max + 1/d_min] and
    sharpens it by the interval self-map of the one-step recurrence, using
    the worst chord for each endpoint.  Monotone, so the limit interval
    contains every cycle's curvatures.
    """
    if isinstance(pool, PoolStats):
        stats = pool
    else:
        from .orbit import pool_stats
        stats = pool_stats(pool)
    if stats.gamma_min <= 0.0:
        raise ValidationError("front recurrence needs positive gamma")
    lo = stats.gamma_min
    hi = stats.gamma_max + 1.0 / stats.d_min
    for _ in range(max_iter):
        lo_next = stats.gamma_min + lo / (1.0 + stats.d_max * lo)
        hi_next = stats.gamma_max + hi / (1.0 + stats.d_min * hi)
        if abs(lo_next - lo) < tol * max(1.0, lo) \
                and abs(hi_next - hi) < tol * max(1.0, hi):
            lo, hi = lo_next, hi_next
            break
        lo, hi = lo_next, hi_next
    return lo, hi


@dataclass(frozen=True)
class FrontBounds:
    """A priori bounds for front curvatures and the potential derivative."""

    k_lo: float
    k_hi: float
    beta_max: float
    dk_bound: float
    dpsi_bound: float
    expansion_floor: float

    def contains(self, k):
        k = np.asarray(k, dtype=float)
        return bool(np.all(k >= self.k_lo - 1e-12) and np.all(k <= self.k_hi + 1e-12))


def derivative_bounds(consts, stats):
    """Bound the alpha-derivatives of front curvature and potential.

    consts are the orbit-level derivative bounds; stats the pool extremes.
    The potential-derivative bound is exact over the (d, k) rectangle
    because the bounding expression is monotone in each variable alone,
    so the maximum sits at one of the four corners.
    """
    k_lo, k_hi = k_bounds(stats)
    beta_max = 1.0 / (1.0 + stats.d_min * k_lo) ** 2
    eta_max = consts.dgamma_bound + k_hi**2 * beta_max * consts.dd_bound
    dk_bound = eta_max / (1.0 - beta_max)
    corners = [(d, k) for d in (stats.d_min, stats.d_max)
               for k in (k_lo, k_hi)]
    dpsi_bound = max((consts.dd_bound * k + dk_bound * d) / (1.0 + d * k)
                     for d, k in corners)
    expansion_floor = math.log1p(stats.d_min * k_lo)
    return FrontBounds(k_lo=k_lo, k_hi=k_hi, beta_max=beta_max,
                       dk_bound=dk_bound, dpsi_bound=dpsi_bound,
                       expansion_floor=expansion_floor)
