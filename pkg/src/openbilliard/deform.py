"""First derivatives of orbit data along the deformation, with certified bounds.

Differentiating the stationarity condition of the chord-length function
gives a linear system for du/dalpha whose matrix is the length Hessian.
In scaled variables y_j = cos(phi_j) du_j the system matrix A has diagonal
1/d_j + 1/d_{j+1} + gamma_j and off-diagonal couplings 1/d_j, which is
strictly diagonally dominant with gap at least min_j gamma_j >= 2 kappa_min.
That dominance gives a priori bounds on every derivative downstream.

Sign convention: stationarity reads grad(u(alpha), alpha) = 0, so the
scaled system solved here is A y = -b with b the scaled alpha-gradient of
the gradient.  Derivatives of the bounce data (chords, curvatures,
collision cosines, curvature increments gamma) follow by exact chain rule
and are finite-difference tested.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .geometry import deformation_constants
from .linalg import CyclicTridiagonal, cyclic_tridiag_solve
from .orbit import PeriodicOrbit, _context


def _alpha_jets(ctx, orbit, max_q):
    return [ctx.jets(sym, u, max_q=max_q, max_qp=1)
            for sym, u in zip(orbit.symbols, orbit.u)]


def scaled_sensitivity_matrix(orbit):
    """The scaled sensitivity matrix A (Hessian = D A D, D = diag cos phi)."""
    a = 1.0 / orbit.d
    diag = a + np.roll(a, -1) + orbit.gamma
    return CyclicTridiagonal(diag, a)


def alpha_rhs(table, orbit, context=None):
    """Scaled right-hand side b_j = (d/dalpha of gradient_j) / cos phi_j."""
    ctx = _context(table, orbit.alpha, context)
    jets = _alpha_jets(ctx, orbit, max_q=1)
    tans = np.array([j.tangent for j in jets])
    dal = np.array([j.dal for j in jets])
    dal_u = np.array([j.dal_u for j in jets])
    pts = orbit.points
    w = pts - np.roll(pts, 1, axis=0)
    v = w / orbit.d[:, None]
    delta = dal - np.roll(dal, 1, axis=0)          # chord j endpoint motion
    vd = np.einsum("ij,ij->i", v, delta)
    head = (np.einsum("ij,ij->i", delta, tans)
            - vd * np.einsum("ij,ij->i", v, tans)) / orbit.d \
        + np.einsum("ij,ij->i", v, dal_u)
    tans_prev = np.roll(tans, 1, axis=0)
    tail = (-np.einsum("ij,ij->i", delta, tans_prev)
            + vd * np.einsum("ij,ij->i", v, tans_prev)) / orbit.d \
        - np.einsum("ij,ij->i", v, np.roll(dal_u, 1, axis=0))
    raw = head + np.roll(tail, -1)
    return raw / orbit.cos_phi


def du_dalpha(table, orbit, context=None, return_system=False):
    """Derivative of the bounce parameters along the deformation.

    Solves the scaled system A y = -b, then du_j = y_j / cos phi_j.
    """
    ctx = _context(table, orbit.alpha, context)
    b = alpha_rhs(table, orbit, context=ctx)
    A = scaled_sensitivity_matrix(orbit)
    y = cyclic_tridiag_solve(A, -b)
    du = y / orbit.cos_phi
    if return_system:
        return du, b, y, A
    return du


@dataclass(frozen=True)
class AlphaDerivatives:
    """Per-bounce first derivatives along the deformation."""

    du: np.ndarray
    dp: np.ndarray
    dd: np.ndarray
    dkappa: np.ndarray
    dcos_phi: np.ndarray
    dgamma: np.ndarray
    rhs: np.ndarray
    scaled: np.ndarray

    def to_payload(self):
        return {"du": self.du.tolist(), "dp": self.dp.tolist(),
                "dd": self.dd.tolist(), "dkappa": self.dkappa.tolist(),
                "dcos_phi": self.dcos_phi.tolist(),
                "dgamma": self.dgamma.tolist()}


def quantity_derivs(table, orbit, du=None, context=None):
    """Chain-rule derivatives of d, kappa, cos phi and gamma per bounce."""
    ctx = _context(table, orbit.alpha, context)
    if du is None:
        du_arr, b, y, _ = du_dalpha(table, orbit, context=ctx, return_system=True)
    else:
        du_arr = np.asarray(du, dtype=float)
        b = alpha_rhs(table, orbit, context=ctx)
        y = du_arr * orbit.cos_phi
    jets = _alpha_jets(ctx, orbit, max_q=3)
    tans = np.array([j.tangent for j in jets])
    d2 = np.array([j.d2 for j in jets])
    d3 = np.array([j.d3 for j in jets])
    dal = np.array([j.dal for j in jets])
    dal_u = np.array([j.dal_u for j in jets])
    dal_uu = np.array([j.dal_uu for j in jets])

    dp = tans * du_arr[:, None] + dal
    pts = orbit.points
    w = pts - np.roll(pts, 1, axis=0)
    v = w / orbit.d[:, None]
    dw = dp - np.roll(dp, 1, axis=0)
    dd = np.einsum("ij,ij->i", v, dw)

    cross = lambda a, b_: a[:, 0] * b_[:, 1] - a[:, 1] * b_[:, 0]
    kappa_u = cross(tans, d3)
    kappa_a = cross(dal_u, d2) + cross(tans, dal_uu)
    dkappa = kappa_u * du_arr + kappa_a

    # cos(2 phi_j) from the two chords at bounce j, differentiated
    w_next = np.roll(w, -1, axis=0)
    dw_next = np.roll(dw, -1, axis=0)
    d_next = np.roll(orbit.d, -1)
    dd_next = np.roll(dd, -1)
    dot = np.einsum("ij,ij->i", w_next, -w)
    c2 = dot / (d_next * orbit.d)
    ddot = np.einsum("ij,ij->i", dw_next, -w) + np.einsum("ij,ij->i", w_next, -dw)
    dc2 = ddot / (d_next * orbit.d) - c2 * (dd_next / d_next + dd / orbit.d)
    dcos_phi = dc2 / (4.0 * orbit.cos_phi)

    dgamma = 2.0 * dkappa / orbit.cos_phi \
        - 2.0 * orbit.kappa * dcos_phi / orbit.cos_phi**2
    return AlphaDerivatives(du=du_arr, dp=dp, dd=dd, dkappa=dkappa,
                            dcos_phi=dcos_phi, dgamma=dgamma, rhs=b, scaled=y)


def du_dalpha_second_fd(table, word, alpha, step=1e-4, **orbit_kw):
    """Second-derivative estimate: central differences of the analytic du."""
    from .orbit import find_orbit

    table.check_alpha(alpha - step)
    table.check_alpha(alpha + step)
    vals = []
    for a in (alpha + step, alpha - step):
        orb = find_orbit(table, word, a, **orbit_kw)
        vals.append(du_dalpha(table, orb))
    return (vals[0] - vals[1]) / (2.0 * step)


@dataclass(frozen=True)
class BoundConstants:
    """A priori bounds on the alpha-derivatives over an orbit pool.

    Derived from the jet-norm constants and the pool's geometric extremes.
    multiplicity is the worst number of deformed endpoints on one chord
    (0 static, 1 with a single deformed obstacle, 2 otherwise).
    """

    du_bound: float
    dp_bound: float
    dd_bound: float
    dkappa_bound: float
    dcos_bound: float
    dgamma_bound: float
    rhs_bound: float
    d_min: float
    cos_phi_min: float
    kappa_min: float
    multiplicity: int

    def du_bound_at(self, cos_phi):
        """Per-bounce parameter-derivative bound at collision cosine cos_phi."""
        return self.du_bound * self.cos_phi_min / cos_phi


def bound_constants(table, orbit_pool, constants=None):
    """Evaluate the derivative bound constants over a pool of solved orbits.

    The pool supplies the chord floor and the collision-angle ceiling; the
    curvature floor is the larger of the pool's and the geometric grid's.
    """
    orbit_pool = list(orbit_pool)
    if not orbit_pool:
        raise ValidationError("bound_constants needs a nonempty orbit pool")
    if constants is None:
        constants = deformation_constants(table)
    c01 = constants[(0, 1)]
    c11 = constants[(1, 1)]
    c20 = constants[(2, 0)]
    c21 = constants[(2, 1)]
    c30 = constants[(3, 0)]
    d_min = min(o.d_min for o in orbit_pool)
    cos_min = min(float(np.min(o.cos_phi)) for o in orbit_pool)
    kappa_pool = min(float(np.min(o.kappa)) for o in orbit_pool)
    kappa_min = max(constants.kappa_min, kappa_pool)
    deformed = len(table.deformed_indices)
    mult = 0 if deformed == 0 else (1 if deformed == 1 else 2)

    rhs_bound = 2.0 * max(mult, 1) * c01 / d_min + 2.0 * c11 if mult else 0.0
    du_bound = (max(mult, 1) * c01 + c11 * d_min) / (cos_min * kappa_min * d_min)
    if mult == 0:
        du_bound = 0.0
    dp_bound = du_bound + c01
    dd_bound = 2.0 * du_bound + mult * c01
    dkappa_bound = c30 * du_bound + c21 + c11 * c20
    dcos_bound = dd_bound / (2.0 * d_min * cos_min)
    dgamma_bound = 2.0 * dkappa_bound / cos_min \
        + 2.0 * constants.kappa_max * dcos_bound / cos_min**2
    return BoundConstants(
        du_bound=du_bound, dp_bound=dp_bound, dd_bound=dd_bound,
        dkappa_bound=dkappa_bound, dcos_bound=dcos_bound,
        dgamma_bound=dgamma_bound, rhs_bound=rhs_bound,
        d_min=d_min, cos_phi_min=cos_min, kappa_min=kappa_min,
        multiplicity=mult)
