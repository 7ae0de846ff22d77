"""Deformable convex obstacles, billiard tables, and geometric validation.

Boundaries are closed, strictly convex plane curves parametrized
counterclockwise by arclength u in [0, L(alpha)).  The outward unit normal
is the tangent rotated by -pi/2, and the curvature kappa (the inner product
of the inward normal with the second derivative) is positive.  Every shape
coefficient is a polynomial in the deformation parameter alpha of degree at
most 3, so all derivative jets served here are exact.

Supported boundary kinds:

* ``circle``          closed-form jets,
* ``ellipse``         natural parameter t, arclength by cached quadrature,
* ``polar-harmonic``  radius rho(t) = base + sum_k c_k cos(k t), same
                      quadrature machinery.

Arclength charts are anchored at the natural-parameter origin t = 0 for
every alpha.  When the perimeter varies with alpha the chart slips
tangentially away from the anchor, and the alpha-jets returned here include
that drift: they are the exact partial derivatives of the chart, which is
what finite-difference identities and the implicit-function system for
orbit derivatives require.
"""

import math
import threading
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npol
from shapely.geometry import MultiPoint, Polygon

from .errors import (
    AlphaRangeError,
    DegenerateObstacleError,
    JetOrderError,
    UnknownObstacleError,
    ValidationError,
)

TWO_PI = 2.0 * math.pi

# jets are served for derivative orders (q, q') with q <= 3, q' <= 1,
# except the (3, 1) combination which no downstream formula consumes
_JET_SLOTS = {
    (0, 0): "point",
    (1, 0): "tangent",
    (2, 0): "d2",
    (3, 0): "d3",
    (0, 1): "dal",
    (1, 1): "dal_u",
    (2, 1): "dal_uu",
}

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(12)
_ARC_INTERVALS = 512


def _poly(coeffs):
    c = np.asarray(coeffs, dtype=float).ravel()
    if c.size == 0:
        c = np.zeros(1)
    if c.size > 4:
        raise ValidationError("shape coefficients are polynomials in alpha of degree <= 3")
    return c


def _pval(c, a):
    return float(npol.polyval(a, c))


def _pder(c):
    return npol.polyder(c) if len(c) > 1 else np.zeros(1)


def _deforming(*polys):
    return any(len(p) > 1 and np.any(p[1:] != 0.0) for p in polys)


def cross2(a, b):
    """z component of the planar cross product a x b."""
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def outward_normal(tangent):
    """Tangent rotated by -pi/2."""
    return np.array([tangent[1], -tangent[0]])


@dataclass(frozen=True)
class BoundaryJet:
    """Derivatives of an arclength chart phi(u, alpha) at one point.

    Mixed alpha slots are None when they were not requested.
    """

    point: np.ndarray
    tangent: np.ndarray
    d2: np.ndarray | None = None
    d3: np.ndarray | None = None
    dal: np.ndarray | None = None
    dal_u: np.ndarray | None = None
    dal_uu: np.ndarray | None = None

    def partial(self, q, qp):
        """The (d/du)^q (d/dalpha)^qp derivative as a 2-vector."""
        name = _JET_SLOTS.get((int(q), int(qp)))
        if name is None:
            raise JetOrderError(f"jet order ({q},{qp}) beyond supported smoothness")
        value = getattr(self, name)
        if value is None:
            raise JetOrderError(f"jet order ({q},{qp}) was not requested")
        return value

    @property
    def normal(self):
        return outward_normal(self.tangent)

    @property
    def curvature(self):
        if self.d2 is None:
            raise JetOrderError("curvature needs a second-order jet")
        return float(cross2(self.tangent, self.d2))


class CurveFamily:
    """One deformable obstacle boundary.

    Concrete kinds implement ``perimeter``, ``jets`` and
    ``boundary_points``; everything else is shared.
    """

    kind = "?"

    def __init__(self, index=0):
        self.index = int(index)
        self.deformed = False

    # -- required interface -------------------------------------------------
    def perimeter(self, alpha):
        raise NotImplementedError

    def jets(self, u, alpha, max_q=3, max_qp=1):
        raise NotImplementedError

    def boundary_points(self, alpha, samples):
        raise NotImplementedError

    def to_config(self):
        raise NotImplementedError

    # -- shared helpers -----------------------------------------------------
    def point(self, u, alpha):
        return self.jets(u, alpha, max_q=1, max_qp=0).point

    def curvature(self, u, alpha):
        j = self.jets(u, alpha, max_q=2, max_qp=0)
        return float(cross2(j.tangent, j.d2))

    def nearest_parameter(self, xy, alpha, coarse=256):
        """Arclength parameter of the boundary point nearest to xy."""
        from scipy.optimize import minimize_scalar

        xy = np.asarray(xy, dtype=float)
        L = self.perimeter(alpha)
        grid = np.linspace(0.0, L, coarse, endpoint=False)
        pts = np.array([self.point(u, alpha) for u in grid])
        k = int(np.argmin(np.einsum("ij,ij->i", pts - xy, pts - xy)))
        lo = grid[k] - L / coarse
        hi = grid[k] + L / coarse

        def dist2(u):
            p = self.point(u % L, alpha)
            return float(np.dot(p - xy, p - xy))

        res = minimize_scalar(dist2, bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12 * max(1.0, L)})
        return float(res.x % L)

    @staticmethod
    def _check_orders(max_q, max_qp):
        if not (0 <= max_q <= 3 and 0 <= max_qp <= 1):
            raise JetOrderError(f"jet orders q<={max_q}, q'<={max_qp} beyond supported smoothness")


class Circle(CurveFamily):
    """Circle with polynomial-in-alpha center and radius."""

    kind = "circle"

    def __init__(self, center_x, center_y, radius, index=0):
        super().__init__(index)
        self.cx = _poly(center_x)
        self.cy = _poly(center_y)
        self.r = _poly(radius)
        self.dcx, self.dcy, self.dr = _pder(self.cx), _pder(self.cy), _pder(self.r)
        self.deformed = _deforming(self.cx, self.cy, self.r)

    def _radius(self, alpha):
        r = _pval(self.r, alpha)
        if r <= 0.0:
            raise ValidationError(f"obstacle {self.index}: radius {r} <= 0 at alpha={alpha}")
        return r

    def perimeter(self, alpha):
        return TWO_PI * self._radius(alpha)

    def center(self, alpha):
        return np.array([_pval(self.cx, alpha), _pval(self.cy, alpha)])

    def jets(self, u, alpha, max_q=3, max_qp=1):
        self._check_orders(max_q, max_qp)
        r = self._radius(alpha)
        u = float(u) % (TWO_PI * r)
        th = u / r
        er = np.array([math.cos(th), math.sin(th)])
        et = np.array([-math.sin(th), math.cos(th)])
        point = self.center(alpha) + r * er
        d2 = -er / r if max_q >= 2 else None
        d3 = -et / (r * r) if max_q >= 3 else None
        dal = dal_u = dal_uu = None
        if max_qp >= 1:
            rp = _pval(self.dr, alpha)
            cp = np.array([_pval(self.dcx, alpha), _pval(self.dcy, alpha)])
            # anchored arclength chart: d(theta)/d(alpha) = -u r'/r^2
            dal = cp + rp * er - (u * rp / r) * et
            if max_q >= 1:
                dal_u = (u * rp / r**2) * er
            if max_q >= 2:
                dal_uu = (rp / r**2) * er + (u * rp / r**3) * et
        return BoundaryJet(point=point, tangent=et,
                           d2=d2, d3=d3, dal=dal, dal_u=dal_u, dal_uu=dal_uu)

    def boundary_points(self, alpha, samples):
        r = self._radius(alpha)
        th = np.linspace(0.0, TWO_PI, samples, endpoint=False)
        return self.center(alpha) + r * np.stack([np.cos(th), np.sin(th)], axis=1)

    def nearest_parameter(self, xy, alpha, coarse=256):
        r = self._radius(alpha)
        d = np.asarray(xy, dtype=float) - self.center(alpha)
        return (math.atan2(d[1], d[0]) % TWO_PI) * r

    def to_config(self):
        return {"kind": self.kind, "center": [self.cx.tolist(), self.cy.tolist()],
                "radius": self.r.tolist()}


@dataclass
class _ArcTable:
    """Cumulative arclength (and its alpha rate) on a natural-parameter grid."""

    t_edges: np.ndarray
    u_nodes: np.ndarray
    ua_nodes: np.ndarray
    length: float


class _NaturalCurve(CurveFamily):
    """Shared machinery for curves defined in a natural parameter t.

    Subclasses provide `_nat(t, alpha, with_alpha)` returning the t/alpha
    partials of the defining map X(t, alpha) as arrays of shape (len(t), 2).
    """

    def __init__(self, index=0):
        super().__init__(index)
        self._tables = {}
        self._lock = threading.Lock()

    def _nat(self, t, alpha, with_alpha):
        raise NotImplementedError

    def _speed(self, t, alpha):
        xt = self._nat(np.atleast_1d(t), alpha, False)["xt"]
        return np.sqrt(np.einsum("ij,ij->i", xt, xt))

    def _speed_alpha(self, t, alpha):
        n = self._nat(np.atleast_1d(t), alpha, True)
        s = np.sqrt(np.einsum("ij,ij->i", n["xt"], n["xt"]))
        return np.einsum("ij,ij->i", n["xt"], n["xta"]) / s

    def _table(self, alpha):
        with self._lock:
            tab = self._tables.get(alpha)
        if tab is not None:
            return tab
        edges = np.linspace(0.0, TWO_PI, _ARC_INTERVALS + 1)
        h = edges[1] - edges[0]
        # all Gauss-Legendre nodes of all intervals at once
        mid = (edges[:-1] + edges[1:]) / 2.0
        tt = (mid[:, None] + (h / 2.0) * _GL_NODES[None, :]).ravel()
        sp = self._speed(tt, alpha).reshape(_ARC_INTERVALS, -1)
        du = (h / 2.0) * sp @ _GL_WEIGHTS
        u_nodes = np.concatenate([[0.0], np.cumsum(du)])
        if self.deformed:
            spa = self._speed_alpha(tt, alpha).reshape(_ARC_INTERVALS, -1)
            dua = (h / 2.0) * spa @ _GL_WEIGHTS
            ua_nodes = np.concatenate([[0.0], np.cumsum(dua)])
        else:
            ua_nodes = np.zeros_like(u_nodes)
        tab = _ArcTable(edges, u_nodes, ua_nodes, float(u_nodes[-1]))
        with self._lock:
            self._tables.setdefault(alpha, tab)
        return tab

    def perimeter(self, alpha):
        return self._table(alpha).length

    def _quad_from_node(self, fvals_fn, t0, t, alpha):
        if t == t0:
            return 0.0
        nodes = (t0 + t) / 2.0 + ((t - t0) / 2.0) * _GL_NODES
        return float(((t - t0) / 2.0) * np.dot(_GL_WEIGHTS, fvals_fn(nodes, alpha)))

    def _u_of_t(self, t, alpha):
        tab = self._table(alpha)
        t = float(t) % TWO_PI
        k = min(int(t / (TWO_PI / _ARC_INTERVALS)), _ARC_INTERVALS - 1)
        return tab.u_nodes[k] + self._quad_from_node(self._speed, tab.t_edges[k], t, alpha)

    def _t_of_u(self, u, alpha):
        tab = self._table(alpha)
        u = float(u) % tab.length
        k = int(np.searchsorted(tab.u_nodes, u, side="right")) - 1
        k = min(max(k, 0), _ARC_INTERVALS - 1)
        lo, hi = tab.t_edges[k], tab.t_edges[k + 1]
        # Newton from the linear interpolant, bisection safeguarded
        du = tab.u_nodes[k + 1] - tab.u_nodes[k]
        t = lo + (u - tab.u_nodes[k]) / du * (hi - lo)
        for _ in range(12):
            f = tab.u_nodes[k] + self._quad_from_node(self._speed, tab.t_edges[k], t, alpha) - u
            if abs(f) <= 1e-13 * max(1.0, tab.length):
                break
            if f > 0:
                hi = t
            elif f < 0:
                lo = t
            s = float(self._speed(np.array([t]), alpha)[0])
            t_new = t - f / s
            if not (lo <= t_new <= hi):
                t_new = (lo + hi) / 2.0
            if t_new == t:
                break
            t = t_new
        return t

    def _u_alpha_of_t(self, t, alpha):
        tab = self._table(alpha)
        t = float(t) % TWO_PI
        k = min(int(t / (TWO_PI / _ARC_INTERVALS)), _ARC_INTERVALS - 1)
        return tab.ua_nodes[k] + self._quad_from_node(self._speed_alpha, tab.t_edges[k], t, alpha)

    def jets(self, u, alpha, max_q=3, max_qp=1):
        self._check_orders(max_q, max_qp)
        t = self._t_of_u(u, alpha)
        want_alpha = max_qp >= 1
        n = self._nat(np.array([t]), alpha, want_alpha)
        X = n["x"][0]
        Xt = n["xt"][0]
        Xtt = n["xtt"][0]
        Xttt = n["xttt"][0]
        s = math.hypot(Xt[0], Xt[1])
        st = float(np.dot(Xt, Xtt)) / s
        stt = (float(np.dot(Xtt, Xtt)) + float(np.dot(Xt, Xttt)) - st * st) / s
        tangent = Xt / s
        d2 = Xtt / s**2 - Xt * (st / s**3) if max_q >= 2 else None
        d3 = None
        if max_q >= 3:
            d3 = Xttt / s**3 - 3.0 * Xtt * (st / s**4) + Xt * (3.0 * st**2 / s**5 - stt / s**4)
        dal = dal_u = dal_uu = None
        if want_alpha:
            Xa, Xta, Xtta = n["xa"][0], n["xta"][0], n["xtta"][0]
            sa = float(np.dot(Xt, Xta)) / s
            sta = (float(np.dot(Xtt, Xta)) + float(np.dot(Xt, Xtta)) - st * sa) / s
            ua = self._u_alpha_of_t(t, alpha) if self.deformed else 0.0
            eta = -ua / s                      # dt/dalpha at fixed u
            eta_t = -sa / s - eta * st / s
            dal = Xa + Xt * eta
            if max_q >= 1:
                dal_u = (Xta + Xtt * eta + Xt * eta_t) / s
            if max_q >= 2:
                termA = Xtta / s**2 - 2.0 * Xtt * (sa / s**3)
                termB = Xta * (st / s**3) + Xt * (sta / s**3) - 3.0 * Xt * (st * sa / s**4)
                termC = eta * (Xttt / s**2 - 3.0 * Xtt * (st / s**3)
                               - Xt * (stt / s**3) + 3.0 * Xt * (st**2 / s**4))
                dal_uu = termA - termB + termC
        return BoundaryJet(point=X, tangent=tangent, d2=d2, d3=d3,
                           dal=dal, dal_u=dal_u, dal_uu=dal_uu)

    def boundary_points(self, alpha, samples):
        t = np.linspace(0.0, TWO_PI, samples, endpoint=False)
        return self._nat(t, alpha, False)["x"]


class Ellipse(_NaturalCurve):
    """Ellipse with polynomial-in-alpha center, semi-axes and tilt angle."""

    kind = "ellipse"

    def __init__(self, center_x, center_y, axis_a, axis_b, angle=(0.0,), index=0):
        super().__init__(index)
        self.cx, self.cy = _poly(center_x), _poly(center_y)
        self.a, self.b = _poly(axis_a), _poly(axis_b)
        self.angle = _poly(angle)
        self.dcx, self.dcy = _pder(self.cx), _pder(self.cy)
        self.da, self.db, self.dangle = _pder(self.a), _pder(self.b), _pder(self.angle)
        self.deformed = _deforming(self.cx, self.cy, self.a, self.b, self.angle)

    def _nat(self, t, alpha, with_alpha):
        A, B = _pval(self.a, alpha), _pval(self.b, alpha)
        if A <= 0.0 or B <= 0.0:
            raise ValidationError(f"obstacle {self.index}: nonpositive semi-axis at alpha={alpha}")
        th = _pval(self.angle, alpha)
        c, s_ = math.cos(th), math.sin(th)
        ct, st_ = np.cos(t), np.sin(t)

        def rot(vx, vy):
            return np.stack([c * vx - s_ * vy, s_ * vx + c * vy], axis=1)

        def jrot(w):  # rotate by +pi/2
            return np.stack([-w[:, 1], w[:, 0]], axis=1)

        center = np.array([_pval(self.cx, alpha), _pval(self.cy, alpha)])
        out = {
            "x": center + rot(A * ct, B * st_),
            "xt": rot(-A * st_, B * ct),
            "xtt": rot(-A * ct, -B * st_),
            "xttt": rot(A * st_, -B * ct),
        }
        if with_alpha:
            Ap, Bp = _pval(self.da, alpha), _pval(self.db, alpha)
            thp = _pval(self.dangle, alpha)
            cp = np.array([_pval(self.dcx, alpha), _pval(self.dcy, alpha)])
            out["xa"] = cp + thp * jrot(out["x"] - center) + rot(Ap * ct, Bp * st_)
            out["xta"] = thp * jrot(out["xt"]) + rot(-Ap * st_, Bp * ct)
            out["xtta"] = thp * jrot(out["xtt"]) + rot(-Ap * ct, -Bp * st_)
        return out

    def to_config(self):
        return {"kind": self.kind, "center": [self.cx.tolist(), self.cy.tolist()],
                "axes": [self.a.tolist(), self.b.tolist()], "angle": self.angle.tolist()}


class PolarHarmonic(_NaturalCurve):
    """Star-shaped curve rho(t) = base + sum_k c_k cos(k t) about a center.

    Strict convexity is not automatic; table validation checks it on a grid.
    """

    kind = "polar-harmonic"

    def __init__(self, center_x, center_y, base, cosines=(), index=0):
        super().__init__(index)
        self.cx, self.cy = _poly(center_x), _poly(center_y)
        self.base = _poly(base)
        self.cosines = tuple(_poly(c) for c in cosines)
        self.dcx, self.dcy = _pder(self.cx), _pder(self.cy)
        self.dbase = _pder(self.base)
        self.dcosines = tuple(_pder(c) for c in self.cosines)
        self.deformed = _deforming(self.cx, self.cy, self.base, *self.cosines)

    def _rho(self, t, alpha, derivative_alpha=False):
        base = self.dbase if derivative_alpha else self.base
        coeffs = self.dcosines if derivative_alpha else self.cosines
        rho = np.full_like(t, _pval(base, alpha))
        rho_t = np.zeros_like(t)
        rho_tt = np.zeros_like(t)
        rho_ttt = np.zeros_like(t)
        for k, cpoly in enumerate(coeffs, start=1):
            ck = _pval(cpoly, alpha)
            rho += ck * np.cos(k * t)
            rho_t += -ck * k * np.sin(k * t)
            rho_tt += -ck * k * k * np.cos(k * t)
            rho_ttt += ck * k**3 * np.sin(k * t)
        return rho, rho_t, rho_tt, rho_ttt

    def _nat(self, t, alpha, with_alpha):
        er = np.stack([np.cos(t), np.sin(t)], axis=1)
        et = np.stack([-np.sin(t), np.cos(t)], axis=1)
        rho, rho_t, rho_tt, rho_ttt = self._rho(t, alpha)
        if np.any(rho <= 0.0):
            raise ValidationError(f"obstacle {self.index}: radius <= 0 at alpha={alpha}")
        center = np.array([_pval(self.cx, alpha), _pval(self.cy, alpha)])
        out = {
            "x": center + rho[:, None] * er,
            "xt": rho_t[:, None] * er + rho[:, None] * et,
            "xtt": (rho_tt - rho)[:, None] * er + (2.0 * rho_t)[:, None] * et,
            "xttt": (rho_ttt - 3.0 * rho_t)[:, None] * er + (3.0 * rho_tt - rho)[:, None] * et,
        }
        if with_alpha:
            ra, ra_t, ra_tt, _ = self._rho(t, alpha, derivative_alpha=True)
            cp = np.array([_pval(self.dcx, alpha), _pval(self.dcy, alpha)])
            out["xa"] = cp + ra[:, None] * er
            out["xta"] = ra_t[:, None] * er + ra[:, None] * et
            out["xtta"] = (ra_tt - ra)[:, None] * er + (2.0 * ra_t)[:, None] * et
        return out

    def to_config(self):
        return {"kind": self.kind, "center": [self.cx.tolist(), self.cy.tolist()],
                "base": self.base.tolist(), "cosines": [c.tolist() for c in self.cosines]}


_KINDS = {"circle": Circle, "ellipse": Ellipse, "polar-harmonic": PolarHarmonic}


def curve_from_config(cfg, index=0):
    kind = cfg.get("kind")
    if kind not in _KINDS:
        raise ValidationError(f"unknown obstacle kind {kind!r}")
    cx, cy = cfg["center"]
    if kind == "circle":
        return Circle(cx, cy, cfg["radius"], index=index)
    if kind == "ellipse":
        a, b = cfg["axes"]
        return Ellipse(cx, cy, a, b, cfg.get("angle", (0.0,)), index=index)
    return PolarHarmonic(cx, cy, cfg["base"], cfg.get("cosines", ()), index=index)


class BilliardTable:
    """m >= 3 deformable obstacles plus the deformation interval."""

    def __init__(self, obstacles, alpha_lo=0.0, alpha_hi=0.0,
                 allow_multiple_deformed=False):
        obstacles = list(obstacles)
        if len(obstacles) < 3:
            raise ValidationError(f"need at least 3 obstacles, got {len(obstacles)}")
        if not alpha_lo <= alpha_hi:
            raise ValidationError("alpha interval is empty")
        for i, ob in enumerate(obstacles, start=1):
            ob.index = i
        deformed = [ob.index for ob in obstacles if ob.deformed]
        if len(deformed) > 1 and not allow_multiple_deformed:
            raise ValidationError(
                f"obstacles {deformed} all depend on alpha; "
                "set allow_multiple_deformed to permit this")
        self.obstacles = tuple(obstacles)
        self.alpha_lo = float(alpha_lo)
        self.alpha_hi = float(alpha_hi)
        self.allow_multiple_deformed = bool(allow_multiple_deformed)

    @property
    def m(self):
        return len(self.obstacles)

    @property
    def deformed_indices(self):
        return tuple(ob.index for ob in self.obstacles if ob.deformed)

    def obstacle(self, i):
        if not 1 <= i <= self.m:
            raise UnknownObstacleError(f"obstacle index {i} outside 1..{self.m}")
        return self.obstacles[i - 1]

    def check_alpha(self, alpha):
        if not self.alpha_lo <= alpha <= self.alpha_hi:
            raise AlphaRangeError(
                f"alpha={alpha} outside [{self.alpha_lo}, {self.alpha_hi}]")
        return float(alpha)

    def alpha_samples(self, count=9):
        if self.alpha_hi == self.alpha_lo:
            return np.array([self.alpha_lo])
        return np.linspace(self.alpha_lo, self.alpha_hi, count)

    @classmethod
    def from_config(cls, cfg):
        try:
            obstacles = [curve_from_config(oc, index=i + 1)
                         for i, oc in enumerate(cfg["obstacles"])]
            interval = cfg.get("alpha", {"lo": 0.0, "hi": 0.0})
            table = cls(obstacles, interval["lo"], interval["hi"],
                        allow_multiple_deformed=bool(cfg.get("allow_multiple_deformed", False)))
        except (KeyError, TypeError, IndexError) as exc:
            raise ValidationError(f"malformed table config: {exc!r}") from exc
        declared = cfg.get("deformed")
        if declared is not None and tuple(np.atleast_1d(declared)) != table.deformed_indices:
            raise ValidationError(
                f"config declares deformed={declared} but alpha-dependent "
                f"obstacles are {table.deformed_indices}")
        return table

    def to_config(self):
        cfg = {"obstacles": [ob.to_config() for ob in self.obstacles],
               "alpha": {"lo": self.alpha_lo, "hi": self.alpha_hi}}
        if self.allow_multiple_deformed:
            cfg["allow_multiple_deformed"] = True
        if self.deformed_indices:
            d = self.deformed_indices
            cfg["deformed"] = d[0] if len(d) == 1 else list(d)
        return cfg


class TableAtAlpha:
    """Evaluation context for one deformation parameter value.

    Caches perimeters, sampled-boundary polygons and centroids so that the
    orbit solver and the no-eclipse machinery share them.
    """

    def __init__(self, table, alpha, hull_samples=512):
        self.table = table
        self.alpha = table.check_alpha(alpha)
        self.hull_samples = int(hull_samples)
        self.perimeters = {ob.index: ob.perimeter(self.alpha) for ob in table.obstacles}
        self._polygons = {}
        self._lock = threading.Lock()

    def curve(self, i):
        return self.table.obstacle(i)

    def jets(self, i, u, max_q=3, max_qp=1):
        return self.table.obstacle(i).jets(u, self.alpha, max_q=max_q, max_qp=max_qp)

    def point(self, i, u):
        return self.table.obstacle(i).point(u, self.alpha)

    def perimeter(self, i):
        return self.perimeters[i]

    def polygon(self, i):
        with self._lock:
            poly = self._polygons.get(i)
            if poly is None:
                pts = self.table.obstacle(i).boundary_points(self.alpha, self.hull_samples)
                poly = Polygon(pts)
                if poly.area <= 0.0:
                    raise DegenerateObstacleError(f"obstacle {i} has zero area")
                self._polygons[i] = poly
        return poly

    def centroid(self, i):
        c = self.polygon(i).centroid
        return np.array([c.x, c.y])

    def nearest_parameter(self, i, xy):
        return self.table.obstacle(i).nearest_parameter(xy, self.alpha)


# -- table-level operations --------------------------------------------------

def point_and_jets(table, i, u, alpha, max_q=3, max_qp=1):
    """Boundary point of obstacle i with derivative jets up to (max_q, max_qp)."""
    table.check_alpha(alpha)
    return table.obstacle(i).jets(u, alpha, max_q=max_q, max_qp=max_qp)


def perimeter(table, i, alpha):
    table.check_alpha(alpha)
    return table.obstacle(i).perimeter(alpha)


def curvature(table, i, u, alpha):
    table.check_alpha(alpha)
    return table.obstacle(i).curvature(u, alpha)


@dataclass(frozen=True)
class NoEclipseReport:
    passed: bool
    min_distance: float
    margin: float
    witness: tuple | None

    def __bool__(self):
        return self.passed


def check_no_eclipse(table, alpha, samples=512, margin=1e-9, context=None):
    """Check that no obstacle meets the convex hull of any other pair.

    The hull of each pair of sampled boundaries must keep at least
    ``margin`` distance from every third obstacle.  Returns a report with
    the first violating (i, j, k) triple, if any, and the minimal distance
    seen over all triples.
    """
    ctx = context or TableAtAlpha(table, alpha, hull_samples=samples)
    m = table.m
    pts = {i: np.asarray(ctx.polygon(i).exterior.coords)[:-1] for i in range(1, m + 1)}
    best = math.inf
    witness = None
    for i in range(1, m + 1):
        for j in range(i + 1, m + 1):
            hull = MultiPoint(np.vstack([pts[i], pts[j]])).convex_hull
            for k in range(1, m + 1):
                if k in (i, j):
                    continue
                dist = hull.distance(ctx.polygon(k))
                if dist < best:
                    best = dist
                if dist <= margin and witness is None:
                    witness = (i, j, k)
    return NoEclipseReport(witness is None, best, margin, witness)


def pairwise_clearance(table, alpha, context=None):
    """Minimal boundary-to-boundary distance over obstacle pairs."""
    ctx = context or TableAtAlpha(table, alpha)
    best = math.inf
    for i in range(1, table.m + 1):
        for j in range(i + 1, table.m + 1):
            best = min(best, ctx.polygon(i).distance(ctx.polygon(j)))
    return best


@dataclass(frozen=True)
class TableValidation:
    alpha: float
    convex: bool
    kappa_min: float
    kappa_max: float
    pair_clearance: float
    no_eclipse: NoEclipseReport

    @property
    def passed(self):
        return self.convex and self.pair_clearance > 0.0 and self.no_eclipse.passed


def validate_table(table, alpha_samples=None, u_samples=128, hull_samples=512,
                   margin=1e-9):
    """Validate convexity, disjointness and the no-eclipse condition.

    Returns one TableValidation per sampled alpha; raises only on
    structurally broken input (degenerate obstacles, bad indices).
    """
    alphas = table.alpha_samples() if alpha_samples is None else np.atleast_1d(alpha_samples)
    reports = []
    for alpha in alphas:
        alpha = float(alpha)
        kmin, kmax = math.inf, -math.inf
        for ob in table.obstacles:
            L = ob.perimeter(alpha)
            for u in np.linspace(0.0, L, u_samples, endpoint=False):
                k = ob.curvature(u, alpha)
                kmin, kmax = min(kmin, k), max(kmax, k)
        reports.append(TableValidation(
            alpha=alpha,
            convex=kmin > 0.0,
            kappa_min=kmin,
            kappa_max=kmax,
            pair_clearance=pairwise_clearance(table, alpha),
            no_eclipse=check_no_eclipse(table, alpha, samples=hull_samples, margin=margin),
        ))
    return reports


@dataclass(frozen=True)
class DeformationConstants:
    """Grid-sup estimates of jet norms, safety-inflated by 5 percent.

    ``c[(q, qp)]`` bounds |d^(q+qp) phi / du^q dalpha^qp| over the table's
    obstacles and the alpha interval; (1,0) is exactly 1 by arclength.
    kappa_min is deflated, kappa_max equals c[(2,0)].
    """

    c: dict
    kappa_min: float
    kappa_max: float
    safety: float

    def __getitem__(self, qq):
        return self.c[qq]


def deformation_constants(table, alpha_samples=None, u_samples=256, safety=1.05):
    """Estimate sup norms of the boundary jets over the deformation range.

    The (3,1) entry is estimated by central alpha-differences of the exact
    (3,0) jet; every other entry is the sup of the exact jet norm over the
    sample grid.  Only deformed obstacles contribute to the alpha entries.
    """
    alphas = table.alpha_samples() if alpha_samples is None else np.atleast_1d(alpha_samples)
    sup = {qq: 0.0 for qq in [(0, 1), (1, 1), (2, 1), (3, 1), (2, 0), (3, 0)]}
    kmin, kmax = math.inf, 0.0
    h31 = 1e-5
    for ob in table.obstacles:
        for alpha in alphas:
            alpha = float(alpha)
            L = ob.perimeter(alpha)
            for u in np.linspace(0.0, L, u_samples, endpoint=False):
                j = ob.jets(u, alpha, max_q=3, max_qp=1 if ob.deformed else 0)
                k = cross2(j.tangent, j.d2)
                kmin, kmax = min(kmin, k), max(kmax, k)
                sup[(2, 0)] = max(sup[(2, 0)], float(np.linalg.norm(j.d2)))
                sup[(3, 0)] = max(sup[(3, 0)], float(np.linalg.norm(j.d3)))
                if ob.deformed:
                    sup[(0, 1)] = max(sup[(0, 1)], float(np.linalg.norm(j.dal)))
                    sup[(1, 1)] = max(sup[(1, 1)], float(np.linalg.norm(j.dal_u)))
                    sup[(2, 1)] = max(sup[(2, 1)], float(np.linalg.norm(j.dal_uu)))
                    lo = max(alpha - h31, table.alpha_lo)
                    hi = min(alpha + h31, table.alpha_hi)
                    if hi > lo:
                        jp = ob.jets(u, hi, max_q=3, max_qp=0)
                        jm = ob.jets(u, lo, max_q=3, max_qp=0)
                        d31 = np.linalg.norm((jp.d3 - jm.d3) / (hi - lo))
                        sup[(3, 1)] = max(sup[(3, 1)], float(d31))
    c = {qq: safety * v for qq, v in sup.items()}
    c[(1, 0)] = 1.0
    return DeformationConstants(c=c, kappa_min=kmin / safety,
                                kappa_max=c[(2, 0)], safety=safety)
