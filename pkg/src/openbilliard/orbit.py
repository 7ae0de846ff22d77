"""Periodic billiard orbits as minima of the cyclic chord-length function.

For an admissible cyclic word the total length of the closed polygon with
one vertex per symbol, each vertex sliding on its obstacle's boundary, has
a unique minimum under the no-eclipse condition, and that minimum is the
periodic billiard orbit.  The gradient and Hessian used here are the exact
derivatives of the chord-length sum, assembled per chord, so they match
finite differences everywhere, not only near stationarity.  The Hessian is
cyclic tridiagonal because each vertex only touches its two chords.
"""

import json
import math
import os
import threading
from dataclasses import dataclass

import numpy as np
from shapely.geometry import LineString

from .errors import (
    DegenerateConfigurationError,
    NumericalError,
    OrbitConvergenceError,
    ValidationError,
)
from .geometry import TableAtAlpha, outward_normal
from .linalg import CyclicTridiagonal
from .symbolic import canonical_rotation, rotate_word, validate_word

GRAD_TOL = 1e-10
REFLECTION_TOL = 1e-8
CLEARANCE_TOL = 1e-9


def _context(table, alpha, context=None):
    if context is not None:
        if context.alpha != alpha:
            raise ValueError(f"context is at alpha={context.alpha}, asked for {alpha}")
        return context
    if isinstance(table, TableAtAlpha):
        return table
    return TableAtAlpha(table, alpha)


def _wrap(u, perims):
    return np.mod(u, perims)


def _chord_system(ctx, word, u, want_hessian=True):
    """Exact value, gradient and cyclic tridiagonal Hessian of the length."""
    n = len(word)
    jets = [ctx.jets(word[j], u[j], max_q=2 if want_hessian else 1, max_qp=0)
            for j in range(n)]
    pts = np.array([j.point for j in jets])
    tans = np.array([j.tangent for j in jets])
    w = pts - np.roll(pts, 1, axis=0)
    d = np.sqrt(np.einsum("ij,ij->i", w, w))
    if np.any(d < 1e-12):
        j = int(np.argmin(d))
        raise DegenerateConfigurationError(
            f"bounces {j - 1} and {j} of {word} coincide (gap {d[j]:.2e})")
    v = w / d[:, None]
    tv = np.einsum("ij,ij->i", v, tans)                      # <v_j, t_j>
    tv_prev = np.einsum("ij,ij->i", v, np.roll(tans, 1, axis=0))
    grad = tv - np.roll(tv_prev, -1)
    hess = None
    if want_hessian:
        d2s = np.array([j.d2 for j in jets])
        vdd = np.einsum("ij,ij->i", v, d2s)
        vdd_prev = np.einsum("ij,ij->i", v, np.roll(d2s, 1, axis=0))
        tt_prev = np.einsum("ij,ij->i", tans, np.roll(tans, 1, axis=0))
        diag = (1.0 - tv**2) / d + vdd + np.roll((1.0 - tv_prev**2) / d - vdd_prev, -1)
        off = (tv * tv_prev - tt_prev) / d
        hess = CyclicTridiagonal(diag, off)
    return {"length": float(d.sum()), "grad": grad, "hess": hess,
            "points": pts, "tangents": tans, "d": d, "v": v, "jets": jets}


def total_length(table, word, u, alpha, context=None):
    """Length of the closed polygon through boundary points u."""
    ctx = _context(table, alpha, context)
    word = validate_word(word, ctx.table.m)
    return _chord_system(ctx, word, np.asarray(u, dtype=float),
                         want_hessian=False)["length"]


def length_gradient(table, word, u, alpha, context=None):
    ctx = _context(table, alpha, context)
    word = validate_word(word, ctx.table.m)
    return _chord_system(ctx, word, np.asarray(u, dtype=float),
                         want_hessian=False)["grad"]


def length_hessian(table, word, u, alpha, context=None):
    ctx = _context(table, alpha, context)
    word = validate_word(word, ctx.table.m)
    return _chord_system(ctx, word, np.asarray(u, dtype=float))["hess"]


@dataclass(frozen=True)
class PeriodicOrbit:
    """A solved periodic orbit with its per-bounce quantities.

    Arrays are bounce-indexed; d[j] is the chord arriving at bounce j from
    bounce j-1 (cyclically), gamma[j] = 2 kappa[j] / cos_phi[j].
    """

    symbols: tuple
    alpha: float
    u: np.ndarray
    points: np.ndarray
    d: np.ndarray
    cos_phi: np.ndarray
    kappa: np.ndarray
    gamma: np.ndarray
    length: float
    grad_inf: float
    iterations: int = 0

    @property
    def n(self):
        return len(self.symbols)

    @property
    def d_min(self):
        return float(np.min(self.d))

    @property
    def d_max(self):
        return float(np.max(self.d))

    @property
    def gamma_min(self):
        return float(np.min(self.gamma))

    @property
    def gamma_max(self):
        return float(np.max(self.gamma))

    @property
    def phi_max(self):
        return float(np.arccos(np.clip(np.min(self.cos_phi), -1.0, 1.0)))

    def rotated(self, r):
        """Same orbit presented with bounce (j + r) mod n relabeled as j."""
        roll = lambda x: np.roll(x, -r, axis=0)
        return PeriodicOrbit(
            symbols=rotate_word(self.symbols, r), alpha=self.alpha,
            u=roll(self.u), points=roll(self.points), d=roll(self.d),
            cos_phi=roll(self.cos_phi), kappa=roll(self.kappa),
            gamma=roll(self.gamma), length=self.length,
            grad_inf=self.grad_inf, iterations=self.iterations)

    def to_record(self):
        return {
            "word": list(self.symbols), "alpha": self.alpha,
            "u": self.u.tolist(), "points": self.points.tolist(),
            "d": self.d.tolist(), "cos_phi": self.cos_phi.tolist(),
            "kappa": self.kappa.tolist(), "gamma": self.gamma.tolist(),
            "length": self.length, "grad_inf": self.grad_inf,
            "iterations": self.iterations,
        }

    @classmethod
    def from_record(cls, rec):
        return cls(
            symbols=tuple(rec["word"]), alpha=float(rec["alpha"]),
            u=np.array(rec["u"]), points=np.array(rec["points"]),
            d=np.array(rec["d"]), cos_phi=np.array(rec["cos_phi"]),
            kappa=np.array(rec["kappa"]), gamma=np.array(rec["gamma"]),
            length=float(rec["length"]), grad_inf=float(rec["grad_inf"]),
            iterations=int(rec.get("iterations", 0)))


@dataclass(frozen=True)
class PoolStats:
    """Geometric extremes over a pool of solved orbits at one alpha."""

    count: int
    d_min: float
    d_max: float
    gamma_min: float
    gamma_max: float
    kappa_min: float
    kappa_max: float
    cos_phi_min: float

    def merge(self, other):
        if other is None:
            return self
        return PoolStats(
            count=self.count + other.count,
            d_min=min(self.d_min, other.d_min),
            d_max=max(self.d_max, other.d_max),
            gamma_min=min(self.gamma_min, other.gamma_min),
            gamma_max=max(self.gamma_max, other.gamma_max),
            kappa_min=min(self.kappa_min, other.kappa_min),
            kappa_max=max(self.kappa_max, other.kappa_max),
            cos_phi_min=min(self.cos_phi_min, other.cos_phi_min))


def pool_stats(orbits):
    orbits = list(orbits)
    if not orbits:
        raise ValidationError("empty orbit pool")
    return PoolStats(
        count=len(orbits),
        d_min=min(o.d_min for o in orbits),
        d_max=max(o.d_max for o in orbits),
        gamma_min=min(o.gamma_min for o in orbits),
        gamma_max=max(o.gamma_max for o in orbits),
        kappa_min=min(float(np.min(o.kappa)) for o in orbits),
        kappa_max=max(float(np.max(o.kappa)) for o in orbits),
        cos_phi_min=min(float(np.min(o.cos_phi)) for o in orbits))


def _initial_guess(ctx, word):
    # aim each bounce at the midpoint of its neighbors' centroids
    cents = {s: ctx.centroid(s) for s in set(word)}
    n = len(word)
    u = np.empty(n)
    for j in range(n):
        target = 0.5 * (cents[word[(j - 1) % n]] + cents[word[(j + 1) % n]])
        u[j] = ctx.nearest_parameter(word[j], target)
    return u


def _line_search(ctx, word, u, step, grad, value, perims):
    # Armijo backtracking on the length itself
    slope = float(np.dot(grad, step))
    lam = 1.0
    for _ in range(40):
        trial = _wrap(u + lam * step, perims)
        try:
            trial_value = _chord_system(ctx, word, trial, want_hessian=False)["length"]
        except DegenerateConfigurationError:
            lam *= 0.5
            continue
        if trial_value <= value + 1e-4 * lam * slope:
            return trial, trial_value
        lam *= 0.5
    return None, None


def _newton(ctx, word, u, tol, max_iter):
    perims = np.array([ctx.perimeter(s) for s in word])
    u = _wrap(np.asarray(u, dtype=float), perims)
    sys = _chord_system(ctx, word, u)
    for it in range(1, max_iter + 1):
        grad = sys["grad"]
        ginf = float(np.max(np.abs(grad)))
        if ginf <= tol:
            return u, sys, ginf, it - 1
        try:
            step = sys["hess"].solve(-grad)
        except (NumericalError, np.linalg.LinAlgError):
            step = -grad
        if float(np.dot(step, grad)) >= 0.0:
            step = -grad
        if ginf <= 1e-6:
            # roundoff basin: the quadratic model is trustworthy, line
            # search on the length would stall on noise
            u = _wrap(u + step, perims)
            sys = _chord_system(ctx, word, u)
            continue
        trial, _ = _line_search(ctx, word, u, step, grad, sys["length"], perims)
        if trial is None:
            return u, sys, ginf, it
        u = trial
        sys = _chord_system(ctx, word, u)
    ginf = float(np.max(np.abs(sys["grad"])))
    return u, sys, ginf, max_iter


def _coordinate_polish(ctx, word, u, sweeps=200):
    from scipy.optimize import minimize_scalar

    perims = np.array([ctx.perimeter(s) for s in word])
    n = len(word)
    u = u.copy()
    window = perims / 8.0
    for _ in range(sweeps):
        for j in range(n):
            p_prev = ctx.point(word[(j - 1) % n], u[(j - 1) % n])
            p_next = ctx.point(word[(j + 1) % n], u[(j + 1) % n])
            sym = word[j]

            def two_chords(uj):
                p = ctx.point(sym, uj % perims[j])
                return (math.hypot(*(p - p_prev)) + math.hypot(*(p - p_next)))

            res = minimize_scalar(two_chords, bounds=(u[j] - window[j], u[j] + window[j]),
                                  method="bounded", options={"xatol": 1e-13})
            u[j] = res.x % perims[j]
        window = np.maximum(window * 0.95, 1e-7)
    return u


def _finish_orbit(ctx, word, u, sys, ginf, iterations):
    pts = sys["points"]
    v = sys["v"]
    jets2 = [ctx.jets(word[j], u[j], max_q=2, max_qp=0) for j in range(len(word))]
    kappa = np.array([j.curvature for j in jets2])
    normals = np.array([outward_normal(j.tangent) for j in jets2])
    v_out = np.roll(v, -1, axis=0)
    cos_phi = 0.5 * np.einsum("ij,ij->i", v_out - v, normals)
    if np.any(cos_phi <= 0.0):
        raise NumericalError(
            f"orbit {word}: nonpositive collision cosine {np.min(cos_phi):.3e}")
    gamma = 2.0 * kappa / cos_phi
    return PeriodicOrbit(
        symbols=word, alpha=ctx.alpha, u=u, points=pts, d=sys["d"],
        cos_phi=cos_phi, kappa=kappa, gamma=gamma,
        length=sys["length"], grad_inf=ginf, iterations=iterations)


def verify_orbit(ctx, orbit, reflection_tol=REFLECTION_TOL,
                 clearance_tol=CLEARANCE_TOL):
    """Check the optics and obstacle-clearance invariants of a solved orbit.

    Returns a diagnostics dict; raises NumericalError on violation.
    """
    n = orbit.n
    pts = orbit.points
    w = pts - np.roll(pts, 1, axis=0)
    d = np.sqrt(np.einsum("ij,ij->i", w, w))
    if np.any(d <= 0.0):
        raise NumericalError(f"orbit {orbit.symbols}: zero-length chord")
    v = w / d[:, None]
    v_out = np.roll(v, -1, axis=0)
    worst_reflect = 0.0
    for j in range(n):
        jet = ctx.jets(orbit.symbols[j], orbit.u[j], max_q=1, max_qp=0)
        nrm = outward_normal(jet.tangent)
        mirrored = v[j] - 2.0 * float(np.dot(v[j], nrm)) * nrm
        worst_reflect = max(worst_reflect, float(np.max(np.abs(v_out[j] - mirrored))))
    if worst_reflect > reflection_tol:
        raise NumericalError(
            f"orbit {orbit.symbols}: reflection residual {worst_reflect:.3e}")
    if np.any(orbit.cos_phi <= 0.0):
        raise NumericalError(f"orbit {orbit.symbols}: collision angle >= pi/2")
    worst_clear = math.inf
    for j in range(n):
        seg = LineString([pts[(j - 1) % n], pts[j]])
        for i in range(1, ctx.table.m + 1):
            if i in (orbit.symbols[(j - 1) % n], orbit.symbols[j]):
                continue
            dist = seg.distance(ctx.polygon(i))
            worst_clear = min(worst_clear, dist)
            if dist <= clearance_tol:
                raise NumericalError(
                    f"orbit {orbit.symbols}: chord into bounce {j} passes "
                    f"within {dist:.2e} of obstacle {i}")
    return {"reflection_residual": worst_reflect,
            "segment_clearance": worst_clear,
            "grad_inf": orbit.grad_inf}


def find_orbit(table, word, alpha, init=None, tol=GRAD_TOL, max_iter=120,
               cache=None, warm_start=True, verify=True, context=None):
    """Locate the periodic orbit of an admissible cyclic word.

    Damped Newton on the exact gradient with coordinate-descent fallback.
    Deterministic for fixed (word, alpha, init policy).  With a cache,
    rotations of one word share a single solved orbit.
    """
    ctx = _context(table, alpha, context)
    word = validate_word(word, ctx.table.m)
    if cache is not None:
        hit = cache.lookup(word, alpha)
        if hit is not None:
            return hit
    u0 = None
    if init is not None:
        u0 = np.asarray(init, dtype=float)
    elif cache is not None and warm_start:
        u0 = cache.warm_start(word, alpha)
    if u0 is None:
        u0 = _initial_guess(ctx, word)
    u, sys, ginf, iters = _newton(ctx, word, u0, tol, max_iter)
    if ginf > tol:
        u = _coordinate_polish(ctx, word, u)
        u, sys, ginf, extra = _newton(ctx, word, u, tol, max_iter)
        iters += extra
        if ginf > tol:
            raise OrbitConvergenceError(
                f"orbit {word} at alpha={alpha}: gradient stalled at {ginf:.3e}",
                last_u=u, grad_inf=ginf)
    orbit = _finish_orbit(ctx, word, u, sys, ginf, iters)
    if verify:
        verify_orbit(ctx, orbit)
    if cache is not None:
        cache.store(orbit)
    return orbit


class OrbitCache:
    """Orbit store keyed by (word up to rotation, alpha).

    Thread-safe.  Lookups for any rotation of a stored word return the
    stored orbit relabeled to the requested alignment; warm starts reuse
    the nearest solved alpha of the same rotation class.  Persists as
    JSON-lines, one record per (canonical word, alpha), with optional
    annotation payloads (sensitivity and front blocks) attached.
    """

    def __init__(self, path=None):
        self._orbits = {}
        self._extras = {}
        self._lock = threading.RLock()
        self.path = path
        if path is not None and os.path.exists(path):
            self.load(path)

    @staticmethod
    def _key(word):
        return canonical_rotation(word)

    def lookup(self, word, alpha):
        canon, r = self._key(word)
        with self._lock:
            rec = self._orbits.get(canon, {}).get(alpha)
        return None if rec is None else rec.rotated(-r)

    def warm_start(self, word, alpha):
        canon, r = self._key(word)
        with self._lock:
            by_alpha = self._orbits.get(canon)
            if not by_alpha:
                return None
            nearest = min(by_alpha, key=lambda a: abs(a - alpha))
            u_canon = by_alpha[nearest].u
        return np.roll(u_canon, r)

    def store(self, orbit):
        canon, r = self._key(orbit.symbols)
        with self._lock:
            self._orbits.setdefault(canon, {})[orbit.alpha] = orbit.rotated(r)

    def annotate(self, word, alpha, key, payload):
        """Attach a serializable block (e.g. 'd_alpha', 'front') to a record."""
        canon, _ = self._key(word)
        with self._lock:
            self._extras.setdefault((canon, alpha), {})[key] = payload

    def get_annotation(self, word, alpha, key):
        canon, _ = self._key(word)
        with self._lock:
            return self._extras.get((canon, alpha), {}).get(key)

    def orbits_at(self, alpha):
        """All stored orbits at exactly this alpha, in canonical word order."""
        with self._lock:
            return [self._orbits[c][alpha] for c in sorted(self._orbits)
                    if alpha in self._orbits[c]]

    def __len__(self):
        with self._lock:
            return sum(len(v) for v in self._orbits.values())

    def words(self):
        with self._lock:
            return sorted(self._orbits)

    def save(self, path=None):
        path = path or self.path
        if path is None:
            raise ValueError("no cache path configured")
        with self._lock, open(path, "w") as fh:
            for canon in sorted(self._orbits):
                for alpha in sorted(self._orbits[canon]):
                    rec = self._orbits[canon][alpha].to_record()
                    rec.update(self._extras.get((canon, alpha), {}))
                    fh.write(json.dumps(rec) + "\n")
        return path

    def load(self, path):
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                orbit = PeriodicOrbit.from_record(rec)
                self.store(orbit)
                for key in ("d_alpha", "front"):
                    if key in rec:
                        self.annotate(orbit.symbols, orbit.alpha, key, rec[key])
