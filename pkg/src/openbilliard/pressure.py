"""Topological pressure on cylinder graphs and the dimension of the trapped set.

The non-wandering set is coded by bi-infinite admissible symbol sequences.
At depth n the coding is approximated by a directed graph whose vertices
are admissible n-blocks and whose edges are the shift transitions between
overlapping blocks.  Weighting each edge by exp(-s psi), with psi the
expansion potential sampled at the middle bounce of a periodic closure of
the transition block, makes the pressure at depth n the logarithm of the
Perron eigenvalue.  The dimension estimate is twice the root of the
pressure in s, and the stationary Perron measure turns the exact
eigenvalue perturbation identities

    dP/ds      = -(integral of psi)
    dP/dalpha  = -s (integral of dpsi/dalpha)

into a derivative of the dimension along the deformation without any
finite differencing.
"""

import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from .deform import bound_constants, quantity_derivs
from .errors import NumericalError, ValidationError
from .front import derivative_bounds, dk_dalpha, dpsi_dalpha, front_data, k_bounds
from .geometry import BilliardTable, TableAtAlpha
from .orbit import OrbitCache, find_orbit, pool_stats
from .symbolic import admissible_closure, iter_cyclic_words, iter_linear_words

POWER_TOL = 1e-12
POWER_MAX_ITER = 100_000
ROOT_TOL = 1e-10


class CylinderGraph:
    """Shift transitions between admissible blocks of a fixed depth."""

    def __init__(self, m, depth):
        if m < 3:
            raise ValidationError(f"need m >= 3 symbols, got {m}")
        if depth < 1:
            raise ValidationError(f"depth must be positive, got {depth}")
        self.m = int(m)
        self.depth = int(depth)
        self.nodes = list(iter_linear_words(m, depth))
        self.index = {w: i for i, w in enumerate(self.nodes)}
        src, dst, words = [], [], []
        for i, w in enumerate(self.nodes):
            for z in range(1, m + 1):
                if z == w[-1]:
                    continue
                src.append(i)
                dst.append(self.index[w[1:] + (z,)])
                words.append(w + (z,))
        self.src = np.array(src, dtype=np.intp)
        self.dst = np.array(dst, dtype=np.intp)
        self.edge_words = words

    @property
    def node_count(self):
        return len(self.nodes)

    @property
    def edge_count(self):
        return len(self.edge_words)


def _perron(src, dst, weights, n_nodes, tol=POWER_TOL, max_iter=POWER_MAX_ITER):
    """Perron value with left and right vectors of a positive edge-weighted graph."""
    r = np.full(n_nodes, 1.0 / n_nodes)
    l = np.full(n_nodes, 1.0 / n_nodes)
    iterations = 0
    for iterations in range(1, max_iter + 1):
        tr = np.bincount(src, weights=weights * r[dst], minlength=n_nodes)
        tl = np.bincount(dst, weights=weights * l[src], minlength=n_nodes)
        sr, sl = tr.sum(), tl.sum()
        if not (np.isfinite(sr) and sr > 0.0 and np.isfinite(sl) and sl > 0.0):
            raise NumericalError("power iteration left the positive cone")
        tr /= sr
        tl /= sl
        done = (np.max(np.abs(tr - r)) <= tol and np.max(np.abs(tl - l)) <= tol)
        r, l = tr, tl
        if done:
            break
    else:
        raise NumericalError(f"power iteration stalled after {max_iter} sweeps")
    tr = np.bincount(src, weights=weights * r[dst], minlength=n_nodes)
    lam = float(np.dot(l, tr) / np.dot(l, r))
    return lam, l, r, iterations


@dataclass(frozen=True)
class PressureEstimate:
    """One pressure value at fixed s, with its approximation depth."""

    s: float
    depth: int
    method: str
    value: float
    iterations: int = 0


@dataclass(frozen=True)
class GibbsMeasure:
    """Stationary Perron measure on the depth-n graph at parameter s."""

    s: float
    depth: int
    nodes: list
    edge_words: list
    src: np.ndarray
    dst: np.ndarray
    node_measure: np.ndarray
    edge_measure: np.ndarray

    def integrate(self, edge_values):
        return float(np.dot(self.edge_measure, np.asarray(edge_values, dtype=float)))

    def _marginal(self, trim):
        out = {}
        for w, p in zip(self.nodes, self.node_measure):
            key = w[1:] if trim == "head" else w[:-1]
            out[key] = out.get(key, 0.0) + p
        return out

    def shift_defect(self):
        """Sup distance between the two (depth-1)-block marginals.

        A shift-invariant measure gives the same marginal whether the first
        or the last symbol of each block is integrated out.
        """
        head = self._marginal("head")
        tail = self._marginal("tail")
        keys = set(head) | set(tail)
        return max(abs(head.get(k, 0.0) - tail.get(k, 0.0)) for k in keys)


class ConstantPotential:
    """Potential equal to one constant on every block.

    Synthetic stand-in with closed-form pressure; exercises the graph,
    eigenvalue and root machinery independent of any billiard geometry.
    """

    def __init__(self, m, c, dc=0.0):
        if c <= 0.0:
            raise ValidationError("constant potential must be positive")
        self.m = int(m)
        self.c = float(c)
        self.dc = float(dc)

    def value(self, block):
        return self.c

    def deriv(self, block):
        return self.dc

    def birkhoff(self, word):
        return len(word) * self.c

    def birkhoff_deriv(self, word):
        return len(word) * self.dc

    def prewarm(self, blocks, jobs=None):
        return 0


class CylinderPotential:
    """Expansion potential of cylinder blocks through periodic closures.

    The value of a block is the per-bounce expansion logarithm at the
    block's middle bounce, on the periodic orbit obtained by closing the
    block into an admissible cycle (appending one connector symbol when
    the block starts and ends on the same obstacle).  Its alpha-derivative
    comes from the same closed orbit's sensitivity solve.  All orbits are
    shared through one cache, so a block, its closure and any rotation of
    it are solved once.
    """

    def __init__(self, table, alpha, cache=None, solver_tol=1e-12, verify=False):
        self.table = table
        self.alpha = table.check_alpha(alpha)
        self.ctx = TableAtAlpha(table, alpha)
        self.m = table.m
        self.cache = cache if cache is not None else OrbitCache()
        self.solver_tol = float(solver_tol)
        self.verify = bool(verify)
        self._values = {}
        self._derivs = {}
        self._fronts = {}
        self._dpsi = {}
        self._lock = threading.Lock()

    # -- orbit plumbing ------------------------------------------------------
    def closed_orbit(self, word):
        return find_orbit(self.table, word, self.alpha, tol=self.solver_tol,
                          cache=self.cache, context=self.ctx, verify=self.verify)

    def _front(self, closed):
        with self._lock:
            hit = self._fronts.get(closed)
        if hit is not None:
            return hit
        orbit = self.closed_orbit(closed)
        fr = front_data(orbit)
        with self._lock:
            self._fronts[closed] = (orbit, fr)
        return orbit, fr

    def _dpsi_cycle(self, closed):
        with self._lock:
            hit = self._dpsi.get(closed)
        if hit is not None:
            return hit
        orbit, fr = self._front(closed)
        derivs = quantity_derivs(self.table, orbit, context=self.ctx)
        dk = dk_dalpha(orbit, fr, derivs)
        dpsi = dpsi_dalpha(orbit, fr, derivs, dk)
        with self._lock:
            self._dpsi[closed] = dpsi
        return dpsi

    # -- potential protocol --------------------------------------------------
    def value(self, block):
        block = tuple(block)
        with self._lock:
            if block in self._values:
                return self._values[block]
        closed = admissible_closure(block, self.m)
        _, fr = self._front(closed)
        val = float(fr.psi_u[len(block) // 2])
        with self._lock:
            self._values[block] = val
        return val

    def deriv(self, block):
        block = tuple(block)
        with self._lock:
            if block in self._derivs:
                return self._derivs[block]
        closed = admissible_closure(block, self.m)
        dpsi = self._dpsi_cycle(closed)
        val = float(dpsi[len(block) // 2])
        with self._lock:
            self._derivs[block] = val
        return val

    def birkhoff(self, word):
        """Sum of the potential around one admissible cyclic word."""
        _, fr = self._front(tuple(word))
        return float(np.sum(fr.psi_u))

    def birkhoff_deriv(self, word):
        return float(np.sum(self._dpsi_cycle(tuple(word))))

    def prewarm(self, blocks, jobs=None):
        """Solve the closures of all blocks, optionally with worker threads."""
        closed = sorted({admissible_closure(tuple(b), self.m) for b in blocks})
        if jobs and jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                list(pool.map(self._front, closed))
        else:
            for w in closed:
                self._front(w)
        return len(closed)

    def pool_orbits(self):
        """Every orbit solved so far at this alpha, canonical order."""
        return self.cache.orbits_at(self.alpha)


def as_potential(table_or_potential, alpha=0.0, cache=None, solver_tol=1e-12):
    if isinstance(table_or_potential, BilliardTable):
        return CylinderPotential(table_or_potential, alpha, cache=cache,
                                 solver_tol=solver_tol)
    return table_or_potential


class TransferPressure:
    """Pressure as a function of s on one fixed graph and potential."""

    def __init__(self, potential, depth, jobs=None):
        self.potential = potential
        self.graph = CylinderGraph(potential.m, depth)
        potential.prewarm(self.graph.edge_words, jobs=jobs)
        self.psi = np.array([potential.value(b) for b in self.graph.edge_words])
        self.iterations = 0

    def estimate(self, s):
        g = self.graph
        weights = np.exp(-float(s) * self.psi)
        lam, l, r, iters = _perron(g.src, g.dst, weights, g.node_count)
        self.iterations = iters
        mu = l[g.src] * weights * r[g.dst]
        mu /= mu.sum()
        nm = l * r
        nm /= nm.sum()
        measure = GibbsMeasure(s=float(s), depth=g.depth, nodes=g.nodes,
                               edge_words=g.edge_words, src=g.src, dst=g.dst,
                               node_measure=nm, edge_measure=mu)
        est = PressureEstimate(s=float(s), depth=g.depth, method="transfer",
                               value=math.log(lam), iterations=iters)
        return est, measure

    def __call__(self, s):
        return self.estimate(s)[0].value


def pressure_transfer_matrix(table_or_potential, s, depth, alpha=0.0, cache=None,
                             jobs=None, return_measure=False):
    """Pressure at one s from the Perron eigenvalue of the depth-n graph."""
    potential = as_potential(table_or_potential, alpha, cache=cache)
    tp = TransferPressure(potential, depth, jobs=jobs)
    est, measure = tp.estimate(s)
    return (est, measure) if return_measure else est


def pressure_periodic_sum(table_or_potential, s, depth, alpha=0.0, cache=None):
    """Pressure at one s from the cycle sum over period-n words."""
    potential = as_potential(table_or_potential, alpha, cache=cache)
    s = float(s)
    exponents = [-s * potential.birkhoff(w)
                 for w in iter_cyclic_words(potential.m, depth)]
    value = float(logsumexp(exponents)) / depth
    return PressureEstimate(s=s, depth=depth, method="periodic", value=value)


def gibbs_integrals(potential, measure, with_deriv=True):
    """Edge-measure integrals of the potential and its alpha-derivative."""
    psi = [potential.value(b) for b in measure.edge_words]
    psi_int = measure.integrate(psi)
    dpsi_int = None
    if with_deriv:
        dpsi_int = measure.integrate([potential.deriv(b) for b in measure.edge_words])
    return psi_int, dpsi_int


def bowen_root(table_or_potential, depth, tol=ROOT_TOL, alpha=0.0, cache=None,
               jobs=None, transfer=None):
    """Root of the depth-n pressure in s, with its Gibbs measure.

    The bracket [0, 2 log(m-1) / min psi] always straddles the root: at
    s = 0 the pressure is the block entropy log(m-1) > 0, and at the upper
    end it is at most -log(m-1) < 0.
    """
    potential = as_potential(table_or_potential, alpha, cache=cache)
    tp = transfer if transfer is not None else TransferPressure(potential, depth, jobs=jobs)
    psi_min = float(np.min(tp.psi))
    if psi_min <= 0.0:
        raise NumericalError(
            f"potential is not uniformly expanding (min {psi_min:.3e})")
    s_hi = 2.0 * math.log(potential.m - 1) / psi_min
    p_lo, p_hi = tp(0.0), tp(s_hi)
    if not (p_lo > 0.0 > p_hi):
        raise NumericalError(
            f"pressure did not change sign on [0, {s_hi:.6f}]: "
            f"{p_lo:.3e} .. {p_hi:.3e}")
    root = brentq(tp, 0.0, s_hi, xtol=tol, rtol=4 * np.finfo(float).eps)
    est, measure = tp.estimate(root)
    return root, est, measure, tp


@dataclass(frozen=True)
class DimensionReport:
    """Dimension of the trapped set at one deformation value.

    dim_unstable is the pressure root; the stable and unstable slices have
    equal dimension by time reversal, and the trapped set is locally a
    product, so the full dimension is twice the root.  lower and upper
    come from the pool's chord and curvature extremes; delta is the change
    against the depth-2 computation and serves as a convergence proxy.
    """

    alpha: float
    depth: int
    dim_unstable: float
    dim_stable: float
    dimension: float
    lower: float
    upper: float
    entropy: float
    psi_integral: float
    pressure_at_root: float
    entropy_lower_bound: float = None
    d_dimension: float = None
    dpsi_integral: float = None
    derivative_bound: float = None
    delta: float = None
    k_lo: float = None
    k_hi: float = None
    d_min: float = None
    d_max: float = None
    pool_count: int = 0

    def to_json(self):
        out = {}
        for key, val in self.__dict__.items():
            # + 0.0 folds negative zero, which JSON would render as -0.0
            out[key] = val if val is None or isinstance(val, (int, str)) \
                else float(val) + 0.0
        return out


def _pool_words(m, depth):
    for n in range(2, depth + 1):
        yield from iter_cyclic_words(m, n)


def dimension_report(table_or_potential, alpha=0.0, depth=8, tol=ROOT_TOL,
                     cache=None, jobs=None, derivative=True, bracket=True,
                     convergence=True):
    """Dimension, certified bracket and deformation derivative at one alpha."""
    potential = as_potential(table_or_potential, alpha, cache=cache)
    alpha = getattr(potential, "alpha", float(alpha))
    root, est, measure, tp = bowen_root(potential, depth, tol=tol, jobs=jobs)
    psi_int = measure.integrate(tp.psi)
    entropy = root * psi_int
    log_m1 = math.log(potential.m - 1)
    # maximal-entropy (s=0) measure gives a dimension floor for the slice
    _, measure0 = tp.estimate(0.0)
    report = {
        "alpha": float(alpha), "depth": int(depth),
        "dim_unstable": root, "dim_stable": root, "dimension": 2.0 * root,
        "entropy": entropy, "psi_integral": psi_int,
        "pressure_at_root": est.value,
        "entropy_lower_bound": log_m1 / measure0.integrate(tp.psi),
    }

    if derivative:
        _, dpsi_int = gibbs_integrals(potential, measure, with_deriv=True)
        report["dpsi_integral"] = dpsi_int
        report["d_dimension"] = -2.0 * root * dpsi_int / psi_int

    if bracket and isinstance(potential, ConstantPotential):
        flat = 2.0 * log_m1 / potential.c
        report.update(lower=flat, upper=flat,
                      derivative_bound=abs(potential.dc) * 2.0 * log_m1 / potential.c**2)
    elif bracket:
        for w in _pool_words(potential.m, depth):
            potential.closed_orbit(w)
        orbits = potential.pool_orbits()
        stats = pool_stats(orbits)
        k_lo, k_hi = k_bounds(stats)
        report.update(
            lower=2.0 * log_m1 / math.log1p(stats.d_max * k_hi),
            upper=2.0 * log_m1 / math.log1p(stats.d_min * k_lo),
            k_lo=k_lo, k_hi=k_hi, d_min=stats.d_min, d_max=stats.d_max,
            pool_count=len(orbits))
        if derivative:
            consts = bound_constants(potential.table, orbits)
            fb = derivative_bounds(consts, stats)
            report["derivative_bound"] = \
                2.0 * root * fb.dpsi_bound / fb.expansion_floor
    if "lower" not in report:
        report.update(lower=float("nan"), upper=float("nan"))

    if convergence and depth > 2:
        shallow, _, _, _ = bowen_root(potential, depth - 2, tol=tol, jobs=jobs)
        report["delta"] = abs(2.0 * root - 2.0 * shallow)

    return DimensionReport(**report)


def dimension_derivative(table_or_potential, alpha=0.0, depth=8, tol=ROOT_TOL,
                         cache=None, jobs=None, fd_step=None):
    """Analytic dimension derivative, optionally with a finite-difference check.

    The finite difference recomputes the pressure root at displaced alpha
    values, staying one-sided at the ends of the deformation interval.
    """
    potential = as_potential(table_or_potential, alpha, cache=cache)
    report = dimension_report(potential, alpha, depth=depth, tol=tol, jobs=jobs,
                              derivative=True, bracket=False, convergence=False)
    if fd_step is None:
        return report.d_dimension, None

    if isinstance(table_or_potential, BilliardTable):
        table = table_or_potential
    elif isinstance(table_or_potential, CylinderPotential):
        table = table_or_potential.table
    else:
        raise ValidationError("finite differencing needs a billiard table")
    h = float(fd_step)
    lo, hi = table.alpha_lo, table.alpha_hi

    def dim_at(a):
        pot = CylinderPotential(table, a, cache=cache)
        root, _, _, _ = bowen_root(pot, depth, tol=tol, jobs=jobs)
        return 2.0 * root

    if alpha + h <= hi and alpha - h >= lo:
        fd = (dim_at(alpha + h) - dim_at(alpha - h)) / (2.0 * h)
    elif alpha + h <= hi:
        fd = (dim_at(alpha + h) - dim_at(alpha)) / h
    else:
        fd = (dim_at(alpha) - dim_at(alpha - h)) / h
    return report.d_dimension, fd
