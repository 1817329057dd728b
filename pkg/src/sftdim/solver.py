"""Markov measures whose suspension flow has Hausdorff dimension exactly 2.

The ratio ``h(P) / int Fu dP`` is continuous on the open set of compatible
Markov matrices, close to 0 near a deterministic cycle and maximal at the
equilibrium state of ``-s* Fu``, where ``s*`` solves ``P(-s Fu) = 0``. When
that maximum exceeds 1/2, bisection along the segment between the two finds a
point with ratio exactly 1/2.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateLevelSet, Infeasible, NotMixing, NumericalFailure, ValidationError
from .markov import (
    MarkovMeasure,
    entropy_from_matrix,
    integrate,
    shift_entropy,
    stationary_vector,
    validate_markov,
)
from .sft import Cycle, LocallyConstantFn, Sft, block_recode, enumerate_cycles
from .suspension import FlowStats, check_dim_two, flow_stats

PERRON_TOL = 1e-14
PERRON_MAX_SQUARINGS = 64


@dataclass(frozen=True)
class SolveOptions:
    tol: float = 1e-10
    ell_max: int = 4
    delta_interior: float = 1e-6
    max_bisect: int = 200
    seed: int = 0

    def __post_init__(self):
        if not self.tol > 0:
            raise ValidationError("tol must be positive")
        if self.ell_max < 1:
            raise ValidationError("ell_max must be >= 1")
        if not 0 < self.delta_interior < 1:
            raise ValidationError("delta_interior must lie in (0, 1)")
        if self.max_bisect < 1:
            raise ValidationError("max_bisect must be >= 1")


@dataclass(frozen=True, eq=False)
class SolveResult:
    measure: MarkovMeasure
    ell_used: int
    stats: FlowStats
    a_ell: float
    s_star: float
    fu: LocallyConstantFn = field(repr=False)
    roof: LocallyConstantFn = field(repr=False)
    p_star: MarkovMeasure = field(repr=False)
    start_cycle: Cycle | None = None
    t: float = 1.0


def perron(M: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """Perron root and right/left Perron vectors of a primitive nonnegative matrix.

    Repeated squaring with max-normalization drives ``M^(2^k)`` to the rank-one
    projector ``u w^T``; the root is then the Rayleigh quotient ``w M u / w u``.
    """
    B = M / M.max()
    for _ in range(PERRON_MAX_SQUARINGS):
        B2 = B @ B
        top = B2.max()
        if top == 0:
            raise NotMixing("matrix is nilpotent")
        B2 /= top
        if np.max(np.abs(B2 - B)) <= PERRON_TOL:
            B = B2
            break
        B = B2
    else:
        raise NotMixing("Perron iteration did not settle; matrix is not primitive")
    u = B.sum(axis=1)
    w = B.sum(axis=0)
    u /= u.sum()
    w /= w.sum()
    if not (np.all(u > 0) and np.all(w > 0)):
        raise NotMixing("Perron vectors are not strictly positive")
    rho = float(w @ M @ u / (w @ u))
    return rho, u, w


def _depth_two(sft: Sft, fu: LocallyConstantFn) -> tuple[Sft, LocallyConstantFn]:
    if fu.depth <= 2:
        return sft, fu
    sft2, (fu2,) = block_recode(sft, [fu], fu.depth - 1)
    return sft2, fu2


def _weighted(sft: Sft, F2: np.ndarray, s: float) -> np.ndarray:
    mask = sft.adjacency.astype(bool)
    return np.where(mask, np.exp(-s * np.where(mask, F2, 0.0)), 0.0)


def log_spectral_radius(sft: Sft, fu: LocallyConstantFn, s: float) -> float:
    """Topological pressure of ``-s Fu``: ``ln rho(A_ij exp(-s Fu(i,j)))``."""
    sft, fu = _depth_two(sft, fu)
    return math.log(perron(_weighted(sft, fu.pair_array(), s))[0])


def bowen_root(sft: Sft, fu: LocallyConstantFn, max_bisect: int = 200) -> float:
    """Unique ``s`` with ``ln rho(M(s)) = 0``, by bisection.

    The map is strictly decreasing (its slope is ``-int Fu`` at the
    equilibrium state), positive at 0 and nonpositive at
    ``h_top / min Fu``.
    """
    if not fu.is_positive():
        raise ValidationError("Fu must be strictly positive")
    sft, fu = _depth_two(sft, fu)
    F2 = fu.pair_array()

    def f(s):
        return math.log(perron(_weighted(sft, F2, s))[0])

    lo, hi = 0.0, f(0.0) / fu.min()
    flo = f(lo)
    if not flo > 0:
        raise NumericalFailure(f"topological entropy {flo!r} is not positive")
    while f(hi) > 0:
        hi *= 2.0
    assert f(lo) > 0 >= f(hi)
    for _ in range(max_bisect):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _ratio_of(P: np.ndarray, F2: np.ndarray) -> float:
    v = stationary_vector(P)
    h = entropy_from_matrix(P, v)
    b = float(v @ (P * F2).sum(axis=1))
    return h / b


def entropy_ratio(measure: MarkovMeasure, fu: LocallyConstantFn) -> float:
    """``h(mu_P) / int Fu d mu_P``."""
    return shift_entropy(measure) / integrate(measure, fu)


def max_markov_measure(sft: Sft, fu: LocallyConstantFn) -> tuple[float, MarkovMeasure]:
    """Markov measure maximizing ``h / int Fu``: the equilibrium state of ``-s* Fu``.

    ``P*_ij = A_ij exp(-s* Fu(i,j)) u_j / (rho u_i)`` with ``u`` the right
    Perron vector. Requires ``Fu`` of depth <= 2.
    """
    if fu.depth > 2:
        raise ValidationError("max_markov_measure needs Fu of depth <= 2; block-recode first")
    s = bowen_root(sft, fu)
    M = _weighted(sft, fu.pair_array(), s)
    rho, u, _ = perron(M)
    P = M * u[None, :] / (rho * u[:, None])
    P /= P.sum(axis=1, keepdims=True)
    measure = validate_markov(sft, P)
    return entropy_ratio(measure, fu), measure


def simple_cycles(sft: Sft, L_max: int | None = None) -> list[Cycle]:
    """Periodic orbits visiting each symbol at most once, shortest first."""
    L_max = sft.n if L_max is None else min(L_max, sft.n)
    return [c for c in enumerate_cycles(sft, L_max) if len(set(c.symbols)) == len(c)]


def cycle_start_matrix(sft: Sft, cycle: Cycle, delta: float) -> np.ndarray:
    """Interior Markov matrix near the deterministic measure on ``cycle``.

    Off-cycle symbols step along a shortest path into the cycle; the result is
    mixed with weight ``delta`` into the uniform-successor matrix so every
    admissible transition keeps positive probability.
    """
    c = cycle.symbols
    if len(set(c)) != len(c):
        raise ValidationError(f"cycle {c} repeats a symbol")
    n = sft.n
    succ = {s: c[(i + 1) % len(c)] for i, s in enumerate(c)}
    dist = {s: 0 for s in c}
    queue = deque(c)
    while queue:
        y = queue.popleft()
        for x in range(n):
            if sft.adjacency[x, y] and x not in dist:
                dist[x] = dist[y] + 1
                succ[x] = y
                queue.append(x)
    if len(succ) != n:
        raise NotMixing("some symbol cannot reach the start cycle")
    D = np.zeros((n, n))
    for x, y in succ.items():
        D[x, y] = 1.0
    A = sft.adjacency.astype(float)
    U = A / A.sum(axis=1, keepdims=True)
    return (1.0 - delta) * D + delta * U


def _bisect_segment(P_lo, P_hi, F2, opts: SolveOptions) -> tuple[float, np.ndarray]:
    def f(t):
        return _ratio_of((1.0 - t) * P_lo + t * P_hi, F2) - 0.5

    flo, fhi = f(0.0), f(1.0)
    if not (flo < 0 < fhi):
        raise NumericalFailure(f"segment does not straddle 1/2: ratio-1/2 = {flo!r}, {fhi!r}")
    lo, hi = 0.0, 1.0
    best_t, best_f = (0.0, flo) if abs(flo) < abs(fhi) else (1.0, fhi)
    for _ in range(opts.max_bisect):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = f(mid)
        if abs(fm) < abs(best_f):
            best_t, best_f = mid, fm
        if fm == 0:
            break
        if fm < 0:
            lo = mid
        else:
            hi = mid
    if abs(best_f) > opts.tol:
        raise NumericalFailure(f"bisection stalled with residual {best_f!r}")
    return best_t, (1.0 - best_t) * P_lo + best_t * P_hi


def solve_dimension_two(
    sft: Sft,
    fu: LocallyConstantFn,
    opts: SolveOptions | None = None,
    roof: LocallyConstantFn | None = None,
    start_cycle: Cycle | None = None,
) -> SolveResult:
    """Find a Markov measure with ``h / int Fu = 1/2`` (flow dimension 2).

    Works on the smallest block presentation where ``Fu`` has depth <= 2 and
    climbs to ``opts.ell_max`` if the maximal ratio there is not above 1/2.
    ``start_cycle`` picks the deterministic cycle the search segment starts
    from, written in the alphabet of the block length actually used (default:
    the shortest, lexicographically first simple cycle there).

    Raises :class:`Infeasible` when ``s* < 1/2 - tol``: no block length can
    beat the Bowen root, which bounds the ratio over all invariant measures.
    """
    opts = opts or SolveOptions()
    if not fu.is_positive():
        raise ValidationError("Fu must be strictly positive")
    roof = roof if roof is not None else LocallyConstantFn.constant(sft, 1.0)
    s_star = bowen_root(sft, fu, opts.max_bisect)
    if s_star < 0.5 - opts.tol:
        raise Infeasible(s_star, opts.tol)

    ell0 = max(1, fu.depth - 1)
    for ell in range(ell0, max(ell0, opts.ell_max) + 1):
        sft_l, (fu_l, roof_l) = block_recode(sft, [fu, roof], ell)
        a_l, p_star = max_markov_measure(sft_l, fu_l)
        if abs(a_l - 0.5) <= opts.tol:
            stats = flow_stats(p_star, roof_l, fu_l)
            return SolveResult(p_star, ell, stats, a_l, s_star, fu_l, roof_l, p_star, None, 1.0)
        if a_l > 0.5 + opts.tol:
            cycle = start_cycle if start_cycle is not None else simple_cycles(sft_l)[0]
            if not sft_l.is_admissible(cycle.symbols + cycle.symbols[:1]):
                raise ValidationError(f"start cycle {cycle.symbols} is not a cycle at block length {ell}")
            P_lo = cycle_start_matrix(sft_l, cycle, opts.delta_interior)
            F2 = np.nan_to_num(fu_l.pair_array(), nan=0.0)
            t, P = _bisect_segment(P_lo, p_star.P, F2, opts)
            measure = validate_markov(sft_l, P)
            stats = flow_stats(measure, roof_l, fu_l)
            if not check_dim_two(stats, opts.tol).is_dim_two:
                raise NumericalFailure(f"solution misses the level set: ratio {stats.ratio!r}")
            return SolveResult(measure, ell, stats, a_l, s_star, fu_l, roof_l, p_star, cycle, t)
    raise Infeasible(s_star, opts.tol)


def free_parameters(sft: Sft) -> int:
    """Dimension of the set of compatible Markov matrices."""
    return int((sft.adjacency.sum(axis=1) - 1).sum())


def level_set_sample(
    sft: Sft,
    fu: LocallyConstantFn,
    count: int,
    opts: SolveOptions | None = None,
    roof: LocallyConstantFn | None = None,
) -> list[MarkovMeasure]:
    """``count`` distinct Markov measures on the dimension-2 level set.

    The first is the :func:`solve_dimension_two` solution. Each further one is
    found by bisection from the same start point towards the maximizer pushed
    along a random direction tangent to the row-sum constraints.
    """
    opts = opts or SolveOptions()
    if count < 1:
        raise ValidationError("count must be >= 1")
    base = solve_dimension_two(sft, fu, opts, roof)
    if count == 1:
        return [base.measure]
    sft_l = base.measure.sft
    if free_parameters(sft_l) <= 1:
        raise DegenerateLevelSet(
            f"only {free_parameters(sft_l)} free parameter(s); the level set is a single point"
        )
    if base.start_cycle is None:
        raise DegenerateLevelSet("maximal ratio equals 1/2; the level set reduces to the maximizer")

    mask = sft_l.adjacency.astype(bool)
    deg = mask.sum(axis=1)
    F2 = np.nan_to_num(base.fu.pair_array(), nan=0.0)
    P_lo = cycle_start_matrix(sft_l, base.start_cycle, opts.delta_interior)
    P_star = base.p_star.P
    rng = np.random.Generator(np.random.Philox(key=opts.seed))

    found = [base.measure]
    attempts = 0
    while len(found) < count:
        attempts += 1
        if attempts > 100 * count:
            raise NumericalFailure(f"found only {len(found)} of {count} level-set points")
        d = rng.standard_normal(mask.shape) * mask
        d -= mask * (d.sum(axis=1) / deg)[:, None]
        scale = np.abs(d).max()
        if scale == 0:
            continue
        d /= scale
        neg = d < 0
        tau = 0.5 * float(np.min(P_star[neg] / -d[neg]))
        for _ in range(40):
            Q = P_star + tau * d
            if _ratio_of(Q, F2) > 0.5 + opts.tol:
                break
            tau *= 0.5
        else:
            continue
        _, P = _bisect_segment(P_lo, Q, F2, opts)
        if min(np.abs(P - m.P).max() for m in found) < 1e-6:
            continue
        found.append(validate_markov(sft_l, P))
    return found
