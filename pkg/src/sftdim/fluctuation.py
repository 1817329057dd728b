"""Centered Birkhoff sums, their exact limiting covariance, and tail events.

For a Markov measure with ``a = -int G`` and ``b = int Fu`` the observables are

    Xu_n = -sum_{i=0}^{n-1} G(s^i w) - n a       Yu_n = sum_{i=0}^{n-1} Fu(s^i w) - n b
    Xs_n = -sum_{i=1}^{n} G(s^-i w) - n a        Ys_n = sum_{i=0}^{n-1} Fs(s^-i w) - n b

``(Xu_n, Yu_n) / sqrt(n)`` is asymptotically normal with covariance ``Q``
given by the Green-Kubo series, which on a finite chain is computed exactly.

Every observable here is locally constant, so the bounded-distortion constant
``K`` relating two-sided and one-sided sums is 0 once ``n`` exceeds the depth;
the tail-event offset ``C_tilde = C + K`` is therefore taken as given.
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy import integrate as _quad
from scipy.special import ndtr

from .errors import NumericalFailure, ValidationError, WordTooShort
from .markov import MarkovMeasure, integrate, lift_measure, potential_G, shift_entropy
from .sampling import map_chunks, sample_block, window_value
from .sft import Cycle, LocallyConstantFn, Word, block_recode, cycle_sum, enumerate_cycles
from .solver import SolveOptions, SolveResult, level_set_sample, simple_cycles, solve_dimension_two
from .suspension import flow_stats

CYCLE_ZERO_TOL = 1e-10
RANK_TOL = 1e-9
GK_INCREMENT_TOL = 1e-12
SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class CenteredObs:
    Xu: np.ndarray
    Yu: np.ndarray
    Xs: np.ndarray
    Ys: np.ndarray


@dataclass(frozen=True)
class CovarianceQ:
    q: np.ndarray
    lag_used: int
    truncation_residual: float

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.q))


@dataclass(frozen=True)
class CoboundaryVerdict:
    is_degenerate: bool
    witness: Cycle | None
    witness_sum: float
    cycles_checked: int


@dataclass(frozen=True)
class NonsingularityReport:
    det_q: float
    rank_cycles: int
    nonsingular: bool
    q: np.ndarray = field(repr=False)
    cycle_vectors: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class TailEventStats:
    n_grid: list[int]
    freq_u: np.ndarray
    freq_s: np.ndarray
    freq_joint: np.ndarray
    rho_pred: np.ndarray
    samples: int
    D: float
    C_tilde: float

    def stderr(self, p: np.ndarray | None = None) -> np.ndarray:
        """Binomial standard error at probability ``p`` (default ``rho_pred``)."""
        p = self.rho_pred if p is None else p
        return np.sqrt(p * (1.0 - p) / self.samples)


def _as_depth_two(measure: MarkovMeasure, fns: list[LocallyConstantFn]):
    depth = max(f.depth for f in fns)
    if depth <= 2:
        return measure, fns
    ell = depth - 1
    lifted = lift_measure(measure, ell)
    _, out = block_recode(measure.sft, fns, ell)
    return lifted, out


def _green_kubo(measure: MarkovMeasure, obs: list[np.ndarray], lag_cap: int | None = None) -> CovarianceQ:
    """Exact Green-Kubo matrix for observables given as n x n pair arrays.

    Works on the stationary edge chain ``(w_0, w_1) -> (w_1, w_2)``. Lags are
    summed until the Frobenius norm of ``C_k + C_k^T`` drops below 1e-12 or
    the cap is hit; the rest of the series is then added in closed form and
    its norm reported as ``truncation_residual``.
    """
    P, v = measure.P, measure.v
    edges = np.argwhere(measure.sft.adjacency.astype(bool))
    E = len(edges)
    pi = v[edges[:, 0]] * P[edges[:, 0], edges[:, 1]]
    phi = np.stack([o[edges[:, 0], edges[:, 1]] for o in obs], axis=1)
    constant = np.ptp(phi, axis=0) == 0
    phi = phi - pi @ phi
    phi[:, constant] = 0.0  # centre constants exactly, not to rounding level
    # T[e, e'] = P[j, k] when e = (i, j) and e' = (j, k)
    T = np.where(
        edges[:, 1][:, None] == edges[:, 0][None, :], P[edges[:, 1][:, None], edges[:, 1][None, :]], 0.0
    )
    weighted = phi * pi[:, None]
    Q = weighted.T @ phi
    cap = lag_cap if lag_cap is not None else max(10 * E, 1000)
    psi = phi
    inc_norm = 0.0
    k = 0
    for k in range(1, cap + 1):
        psi = T @ psi
        C = weighted.T @ psi
        inc = C + C.T
        Q = Q + inc
        inc_norm = float(np.linalg.norm(inc))
        if inc_norm < GK_INCREMENT_TOL:
            break
    # close the remaining lags exactly: sum_{j>=1} T^j psi = (Z - I) psi for centred psi,
    # Z = (I - T + 1 pi)^-1; this matters for nearly periodic chains
    Z_psi = np.linalg.solve(np.eye(E) - T + np.outer(np.ones(E), pi), psi)
    tail = weighted.T @ (Z_psi - psi)
    tail = tail + tail.T
    Q = Q + tail
    Q = 0.5 * (Q + Q.T)
    return CovarianceQ(Q, k, float(np.linalg.norm(tail)))


def green_kubo_covariance(
    measure: MarkovMeasure,
    fu: LocallyConstantFn,
    side: str = "u",
    fs: LocallyConstantFn | None = None,
    lag_cap: int | None = None,
) -> CovarianceQ:
    """Limiting covariance of ``(X_n, Y_n) / sqrt(n)`` for ``side`` ``"u"`` or ``"s"``.

    Observables of depth > 2 are handled by lifting to a block presentation.
    """
    if side not in ("u", "s"):
        raise ValueError("side must be 'u' or 's'")
    f = fu if side == "u" or fs is None else fs
    m, (f2,) = _as_depth_two(measure, [f])
    minus_g = -potential_G(m).pair_array()
    return _green_kubo(m, [np.nan_to_num(minus_g), np.nan_to_num(f2.pair_array())], lag_cap)


def observable_covariance(
    measure: MarkovMeasure, fns: list[LocallyConstantFn], lag_cap: int | None = None
) -> CovarianceQ:
    """Green-Kubo matrix for arbitrary locally constant observables."""
    m, fns2 = _as_depth_two(measure, fns)
    return _green_kubo(m, [np.nan_to_num(f.pair_array()) for f in fns2], lag_cap)


def coboundary_test(sft, fn: LocallyConstantFn, mean: float, L_max: int) -> CoboundaryVerdict:
    """Look for a periodic orbit on which ``fn - mean`` has nonzero sum.

    A coboundary ``g o s - g`` sums to zero on every periodic orbit, so a
    nonzero sum certifies that ``fn - mean`` is not one.
    """
    if L_max < 1:
        raise ValidationError("L_max must be >= 1")
    cycles = enumerate_cycles(sft, L_max)
    for c in cycles:
        s = cycle_sum(fn, c) - mean * len(c)
        if abs(s) > CYCLE_ZERO_TOL:
            return CoboundaryVerdict(False, c, s, len(cycles))
    return CoboundaryVerdict(True, None, 0.0, len(cycles))


def cycle_vectors(measure: MarkovMeasure, fu: LocallyConstantFn, L_max: int) -> tuple[list[Cycle], np.ndarray]:
    """Per-cycle centered sums ``(S(-G) - a|c|, S(Fu) - b|c|)``."""
    G = potential_G(measure)
    a = shift_entropy(measure)
    b = integrate(measure, fu)
    cycles = enumerate_cycles(measure.sft, L_max)
    vecs = np.array([[-cycle_sum(G, c) - a * len(c), cycle_sum(fu, c) - b * len(c)] for c in cycles])
    return cycles, vecs


def nonsingularity_check(measure: MarkovMeasure, fu: LocallyConstantFn, L_max: int = 8) -> NonsingularityReport:
    """Periodic-orbit rank test next to the exact determinant of ``Q``.

    Rank 2 means no combination ``-G - a + alpha (Fu - b)`` nor ``Fu - b`` is
    a coboundary, which is what makes ``Q`` nonsingular.
    """
    _, vecs = cycle_vectors(measure, fu, L_max)
    sv = np.linalg.svd(vecs, compute_uv=False) if len(vecs) else np.zeros(0)
    rank = int(np.sum(sv > RANK_TOL * max(1.0, sv[0]))) if sv.size else 0
    q = green_kubo_covariance(measure, fu).q
    det = float(np.linalg.det(q))
    nonsingular = rank == 2 and det > 1e-12 * float(np.trace(q)) ** 2
    return NonsingularityReport(det, rank, nonsingular, q, vecs)


def select_nondegenerate(
    sft,
    fu: LocallyConstantFn,
    opts: SolveOptions | None = None,
    roof: LocallyConstantFn | None = None,
    L_max: int = 8,
) -> tuple[SolveResult, NonsingularityReport]:
    """A dimension-2 solution whose covariance ``Q`` is nonsingular.

    Tries the default solution, then the search segments starting from every
    other simple cycle, then random level-set points. The first candidate
    passing :func:`nonsingularity_check` wins.
    """
    opts = opts or SolveOptions()
    base = solve_dimension_two(sft, fu, opts, roof)
    report = nonsingularity_check(base.measure, base.fu, L_max)
    if report.nonsingular:
        return base, report
    for cycle in simple_cycles(base.measure.sft):
        if cycle == base.start_cycle:
            continue
        res = solve_dimension_two(sft, fu, opts, roof, start_cycle=cycle)
        report = nonsingularity_check(res.measure, res.fu, L_max)
        if report.nonsingular:
            return res, report
    try:
        points = level_set_sample(sft, fu, 8, opts, roof)
    except Exception:  # noqa: BLE001 - fall through to the failure below
        points = []
    for m in points[1:]:
        report = nonsingularity_check(m, base.fu, L_max)
        if report.nonsingular:
            stats = flow_stats(m, base.roof, base.fu)
            return dataclasses.replace(base, measure=m, stats=stats, start_cycle=None), report
    raise NumericalFailure("no level-set point with nonsingular covariance was found")


def tail_probability(q: np.ndarray, n: int, D: float, C_tilde: float) -> float:
    """``P(Z1 <= -D sqrt(n), Z2 >= C_tilde)`` for ``Z ~ N(0, n q)``."""
    x0 = -D * math.sqrt(n)
    s1 = math.sqrt(max(n * q[0, 0], 0.0))
    s2 = math.sqrt(max(n * q[1, 1], 0.0))
    if s1 == 0.0:
        p1 = 1.0 if x0 >= 0 else 0.0
        p2 = 1.0 if s2 == 0.0 and C_tilde <= 0 else (float(ndtr(-C_tilde / s2)) if s2 else 0.0)
        return p1 * p2
    if s2 == 0.0:
        return float(ndtr(x0 / s1)) if C_tilde <= 0 else 0.0
    rho = float(np.clip(q[0, 1] / math.sqrt(q[0, 0] * q[1, 1]), -1.0, 1.0))
    z0 = x0 / s1
    resid = math.sqrt(max(1.0 - rho * rho, 0.0))
    if resid < 1e-12:
        # Z2 = rho * s2 * z; the event is an interval in z
        if rho > 0:
            lo = C_tilde / (rho * s2)
            return float(max(ndtr(z0) - ndtr(lo), 0.0)) if lo < z0 else 0.0
        hi = C_tilde / (rho * s2)
        return float(ndtr(min(z0, hi)))

    def integrand(z):
        return math.exp(-0.5 * z * z) / SQRT_2PI * ndtr((rho * s2 * z - C_tilde) / (s2 * resid))

    val, _ = _quad.quad(integrand, -np.inf, z0, epsabs=1e-14, epsrel=1e-10, limit=200)
    return float(val)


@numba.njit(cache=True, nogil=True)
def _grid_sums(paths, n_back, grid, logp, fu_vals, du, fs_vals, ds, nsym, out):
    """Raw sums at each grid point, written to ``out[r, k, :]`` for k = 0..3 as
    ``-sum G`` forward, ``sum Fu`` forward, ``-sum G`` backward, ``sum Fs`` backward."""
    for r in range(paths.shape[0]):
        row = paths[r]
        x = 0.0
        y = 0.0
        t = 0
        for gi in range(grid.shape[0]):
            while t < grid[gi]:
                c = n_back + t
                x -= logp[row[c], row[c + 1]]
                y += window_value(fu_vals, nsym, du, row, c)
                t += 1
            out[r, 0, gi] = x
            out[r, 1, gi] = y
        # separate pass: fusing both directions in one loop runs ~20x slower
        if n_back < grid[-1]:
            out[r, 2, :] = np.nan  # no room behind the origin
            out[r, 3, :] = np.nan
            continue
        x = 0.0
        y = 0.0
        t = 0
        for gi in range(grid.shape[0]):
            while t < grid[gi]:
                c = n_back - t
                x -= logp[row[c - 1], row[c]]
                y += window_value(fs_vals, nsym, ds, row, c)
                t += 1
            out[r, 2, gi] = x
            out[r, 3, gi] = y


def _centered_block(measure, fu, fs, paths, n_back, grid, a, b):
    """Centered ``(Xu, Yu, Xs, Ys)`` at ``grid``; each of shape (B, len(grid))."""
    grid = np.asarray(grid, dtype=np.int64)
    out = np.empty((paths.shape[0], 4, grid.shape[0]))
    with np.errstate(divide="ignore"):
        logp = np.log(measure.P)
    _grid_sums(
        paths, n_back, grid, logp,
        fu.values.ravel(), fu.depth, fs.values.ravel(), fs.depth, measure.n, out,
    )
    na = grid * a
    nb = grid * b
    return out[:, 0] - na, out[:, 1] - nb, out[:, 2] - na, out[:, 3] - nb


def _required_fwd(fu, fs, n_max):
    return max(n_max, n_max + fu.depth - 1, fs.depth - 1)


def centered_sums(
    measure: MarkovMeasure,
    fu: LocallyConstantFn,
    fs: LocallyConstantFn | None,
    path: Word,
    n_max: int,
) -> CenteredObs:
    """Centered observables for ``n = 0..n_max`` along one two-sided path."""
    fs = fu if fs is None else fs
    n_back = -path.start_index
    if n_back < n_max or path.end_index < _required_fwd(fu, fs, n_max):
        raise WordTooShort(
            f"path [{path.start_index}, {path.end_index}] too short for n_max={n_max}"
        )
    a = shift_entropy(measure)
    b = integrate(measure, fu)
    arr = np.asarray(path.symbols, dtype=np.int64)[None, :]
    xu, yu, xs, ys = _centered_block(measure, fu, fs, arr, n_back, np.arange(n_max + 1), a, b)
    return CenteredObs(xu[0], yu[0], xs[0], ys[0])


def empirical_covariance(
    measure: MarkovMeasure,
    fu: LocallyConstantFn,
    n: int,
    samples: int,
    seed: int,
    workers: int = 1,
) -> np.ndarray:
    """Sample covariance of ``(Xu_n, Yu_n) / sqrt(n)`` over seeded paths."""
    if n < 1 or samples < 2:
        raise ValidationError("need n >= 1 and samples >= 2")
    a = shift_entropy(measure)
    b = integrate(measure, fu)
    grid = np.array([n])

    def run(start, count):
        paths = sample_block(measure, 0, _required_fwd(fu, fu, n), seed, start, count)
        xu, yu, _, _ = _centered_block(measure, fu, fu, paths, 0, grid, a, b)
        return np.column_stack([xu[:, 0], yu[:, 0]])

    z = np.vstack(map_chunks(run, samples, workers)) / math.sqrt(n)
    return np.cov(z, rowvar=False)


def asip_harness(
    measure: MarkovMeasure,
    fu: LocallyConstantFn,
    fs: LocallyConstantFn | None,
    n_grid,
    samples: int,
    D: float = 1.5,
    C_tilde: float = 5.0,
    seed: int = 0,
    workers: int = 1,
) -> TailEventStats:
    """Monte Carlo frequencies of the tail events

    ``E_n = {X_n <= n a - D sqrt(n) and Y_n >= n b + C_tilde}``

    on both sides, next to the Gaussian prediction from the exact ``Q``.
    """
    fs = fu if fs is None else fs
    n_grid = [int(n) for n in n_grid]
    if not n_grid or any(n < 1 for n in n_grid) or any(x >= y for x, y in zip(n_grid, n_grid[1:])):
        raise ValidationError("n_grid must be a nonempty strictly increasing list of positive integers")
    if samples < 0:
        raise ValidationError("samples must be >= 0")
    nonsing = nonsingularity_check(measure, fu, L_max=6)
    if not nonsing.nonsingular:
        warnings.warn("covariance Q is singular; tail-event frequencies may vanish", stacklevel=2)
    q = nonsing.q
    rho = np.array([tail_probability(q, n, D, C_tilde) for n in n_grid])
    a = shift_entropy(measure)
    b = integrate(measure, fu)
    n_max = n_grid[-1]
    n_fwd = _required_fwd(fu, fs, n_max)
    idx = np.array(n_grid)
    thr = -D * np.sqrt(idx)

    def run(start, count):
        paths = sample_block(measure, n_max, n_fwd, seed, start, count)
        xu, yu, xs, ys = _centered_block(measure, fu, fs, paths, n_max, idx, a, b)
        eu = (xu <= thr) & (yu >= C_tilde)
        es = (xs <= thr) & (ys >= C_tilde)
        return eu.sum(axis=0), es.sum(axis=0), (eu & es).sum(axis=0)

    counts = map_chunks(run, samples, workers)
    zero = np.zeros(len(n_grid), dtype=np.int64)
    cu = sum((c[0] for c in counts), zero)
    cs = sum((c[1] for c in counts), zero)
    cj = sum((c[2] for c in counts), zero)
    denom = max(samples, 1)
    return TailEventStats(n_grid, cu / denom, cs / denom, cj / denom, rho, samples, D, C_tilde)
