"""Cylinder lower bounds for flow-ball masses and the singularity series.

For a threshold ``T = -ln eps + C`` the stopping times are the least
``n1, n2 >= 0`` with

    sum_{k=0}^{n1} Fu(s^k w) >= T        sum_{k=0}^{n2} Fs(s^-k w) >= T

and the ball of radius ``eps`` around the point coded by ``w`` has mass at
least ``(eps / 2) * mu([w]_{-n2}^{n1})``. Along ``eps(n) = exp(-n b)`` these
masses underflow quickly, so everything is carried in logs and ``eps`` itself
is kept as a :class:`decimal.Decimal`.

The numbers reported are the cylinder proxy for the ball mass, not ball
masses on a surface.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Context, Decimal
from pathlib import Path

import numba
import numpy as np

from .errors import ValidationError, WordTooShort
from .markov import MarkovMeasure, integrate, shift_entropy
from .sampling import map_chunks, sample_block, window_value
from .sft import LocallyConstantFn, Word

CSV_HEADER = ("n", "epsilon", "max_log_ratio", "q90_log_ratio", "frac_exceed")
SIG_DIGITS = 12
CROSS_RTOL = 1e-12
LOG_HALF = math.log(0.5)
PROXY_NOTE = "ratio = (eps/2) * mu(cylinder) / eps^2, a lower-bound proxy for m(B(x, eps)) / eps^2"
_DEC = Context(prec=40)


@numba.njit(cache=True, nogil=True)
def _stopping_kernel(paths, n_back, thresholds, logp, logv, fu_vals, du, fs_vals, ds, nsym, n1, n2, logmass):
    """Fill ``n1, n2, logmass`` of shape (B, m) for increasing ``thresholds``.

    A crossing the path cannot certify is marked with -1.
    """
    m = thresholds.shape[0]
    width = paths.shape[1]
    for r in range(paths.shape[0]):
        row = paths[r]
        # forward: sum Fu over k = 0..n1; cylinder log mass gains ln P on each step
        s = 0.0
        g = 0.0
        k = 0
        j = 0
        while j < m and n_back + k + du <= width:
            s += window_value(fu_vals, nsym, du, row, n_back + k)
            while j < m and s >= thresholds[j] - CROSS_RTOL * max(1.0, abs(thresholds[j])):
                n1[r, j] = k
                logmass[r, j] = g
                j += 1
            if n_back + k + 1 < width:
                g += logp[row[n_back + k], row[n_back + k + 1]]
            k += 1
        while j < m:
            n1[r, j] = -1
            j += 1
        s = 0.0
        g = 0.0
        k = 0
        j = 0
        while j < m and k <= n_back and n_back - k + ds <= width:
            c = n_back - k
            s += window_value(fs_vals, nsym, ds, row, c)
            while j < m and s >= thresholds[j] - CROSS_RTOL * max(1.0, abs(thresholds[j])):
                n2[r, j] = k
                logmass[r, j] += g + logv[row[c]]
                j += 1
            if c > 0:
                g += logp[row[c - 1], row[c]]
            k += 1
        while j < m:
            n2[r, j] = -1
            j += 1


def _stopping_block(measure, fu, fs, paths, n_back, thresholds):
    thresholds = np.asarray(thresholds, dtype=float)
    shape = (paths.shape[0], thresholds.shape[0])
    n1 = np.empty(shape, dtype=np.int64)
    n2 = np.empty(shape, dtype=np.int64)
    logmass = np.zeros(shape)
    with np.errstate(divide="ignore"):
        logp = np.log(measure.P)
    _stopping_kernel(
        paths, n_back, thresholds, logp, np.log(measure.v),
        fu.values.ravel(), fu.depth, fs.values.ravel(), fs.depth, measure.n,
        n1, n2, logmass,
    )
    return n1, n2, logmass


def _threshold(epsilon, C, log_epsilon):
    if log_epsilon is None:
        if epsilon is None:
            raise ValueError("give epsilon or log_epsilon")
        eps = Decimal(epsilon) if not isinstance(epsilon, Decimal) else epsilon
        if not 0 < eps < 1:
            raise ValidationError(f"epsilon must lie in (0, 1), got {epsilon}")
        log_epsilon = float(eps.ln(_DEC))
    elif not log_epsilon < 0:
        raise ValidationError("log_epsilon must be negative")
    return -log_epsilon + C, log_epsilon


def stopping_times(
    path: Word,
    fu: LocallyConstantFn,
    fs: LocallyConstantFn | None = None,
    epsilon: float | Decimal | None = None,
    C: float = 0.0,
    *,
    log_epsilon: float | None = None,
) -> tuple[int, int]:
    """Least ``(n1, n2)`` whose forward Fu sum and backward Fs sum reach
    ``-ln eps + C``. Sums compare with a relative slack of 1e-12.
    """
    fs = fu if fs is None else fs
    T, _ = _threshold(epsilon, C, log_epsilon)
    if path.start_index > 0 or path.end_index < 0:
        raise WordTooShort("path must contain index 0")
    n = fu.values.shape[0]
    row = np.asarray(path.symbols, dtype=np.int64)[None, :]
    n1 = np.empty((1, 1), dtype=np.int64)
    n2 = np.empty((1, 1), dtype=np.int64)
    # the mass bookkeeping is unused here, so zero log tables stand in for a measure
    _stopping_kernel(
        row, -path.start_index, np.array([T]), np.zeros((n, n)), np.zeros(n),
        fu.values.ravel(), fu.depth, fs.values.ravel(), fs.depth, n,
        n1, n2, np.zeros((1, 1)),
    )
    if n1[0, 0] < 0 or n2[0, 0] < 0:
        raise WordTooShort(
            f"path [{path.start_index}, {path.end_index}] does not reach the threshold {T:.6g}"
        )
    return int(n1[0, 0]), int(n2[0, 0])


@dataclass(frozen=True)
class MassBound:
    n1: int
    n2: int
    log_mass: float
    log_epsilon: float

    @property
    def log_bound(self) -> float:
        return self.log_epsilon + LOG_HALF + self.log_mass

    @property
    def log_ratio(self) -> float:
        return self.log_bound - 2.0 * self.log_epsilon

    @property
    def bound(self) -> float:
        return math.exp(self.log_bound)

    @property
    def ratio(self) -> float:
        return math.exp(self.log_ratio)


def mass_lower_bound(
    measure: MarkovMeasure,
    path: Word,
    epsilon: float | Decimal | None,
    C: float,
    fu: LocallyConstantFn,
    fs: LocallyConstantFn | None = None,
    *,
    log_epsilon: float | None = None,
) -> MassBound:
    """``(eps/2) * mu([w]_{-n2}^{n1})`` and its ratio to ``eps^2``, in logs."""
    fs = fu if fs is None else fs
    T, log_eps = _threshold(epsilon, C, log_epsilon)
    if not measure.sft.is_admissible(path.symbols):
        raise ValidationError("path is not admissible")
    row = np.asarray(path.symbols, dtype=np.int64)[None, :]
    n1, n2, lm = _stopping_block(measure, fu, fs, row, -path.start_index, [T])
    if n1[0, 0] < 0 or n2[0, 0] < 0:
        raise WordTooShort(f"path [{path.start_index}, {path.end_index}] does not reach the threshold {T:.6g}")
    return MassBound(int(n1[0, 0]), int(n2[0, 0]), float(lm[0, 0]), log_eps)


@dataclass(frozen=True)
class DiagnosticRow:
    n: int
    epsilon: Decimal
    log_epsilon: float
    max_log_ratio: float
    q90_log_ratio: float
    frac_exceed: float


@dataclass(frozen=True)
class DiagnosticSeries:
    rows: list[DiagnosticRow]
    params: dict = field(default_factory=dict)
    note: str = PROXY_NOTE

    def trend(self) -> str:
        """``increasing``, ``decreasing`` or ``mixed`` for max_log_ratio along n."""
        d = np.diff([r.max_log_ratio for r in self.rows])
        if d.size and np.all(d > 0):
            return "increasing"
        if d.size and np.all(d < 0):
            return "decreasing"
        return "mixed"


def epsilon_of(n: int, b: float) -> Decimal:
    """``exp(-n b)`` to 40 significant digits; representable far below float range."""
    return (Decimal(-n) * Decimal(b)).exp(_DEC)


def guaranteed_length(fn: LocallyConstantFn, T: float) -> int:
    """Steps after which a sum of ``fn`` surely exceeds ``T``, plus window room."""
    return int(math.ceil(max(T, 0.0) / fn.min())) + fn.depth


def singularity_series(
    measure: MarkovMeasure,
    fu: LocallyConstantFn,
    fs: LocallyConstantFn | None,
    D: float,
    C: float,
    n_grid,
    samples: int,
    seed: int,
    workers: int = 1,
) -> DiagnosticSeries:
    """Statistics of ``log ratio`` over sampled paths at ``eps(n) = exp(-n b)``.

    ``frac_exceed`` counts paths with ``log ratio >= D sqrt(n) - 2 (a/b) C``,
    the second term being the shift of the centered sums caused by ``C``.
    """
    fs = fu if fs is None else fs
    n_grid = [int(n) for n in n_grid]
    if not n_grid or n_grid[0] < 1 or any(x >= y for x, y in zip(n_grid, n_grid[1:])):
        raise ValidationError("n_grid must be a nonempty strictly increasing list of positive integers")
    if samples < 1:
        raise ValidationError("samples must be >= 1")
    a = shift_entropy(measure)
    b = integrate(measure, fu)
    if abs(a / b - 0.5) > 1e-6:
        warnings.warn(
            f"h / int Fu = {a / b:.12g} is not 1/2; the series is meaningful only in dimension 2",
            stacklevel=2,
        )
    ns = np.array(n_grid)
    log_eps = -ns * b
    T = -log_eps + C
    if T[0] <= 0:
        raise ValidationError("C is so negative that the first threshold is not positive")
    n_fwd = guaranteed_length(fu, T[-1])
    n_back = guaranteed_length(fs, T[-1])
    cut = D * np.sqrt(ns) - 2.0 * (a / b) * C

    def run(start, count):
        paths = sample_block(measure, n_back, n_fwd, seed, start, count)
        n1, n2, lm = _stopping_block(measure, fu, fs, paths, n_back, T)
        if np.any(n1 < 0) or np.any(n2 < 0):
            raise WordTooShort("sampled path too short; internal length bound violated")
        return log_eps + LOG_HALF + lm - 2.0 * log_eps

    blocks = map_chunks(run, samples, workers)
    log_ratio = np.sort(np.vstack(blocks), axis=0)
    rows = []
    for j, n in enumerate(n_grid):
        col = log_ratio[:, j]
        rows.append(
            DiagnosticRow(
                n=n,
                epsilon=epsilon_of(n, b),
                log_epsilon=float(log_eps[j]),
                max_log_ratio=float(col[-1]),
                q90_log_ratio=float(np.quantile(col, 0.9)),
                frac_exceed=float(np.count_nonzero(col >= cut[j]) / samples),
            )
        )
    params = {"D": D, "C": C, "C_tilde": C, "samples": samples, "seed": seed, "a": a, "b": b}
    return DiagnosticSeries(rows, params)


def _fixed(x) -> str:
    """Decimal fixed notation rounded to 12 significant digits."""
    d = x if isinstance(x, Decimal) else Decimal(float(x))
    if not d.is_finite():
        return str(float(d)).lower()
    if d == 0:
        return "0"
    q = d.quantize(Decimal(1).scaleb(d.adjusted() - SIG_DIGITS + 1), rounding=ROUND_HALF_EVEN, context=_DEC)
    return format(q, "f")


def series_csv(series: DiagnosticSeries) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in series.rows:
        w.writerow([str(r.n), _fixed(r.epsilon), _fixed(r.max_log_ratio), _fixed(r.q90_log_ratio), _fixed(r.frac_exceed)])
    return buf.getvalue()


def export_series(series: DiagnosticSeries, destination) -> None:
    """Write the CSV to a path or a text stream; I/O errors propagate unchanged."""
    text = series_csv(series)
    if hasattr(destination, "write"):
        destination.write(text)
    else:
        with open(Path(destination), "w", newline="", encoding="ascii") as fh:
            fh.write(text)


def read_series(source) -> DiagnosticSeries:
    """Parse an exported CSV. Values come back at their written precision."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        text = Path(source).read_text(encoding="ascii")
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if tuple(header or ()) != CSV_HEADER:
        raise ValidationError(f"unexpected CSV header {header!r}")
    rows = []
    for lineno, rec in enumerate(reader, start=2):
        if len(rec) != len(CSV_HEADER):
            raise ValidationError(f"line {lineno}: expected {len(CSV_HEADER)} fields, got {len(rec)}")
        eps = Decimal(rec[1])
        rows.append(
            DiagnosticRow(
                n=int(rec[0]),
                epsilon=eps,
                log_epsilon=float(eps.ln(_DEC)),
                max_log_ratio=float(rec[2]),
                q90_log_ratio=float(rec[3]),
                frac_exceed=float(rec[4]),
            )
        )
    return DiagnosticSeries(rows)
