"""Subshifts of finite type, words, cycles and locally constant functions.

Symbols are 0-based integers internally. Each :class:`Sft` also carries a
tuple of display labels (``"1".."n"`` by default) used by the config layer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import BadTheta, NonPositiveFunction, StrandedSymbol, ValidationError, WordTooShort


@dataclass(frozen=True, eq=False)
class Sft:
    """Two-sided subshift of finite type given by a 0/1 adjacency matrix.

    ``theta`` is the base of the metric ``d(w, w') = theta ** n(w, w')``. It is
    kept for reference only; none of the computed quantities depend on it.
    """

    adjacency: np.ndarray
    theta: float = 0.5
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        a = np.array(self.adjacency, dtype=np.int8)
        a.setflags(write=False)
        object.__setattr__(self, "adjacency", a)
        if not self.labels:
            object.__setattr__(self, "labels", tuple(str(i + 1) for i in range(a.shape[0])))

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    def allowed(self, i: int, j: int) -> bool:
        return bool(self.adjacency[i, j])

    def is_admissible(self, symbols: Sequence[int]) -> bool:
        return all(self.adjacency[x, y] for x, y in zip(symbols, symbols[1:]))

    def successors(self, i: int) -> list[int]:
        return [int(j) for j in np.flatnonzero(self.adjacency[i])]

    def __repr__(self):
        return f"Sft(n={self.n}, adjacency={self.adjacency.tolist()}, theta={self.theta})"


@dataclass(frozen=True)
class Word:
    """Finite word placed at ``start_index``; denotes the cylinder on
    ``[start_index, start_index + len - 1]``."""

    symbols: tuple[int, ...]
    start_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(int(s) for s in self.symbols))

    def __len__(self):
        return len(self.symbols)

    @property
    def end_index(self) -> int:
        return self.start_index + len(self.symbols) - 1

    def at(self, index: int) -> int:
        k = index - self.start_index
        if not 0 <= k < len(self.symbols):
            raise WordTooShort(f"index {index} outside word [{self.start_index}, {self.end_index}]")
        return self.symbols[k]

    def window(self, lo: int, hi: int) -> "Word":
        """Sub-word on the absolute index range ``[lo, hi]``."""
        if lo < self.start_index or hi > self.end_index:
            raise WordTooShort(
                f"range [{lo}, {hi}] not covered by word [{self.start_index}, {self.end_index}]"
            )
        a = lo - self.start_index
        return Word(self.symbols[a : a + hi - lo + 1], lo)


@dataclass(frozen=True)
class Cycle:
    """Periodic orbit, stored as its lexicographically minimal rotation."""

    symbols: tuple[int, ...]

    def __len__(self):
        return len(self.symbols)


@dataclass(frozen=True, eq=False)
class LocallyConstantFn:
    """Function on the shift depending on the symbols at positions 0..depth-1.

    ``values`` is a dense array of shape ``(n,) * depth``; inadmissible words
    hold NaN. Use :meth:`from_table` to build one with validation.
    """

    depth: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_table(
        cls,
        sft: Sft,
        depth: int,
        table: Mapping[tuple[int, ...], float],
        positive: bool = False,
    ) -> "LocallyConstantFn":
        if depth < 1:
            raise ValidationError(f"depth must be >= 1, got {depth}")
        words = enumerate_words(sft, depth)
        expected = set(words)
        got = {tuple(int(s) for s in k) for k in table}
        missing = sorted(expected - got)
        extra = sorted(got - expected)
        if missing or extra:
            raise ValidationError(
                f"table must cover exactly the admissible {depth}-words; "
                f"missing={missing[:5]} extra={extra[:5]}"
            )
        values = np.full((sft.n,) * depth, np.nan)
        for k, x in table.items():
            values[tuple(int(s) for s in k)] = float(x)
        fn = cls(depth, values)
        if positive and not fn.is_positive():
            raise NonPositiveFunction("function must be strictly positive on every admissible word")
        return fn

    @classmethod
    def constant(cls, sft: Sft, c: float, depth: int = 1) -> "LocallyConstantFn":
        return cls.from_callable(sft, depth, lambda w: c)

    @classmethod
    def from_callable(
        cls, sft: Sft, depth: int, f: Callable[[tuple[int, ...]], float]
    ) -> "LocallyConstantFn":
        return cls.from_table(sft, depth, {w: f(w) for w in enumerate_words(sft, depth)})

    def __call__(self, word: Sequence[int]) -> float:
        if len(word) != self.depth:
            raise ValueError(f"expected a {self.depth}-word, got {tuple(word)}")
        return float(self.values[tuple(word)])

    @property
    def alphabet_size(self) -> int:
        return self.values.shape[0]

    def table(self) -> dict[tuple[int, ...], float]:
        return {
            tuple(int(i) for i in idx): float(self.values[idx])
            for idx in zip(*np.nonzero(~np.isnan(self.values)))
        }

    def is_positive(self) -> bool:
        finite = self.values[~np.isnan(self.values)]
        return bool(finite.size and np.all(finite > 0))

    def min(self) -> float:
        return float(np.nanmin(self.values))

    def max(self) -> float:
        return float(np.nanmax(self.values))

    def extended(self, depth: int) -> "LocallyConstantFn":
        """Same function viewed as depth ``depth`` (reads the first ``self.depth`` symbols)."""
        if depth < self.depth:
            raise ValueError("cannot reduce depth")
        idx = (slice(None),) * self.depth + (None,) * (depth - self.depth)
        v = np.broadcast_to(self.values[idx], (self.alphabet_size,) * depth).copy()
        return LocallyConstantFn(depth, v)

    def pair_array(self) -> np.ndarray:
        """Values as an n x n array indexed by (w0, w1); requires depth <= 2."""
        if self.depth > 2:
            raise ValueError("pair_array needs depth <= 2; block-recode first")
        return self.extended(2).values

    def windows(self, paths: np.ndarray) -> np.ndarray:
        """Evaluate on every length-``depth`` window of each row of ``paths``.

        ``paths`` has shape ``(..., L)``; the result has shape ``(..., L - depth + 1)``.
        """
        paths = np.asarray(paths)
        m = paths.shape[-1] - self.depth + 1
        if m < 1:
            raise WordTooShort(f"need at least {self.depth} symbols, got {paths.shape[-1]}")
        flat = np.zeros(paths.shape[:-1] + (m,), dtype=np.int64)
        n = self.alphabet_size
        for i in range(self.depth):
            flat = flat * n + paths[..., i : i + m]
        return self.values.ravel()[flat]


def validate_sft(adjacency, theta: float = 0.5, labels: Sequence[str] = ()) -> Sft:
    a = np.asarray(adjacency)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 2:
        raise ValidationError(f"adjacency must be a square matrix of size >= 2, got shape {a.shape}")
    if not np.all((a == 0) | (a == 1)):
        raise ValidationError("adjacency entries must be 0 or 1")
    if not (isinstance(theta, (int, float)) and 0.0 < float(theta) < 1.0):
        raise BadTheta(theta)
    for i in range(a.shape[0]):
        if not a[i].any():
            raise StrandedSymbol(i, "row")
        if not a[:, i].any():
            raise StrandedSymbol(i, "column")
    if labels and len(labels) != a.shape[0]:
        raise ValidationError("one label per symbol required")
    return Sft(a, float(theta), tuple(labels))


def mixing_index(sft: Sft, p_max: int | None = None) -> int | None:
    """Smallest p <= p_max with A^p entrywise positive, or None.

    The default bound (n-1)^2 + 1 is Wielandt's: a primitive matrix reaches
    positivity by then, so None means not mixing.
    """
    n = sft.n
    if p_max is None:
        p_max = (n - 1) ** 2 + 1
    a = sft.adjacency.astype(bool)
    b = a.copy()
    for p in range(1, p_max + 1):
        if b.all():
            return p
        b = (b.astype(np.int64) @ a.astype(np.int64)) > 0
    return None


def enumerate_words(sft: Sft, k: int) -> list[tuple[int, ...]]:
    """All admissible k-words in lexicographic order."""
    if k < 1:
        raise ValueError("k must be >= 1")
    words = [(i,) for i in range(sft.n)]
    for _ in range(k - 1):
        words = [w + (j,) for w in words for j in sft.successors(w[-1])]
    return words


def _is_lyndon(w: tuple[int, ...]) -> bool:
    return all(w < w[i:] + w[:i] for i in range(1, len(w)))


def enumerate_cycles(sft: Sft, L_max: int) -> list[Cycle]:
    """Periodic orbits of minimal period <= L_max, one per rotation class.

    Ordered by length, then lexicographically.
    """
    out: list[Cycle] = []
    for L in range(1, L_max + 1):
        for w in enumerate_words(sft, L):
            if sft.adjacency[w[-1], w[0]] and _is_lyndon(w):
                out.append(Cycle(w))
    return out


def birkhoff_sum(fn: LocallyConstantFn, word: Word | Sequence[int]) -> float:
    """Sum of ``fn`` over the m-k+1 windows of a word of length m."""
    symbols = word.symbols if isinstance(word, Word) else tuple(word)
    if len(symbols) < fn.depth:
        raise WordTooShort(f"word of length {len(symbols)} shorter than depth {fn.depth}")
    return float(fn.windows(np.asarray(symbols, dtype=np.int64)).sum())


def cycle_sum(fn: LocallyConstantFn, cycle: Cycle | Sequence[int]) -> float:
    """Birkhoff sum of ``fn`` once around a periodic orbit."""
    c = cycle.symbols if isinstance(cycle, Cycle) else tuple(cycle)
    L = len(c)
    reps = -(-(L + fn.depth - 1) // L)
    ext = np.tile(np.asarray(c, dtype=np.int64), reps)[: L + fn.depth - 1]
    return float(fn.windows(ext).sum())


@lru_cache(maxsize=64)
def _block_index(sft: Sft, ell: int) -> dict[tuple[int, ...], int]:
    return {w: i for i, w in enumerate(enumerate_words(sft, ell))}


def block_recode(
    sft: Sft, fns: Iterable[LocallyConstantFn], ell: int
) -> tuple[Sft, list[LocallyConstantFn]]:
    """Higher-block presentation on the admissible ``ell``-words.

    Two blocks are adjacent iff they overlap in ``ell - 1`` symbols. A depth-k
    function becomes depth ``max(1, k - ell + 1)``, evaluated on the old word
    spelled out by the overlapping blocks. ``ell == 1`` is the identity.
    """
    fns = list(fns)
    if ell < 1:
        raise ValueError("ell must be >= 1")
    if ell == 1:
        return sft, fns
    blocks = enumerate_words(sft, ell)
    index = _block_index(sft, ell)
    m = len(blocks)
    adj = np.zeros((m, m), dtype=np.int8)
    for i, w in enumerate(blocks):
        for j in sft.successors(w[-1]):
            adj[i, index[w[1:] + (j,)]] = 1
    sep = "" if all(len(s) == 1 for s in sft.labels) else "."
    labels = tuple(sep.join(sft.labels[s] for s in w) for w in blocks)
    new = Sft(adj, sft.theta, labels)

    out = []
    for fn in fns:
        k = fn.depth
        k2 = max(1, k - ell + 1)
        vals = np.full((m,) * k2, np.nan)
        for bw in enumerate_words(new, k2):
            old = blocks[bw[0]] + tuple(blocks[b][-1] for b in bw[1:])
            vals[bw] = fn.values[old[:k]]
        out.append(LocallyConstantFn(k2, vals))
    return new, out


def recode_word(sft: Sft, word: Word | Sequence[int], ell: int) -> Word:
    """Image of a word under the ``ell``-block map; its start index is kept."""
    w = word if isinstance(word, Word) else Word(tuple(word))
    if ell == 1:
        return w
    if len(w) < ell:
        raise WordTooShort(f"need at least {ell} symbols to recode at level {ell}")
    index = _block_index(sft, ell)
    s = w.symbols
    return Word(tuple(index[s[i : i + ell]] for i in range(len(s) - ell + 1)), w.start_index)
