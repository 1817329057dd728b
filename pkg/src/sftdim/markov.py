"""Markov measures compatible with an SFT.

A Markov matrix ``P`` on an SFT has ``P[i, j] > 0`` exactly where
``A[i, j] == 1``. Its stationary vector ``v`` and ``P`` define the
shift-invariant measure of a cylinder ``[w_0 ... w_m]`` as
``v[w_0] * prod P[w_i, w_{i+1}]``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import NotMixing, RowSum, SupportMismatch, ValidationError
from .sft import LocallyConstantFn, Sft, Word, block_recode, enumerate_words, mixing_index

ROW_TOL = 1e-12
RENORM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class MarkovMeasure:
    sft: Sft
    P: np.ndarray
    v: np.ndarray
    renormalized: bool = False

    def __post_init__(self):
        for name in ("P", "v"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.sft.n

    def reversed_matrix(self) -> np.ndarray:
        """Time reversal ``P^_ij = v_j P_ji / v_i``."""
        return (self.P.T * self.v[None, :]) / self.v[:, None]


def stationary_vector(P: np.ndarray) -> np.ndarray:
    """Left eigenvector for eigenvalue 1, normalized to sum 1.

    Solves ``(P^T - I) v = 0`` with the last equation replaced by the
    normalization, then applies one step of iterative refinement.
    """
    n = P.shape[0]
    M = P.T - np.eye(n)
    M[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    try:
        v = np.linalg.solve(M, rhs)
        v += np.linalg.solve(M, rhs - M @ v)
    except np.linalg.LinAlgError as exc:
        raise NotMixing("stationary vector is not unique") from exc
    return v


def validate_markov(sft: Sft, P) -> MarkovMeasure:
    """Check support, row sums and mixing; compute the stationary vector.

    Rows off by at most ``RENORM_TOL`` are renormalized with a warning;
    larger deviations raise :class:`RowSum`.
    """
    P = np.array(P, dtype=float)
    n = sft.n
    if P.shape != (n, n):
        raise ValidationError(f"P must be {n}x{n}, got shape {P.shape}")
    if not np.all(np.isfinite(P)):
        raise ValidationError("P has non-finite entries")
    for i in range(n):
        for j in range(n):
            if P[i, j] < 0:
                raise SupportMismatch(i, j, "negative entry")
            if (P[i, j] > 0) != bool(sft.adjacency[i, j]):
                raise SupportMismatch(i, j, f"A={sft.adjacency[i, j]} but P={P[i, j]!r}")
    renormalized = False
    sums = P.sum(axis=1)
    for i, s in enumerate(sums):
        dev = abs(s - 1.0)
        if dev > RENORM_TOL:
            raise RowSum(i, float(s))
        if dev > ROW_TOL:
            renormalized = True
    if renormalized:
        warnings.warn("rows of P deviated from 1 by more than 1e-12; renormalized", stacklevel=2)
        P = P / sums[:, None]
    if mixing_index(sft) is None:
        raise NotMixing("adjacency matrix is not primitive")
    v = stationary_vector(P)
    if not np.all(v > 0) or np.max(np.abs(v @ P - v)) > ROW_TOL:
        raise NotMixing(f"stationary vector is not strictly positive: {v}")
    return MarkovMeasure(sft, P, v, renormalized)


def log_cylinder_mass(measure: MarkovMeasure, word: Word | tuple) -> float:
    s = word.symbols if isinstance(word, Word) else tuple(word)
    if not s:
        raise ValueError("empty word")
    if not measure.sft.is_admissible(s):
        raise ValidationError(f"word {s} is not admissible")
    a = np.asarray(s)
    return float(np.log(measure.v[a[0]]) + np.log(measure.P[a[:-1], a[1:]]).sum())


def cylinder_mass(measure: MarkovMeasure, word: Word | tuple) -> float:
    """Measure of the cylinder spelled by ``word``; independent of its start index."""
    s = word.symbols if isinstance(word, Word) else tuple(word)
    if not s:
        raise ValueError("empty word")
    if not measure.sft.is_admissible(s):
        raise ValidationError(f"word {s} is not admissible")
    mass = measure.v[s[0]]
    for x, y in zip(s, s[1:]):
        mass *= measure.P[x, y]
    return float(mass)


def _xlogx(p: np.ndarray) -> np.ndarray:
    out = np.zeros_like(p)
    pos = p > 0
    out[pos] = p[pos] * np.log(p[pos])
    return out


def entropy_from_matrix(P: np.ndarray, v: np.ndarray) -> float:
    return float(-(v @ _xlogx(P).sum(axis=1)))


def shift_entropy(measure: MarkovMeasure) -> float:
    """Entropy of the shift: ``-sum_i v_i sum_j P_ij ln P_ij``."""
    return entropy_from_matrix(measure.P, measure.v)


def word_masses(measure: MarkovMeasure, k: int) -> np.ndarray:
    """Array of shape ``(n,) * k`` with the mass of every k-word (0 if inadmissible)."""
    m = measure.v.copy()
    P = measure.P
    for _ in range(k - 1):
        m = m[..., None] * P[(None,) * (m.ndim - 1) + (slice(None), slice(None))]
    return m


def integrate(measure: MarkovMeasure, fn: LocallyConstantFn) -> float:
    """Integral of a locally constant function against the Markov measure."""
    m = word_masses(measure, fn.depth)
    vals = np.where(m > 0, np.nan_to_num(fn.values, nan=0.0), 0.0)
    return float((m * vals).sum())


def potential_G(measure: MarkovMeasure) -> LocallyConstantFn:
    """Depth-2 potential ``G(w) = ln P[w_0, w_1]``."""
    vals = np.full(measure.P.shape, np.nan)
    mask = measure.sft.adjacency.astype(bool)
    vals[mask] = np.log(measure.P[mask])
    return LocallyConstantFn(2, vals)


def lift_measure(measure: MarkovMeasure, ell: int) -> MarkovMeasure:
    """The same measure written on the ``ell``-block presentation."""
    if ell == 1:
        return measure
    sft2, _ = block_recode(measure.sft, [], ell)
    blocks = enumerate_words(measure.sft, ell)
    P2 = np.zeros((sft2.n, sft2.n))
    for i, w in enumerate(blocks):
        for j in np.flatnonzero(sft2.adjacency[i]):
            P2[i, j] = measure.P[w[-1], blocks[j][-1]]
    return validate_markov(sft2, P2)


def topological_entropy(sft: Sft) -> float:
    return float(math.log(max(abs(np.linalg.eigvals(sft.adjacency.astype(float))))))
