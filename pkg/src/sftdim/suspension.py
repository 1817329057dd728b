"""Invariants of the suspension flow over a Markov measure.

With roof ``r`` and unstable expansion ``Fu``:

* flow entropy (Abramov)    ``h_flow = h / int r``
* Lyapunov exponent         ``lam = int Fu / int r``
* Hausdorff dimension       ``dim = 1 + 2 h_flow / lam = 1 + 2 h / int Fu``

The roof cancels from the dimension. Dimension 2 means ``h / int Fu = 1/2``,
equivalently ``b = 2a`` with ``a = -int G = h`` and ``b = int Fu``.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

from .errors import NonPositiveFunction
from .markov import MarkovMeasure, integrate, potential_G, shift_entropy
from .sft import LocallyConstantFn

FS_MISMATCH_RTOL = 1e-9


@dataclass(frozen=True)
class FlowStats:
    h_flow: float
    lam: float
    dim: float
    a: float
    b: float
    roof_mean: float
    fs_mean: float

    @property
    def ratio(self) -> float:
        """Shift entropy over ``int Fu``; equal to 1/2 exactly in dimension 2."""
        return self.a / self.b

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        d["ratio"] = self.ratio
        return d


@dataclass(frozen=True)
class DimTwoReport:
    is_dim_two: bool
    residual_ratio: float
    residual_b2a: float


def flow_stats(
    measure: MarkovMeasure,
    r: LocallyConstantFn,
    fu: LocallyConstantFn,
    fs: LocallyConstantFn | None = None,
) -> FlowStats:
    for name, fn in (("r", r), ("Fu", fu), ("Fs", fs)):
        if fn is not None and not fn.is_positive():
            raise NonPositiveFunction(f"{name} must be strictly positive")
    h = shift_entropy(measure)
    roof = integrate(measure, r)
    b = integrate(measure, fu)
    fs_mean = b if fs is None else integrate(measure, fs)
    if abs(fs_mean - b) > FS_MISMATCH_RTOL * b:
        warnings.warn(
            f"int Fs = {fs_mean!r} differs from int Fu = {b!r}; the stable and unstable "
            "exponents of a flow-invariant measure should agree",
            stacklevel=2,
        )
    h_flow = h / roof
    lam = b / roof
    if h_flow > lam + 1e-12:
        warnings.warn(
            f"flow entropy {h_flow!r} exceeds the exponent {lam!r}; Fu is too small to "
            "come from a geodesic flow",
            stacklevel=2,
        )
    return FlowStats(
        h_flow=h_flow,
        lam=lam,
        dim=1.0 + 2.0 * h / b,
        a=h,
        b=b,
        roof_mean=roof,
        fs_mean=fs_mean,
    )


def minus_integral_G(measure: MarkovMeasure) -> float:
    """``a = -int G`` computed from the potential table (equals the shift entropy)."""
    return -integrate(measure, potential_G(measure))


def check_dim_two(stats: FlowStats, tol: float = 1e-10) -> DimTwoReport:
    residual = stats.a / stats.b - 0.5
    return DimTwoReport(abs(residual) <= tol, residual, stats.b - 2.0 * stats.a)
