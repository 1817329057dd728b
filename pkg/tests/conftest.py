import math
import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sftdim.config import load_config
from sftdim.fluctuation import select_nondegenerate
from sftdim.markov import validate_markov
from sftdim.sft import LocallyConstantFn, validate_sft
from sftdim.solver import SolveOptions

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("stress", parent=settings.get_profile("default"), max_examples=400)
settings.load_profile(os.environ.get("SFTDIM_HYPOTHESIS_PROFILE", "default"))

LN2, LN6 = math.log(2.0), math.log(6.0)


@pytest.fixture(scope="session")
def full2():
    return validate_sft(np.ones((2, 2), dtype=int))


@pytest.fixture(scope="session")
def golden():
    return validate_sft([[1, 1], [1, 0]])


@pytest.fixture(scope="session")
def fu26(full2):
    return LocallyConstantFn.from_table(full2, 1, {(0,): LN2, (1,): LN6})


@pytest.fixture(scope="session")
def uniform2(full2):
    return validate_markov(full2, [[0.5, 0.5], [0.5, 0.5]])


@pytest.fixture(scope="session")
def solved26():
    """Nondegenerate dimension-2 solution on the (ln 2, ln 6) full-shift preset."""
    cfg = load_config("full2_ln2ln6")
    res, report = select_nondegenerate(cfg.sft, cfg.fu, SolveOptions(), cfg.roof)
    return cfg, res, report


def random_primitive(rng, n, density=0.6):
    """A random primitive 0/1 matrix (retry until the power test passes)."""
    from sftdim.sft import mixing_index

    while True:
        a = (rng.random((n, n)) < density).astype(int)
        if a.any(axis=0).all() and a.any(axis=1).all():
            sft = validate_sft(a)
            if mixing_index(sft) is not None:
                return sft


def random_markov(rng, sft):
    w = rng.random((sft.n, sft.n)) * sft.adjacency + 1e-3 * sft.adjacency
    return validate_markov(sft, w / w.sum(axis=1, keepdims=True))
