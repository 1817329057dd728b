import numpy as np
import pytest

from sftdim.markov import validate_markov
from sftdim.sampling import map_chunks, philox4x32, sample_block, sample_path, uniforms

U = np.uint64


@pytest.mark.parametrize(
    "ctr,key,expected",
    [
        ((0, 0, 0, 0), (0, 0), (0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8)),
        ((0xFFFFFFFF,) * 4, (0xFFFFFFFF,) * 2, (0x408F276D, 0x41C83B0E, 0xA20BC7C6, 0x6D5451FD)),
        (
            (0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344),
            (0xA4093822, 0x299F31D0),
            (0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1),
        ),
    ],
)
def test_philox_known_answers(ctr, key, expected):
    out = philox4x32(*(U(c) for c in ctr), *(U(k) for k in key))
    assert tuple(int(x) for x in out) == expected


def test_uniforms_are_in_unit_interval_and_flat():
    u = uniforms(11, 0, 7, 200_000)
    assert u.min() >= 0.0 and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 0.005
    counts = np.histogram(u, bins=20, range=(0, 1))[0]
    expected = len(u) / 20
    chi2 = ((counts - expected) ** 2 / expected).sum()
    assert chi2 < 50  # 19 dof, p ~ 1e-4


def test_streams_differ_by_sample_direction_and_seed():
    a = uniforms(1, 0, 0, 8)
    assert not np.array_equal(a, uniforms(1, 0, 1, 8))
    assert not np.array_equal(a, uniforms(1, 1, 0, 8))
    assert not np.array_equal(a, uniforms(2, 0, 0, 8))
    assert np.array_equal(a, uniforms(1, 0, 0, 8))


def test_seed_range_checked(uniform2):
    with pytest.raises(ValueError):
        uniforms(-1, 0, 0, 4)
    with pytest.raises(ValueError):
        sample_block(uniform2, 1, 1, 2**64, 0, 1)


def test_paths_are_admissible(golden):
    m = validate_markov(golden, [[0.4, 0.6], [1.0, 0.0]])
    paths = sample_block(m, 50, 50, 3, 0, 200)
    assert not np.any((paths[:, :-1] == 1) & (paths[:, 1:] == 1))


def test_block_rows_equal_single_paths(golden):
    m = validate_markov(golden, [[0.4, 0.6], [1.0, 0.0]])
    block = sample_block(m, 6, 9, 42, 10, 5)
    for r in range(5):
        w = sample_path(m, 6, 9, 42, index=10 + r)
        assert w.start_index == -6 and w.end_index == 9
        assert tuple(block[r]) == w.symbols


def test_longer_paths_extend_shorter_ones(uniform2):
    short = sample_block(uniform2, 5, 5, 9, 0, 20)
    long = sample_block(uniform2, 30, 40, 9, 0, 20)
    assert np.array_equal(long[:, 25:36], short)


def test_worker_count_does_not_change_results(uniform2):
    def fn(start, count):
        return sample_block(uniform2, 3, 3, 5, start, count).sum(axis=1)

    one = np.concatenate(map_chunks(fn, 2500, workers=1))
    three = np.concatenate(map_chunks(fn, 2500, workers=3))
    assert np.array_equal(one, three)


def test_marginals_and_transitions_match_the_chain(golden):
    m = validate_markov(golden, [[0.3, 0.7], [1.0, 0.0]])
    paths = sample_block(m, 10, 10, 123, 0, 20_000)
    v = m.v
    for col in (0, 10, 20):
        freq = np.mean(paths[:, col] == 0)
        se = np.sqrt(v[0] * v[1] / paths.shape[0])
        assert abs(freq - v[0]) < 4 * se
    # forward transitions 0 -> 0 at the centre and backward at the left end
    for j in (10, 0):
        sel = paths[:, j] == 0
        freq = np.mean(paths[sel, j + 1] == 0)
        se = np.sqrt(0.3 * 0.7 / sel.sum())
        assert abs(freq - 0.3) < 4 * se


def test_reversed_chain_gives_stationary_pairs(full2):
    m = validate_markov(full2, [[0.9, 0.1], [0.4, 0.6]])
    paths = sample_block(m, 1, 1, 77, 0, 40_000)
    # the pair (w_-1, w_0) must have mass v_i P_ij
    for i in range(2):
        for j in range(2):
            p = m.v[i] * m.P[i, j]
            freq = np.mean((paths[:, 0] == i) & (paths[:, 1] == j))
            assert abs(freq - p) < 4 * np.sqrt(p * (1 - p) / paths.shape[0])
