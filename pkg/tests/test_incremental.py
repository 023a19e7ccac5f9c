import math

import numpy as np
import pytest
import scipy.linalg

from blockexpm.blocks import BlockColumn, matrix_from_columns
from blockexpm.dense import one_norm, rel_error_fro
from blockexpm.incremental import IncrementalExpState, run_adaptive, run_fixed
from blockexpm.pade import expm_baseline, scaling_power


def random_columns(rng, sizes, scale=1.0):
    """Random block-column sequence with the given block sizes."""
    cols = []
    dim = 0
    for b in sizes:
        cols.append(
            BlockColumn(
                scale * rng.standard_normal((dim, b)),
                scale * rng.standard_normal((b, b)),
            )
        )
        dim += b
    return cols


def test_two_by_two_closed_form():
    # two 1x1 blocks: exp([[a, c], [0, b]]) has corner c (e^a - e^b)/(a - b)
    a, b, c = 0.7, -1.3, 2.1
    cols = [
        BlockColumn(np.zeros((0, 1)), [[a]]),
        BlockColumn([[c]], [[b]]),
    ]
    results = list(run_fixed(cols, s=3))
    f = results[-1][0]
    want = c * (math.exp(a) - math.exp(b)) / (a - b)
    assert f.data[0, 0] == pytest.approx(math.exp(a), rel=1e-14)
    assert f.data[1, 1] == pytest.approx(math.exp(b), rel=1e-14)
    assert f.data[0, 1] == pytest.approx(want, rel=1e-13)
    assert f.data[1, 0] == 0.0


def test_first_stage_is_bitwise_baseline():
    rng = np.random.default_rng(101)
    cols = random_columns(rng, (4, 3))
    f0, _ = next(iter(run_fixed(cols, s=5)))
    assert np.array_equal(f0.data, expm_baseline(cols[0].diag, s=5))


def test_fixed_run_matches_baseline_every_stage():
    rng = np.random.default_rng(103)
    sizes = (3, 2, 4, 1, 3)
    cols = random_columns(rng, sizes)
    g = matrix_from_columns(cols)
    s = scaling_power(one_norm(g.data))
    partial = None
    for n, (f, report) in enumerate(run_fixed(cols, s=s)):
        partial = g.leading(n).data
        base = expm_baseline(partial, s=s)
        assert rel_error_fro(f.data, base) <= 1e-12
        assert report.step == n
        assert report.dim == partial.shape[0]
        assert report.s == s
        assert not report.restart
        assert report.seconds >= 0.0
    # last stage against an independent implementation
    assert rel_error_fro(f.data, scipy.linalg.expm(g.data)) <= 1e-12


def test_fixed_run_nesting_is_bitwise():
    rng = np.random.default_rng(107)
    cols = random_columns(rng, (2, 3, 1, 4, 2))
    prev = None
    for n, (f, _) in enumerate(run_fixed(cols, s=4)):
        if prev is not None:
            assert np.array_equal(f.leading(n - 1).data, prev.data)
        prev = f


def test_emitted_exponentials_are_stable_snapshots():
    rng = np.random.default_rng(109)
    cols = random_columns(rng, (2, 2, 2))
    emitted = [f for f, _ in run_fixed(cols, s=3)]
    # growing the state further must not mutate earlier snapshots
    again = [f for f, _ in run_fixed(cols, s=3)]
    for a, b in zip(emitted, again):
        assert np.array_equal(a.data, b.data)
    assert emitted[0].dim == 2 and emitted[2].dim == 6
    with pytest.raises(ValueError):
        emitted[1].data[0, 0] = 0.0


def test_unscaled_matrix_roundtrip_is_exact():
    rng = np.random.default_rng(113)
    cols = random_columns(rng, (3, 2, 2), scale=7.0)
    state = IncrementalExpState(cols[0].diag, s=6)
    for col in cols[1:]:
        state.step(col)
    assert np.array_equal(state.unscaled_matrix(), matrix_from_columns(cols).data)


def test_adaptive_restarts_match_baseline_exactly():
    rng = np.random.default_rng(127)
    # escalate the diagonal magnitude so the norm outgrows theta repeatedly
    sizes = (2, 2, 3, 2, 3)
    cols = []
    dim = 0
    for j, b in enumerate(sizes):
        mag = 4.0**j
        cols.append(
            BlockColumn(
                mag * rng.standard_normal((dim, b)),
                mag * rng.standard_normal((b, b)),
            )
        )
        dim += b
    g = matrix_from_columns(cols)

    seen_restart = False
    prev = None
    prev_s = None
    for n, (f, report) in enumerate(run_adaptive(cols)):
        partial = g.leading(n).data
        expected_s = scaling_power(one_norm(partial))
        if report.restart:
            seen_restart = True
            assert report.s == expected_s
            assert prev_s is not None and report.s > prev_s
            # a restart stage is exactly a fresh baseline call
            assert np.array_equal(f.data, expm_baseline(partial, s=report.s))
            # the partition was merged down to (leading, new) blocks
            assert f.nblocks <= 2
        else:
            assert rel_error_fro(f.data, expm_baseline(partial, s=report.s)) <= 1e-12
            if prev is not None:
                assert np.array_equal(f.data[: prev.dim, : prev.dim], prev.data)
        prev, prev_s = f, report.s
    assert seen_restart


def test_adaptive_without_growth_never_restarts():
    rng = np.random.default_rng(131)
    cols = random_columns(rng, (5, 2, 3), scale=0.05)
    reports = [r for _, r in run_adaptive(cols)]
    assert not any(r.restart for r in reports)
    assert all(r.s == reports[0].s for r in reports)


def test_stop_predicate_ends_run():
    rng = np.random.default_rng(137)
    cols = random_columns(rng, (2, 2, 2, 2))
    out = list(run_fixed(cols, s=2, stop=lambda f, r: r.step == 1))
    assert len(out) == 2
    out = list(run_adaptive(cols, stop=lambda f, r: f.dim >= 4))
    assert out[-1][1].dim == 4


def test_input_validation():
    rng = np.random.default_rng(139)
    with pytest.raises(ValueError):
        # first column must not have a top part
        list(run_fixed([BlockColumn(np.ones((2, 1)), [[1.0]])], s=0))
    cols = random_columns(rng, (2,)) + [BlockColumn(np.ones((5, 1)), [[1.0]])]
    with pytest.raises(ValueError):
        list(run_fixed(cols, s=0))
    with pytest.raises(ValueError):
        IncrementalExpState(np.zeros((0, 0)), s=0)
    with pytest.raises(ValueError):
        IncrementalExpState(np.eye(2), s=-1)
