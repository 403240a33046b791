"""Teacher pools: quality scoring, filtering, matching distributions,
supervised-target selection, and the cache file format."""

import numpy as np
import pytest

from conftest import mk_mcq, mk_open, mk_temporal
from mskd.pool import (
    DegeneratePoolError,
    InvalidPoolError,
    MatchingDistribution,
    NoValidTargetError,
    apply_filter,
    build_pool,
    matching_distribution,
    read_pool_cache,
    sample_matches,
    select_sft_target,
    write_pool_cache,
)
from mskd.tasks import TemporalSegment, render_payload

GOOD = "<answer>B</answer>"
WRONG = "<answer>C</answer>"
BROKEN = "<answer>B"  # no closing tag


def test_build_pool_scores_closed():
    ex = mk_mcq(gt="B")
    pool = build_pool(ex, [GOOD, WRONG, BROKEN, GOOD])
    assert pool.k == 4
    assert pool.qualities == (1.0, 0.0, 0.0, 1.0)
    assert pool.tau_applied is None
    assert [r.outer_valid for r in pool.responses] == [True, True, False, True]


def test_build_pool_open_has_no_qualities():
    ex = mk_open()
    pool = build_pool(ex, ["<answer>a scene</answer>"] * 3)
    assert pool.qualities is None


def test_build_pool_rejects_empty():
    with pytest.raises(InvalidPoolError):
        build_pool(mk_mcq(), [])


def test_apply_filter_zeroes_below_tau():
    ex = mk_temporal(gt=(0.2, 0.6))
    raws = [render_payload(p) for p in ex.answer_space]
    pool = build_pool(ex, raws)
    filtered = apply_filter(pool, 0.5)
    assert filtered.tau_applied == 0.5
    for q, fq in zip(pool.qualities, filtered.qualities):
        assert fq == (q if q >= 0.5 else 0.0)
    # original pool untouched
    assert pool.tau_applied is None


def test_apply_filter_boundary_keeps_exact_tau():
    ex = mk_mcq(gt="B")
    pool = build_pool(ex, [GOOD, WRONG])
    filtered = apply_filter(pool, 1.0)
    assert filtered.qualities == (1.0, 0.0)


def test_apply_filter_open_ended_warns_noop():
    pool = build_pool(mk_open(), ["<answer>x</answer>"] * 2)
    with pytest.warns(UserWarning):
        out = apply_filter(pool, 0.3)
    assert out is pool


def test_apply_filter_rejects_bad_tau():
    pool = build_pool(mk_mcq(), [GOOD])
    with pytest.raises(ValueError):
        apply_filter(pool, -0.1)
    with pytest.raises(ValueError):
        apply_filter(pool, 1.5)


def test_matching_distribution_quality_mode():
    ex = mk_temporal(gt=(0.2, 0.6))
    raws = [render_payload(p) for p in ex.answer_space]
    pool = apply_filter(build_pool(ex, raws), 0.3)
    dist = matching_distribution(pool, "quality")
    q = np.array(pool.qualities)
    np.testing.assert_allclose(np.array(dist.probs), q / q.sum(), atol=1e-15)


def test_matching_distribution_uniform_before_filter_covers_all():
    ex = mk_mcq(gt="B")
    pool = build_pool(ex, [GOOD, WRONG, BROKEN, GOOD])
    for p in (pool, apply_filter(pool, 0.0)):
        dist = matching_distribution(p, "uniform")
        assert dist.probs == (0.25, 0.25, 0.25, 0.25)


def test_matching_distribution_uniform_after_filter_covers_survivors():
    ex = mk_mcq(gt="B")
    pool = apply_filter(build_pool(ex, [GOOD, WRONG, BROKEN, GOOD]), 0.5)
    dist = matching_distribution(pool, "uniform")
    assert dist.probs == (0.5, 0.0, 0.0, 0.5)


def test_matching_distribution_open_is_uniform():
    pool = build_pool(mk_open(), ["<answer>x</answer>"] * 5)
    for mode in ("quality", "uniform"):
        assert matching_distribution(pool, mode).probs == (0.2,) * 5


def test_matching_distribution_degenerate():
    ex = mk_mcq(gt="B")
    pool = apply_filter(build_pool(ex, [WRONG, BROKEN]), 0.3)
    with pytest.raises(DegeneratePoolError):
        matching_distribution(pool, "quality")
    with pytest.raises(DegeneratePoolError):
        matching_distribution(pool, "uniform")


def test_matching_distribution_validates_probs():
    with pytest.raises(ValueError):
        MatchingDistribution((0.5, 0.6))
    with pytest.raises(ValueError):
        MatchingDistribution((-0.1, 1.1))


def test_sample_matches_frequencies(rng):
    dist = MatchingDistribution((0.5, 0.3, 0.2, 0.0))
    draws = sample_matches(dist, 100_000, rng)
    freqs = np.bincount(draws, minlength=4) / draws.size
    assert np.abs(freqs - np.array(dist.probs)).max() < 0.01
    assert freqs[3] == 0.0  # zero-probability entry never drawn


def test_sample_matches_deterministic_per_seed():
    dist = MatchingDistribution((0.7, 0.3))
    a = sample_matches(dist, 1000, 42)
    b = sample_matches(dist, 1000, 42)
    assert np.array_equal(a, b)


def test_select_sft_target_argmax_lowest_index_ties():
    ex = mk_mcq(gt="B")
    pool = build_pool(ex, [WRONG, GOOD, GOOD])
    assert select_sft_target(pool) == 1


def test_select_sft_target_no_valid():
    ex = mk_mcq(gt="B")
    pool = build_pool(ex, [WRONG, BROKEN])
    with pytest.raises(NoValidTargetError):
        select_sft_target(pool)


def test_select_sft_target_open_seeded():
    pool = build_pool(mk_open(), ["<answer>x</answer>"] * 4)
    picks = {select_sft_target(pool, seed) for seed in range(40)}
    assert picks <= {0, 1, 2, 3}
    assert len(picks) > 1  # actually random across seeds
    assert select_sft_target(pool, 7) == select_sft_target(pool, 7)


def test_pool_cache_round_trip(tmp_path):
    ex_closed = mk_temporal(gt=(0.2, 0.6))
    raws = [render_payload(p) for p in ex_closed.answer_space]
    pool_closed = apply_filter(build_pool(ex_closed, raws), 0.3)
    pool_open = build_pool(mk_open(), ["<answer>cap</answer>", "<answer>tion</answer>"])
    path = tmp_path / "pools.jsonl"
    write_pool_cache([pool_closed, pool_open], path)
    loaded = {p.example_id: p for p in read_pool_cache(path)}
    got = loaded[ex_closed.id]
    assert got.qualities == pool_closed.qualities
    assert got.tau_applied == 0.3
    assert [r.payload for r in got.responses] == [r.payload for r in pool_closed.responses]
    assert loaded["open-0"].qualities is None
