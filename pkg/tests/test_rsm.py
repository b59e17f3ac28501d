import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from rsmatch.errors import EmptyReferences, IndexOutOfRange, InsufficientReferences, InvalidPair
from rsmatch.model import BaseMetric, BitCode, FeatureRecord, MetricConfig, SamplingPolicy, build_gallery
from rsmatch.rsm import ReferenceSet, RsmEngine, delta, rsm_batch, rsm_score, sample_references
from rsmatch.similarity import pair_distance

from conftest import binary_gallery, real_gallery


def test_delta_examples():
    assert delta(0.37, 0.37) == 0.0
    assert delta(0.2, 0.6) == pytest.approx(0.4)
    assert delta(1.0, 0.0) == 1.0


def test_sample_whole_population():
    g = real_gallery(32, 4)
    for seed in (0, 1, 99):
        refs = sample_references(g, MetricConfig(m_refs=30, seed=seed), exclusions={3, 17})
        assert set(refs.indices) == set(range(32)) - {3, 17}
        assert len(refs) == 30


def test_sample_deterministic_and_distinct():
    g = real_gallery(100, 4)
    cfg = MetricConfig(m_refs=30, seed=7)
    a = sample_references(g, cfg, exclusions={1, 2})
    b = sample_references(g, cfg, exclusions={1, 2})
    assert a == b
    assert len(set(a.indices)) == 30
    assert not {1, 2} & set(a.indices)
    assert list(a.indices) == sorted(a.indices)
    assert sample_references(g, MetricConfig(m_refs=30, seed=8)).indices != a.indices


def test_sample_insufficient():
    g = real_gallery(31, 4)
    with pytest.raises(InsufficientReferences) as info:
        sample_references(g, MetricConfig(m_refs=30), exclusions={0, 1})
    assert info.value.available == 29 and info.value.required == 30


def test_sample_per_pair_keyed_on_pair():
    g = real_gallery(100, 4)
    cfg = MetricConfig(m_refs=10, sampling_policy=SamplingPolicy.PER_PAIR)
    a = sample_references(g, cfg, exclusions=(4, 9), pair=(4, 9))
    b = sample_references(g, cfg, exclusions=(9, 4), pair=(9, 4))
    c = sample_references(g, cfg, exclusions=(4, 10), pair=(4, 10))
    assert a == b
    assert a.indices != c.indices


def _line_gallery(points):
    # 2-d unit vectors at the given angles (radians); cosine distances are analytic
    return build_gallery([FeatureRecord(str(k), k, [np.cos(t), np.sin(t)]) for k, t in enumerate(points)])


def test_equal_profiles_reduce_to_direct():
    # i and j mirror each other about the axis of the single reference
    g = _line_gallery([0.4, -0.4, 0.0])
    refs = ReferenceSet((2,), 0, SamplingPolicy.GLOBAL, 1)
    cfg = MetricConfig(use_rsm=True)
    s = rsm_score(0, 1, g, refs, cfg)
    assert s.relative_component == 0.0
    assert s.value == s.direct_component == pair_distance(g[0], g[1], BaseMetric.COSINE)


def test_single_reference_substitution():
    g = real_gallery(3, 5, seed=4, classes=3)
    refs = ReferenceSet((2,), 0, SamplingPolicy.GLOBAL, 1)
    s = rsm_score(0, 1, g, refs, MetricConfig(use_rsm=True))
    s_ik = pair_distance(g[0], g[2], BaseMetric.COSINE)
    s_jk = pair_distance(g[1], g[2], BaseMetric.COSINE)
    assert s.relative_component == abs(s_ik - s_jk)
    assert s.value == s.relative_component + s.direct_component
    assert s.m_used == 1


def test_single_reference_literal_values():
    # Hamming codes over 10 bits give S(i,k)=0.2, S(j,k)=0.6, S(i,j)=0.4
    k = BitCode.from_bits([0] * 10)
    i = BitCode.from_bits([1, 1] + [0] * 8)
    j = BitCode.from_bits([0, 0] + [1] * 6 + [0, 0])
    g = build_gallery([FeatureRecord("i", 0, i), FeatureRecord("j", 1, j), FeatureRecord("k", 2, k)])
    refs = ReferenceSet((2,), 0, SamplingPolicy.GLOBAL, 1)
    s = rsm_score(0, 1, g, refs, MetricConfig(base_metric=BaseMetric.HAMMING, use_rsm=True))
    assert s.relative_component == pytest.approx(0.4, abs=1e-15)
    assert s.direct_component == 0.8
    assert s.value == pytest.approx(1.2, abs=1e-15)


def test_duplicate_record_scores_zero():
    g = real_gallery(12, 6, seed=2)
    vec = g.vectors[3]
    dup = build_gallery(list(g.records) + [FeatureRecord("dup", 99, vec)])
    refs = sample_references(dup, MetricConfig(m_refs=8), exclusions={3, 12})
    s = rsm_score(3, 12, dup, refs, MetricConfig(use_rsm=True, m_refs=8))
    assert (s.value, s.direct_component, s.relative_component) == (0.0, 0.0, 0.0)


def test_errors(small_real):
    refs = ReferenceSet((0, 1), 0, SamplingPolicy.GLOBAL, 2)
    cfg = MetricConfig(use_rsm=True, m_refs=2)
    with pytest.raises(EmptyReferences):
        rsm_score(0, 1, small_real, refs, cfg)
    with pytest.raises(IndexOutOfRange):
        rsm_score(0, 400, small_real, refs, cfg)
    with pytest.raises(InvalidPair):
        rsm_score(5, 5, small_real, refs, cfg)


def test_exclusion_drop_reported(small_real):
    refs = ReferenceSet((0, 1, 2, 3), 0, SamplingPolicy.GLOBAL, 4)
    s = rsm_score(0, 3, small_real, refs, MetricConfig(use_rsm=True, m_refs=4))
    assert s.m_used == 2


@pytest.mark.parametrize("metric", [BaseMetric.COSINE, BaseMetric.EUCLIDEAN, BaseMetric.HAMMING])
def test_matches_naive_oracle(backend, metric):
    if metric is BaseMetric.HAMMING:
        g = binary_gallery(50, 45, seed=21)
        payloads = [r.payload.to_bits().tolist() for r in g.records]
        dist = oracles.hamming
    else:
        g = real_gallery(50, 16, seed=20)
        payloads = [oracles.unit(v) for v in g.vectors]
        dist = oracles.cosine if metric is BaseMetric.COSINE else oracles.euclidean
    rng = np.random.default_rng(0)
    for seed in range(3):
        cfg = MetricConfig(base_metric=metric, use_rsm=True, m_refs=12, seed=seed, alpha=0.7)
        refs = sample_references(g, cfg)
        for _ in range(15):
            i, j = (int(v) for v in rng.choice(50, 2, replace=False))
            s = rsm_score(i, j, g, refs, cfg)
            value, rel, direct, used = oracles.naive_rsm(payloads, i, j, refs.indices, 0.7, dist)
            assert s.value == pytest.approx(value, abs=1e-9)
            assert s.relative_component == pytest.approx(rel, abs=1e-9)
            assert s.m_used == used


def test_batch_bit_identical_to_scalar(backend):
    g = real_gallery(200, 16, seed=9)
    cfg = MetricConfig(use_rsm=True, seed=3)
    rng = np.random.default_rng(1)
    pairs = rng.integers(0, 200, (10_000, 2))
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    engine = RsmEngine(g, cfg)
    batch = rsm_batch(pairs, g, cfg, engine=engine)
    for (i, j), b in zip(pairs[::7], batch[::7]):
        s = rsm_score(int(i), int(j), g, engine.refs, cfg)
        assert s == b


def test_batch_per_pair_policy_matches_scalar(backend):
    g = binary_gallery(60, 64, seed=9)
    cfg = MetricConfig(base_metric=BaseMetric.HAMMING, use_rsm=True, m_refs=10,
                       sampling_policy=SamplingPolicy.PER_PAIR)
    pairs = [(0, 1), (5, 40), (40, 5), (59, 2)]
    batch = rsm_batch(pairs, g, cfg)
    engine = RsmEngine(g, cfg)
    for (i, j), b in zip(pairs, batch):
        refs = engine.references_for(i, j)
        assert rsm_score(i, j, g, refs, cfg) == b
        assert b.m_used == 10
    assert batch[1] == batch[2]


def test_batch_degenerate_cases(small_real):
    cfg = MetricConfig(use_rsm=True, m_refs=10)
    assert rsm_batch([], small_real, cfg) == []
    engine = RsmEngine(small_real, cfg)
    one = rsm_batch([(2, 9)], small_real, cfg, engine=engine)
    assert one == [rsm_score(2, 9, small_real, engine.refs, cfg)]


def test_batch_errors_name_the_pair(small_real):
    cfg = MetricConfig(use_rsm=True, m_refs=10)
    with pytest.raises(InvalidPair) as info:
        rsm_batch([(0, 1), (2, 3), (4, 4)], small_real, cfg)
    assert info.value.pair_index == 2
    assert "pair #2 (4, 4)" in str(info.value)
    with pytest.raises(IndexOutOfRange) as info:
        rsm_batch([(0, 1), (1, 999)], small_real, cfg)
    assert info.value.pair_index == 1


def test_engine_empty_references_error():
    g = real_gallery(4, 3)
    cfg = MetricConfig(use_rsm=True, m_refs=2)
    engine = RsmEngine(g, cfg, refs=ReferenceSet((0, 1), 0, SamplingPolicy.GLOBAL, 2))
    with pytest.raises(EmptyReferences):
        engine.score_arrays(np.array([2, 0]), np.array([3, 1]))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**64 - 1), st.floats(0, 3), st.data())
def test_properties(seed, alpha, data):
    g = real_gallery(40, 6, seed=seed % 1000)
    cfg = MetricConfig(use_rsm=True, m_refs=10, seed=seed, alpha=alpha)
    refs = sample_references(g, cfg)
    i = data.draw(st.integers(0, 39))
    j = data.draw(st.integers(0, 39).filter(lambda v: v != i))
    ij, ji = rsm_score(i, j, g, refs, cfg), rsm_score(j, i, g, refs, cfg)
    assert ij == ji
    assert 0.0 <= ij.relative_component <= 1.0
    assert 0.0 <= ij.value <= 1.0 + alpha
    assert ij.value == ij.relative_component + alpha * ij.direct_component
    # affine in alpha with slope S(i, j)
    zero = rsm_score(i, j, g, refs, MetricConfig(use_rsm=True, m_refs=10, seed=seed, alpha=0.0))
    assert zero.value == ij.relative_component
    assert ij.value >= zero.value


def test_anomalous_impostor_pushed_up():
    """An impostor pair with a near-zero direct distance but unrelated
    reference profiles must score above its direct distance."""
    rng = np.random.default_rng(2024)
    wins = 0
    trials = 200
    for t in range(trials):
        base = rng.standard_normal(32)
        refs_vecs = rng.standard_normal((30, 32))
        i = base
        j = base + 0.05 * rng.standard_normal(32)
        # make the two profiles discordant: flip j across a random reference direction
        recs = [FeatureRecord("i", 0, i), FeatureRecord("j", 1, j)]
        recs += [FeatureRecord(f"k{k}", 2 + k, v) for k, v in enumerate(refs_vecs)]
        g = build_gallery(recs)
        cfg = MetricConfig(use_rsm=True, m_refs=30, seed=t)
        s = rsm_batch([(0, 1)], g, cfg)[0]
        wins += s.value > s.direct_component
    assert wins / trials >= 0.99


def test_scores_deterministic_across_engines(small_binary):
    cfg = MetricConfig(base_metric=BaseMetric.HAMMING, use_rsm=True, m_refs=12, seed=5)
    pairs = [(i, (i * 7 + 3) % 40) for i in range(40) if i != (i * 7 + 3) % 40]
    assert rsm_batch(pairs, small_binary, cfg) == rsm_batch(pairs, small_binary, cfg)
