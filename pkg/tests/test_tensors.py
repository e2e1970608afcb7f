import numpy as np
import pytest

from dcomp import (
    ActivationStats,
    DcompError,
    SynthSpec,
    WeightTensor,
    analyze_float,
    analyze_quantized,
    compression_ratio,
    default_ensemble,
    synth_ensemble,
)
from dcomp.tensors import EPS_FP, TAU_NZ


def test_weight_tensor_validation():
    with pytest.raises(ValueError):
        WeightTensor("t", np.zeros(4))  # 1-D
    with pytest.raises(ValueError):
        WeightTensor("t", np.array([[np.nan, 1.0]]))
    t = WeightTensor("t", np.zeros((3, 5)))
    assert (t.rows, t.cols) == (3, 5)
    assert t.values.dtype == np.float64


def test_activation_stats_validation():
    with pytest.raises(ValueError):
        ActivationStats("t", np.array([-1.0]))
    with pytest.raises(ValueError):
        ActivationStats("t", np.array([np.inf]))
    ActivationStats("t", np.zeros(4))  # zeros are allowed


def test_analyze_float_constant_tensor():
    rep = analyze_float(WeightTensor("c", np.full((8, 8), 0.5)))
    assert rep.byte_entropy == 0.0
    assert rep.near_zero_fraction == 0.0
    assert rep.min == rep.max == 0.5


def test_analyze_float_all_zero():
    rep = analyze_float(WeightTensor("z", np.zeros((4, 4))))
    assert rep.near_zero_fraction == 1.0
    assert rep.byte_entropy == 0.0


def test_analyze_float_uniform_entropy():
    # 10,000 draws spread over 256 equiprobable bins: entropy ~ 8 bits.
    rng = np.random.default_rng(11)
    v = rng.uniform(0.0, 1.0, 10_000).reshape(100, 100)
    rep = analyze_float(WeightTensor("u", v))
    hist, _ = np.histogram(v, bins=256, range=(v.min(), v.max()))
    p = hist[hist > 0] / hist.sum()
    oracle = -np.sum(p * np.log2(p))
    assert rep.byte_entropy == pytest.approx(oracle, abs=1e-12)
    assert abs(rep.byte_entropy - 8.0) < 0.05


def test_analyze_float_empty_errors():
    with pytest.raises(DcompError, match="empty input"):
        analyze_float(WeightTensor("e", np.empty((0, 4))))


def test_analyze_float_near_zero_band():
    v = np.array([[0.0, EPS_FP / 2, EPS_FP, 1.0]])
    rep = analyze_float(WeightTensor("b", v))
    # strict inequality: exactly EPS_FP is not near-zero
    assert rep.near_zero_fraction == 0.5


def test_analyze_quantized_all_zero():
    rep = analyze_quantized(np.zeros((4, 4), dtype=np.int8))
    assert rep.near_zero_fraction == 1.0
    assert rep.byte_entropy == 0.0


def test_analyze_quantized_near_zero_band():
    rep = analyze_quantized(np.array([-1, 0, 1], dtype=np.int8))
    assert rep.near_zero_fraction == 1.0
    rep = analyze_quantized(np.array([-2, -1, 0, 1, 2], dtype=np.int8))
    assert rep.near_zero_fraction == 3 / 5
    assert TAU_NZ == 1


def test_analyze_quantized_laplace_matches_histogram_oracle():
    rng = np.random.default_rng(3)
    v = rng.laplace(0.0, 8.0, 100_000)
    q = np.clip(np.round(v), -127, 127).astype(np.int8)
    rep = analyze_quantized(q)

    # independent oracle: plain dict count
    counts = {}
    for x in q.tolist():
        counts[x] = counts.get(x, 0) + 1
    n = sum(counts.values())
    nz = sum(c for x, c in counts.items() if abs(x) <= 1) / n
    ent = -sum((c / n) * np.log2(c / n) for c in counts.values())
    assert abs(rep.near_zero_fraction - nz) < 0.01
    assert abs(rep.byte_entropy - ent) < 0.01


def test_analyze_reports_permutation_invariant():
    rng = np.random.default_rng(5)
    v = rng.normal(0, 1, (32, 32))
    shuffled = rng.permutation(v.ravel()).reshape(32, 32)
    a = analyze_float(WeightTensor("a", v))
    b = analyze_float(WeightTensor("b", shuffled))
    assert a.near_zero_fraction == b.near_zero_fraction
    assert a.outlier_count == b.outlier_count
    assert (a.min, a.max) == (b.min, b.max)
    assert a.mean == pytest.approx(b.mean, abs=1e-12)
    assert a.stddev == pytest.approx(b.stddev, abs=1e-12)


def test_entropy_of_equiprobable_symbols():
    for k in (2, 4, 16, 64, 256):
        q = np.tile((np.arange(k) - k // 2).astype(np.int8), 100)
        rep = analyze_quantized(q)
        assert rep.byte_entropy == pytest.approx(np.log2(k), abs=1e-9)
        assert 0.0 <= rep.byte_entropy <= 8.0


def test_compression_ratio():
    assert compression_ratio(1000, 500) == 2.0
    assert compression_ratio(1540, 1000) == 1.54
    assert compression_ratio(1000, 1000) == 1.0
    with pytest.raises(DcompError):
        compression_ratio(10, 0)


def test_compression_ratio_chain_rule():
    a, b, c = 9000, 3000, 1000
    assert compression_ratio(a, b) * compression_ratio(b, c) == pytest.approx(
        compression_ratio(a, c), rel=1e-12
    )


def test_synth_ensemble_deterministic():
    spec = SynthSpec()
    w1, s1 = synth_ensemble(spec, 42)
    w2, s2 = synth_ensemble(spec, 42)
    assert np.array_equal(w1.values, w2.values)
    assert np.array_equal(s1.channel_max, s2.channel_max)
    w3, _ = synth_ensemble(spec, 43)
    assert not np.array_equal(w1.values, w3.values)


def test_synth_ensemble_no_outliers_bounded():
    spec = SynthSpec(outlier_fraction=0.0, act_mu=-1.0, act_sigma=1.0)
    _, stats = synth_ensemble(spec, 0)
    lo, hi = np.exp(-1.0 - 6.0), np.exp(-1.0 + 6.0)
    assert np.all(stats.channel_max >= lo) and np.all(stats.channel_max <= hi)


def test_synth_ensemble_default_shape():
    # weights bounded by the clip, activation spread way past weight spread
    w, stats = synth_ensemble(SynthSpec(), 0)
    rep = analyze_float(w)
    assert max(abs(rep.min), abs(rep.max)) <= 1.0
    act_range = float(stats.channel_max.max())
    assert act_range > 10.0 * max(abs(rep.min), abs(rep.max))


def test_synth_ensemble_rejects_bad_dims():
    with pytest.raises(DcompError):
        synth_ensemble(SynthSpec(rows=0), 0)


def test_default_ensemble_layout():
    pairs = default_ensemble(0)
    names = [w.name for w, _ in pairs]
    assert names == ["attn_q", "attn_k", "attn_v", "attn_o", "ffn_up", "ffn_down"]
    shapes = {w.name: (w.rows, w.cols) for w, _ in pairs}
    assert shapes["ffn_up"] == (1024, 512)
    assert shapes["ffn_down"] == (512, 1024)
    for w, s in pairs:
        assert len(s.channel_max) == w.cols
    again = default_ensemble(0)
    assert all(np.array_equal(a[0].values, b[0].values) for a, b in zip(pairs, again))
