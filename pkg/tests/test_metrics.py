import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from viasnet.errors import ConfigurationError, ContractError
from viasnet.metrics import (MetricRow, ShuffleBank, aggregate, center_map, evaluate_corpus, metric_auc, metric_cc,
                             metric_kl, metric_nss, metric_sim, uniform_map, write_rows_csv)


def prob(x):
    x = np.asarray(x, dtype=np.float64)
    return x / x.sum()


def random_instance(rng, shape=(8, 8), n_fix=5):
    pred = prob(rng.random(shape) ** 3)
    gt = prob(rng.random(shape) ** 3)
    cells = rng.choice(shape[0] * shape[1], size=n_fix, replace=False)
    fix = np.stack([cells // shape[1], cells % shape[1]], axis=1)
    return pred, gt, fix


# -- closed forms ----------------------------------------------------------

def test_kl_closed_forms():
    delta = np.array([[1.0, 0], [0, 0]])
    assert metric_kl(np.full((2, 2), 0.25), delta) == pytest.approx(math.log(4), abs=1e-4)
    assert metric_kl(np.array([0.5, 0.5])[None], np.array([1.0, 0.0])[None]) == pytest.approx(math.log(2), abs=1e-4)
    g = prob(np.arange(1, 10).reshape(3, 3))
    assert metric_kl(g, g) <= 1e-5


def test_cc_closed_forms(rng):
    g = rng.random((6, 6))
    assert metric_cc(g, g) == pytest.approx(1.0, abs=1e-9)
    assert metric_cc((g.max() + g.min()) - g, g) == pytest.approx(-1.0, abs=1e-9)
    assert math.isnan(metric_cc(np.ones((3, 3)), np.ones((3, 3))))
    assert metric_cc(np.ones((3, 3)), g[:3, :3]) == 0.0


def test_nss_closed_forms(rng):
    assert metric_nss(np.array([[1.0, 0], [0, 0]]), [(0, 0)]) == pytest.approx(math.sqrt(3), abs=1e-6)
    assert metric_nss(uniform_map((5, 7)), [(1, 1), (2, 3)]) == 0.0
    m = rng.random((6, 6))
    r, c = np.unravel_index(np.argmin(m), m.shape)
    assert metric_nss(m, [(r, c)]) < 0
    assert math.isnan(metric_nss(m, []))


def test_sim_closed_forms():
    assert metric_sim(np.array([[0.5, 0.5]]), np.array([[1.0, 0.0]])) == 0.5
    g = prob(np.arange(1, 5).reshape(2, 2))
    assert metric_sim(g, g) == pytest.approx(1.0)
    assert metric_sim(np.array([[1.0, 0]]), np.array([[0, 1.0]])) == 0.0


def test_auc_closed_forms(rng):
    pred = np.zeros((6, 6))
    fix = [(0, 0), (2, 3), (5, 5)]
    for r, c in fix:
        pred[r, c] = 1.0
    assert metric_auc(prob(pred + 1e-3), fix, negatives="all") < 1.0  # positives are among all pixels
    bank = ShuffleBank({("o", 0): [(1, 1), (4, 2)], ("v", 0): fix}, (6, 6))
    assert metric_auc(prob(pred + 1e-3), fix, "shuffled", bank, key=("v", 0)) == 1.0
    flat = uniform_map((6, 6))
    assert metric_auc(flat, fix, n_splits=100) == pytest.approx(0.5, abs=0.02)
    assert metric_auc(flat, fix, "shuffled", bank, key=("v", 0)) == pytest.approx(0.5, abs=0.02)


def test_auc_exhaustive_matches_pairs(rng):
    for _ in range(20):
        pred = rng.integers(0, 4, (4, 4)).astype(float) + 1
        cells = rng.choice(16, size=3, replace=False)
        fix = [(int(c) // 4, int(c) % 4) for c in cells]
        pos = [pred[r, c] for r, c in fix]
        assert metric_auc(pred / pred.sum(), fix, negatives="all") == oracles.pair_auc(pos, list(pred.ravel()))


# -- oracle equivalence ----------------------------------------------------

def test_metrics_match_oracles(rng):
    bank_fix = {("other", f): rng.integers(0, 8, (4, 2)) for f in range(5)}
    for i in range(25):
        pred, gt, fix = random_instance(rng)
        bank = ShuffleBank({**bank_fix, ("v", i): fix}, (8, 8), seed=3)
        key = ("v", i)
        assert metric_kl(pred, gt) == pytest.approx(oracles.kl(pred, gt), abs=1e-9)
        assert metric_cc(pred, gt) == pytest.approx(oracles.cc(pred, gt), abs=1e-9)
        assert metric_nss(pred, fix) == pytest.approx(oracles.nss(pred, fix), abs=1e-9)
        assert metric_sim(pred, gt) == pytest.approx(oracles.sim(pred, gt), abs=1e-12)
        all_cells = [(r, c) for r in range(8) for c in range(8)]
        assert metric_auc(pred, fix, n_splits=10, seed=3, key=key) == \
            pytest.approx(oracles.sampled_auc(pred, fix, all_cells, 3, key, 10), abs=1e-12)
        assert metric_auc(pred, fix, "shuffled", bank, 10, 3, key) == \
            pytest.approx(oracles.sampled_auc(pred, fix, bank.pool(key), 3, key, 10), abs=1e-12)


# -- properties ------------------------------------------------------------

maps = arrays(np.float64, (5, 6), elements=st.floats(0.01, 10.0))


@settings(max_examples=40, deadline=None)
@given(maps, maps, st.floats(0.1, 10.0), st.floats(0.0, 5.0))
def test_affine_invariance(p, g, a, b):
    assume(np.ptp(p) > 0.1 and np.ptp(g) > 0.1)
    fix = [(0, 0), (2, 3), (4, 5)]
    q = a * p + b
    assert metric_cc(prob(q), g) == pytest.approx(metric_cc(prob(p), g), abs=1e-9)
    assert metric_nss(prob(q), fix) == pytest.approx(metric_nss(prob(p), fix), abs=1e-9)
    assert metric_auc(prob(q), fix, negatives="all") == metric_auc(prob(p), fix, negatives="all")


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (5, 6), elements=st.integers(0, 40).map(float)))
def test_auc_monotone_invariance(p):
    fix = [(1, 1), (3, 4)]
    assert metric_auc(p, fix, n_splits=5, seed=1, key=("v", 0)) == \
        metric_auc(np.exp(p), fix, n_splits=5, seed=1, key=("v", 0))


@settings(max_examples=40, deadline=None)
@given(maps, maps)
def test_sim_symmetric_kl_nonnegative(p, g):
    p, g = prob(p), prob(g)
    assert metric_sim(p, g) == pytest.approx(metric_sim(g, p), abs=1e-12)
    assert 0.0 <= metric_sim(p, g) <= 1.0 + 1e-12
    # the epsilon inside the log lets KL dip below zero by at most ln(1 + N * eps)
    assert metric_kl(p, g) >= -math.log1p(p.size * 1e-7)


def test_kl_epsilon_lower_bound_is_tight():
    u = uniform_map((56, 96))
    assert metric_kl(u, u) == pytest.approx(math.log(1 / (1 + u.size * 1e-7) + 1e-7), rel=1e-9)
    assert metric_kl(u, u) >= -math.log1p(u.size * 1e-7)


def test_kl_not_symmetric(rng):
    p, g = prob(rng.random((8, 8)) ** 4), prob(rng.random((8, 8)))
    assert metric_kl(p, g) != pytest.approx(metric_kl(g, p))


def test_auc_deterministic(rng):
    pred, _, fix = random_instance(rng)
    assert metric_auc(pred, fix, seed=5, key=("a", 1)) == metric_auc(pred, fix, seed=5, key=("a", 1))


# -- errors ----------------------------------------------------------------

def test_probability_contract():
    with pytest.raises(ContractError):
        metric_kl(np.ones((2, 2)), np.full((2, 2), 0.25))
    with pytest.raises(ContractError):
        metric_sim(np.full((2, 2), 0.25), np.full((3, 3), 1 / 9))


def test_empty_bank_rejected():
    with pytest.raises(ConfigurationError):
        metric_auc(uniform_map((3, 3)), [(0, 0)], "shuffled", ShuffleBank({}, (3, 3)))


def test_bank_excludes_own_frame_and_video():
    bank = ShuffleBank({("a", 0): [(0, 0)], ("a", 1): [(1, 1)], ("b", 0): [(2, 2)]}, (3, 3))
    assert [tuple(c) for c in bank.pool(("a", 0))] == [(2, 2)]
    single = ShuffleBank({("a", 0): [(0, 0)], ("a", 1): [(1, 1)]}, (3, 3))
    assert [tuple(c) for c in single.pool(("a", 0))] == [(1, 1)]


# -- corpus evaluation -----------------------------------------------------

def test_single_frame_aggregate_equals_row(rng):
    pred, gt, fix = random_instance(rng)
    ev = evaluate_corpus({"v": pred[None]}, {"v": gt[None]}, {"v": [fix]}, None, n_splits=5, baselines=False)
    row = ev.rows[0]
    for m in ("kl", "cc", "nss", "sim", "auc"):
        assert ev.corpus["model"][m] == getattr(row, m)


def test_baselines(rng):
    gts = {v: np.stack([random_instance(rng)[1] for _ in range(3)]) for v in ("a", "b")}
    fx = {v: [random_instance(rng)[2] for _ in range(3)] for v in gts}
    bank = ShuffleBank({(v, f): c for v, per in fx.items() for f, c in enumerate(per)}, (8, 8))
    ev = evaluate_corpus(gts, gts, fx, bank, n_splits=200)
    assert ev.corpus["uniform"]["nss"] == 0.0
    assert ev.corpus["uniform"]["auc"] == pytest.approx(0.5, abs=0.02)
    assert ev.corpus["model"]["cc"] == pytest.approx(1.0)
    assert set(ev.corpus) == {"model", "uniform", "center"}


def test_frame_count_mismatch():
    with pytest.raises(ContractError):
        evaluate_corpus({"v": np.full((2, 2, 2), 0.25)}, {"v": np.full((3, 2, 2), 0.25)}, {"v": [[]] * 3})


def test_aggregate_frame_then_video():
    rows = [MetricRow("a", 0, 1.0, 0, 0, 0, 0, 0), MetricRow("a", 1, 3.0, 0, 0, 0, 0, 0),
            MetricRow("b", 0, 6.0, 0, 0, 0, 0, 0)]
    per_video, corpus = aggregate(rows)
    assert per_video["a"]["kl"] == 2.0 and corpus["kl"] == 4.0


def test_center_map_peak():
    c = center_map((9, 11))
    assert np.unravel_index(np.argmax(c), c.shape) == (4, 5)
    assert c.sum() == pytest.approx(1.0)


def test_rows_csv_header(tmp_path):
    write_rows_csv(str(tmp_path / "r.csv"), [MetricRow("a", 0, 1.0, 0.5, float("nan"), 0.2, 0.7, 0.6)])
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "video_id,frame_idx,kl,cc,nss,sim,auc,sauc,model"
    assert lines[1] == "a,0,1.0,0.5,,0.2,0.7,0.6,model"
