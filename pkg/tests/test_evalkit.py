import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import average_precision_score

from vos_lab import evalkit, network
from vos_lab.evalkit import auroc, aupr, choose_gamma, classify, fpr_at_tpr
from vos_lab.mathkit import make_rng


def pairwise_auroc(id_s, ood_s):
    total = 0.0
    for a in id_s:
        for b in ood_s:
            total += 1.0 if a > b else 0.5 if a == b else 0.0
    return total / (len(id_s) * len(ood_s))


def sweep_fpr(id_s, ood_s, tpr):
    """Try every distinct ID score as a threshold; keep the largest one that passes."""
    best = None
    for g in sorted(set(id_s)):
        if sum(1 for s in id_s if s >= g) / len(id_s) >= tpr:
            best = g
    return sum(1 for s in ood_s if s >= best) / len(ood_s), best


def with_ties(r, n):
    s = np.round(r.normal(size=n), 1)  # coarse rounding injects many ties
    return s


# thresholds and FPR -------------------------------------------------------

def test_choose_gamma_examples():
    assert choose_gamma(np.arange(1, 101), 0.95) == 6
    assert choose_gamma([2.5] * 7, 0.95) == 2.5
    assert choose_gamma([3.0, 1.0, 2.0], 1.0) == 1.0
    with pytest.raises(ValueError):
        choose_gamma([], 0.95)


def test_classify_inclusive_boundary():
    assert classify(0.7, 0.7) == 1
    assert classify(np.nextafter(0.7, 0.0), 0.7) == 0
    s = np.random.default_rng(0).uniform(size=50)
    np.testing.assert_array_equal(classify(s, 0.4), [1 if v >= 0.4 else 0 for v in s])


def test_fpr_examples():
    assert fpr_at_tpr([5.0, 6.0, 7.0], [1.0, 2.0]) == 0.0
    assert fpr_at_tpr([0.9, 0.8], [0.85, 0.1], 0.95) == 0.5
    r = np.random.default_rng(1)
    # identical distributions: the threshold admits ~95% of ID, hence ~95% of OOD too
    assert abs(fpr_at_tpr(r.normal(size=10_000), r.normal(size=10_000)) - 0.95) <= 0.02
    with pytest.raises(ValueError):
        fpr_at_tpr([1.0], [])


def test_fpr_matches_sweep_oracle_on_100_sets():
    r = np.random.default_rng(2)
    for _ in range(100):
        n_id, n_ood = r.integers(1, 300, 2)
        id_s, ood_s = with_ties(r, n_id), with_ties(r, n_ood) - r.uniform(0, 1)
        tpr = r.choice([0.8, 0.9, 0.95, 0.99, 1.0])
        fpr, gamma = sweep_fpr(list(id_s), list(ood_s), tpr)
        assert fpr_at_tpr(id_s, ood_s, tpr) == fpr
        assert choose_gamma(id_s, tpr) == gamma


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_fpr_monotone_in_tpr(seed):
    r = np.random.default_rng(seed)
    id_s, ood_s = with_ties(r, 80), with_ties(r, 60)
    fprs = [fpr_at_tpr(id_s, ood_s, t) for t in (0.5, 0.8, 0.9, 0.95, 1.0)]
    assert fprs == sorted(fprs)


# AUROC --------------------------------------------------------------------

def test_auroc_examples():
    assert auroc([3.0, 4.0], [1.0, 2.0]) == 1.0
    s = [0.1, 0.5, 0.5, 0.9]
    assert auroc(s, list(reversed(s))) == 0.5
    r = np.random.default_rng(3)
    a, b = r.normal(1, 1, 1000), r.normal(0, 1, 1000)
    assert auroc(a, b) == pytest.approx(pairwise_auroc(a, b), abs=1e-9)


def test_auroc_matches_pairwise_on_100_sets():
    r = np.random.default_rng(4)
    for i in range(100):
        n_id, n_ood = r.integers(1, 400 if i < 95 else 2000, 2)
        a, b = with_ties(r, n_id) + 0.3, with_ties(r, n_ood)
        assert auroc(a, b) == pytest.approx(pairwise_auroc(a, b), abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_auroc_rank_invariance_and_symmetry(seed):
    r = np.random.default_rng(seed)
    a, b = r.normal(0.5, 1, 70), r.normal(0, 1, 50)
    base = auroc(a, b)
    assert auroc(np.exp(a), np.exp(b)) == pytest.approx(base, abs=1e-12)
    assert fpr_at_tpr(np.exp(a), np.exp(b)) == fpr_at_tpr(a, b)
    assert auroc(a, b) + auroc(b, a) == pytest.approx(1.0, abs=1e-12)


# AUPR ---------------------------------------------------------------------

def test_aupr_examples():
    assert aupr([5.0, 6.0], [1.0, 2.0]) == 1.0
    # sorted: 10(id) 6 5 2(id) 1(id) -> 1/3*1 + 1/3*2/4 + 1/3*3/5
    assert aupr([10.0, 1.0, 2.0], [5.0, 6.0]) == pytest.approx(0.7, abs=1e-15)
    assert aupr([1.0, 1.0], [1.0, 1.0, 1.0]) == pytest.approx(0.4, abs=1e-15)


def test_aupr_matches_sklearn():
    r = np.random.default_rng(5)
    for _ in range(30):
        a, b = with_ties(r, r.integers(1, 200)) + 0.5, with_ties(r, r.integers(1, 200))
        y = np.r_[np.ones(a.size), np.zeros(b.size)]
        s = np.r_[a, b]
        assert aupr(a, b) == pytest.approx(average_precision_score(y, s), abs=1e-12)
        assert aupr(a, b, positive="ood") == pytest.approx(average_precision_score(1 - y, -s), abs=1e-12)


def test_evaluate_report_roundtrip():
    rep = evalkit.evaluate([0.9, 0.8, 0.7], [0.1, 0.75])
    assert 0 <= rep.fpr95 <= 1 and 0 <= rep.auroc <= 1 and 0 <= rep.aupr <= 1
    assert (rep.n_id, rep.n_ood) == (3, 2)
    assert evalkit.MetricsReport.from_text(rep.to_text()) == rep
    assert "fpr95 = " in rep.to_text()


def test_score_dump_roundtrip_and_errors(tmp_path):
    p = tmp_path / "s.csv"
    s = np.random.default_rng(6).normal(size=20)
    evalkit.write_scores(p, s, True)
    back, flags = evalkit.read_scores(p)
    np.testing.assert_array_equal(back, s)
    assert flags.all()
    assert p.read_text().splitlines()[0] == "score,is_id"
    bad = tmp_path / "bad.csv"
    bad.write_text("value,is_id\n1,1\n")
    with pytest.raises(ValueError, match="header"):
        evalkit.read_scores(bad)
    bad.write_text("score,is_id\n1,1\nx,0\n")
    with pytest.raises(ValueError, match=":3"):
        evalkit.read_scores(bad)


# model scores ---------------------------------------------------------------

def fixed_logit_net(f):
    """A net whose logits equal ``f`` for every input (bias-only head)."""
    K = len(f)
    net = network.Network([2, 2], K, phi_hidden=3, cls_bias=True)
    net.params["head.b_cls"][...] = f
    return net


def test_ood_score_phi_cases():
    net = fixed_logit_net([0.0, 0.0, 0.0])
    X = np.zeros((4, 2))
    np.testing.assert_array_equal(evalkit.ood_score(net, X), 0.5)
    net.params["phi.b2"][...] = 2.0
    np.testing.assert_allclose(evalkit.ood_score(net, X), 1 / (1 + math.e**2), atol=1e-15)
    assert evalkit.ood_score(net, X)[0] == pytest.approx(0.11920, abs=1e-5)
    net.params["phi.b2"][...] = -800.0
    assert evalkit.ood_score(net, X)[0] == 1.0
    net.params["phi.b2"][...] = 800.0
    assert evalkit.ood_score(net, X)[0] == 0.0


def test_ood_score_orders_like_negative_phi():
    net = network.Network([2, 8, 4], 3, phi_hidden=16, rng=make_rng(0))
    X = np.random.default_rng(1).normal(size=(200, 2)) * 5
    s = evalkit.ood_score(net, X)
    neg_phi = -net.phi(net.energy(net.logits(net.features(X))))
    np.testing.assert_array_equal(np.argsort(s, kind="stable"), np.argsort(neg_phi, kind="stable"))


def test_msp_and_energy_scores():
    X = np.zeros((1, 2))
    assert evalkit.msp_score(fixed_logit_net([0.0, 0.0, 0.0]), X)[0] == pytest.approx(1 / 3, abs=1e-15)
    assert evalkit.msp_score(fixed_logit_net([0.0, 900.0, 0.0]), X)[0] == pytest.approx(1.0)
    assert evalkit.msp_score(fixed_logit_net([1.0, 2.0, 3.0]), X)[0] == pytest.approx(0.66524, abs=1e-5)
    assert evalkit.raw_energy_score(fixed_logit_net([0.0, 0.0]), X)[0] == pytest.approx(math.log(2), abs=1e-15)
    e = evalkit.raw_energy_score(fixed_logit_net([1.0, 2.0, 3.0]), X)[0]
    assert e == pytest.approx(3.40761, abs=1e-5)
    assert evalkit.raw_energy_score(fixed_logit_net([11.0, 12.0, 13.0]), X)[0] == pytest.approx(e + 10, abs=1e-12)


def test_raw_energy_ignores_learned_weights():
    net = fixed_logit_net([1.0, 2.0, 3.0])
    net.params["head.w_raw"][...] = [3.0, -2.0, 0.5]
    assert evalkit.raw_energy_score(net, np.zeros((1, 2)))[0] == pytest.approx(3.40761, abs=1e-5)


def test_alternative_score_kinds():
    net = fixed_logit_net([0.0, 0.0, 0.0, 0.0])
    net.num_classes = 3
    net.params["head.w_raw"] = net.params["head.w_raw"][:3]
    net.score_kind = network.SCORE_EXTRA_CLASS
    assert evalkit.ood_score(net, np.zeros((1, 2)))[0] == pytest.approx(0.75)
    net2 = fixed_logit_net([0.0, 0.0, 0.0])
    net2.score_kind, net2.energy_center = network.SCORE_ENERGY, -math.log(3)
    assert evalkit.ood_score(net2, np.zeros((1, 2)))[0] == pytest.approx(0.5)
