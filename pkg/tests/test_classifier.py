from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from instances import A, B, random_network, random_stream, stream_of, SEND, RECV
from preattack import AlphaSpec, build_plusplus_table, build_preattack_table, classify, classify_multiclass, \
    classify_prefixes, LabeledNetwork
from preattack.classifier import score, score_prefixes
from preattack.graph_core import FAKE


def test_single_send_to_a(t1):
    (r,) = classify(build_preattack_table(t1, 1.0), stream_of([(100, A, SEND)]), 0.5)
    want = Fraction(2, 5) / (Fraction(2, 5) + Fraction(1, 3))
    assert want == Fraction(6, 11)
    assert abs(r.p_fake - 6 / 11) < 1e-12
    assert (r.edge_count_send, r.edge_count_recv) == (1, 0)


def test_single_receive_from_b(t1):
    (r,) = classify(build_preattack_table(t1, 1.0), stream_of([(100, B, RECV)]), 0.5)
    assert Fraction(1, 4) / (Fraction(1, 4) + Fraction(2, 7)) == Fraction(7, 15)
    assert abs(r.p_fake - 7 / 15) < 1e-12


def test_send_only_ignores_receives(t1):
    tab = build_preattack_table(t1, 1.0)
    s = stream_of([(100, A, SEND), (100, B, RECV), (101, B, RECV)])
    reports = {r.user: r for r in classify(tab, s, 0.5, mode="send_only")}
    assert abs(reports[100].p_fake - 6 / 11) < 1e-12
    # user 101 has only receives: no usable events, so the prior comes back exactly
    assert reports[101].posterior.tolist() == [0.5, 0.5]
    assert reports[101].n_edges == 0


def test_zero_prior_stays_zero(t1):
    (r,) = classify(build_preattack_table(t1, 1.0), stream_of([(100, A, SEND)] * 3), 0.0)
    assert r.p_fake == 0.0


def test_unknown_mode(t1):
    with pytest.raises(ValueError):
        classify(build_preattack_table(t1, 1.0), stream_of([(100, A, SEND)]), 0.5, mode="both")


def test_long_stream_no_underflow(t1):
    tab = build_preattack_table(t1, 1.0)
    (r,) = classify(tab, stream_of([(100, A, SEND)] * 2000), 0.1)
    # log odds grow by log(0.4 / (1/3)) per edge; posterior saturates at 1 without NaN
    assert r.p_fake == pytest.approx(1.0) and np.isfinite(r.log_joint).all()
    assert r.log_joint[FAKE] == pytest.approx(2000 * np.log(0.4), rel=1e-12)


def test_multiclass_matches_binary():
    rng = np.random.default_rng(8)
    for _ in range(20):
        net = random_network(rng)
        s = random_stream(rng, net, 4, 12)
        tab = build_preattack_table(net, 1.5)
        for b, m in zip(classify(tab, s, 0.3), classify_multiclass(tab, s, [0.7, 0.3])):
            assert np.all(np.abs(b.posterior - m.posterior) <= 1e-12)


def test_three_classes():
    net = LabeledNetwork.from_arrays([1, 2, 3], [0, 1, 2], [1, 2, 3], [2, 3, 1], k=3)
    tab = build_plusplus_table(net, AlphaSpec.uniform(1.0, 3))
    s = stream_of([(100, 2, SEND)])
    (r,) = classify_multiclass(tab, s, [0.2, 0.3, 0.5])
    # class c sends to 2 with weight (1 + recv_from[2][c]) / (3 + 1)
    w = np.array([0.2 * 2, 0.3 * 1, 0.5 * 1])
    assert np.allclose(r.posterior, w / w.sum(), rtol=0, atol=1e-12)
    with pytest.raises(ValueError):
        classify(tab, s, 0.5)


def _log_linear_check(tab, s, prior):
    for r in classify(tab, s, prior):
        mine = s.select(s.new_user == np.uint64(r.user))
        like = np.ones(2)
        for ev in mine:
            for c in (0, 1):
                like[c] *= tab.prob(ev.preexisting_user, c, ev.direction)
        w = like * np.array([1 - prior, prior])
        assert abs(r.p_fake - w[1] / w.sum()) <= 1e-10


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10**6), prior=st.sampled_from([0.05, 0.2, 0.5, 0.9]))
def test_log_space_matches_linear(seed, prior):
    rng = np.random.default_rng(seed)
    net = random_network(rng)
    s = random_stream(rng, net, 3, int(rng.integers(1, 12)))
    _log_linear_check(build_preattack_table(net, float(rng.uniform(0.2, 3))), s, prior)


def _truncate(stream, x, mode):
    """First x usable events of every user, from scratch."""
    keep = np.zeros(len(stream), bool)
    seen = {}
    for i, ev in enumerate(stream):
        if mode == "send_only" and ev.direction != SEND:
            continue
        n = seen.get(ev.new_user, 0)
        if n < x:
            keep[i] = True
        seen[ev.new_user] = n + 1
    return stream.select(keep)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), mode=st.sampled_from(["full", "send_only"]))
def test_prefixes_equal_recomputation(seed, mode):
    rng = np.random.default_rng(seed)
    net = random_network(rng)
    s = random_stream(rng, net, 5, int(rng.integers(1, 60)))
    tab = build_preattack_table(net, 1.0)
    cps = [0, 1, 2, 3, 5, 10, 20]
    pre = classify_prefixes(tab, s, 0.2, cps, mode)
    for x in cps:
        fresh = {r.user: r for r in classify(tab, _truncate(s, x, mode), 0.2, mode)}
        for u in s.users().tolist():
            got = pre[(u, x)]
            if u in fresh:
                assert np.array_equal(got.log_joint, fresh[u].log_joint)
                assert np.array_equal(got.posterior, fresh[u].posterior)
            else:
                assert got.n_edges == 0 and np.all(got.log_joint == 0)


def test_prefix_counts(t1):
    tab = build_preattack_table(t1, 1.0)
    s = stream_of([(100, A, SEND), (100, B, RECV), (100, A, SEND), (101, A, SEND)])
    res = score_prefixes(tab, s, 0.5, [1, 2, 10])
    assert res.report(100, 2).edge_count_send == 1 and res.report(100, 2).edge_count_recv == 1
    assert res.report(100, 10).n_edges == 3
    assert res.n_total.tolist() == [3, 1]
    with pytest.raises(KeyError):
        res.report(100, 4)
    with pytest.raises(ValueError):
        score_prefixes(tab, s, 0.5, [3, 2])


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_interleaving_invariance(seed):
    rng = np.random.default_rng(seed)
    net = random_network(rng)
    s = random_stream(rng, net, 4, int(rng.integers(2, 30)))
    tab = build_preattack_table(net, 1.0)
    # a random interleaving that keeps each user's own order
    order = np.argsort(rng.random(len(s)), kind="stable")
    by_user = {}
    for i in range(len(s)):
        by_user.setdefault(int(s.new_user[i]), []).append(i)
    slots = [int(s.new_user[i]) for i in order]
    take = {u: iter(v) for u, v in by_user.items()}
    perm = np.array([next(take[u]) for u in slots])
    shuffled = s[perm]
    shuffled.seq = np.arange(1, len(s) + 1)
    a, b = score(tab, s, 0.3), score(tab, shuffled, 0.3)
    assert np.array_equal(a.users, b.users)
    assert np.array_equal(a.log_joint, b.log_joint) and np.array_equal(a.posterior, b.posterior)


@pytest.mark.parametrize("threads", [2, 3, 8])
def test_threads_identical(threads):
    rng = np.random.default_rng(1)
    net = random_network(rng, 50, 400)
    s = random_stream(rng, net, 40, 5000)
    tab = build_preattack_table(net, 1.0)
    a, b = score(tab, s, 0.2), score(tab, s, 0.2, threads=threads)
    assert np.array_equal(a.log_joint, b.log_joint) and np.array_equal(a.posterior, b.posterior)
