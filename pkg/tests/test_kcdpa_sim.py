import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from instances import A, B, C, F, t1_network
from preattack import ActivityDistribution, AlphaSpec, LabeledNetwork, SimConfig, sample_labels, sample_stream
from preattack.graph_core import Direction
from preattack.kcdpa_sim import NetworkRecipe, ZeroWeightError, next_draws, reference_network


def _cfg(prior, m=1, n_events=1, seed=0, alpha=1.0, activity=None):
    activity = activity or ActivityDistribution.uniform(m)
    return SimConfig(np.asarray(prior, float), AlphaSpec.uniform(alpha), activity, n_events, seed, m, 100)


@pytest.mark.parametrize("pi,expect", [(0.0, 0), (1.0, 1)])
def test_degenerate_prior(pi, expect):
    labels = sample_labels(_cfg([1 - pi, pi], m=500))
    assert set(labels.values()) == {expect}


def test_label_counts_binomial():
    m, pi = 20_000, 0.2
    n_fake = sum(sample_labels(_cfg([1 - pi, pi], m=m, seed=4)).values())
    sd = np.sqrt(m * pi * (1 - pi))
    assert abs(n_fake - m * pi) <= 3 * sd


def _within_3sigma(draws, ids, p):
    n = draws.size
    for v, pv in zip(ids, p):
        hits = int(np.sum(draws == v))
        assert abs(hits - n * pv) <= 3 * np.sqrt(n * pv * (1 - pv)), (v, hits / n, pv)


def test_first_send_weights_t1(t1):
    draws = next_draws(t1, AlphaSpec.uniform(1.0), 1, Direction.SEND, 20_000, seed=1)
    _within_3sigma(draws, [A, B, C, F], [2 / 5, 1 / 5, 1 / 5, 1 / 5])


def test_receive_weights_t1(t1):
    # a real recipient hears from b with weight 1 + sent_to[b][R] = 2, from c likewise
    draws = next_draws(t1, AlphaSpec.uniform(1.0), 0, Direction.RECEIVE, 20_000, seed=2)
    _within_3sigma(draws, [A, B, C, F], [1 / 7, 2 / 7, 2 / 7, 2 / 7])


def test_weights_update_after_first_send(t1):
    draws = next_draws(t1, AlphaSpec.uniform(1.0), 1, Direction.SEND, 20_000, seed=3, earlier=[A])
    _within_3sigma(draws, [A, B, C, F], [3 / 6, 1 / 6, 1 / 6, 1 / 6])


def test_stream_second_draw_sees_first(t1):
    # end to end through sample_stream: one fake sends twice
    act = ActivityDistribution.send_only(1)
    firsts, seconds_after_a = [], []
    for seed in range(2500):
        s = sample_stream(t1, {100: 1}, _cfg([0, 1], n_events=2, seed=seed, activity=act))
        v1, v2 = s.preexisting_user.tolist()
        firsts.append(v1)
        if v1 == A:
            seconds_after_a.append(v2)
    _within_3sigma(np.array(firsts), [A, B], [2 / 5, 1 / 5])
    _within_3sigma(np.array(seconds_after_a), [A, B], [3 / 6, 1 / 6])


def test_zero_alpha_without_counts_fails():
    net = LabeledNetwork.from_arrays([1, 2], [0, 0])
    with pytest.raises(ZeroWeightError, match="step 1"):
        sample_stream(net, {100: 0}, _cfg([1, 0], alpha=0.0))


def test_overlapping_new_range_rejected():
    net = LabeledNetwork.from_arrays([100, 2], [0, 1])
    with pytest.raises(ValueError, match="overlaps"):
        sample_stream(net, {100: 0}, _cfg([0.5, 0.5]))


def test_send_only_activity(t1):
    cfg = _cfg([0.5, 0.5], m=5, n_events=50, activity=ActivityDistribution.send_only(5))
    s = sample_stream(t1, sample_labels(cfg), cfg)
    assert np.all(s.direction == Direction.SEND)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 8), n=st.integers(0, 60))
def test_stream_is_valid_and_reproducible(seed, m, n):
    t1 = t1_network()
    cfg = _cfg([0.6, 0.4], m=m, n_events=n, seed=seed)
    labels = sample_labels(cfg)
    s = sample_stream(t1, labels, cfg)
    s.validate(t1)  # no new-to-new edges, seq increasing, endpoints known
    assert len(s) == n
    assert set(s.new_user.tolist()) <= set(labels)
    assert sample_stream(t1, sample_labels(cfg), cfg).equals(s)


def test_different_seeds_differ(t1):
    a = sample_stream(t1, {100 + i: 0 for i in range(3)}, _cfg([1, 0], m=3, n_events=40, seed=1))
    b = sample_stream(t1, {100 + i: 0 for i in range(3)}, _cfg([1, 0], m=3, n_events=40, seed=2))
    assert not a.equals(b)


def test_alpha_values_layout():
    spec = AlphaSpec.from_values([1, 2, 3, 4, 5, 6, 7, 8], 2)
    assert spec.send.tolist() == [[1, 2], [3, 4]]
    # receive values are given sender first: recv[pre][new], stored as [new][pre]
    assert spec.recv.tolist() == [[5, 7], [6, 8]]
    assert spec.to_values() == [1, 2, 3, 4, 5, 6, 7, 8]
    with pytest.raises(ValueError):
        AlphaSpec.from_values([1, 2, 3], 2)


def test_symmetric_reference_network():
    net, src, dst = reference_network(NetworkRecipe("symmetric", 300, 0.5, 2000, seed=5))
    assert np.array_equal(net.recv_from[:, 0], net.recv_from[:, 1])
    assert np.array_equal(net.sent_to[:, 0], net.sent_to[:, 1])
    assert src.size == net.n_edges and np.all(src != dst)


def _shared_mass(net):
    share_f = net.recv_from[:, 1] / net.total_sent_by[1]
    share_r = net.recv_from[:, 0] / net.total_sent_by[0]
    return np.minimum(share_f, share_r).sum()


def test_separated_network_is_separated():
    # recipients that fakes favour overlap far less with the reals' favourites than in a random graph
    sep, _, _ = reference_network(NetworkRecipe("separated", 2000, 0.2, 20_000, overlap=0.1, seed=5))
    rnd, _, _ = reference_network(NetworkRecipe("random", 2000, 0.2, 20_000, overlap=0.1, seed=5))
    assert _shared_mass(sep) < _shared_mass(rnd) - 0.25
