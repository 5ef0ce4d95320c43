import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from instances import A, B, C, bound_sweep, desk_instance, random_network, stream_of, SEND, RECV
from preattack import AlphaSpec, build_homophily_table, build_plusplus_table, build_preattack_table, \
    compute_bounds, exact_posterior
from preattack.bounds import max_batch


def _bounds(net, s, alpha, pi, **kw):
    return {b.user: b for b in compute_bounds(net, build_preattack_table(net, alpha, s), s, pi, **kw)}


def test_single_edge_is_exact(t1):
    (b,) = compute_bounds(t1, build_preattack_table(t1, 1.0), stream_of([(100, A, SEND)]), 0.5)
    assert b.f_lower == 1.0 and b.f_upper == 1.0
    assert abs(b.p_hat - 6 / 11) < 1e-12


def test_first_user_unaffected_by_later_edges(t1):
    s = stream_of([(100, A, SEND), (101, A, SEND), (101, B, RECV)])
    bs = _bounds(t1, s, 1.0, 0.5)
    assert bs[100].f_lower == 1.0 == bs[100].f_upper
    assert bs[101].f_lower < 1.0 < bs[101].f_upper


def test_hand_values(t1):
    # 101 sends to a after 100 sent to a: one earlier edge, same recipient and role
    s = stream_of([(100, A, SEND), (101, A, SEND)])
    b = _bounds(t1, s, 1.0, 0.5)[101]
    p_wcf = (3 / 6) / (3 / 6 + 2 / 6)  # phantom is fake and touched a
    p_wcr = (2 / 5) / (2 / 5 + 3 / 7)  # phantom is real and touched a
    assert abs(b.worst_case_posterior_F - p_wcf) < 1e-12
    assert abs(b.worst_case_posterior_R - p_wcr) < 1e-12
    assert abs(b.f_lower - (6 / 11) / p_wcf) < 1e-12
    assert abs(b.f_upper - (6 / 11) / p_wcr) < 1e-12


def test_other_recipient_hand_values(t1):
    s = stream_of([(100, C, SEND), (101, A, SEND)])
    b = _bounds(t1, s, 1.0, 0.5)[101]
    p_wcf = (2 / 5) / (2 / 5 + 2 / 7)  # phantom is real and went elsewhere
    p_wcr = (2 / 6) / (2 / 6 + 2 / 6)  # phantom is fake and went elsewhere
    assert abs(b.worst_case_posterior_F - p_wcf) < 1e-12
    assert abs(b.worst_case_posterior_R - p_wcr) < 1e-12


def test_literal_alpha_reading_only_widens_upper(t1):
    s = stream_of([(100, C, SEND), (101, A, SEND), (101, B, RECV)])
    a = _bounds(t1, s, 1.0, 0.5)[101]
    lit = _bounds(t1, s, 1.0, 0.5, literal_wcr_alpha=True)[101]
    assert lit.f_lower == a.f_lower
    assert lit.f_upper > a.f_upper


def test_homophily_table_rejected(t1):
    s = stream_of([(100, A, SEND)])
    with pytest.raises(ValueError):
        compute_bounds(t1, build_homophily_table(t1, AlphaSpec.uniform(1.0)), s, 0.5)


def test_plusplus_table_accepted(t1):
    s = stream_of([(100, A, SEND), (101, A, SEND)])
    tab = build_plusplus_table(t1, AlphaSpec.uniform(1.0))
    scalar = _bounds(t1, s, 1.0, 0.5)
    for b in compute_bounds(t1, tab, s, 0.5):
        assert b.f_lower == scalar[b.user].f_lower and b.f_upper == scalar[b.user].f_upper


@settings(max_examples=150, deadline=None)
@given(seed=st.integers(0, 10**7))
def test_sandwich(seed):
    net, s, alpha, pi = desk_instance(np.random.default_rng(seed))
    for u, b in _bounds(net, s, alpha, pi).items():
        ratio = b.p_hat / exact_posterior(net, s, pi, u, alpha).p_fake
        assert b.f_lower - 1e-9 <= ratio <= b.f_upper + 1e-9
        assert b.f_lower <= 1.0 <= b.f_upper


def _positions_preserving(rng, s, u):
    """Shuffle the other users' events within each gap between u's events."""
    mine = np.flatnonzero(s.new_user == np.uint64(u))
    cuts = np.r_[-1, mine, len(s)]
    order = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        gap = np.arange(lo + 1, hi)
        order.extend(rng.permutation(gap).tolist())
        if hi < len(s):
            order.append(int(hi))
    out = s[np.array(order, dtype=np.int64)]
    out.seq = np.arange(1, len(s) + 1)
    return out


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**7))
def test_depends_only_on_preceding_multiset(seed):
    rng = np.random.default_rng(seed)
    net, s, alpha, pi = desk_instance(rng)
    u = int(s.new_user[rng.integers(len(s))])
    t = _positions_preserving(rng, s, u)
    a, b = _bounds(net, s, alpha, pi)[u], _bounds(net, t, alpha, pi)[u]
    assert (a.f_lower, a.f_upper, a.p_hat) == (b.f_lower, b.f_upper, b.p_hat)


def test_monotone_sweep_small():
    rng = np.random.default_rng(4)
    for _ in range(20):
        res = bound_sweep(rng, random_network(rng), 1.0, 0.5)
        lo = [b.f_lower for b in res]
        hi = [b.f_upper for b in res]
        assert all(b <= a * (1 + 1e-12) for a, b in zip(lo, lo[1:]))
        assert all(b >= a * (1 - 1e-12) for a, b in zip(hi, hi[1:]))


def test_max_batch_matches_prefix_scan():
    rng = np.random.default_rng(9)
    for _ in range(20):
        net, s, alpha, pi = desk_instance(rng, max_new=4, max_events=10)
        tab = build_preattack_table(net, alpha, s)
        lo_min, hi_max = 0.9, 1.05
        best = 0
        for n in range(1, len(s) + 1):
            bs = compute_bounds(net, tab, s[:n], pi)
            if all(b.f_lower >= lo_min and b.f_upper <= hi_max for b in bs):
                best = n
        got, n_users = max_batch(net, tab, s, pi, lo_min, hi_max)
        assert got == best
        assert n_users == (len(set(s.new_user[:best].tolist())) if best else 0)
