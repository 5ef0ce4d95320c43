"""Small hand-built and randomized instances shared by the test modules."""

from __future__ import annotations

import numpy as np

from preattack import EdgeStream, LabeledNetwork, build_preattack_table, compute_bounds
from preattack.graph_core import Direction

A, B, C, F = 1, 2, 3, 4
NEW = 100
NEW_RANGE = (100, 199)


def t1_network() -> LabeledNetwork:
    """a, b, c real and f fake; E0 = {f->a, b->a, c->b}."""
    return LabeledNetwork.from_arrays([A, B, C, F], [0, 0, 0, 1], [F, B, C], [A, A, B])


def stream_of(events, new_range=NEW_RANGE) -> EdgeStream:
    """events: (new_user, preexisting_user, Direction) triples in order."""
    n = len(events)
    return EdgeStream(np.arange(1, n + 1), [int(d) for _, _, d in events],
                      [u for u, _, _ in events], [v for _, v, _ in events], new_range)


def random_network(rng: np.random.Generator, max_users: int = 20, max_edges: int = 40) -> LabeledNetwork:
    n = int(rng.integers(2, max_users + 1))
    labels = rng.integers(0, 2, size=n)
    m = int(rng.integers(0, max_edges + 1))
    src = rng.integers(0, n, size=m)
    dst = rng.integers(0, n, size=m)
    keep = src != dst
    ids = np.arange(1, n + 1)
    return LabeledNetwork.from_arrays(ids, labels, ids[src[keep]], ids[dst[keep]])


def random_stream(rng: np.random.Generator, network: LabeledNetwork, n_users: int, n_events: int) -> EdgeStream:
    users = NEW + rng.integers(0, n_users, size=n_events)
    pre = network.ids[rng.integers(0, network.user_count, size=n_events)]
    dirs = rng.integers(0, 2, size=n_events)
    return EdgeStream(np.arange(1, n_events + 1), dirs, users, pre, NEW_RANGE)


SEND, RECV = Direction.SEND, Direction.RECEIVE


def desk_instance(rng: np.random.Generator, max_users: int = 20, max_new: int = 4, max_events: int = 10):
    """(network, stream, alpha, pi) at oracle scale."""
    net = random_network(rng, max_users)
    m = int(rng.integers(1, max_new + 1))
    stream = random_stream(rng, net, m, int(rng.integers(1, max_events + 1)))
    alpha = float(rng.choice([0.5, 1.0, 2.0]))
    pi = float(rng.choice([0.2, 0.5]))
    return net, stream, alpha, pi


def bound_sweep(rng, net, alpha, pi, n_mine=3, n_other=10):
    """Bounds of user 100 as more interleaved foreign edges are inserted ahead of its edges."""
    mine = [(100, int(net.ids[rng.integers(net.user_count)]), SEND if rng.random() < .5 else RECV)
            for _ in range(n_mine)]
    other = [(101 + int(rng.integers(3)), int(net.ids[rng.integers(net.user_count)]),
              SEND if rng.random() < .5 else RECV) for _ in range(n_other)]
    slot = rng.integers(0, n_mine, size=n_other)  # which of u's edges each foreign edge precedes
    out = []
    for j in range(n_other + 1):
        events = []
        for i, e in enumerate(mine):
            events += [other[t] for t in range(j) if slot[t] == i]
            events.append(e)
        out.append(compute_bounds(net, build_preattack_table(net, alpha), stream_of(events), pi, users=[100])[0])
    return out
