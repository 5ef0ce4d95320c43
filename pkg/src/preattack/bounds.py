"""Worst-case approximation factors f_lower <= P_hat / P_exact <= f_upper.

Each new edge that precedes one of user u's edges is attributed to its own
phantom new user whose label is adversarial for that edge. For the lower
factor, phantoms touching the same preexisting user as u's edge are fake and
all others real; the upper factor uses the opposite assignment. The
resulting per-edge probabilities only need, for each of u's edges, the
number of earlier new edges and how many of those touched the same
preexisting user in the same role, so everything is computed in one pass.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .graph_core import FAKE, REAL, Direction, EdgeStream, LabeledNetwork, check_prior
from .pa_tables import PATable


@dataclass(eq=False)
class BoundReport:
    user: int
    p_hat: float
    f_lower: float
    f_upper: float
    worst_case_posterior_F: float
    worst_case_posterior_R: float


def _binary_posterior(log_f: float, log_r: float, pi: float) -> float:
    """P(fake) from class log likelihoods."""
    a = log_f + math.log(pi) if pi > 0 else -math.inf
    b = log_r + math.log1p(-pi) if pi < 1 else -math.inf
    top = max(a, b)
    if top == -math.inf:
        raise ValueError("both classes have zero probability")
    ea, eb = math.exp(a - top), math.exp(b - top)
    return ea / (ea + eb)


def _log_frac(numer: float, denom: float) -> float:
    return (math.log(numer) if numer > 0 else -math.inf) - math.log(denom)


class _Pass:
    """Running state of the single pass over the stream."""

    def __init__(self, network: LabeledNetwork, table: PATable, literal_wcr_alpha: bool):
        if table.kind == "homophily":
            raise ValueError("bounds need the E0 counts; a homophily table has none")
        if network.k != 2 or table.k != 2:
            raise ValueError("bounds are defined for the binary fake/real case")
        if table.network is not network and not np.array_equal(table.network.recv_from, network.recv_from):
            raise ValueError("table was built from a different network")
        self.net = network
        self.table = table
        alpha = table.alpha
        sizes = network.class_sizes.astype(float)
        # P_hat is recomputed here with the same scalar ops as the worst cases,
        # so empty phantom sums give factors of exactly 1
        self.send_denom = (alpha.send @ sizes + network.total_sent_by).tolist()
        self.recv_denom = (alpha.recv @ sizes + network.total_recv_by).tolist()
        self.literal_extra = 0.0
        if literal_wcr_alpha:
            if not alpha.is_scalar:
                raise ValueError("the literal upper-bound reading is defined for scalar alpha only")
            self.literal_extra = alpha.scalar * network.n_edges
        self.n_prior = 0
        self.role_count: dict[tuple[int, int], int] = defaultdict(int)
        # per user: [hat_F, hat_R, wcf_F, wcf_R, wcr_F, wcr_R]
        self.sums: dict[int, list[float]] = defaultdict(lambda: [0.0] * 6)
        self.n_edges: dict[int, int] = defaultdict(int)

    def step(self, u: int, v_row: int, d: int) -> None:
        net, alpha = self.net, self.table.alpha
        b = int(net.labels[v_row])
        trow = int(self.table.position[v_row])
        if trow < 0:
            raise KeyError(f"no table entry for preexisting user {int(net.ids[v_row])}")
        if d == Direction.SEND:
            a_mat, counts, denom = alpha.send, net.recv_from, self.send_denom
        else:
            a_mat, counts, denom = alpha.recv, net.sent_to, self.recv_denom
        nF = a_mat[FAKE, b] + counts[v_row, FAKE]
        nR = a_mat[REAL, b] + counts[v_row, REAL]
        dF, dR = denom[FAKE], denom[REAL]
        same = self.role_count[(v_row, d)]
        other = self.n_prior - same
        extra = self.literal_extra if d == Direction.SEND else 0.0
        s = self.sums[u]
        s[0] += _log_frac(nF, dF)
        s[1] += _log_frac(nR, dR)
        s[2] += _log_frac(nF + same, dF + same)
        s[3] += _log_frac(nR, dR + other)
        s[4] += _log_frac(nF, dF + extra + other)
        s[5] += _log_frac(nR + same, dR + same)
        self.n_edges[u] += 1
        self.role_count[(v_row, d)] += 1
        self.n_prior += 1

    def report(self, u: int, pi: float) -> BoundReport:
        s = self.sums[u]
        p_hat = _binary_posterior(s[0], s[1], pi)
        p_wcf = _binary_posterior(s[2], s[3], pi)
        p_wcr = _binary_posterior(s[4], s[5], pi)
        if p_wcf == 0 or p_wcr == 0:
            raise ValueError(f"user {u}: worst-case posterior is zero")
        return BoundReport(u, p_hat, p_hat / p_wcf, p_hat / p_wcr, p_wcf, p_wcr)


def _pi(prior) -> float:
    return float(check_prior(prior, 2)[FAKE])


def compute_bounds(network: LabeledNetwork, table: PATable, stream: EdgeStream, prior,
                   users=None, literal_wcr_alpha: bool = False) -> list[BoundReport]:
    """Bound pair for each target user (all stream users by default), ordered by id.

    ``literal_wcr_alpha`` adds alpha * |E0| to the send-side fake denominator
    of the upper-bound probabilities, the other reading of that formula.
    """
    pi = _pi(prior)
    state = _Pass(network, table, literal_wcr_alpha)
    rows = network.index_of(stream.preexisting_user).tolist() if len(stream) else []
    for u, v, d in zip(stream.new_user.tolist(), rows, stream.direction.tolist()):
        state.step(u, v, d)
    targets = sorted(state.sums) if users is None else [int(u) for u in users]
    out = []
    for u in targets:
        if u not in state.n_edges:
            raise KeyError(f"user {u} has no events in the stream")
        out.append(state.report(u, pi))
    return out


def max_batch(network: LabeledNetwork, table: PATable, stream: EdgeStream, prior,
              f_lower_min: float = 0.85, f_upper_max: float = 1.1) -> tuple[int, int]:
    """Largest stream prefix whose every user keeps f_lower >= f_lower_min and
    f_upper <= f_upper_max. Returns (prefix length, users in that prefix)."""
    pi = _pi(prior)
    state = _Pass(network, table, False)
    rows = network.index_of(stream.preexisting_user).tolist() if len(stream) else []
    violators: set[int] = set()
    best, best_users = 0, 0
    for i, (u, v, d) in enumerate(zip(stream.new_user.tolist(), rows, stream.direction.tolist())):
        state.step(u, v, d)
        rep = state.report(u, pi)
        if rep.f_lower < f_lower_min or rep.f_upper > f_upper_max:
            violators.add(u)
        else:
            violators.discard(u)
        if not violators:
            best, best_users = i + 1, len(state.n_edges)
    return best, best_users
