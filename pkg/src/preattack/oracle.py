"""Brute-force exact posteriors under the sequential attachment model.

Only feasible at desk scale: the posterior of one new user marginalizes the
latent labels of every other new user in the stream (k^(m-1) replays).
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .graph_core import Direction, EdgeStream, LabeledNetwork, check_prior
from .kcdpa_sim import AlphaSpec

DEFAULT_CAP = 12


class CapExceededError(ValueError):
    pass


def _as_alpha(alpha, k: int) -> AlphaSpec:
    return alpha if isinstance(alpha, AlphaSpec) else AlphaSpec.uniform(float(alpha), k)


def sequence_log_prob(network: LabeledNetwork, stream: EdgeStream, labels: Mapping[int, int],
                      alpha=1.0, only_user: int | None = None) -> float:
    """Log probability of the observed preexisting endpoints given all labels.

    Replays the stream in order; each event is scored by the exact next-draw
    probability given E0 plus every earlier new edge, then added to the
    running counts. With ``only_user`` set, only that user's events are
    scored, though everyone's events still update the counts. The draws of
    (new user, direction) are label independent and omitted.

    Denominators are the exact normalizers over V: a new send edge adds to
    the send-side total of its sender's class, a new receive edge to the
    receive-side total of its recipient's class.
    """
    alpha = _as_alpha(alpha, network.k)
    k = network.k
    sizes = network.class_sizes.astype(float)
    send_mass = (alpha.send @ sizes + network.total_sent_by).tolist()
    recv_mass = (alpha.recv @ sizes + network.total_recv_by).tolist()
    extra_send: list[dict[int, int]] = [dict() for _ in range(k)]
    extra_recv: list[dict[int, int]] = [dict() for _ in range(k)]
    rows = network.index_of(stream.preexisting_user).tolist() if len(stream) else []
    pre_labels = network.labels
    total = 0.0
    for ev, r in zip(stream, rows):
        seq, u, d = ev.seq, ev.new_user, ev.direction
        c = labels[u]
        b = int(pre_labels[r])
        if d == Direction.SEND:
            numer = alpha.send[c, b] + network.recv_from[r, c] + extra_send[c].get(r, 0)
            denom = send_mass[c]
            extra_send[c][r] = extra_send[c].get(r, 0) + 1
            send_mass[c] += 1
        else:
            numer = alpha.recv[c, b] + network.sent_to[r, c] + extra_recv[c].get(r, 0)
            denom = recv_mass[c]
            extra_recv[c][r] = extra_recv[c].get(r, 0) + 1
            recv_mass[c] += 1
        if denom <= 0:
            raise ValueError(f"seq {seq}: zero normalizer (alpha is 0 and no matching edges)")
        if only_user is None or u == only_user:
            total += math.log(numer / denom) if numer > 0 else -math.inf
    return total


@dataclass(eq=False)
class ExactPosterior:
    user: int
    p_star: np.ndarray
    enumerated_combinations: int

    @property
    def p_fake(self) -> float:
        return float(self.p_star[1])


def exact_posterior(network: LabeledNetwork, stream: EdgeStream, prior, target: int,
                    alpha=1.0, cap: int = DEFAULT_CAP, evidence: str = "target",
                    condition_labels: Mapping[int, int] | None = None,
                    threads: int = 1) -> ExactPosterior:
    """Exact posterior over ``target``'s class.

    ``evidence="target"`` scores the target's own observed edges under the
    exact running counts (other new users' edges enter only through those
    counts); ``evidence="all"`` scores the whole stream, i.e. the full joint.
    Other users' labels are summed out under the prior, or fixed when
    ``condition_labels`` is given.
    """
    k = network.k
    prior = check_prior(prior, k)
    if evidence not in ("target", "all"):
        raise ValueError("evidence must be 'target' or 'all'")
    users = [int(u) for u in stream.users().tolist()]
    if target not in users:
        return ExactPosterior(target, prior.copy(), 0)
    if len(users) > cap:
        raise CapExceededError(f"{len(users)} new users exceeds the oracle cap of {cap}")
    others = [u for u in users if u != target]
    only = target if evidence == "target" else None
    alpha = _as_alpha(alpha, k)
    with np.errstate(divide="ignore"):
        log_prior = np.log(prior)

    if condition_labels is not None:
        combos = [tuple(condition_labels[u] for u in others)]
    else:
        combos = list(itertools.product(range(k), repeat=len(others)))

    def combo_terms(combo):
        lp_others = 0.0 if condition_labels is not None else float(sum(log_prior[c] for c in combo))
        assign = dict(zip(others, combo))
        out = []
        for c in range(k):
            if np.isneginf(lp_others) or np.isneginf(log_prior[c]):
                out.append(-math.inf)
                continue
            assign[target] = c
            out.append(lp_others + sequence_log_prob(network, stream, assign, alpha, only))
        return out

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            terms = list(pool.map(combo_terms, combos))
    else:
        terms = [combo_terms(c) for c in combos]
    terms = np.asarray(terms).reshape(len(combos), k)
    with np.errstate(invalid="ignore"):
        per_class = np.array([np.logaddexp.reduce(terms[:, c]) for c in range(k)]) + log_prior
    top = per_class.max()
    if np.isneginf(top):
        raise ValueError(f"user {target}: observed edges have zero probability under every labeling")
    w = np.exp(per_class - top)
    return ExactPosterior(target, w / w.sum(), len(combos))


def enumerate_sequences(network: LabeledNetwork, schedule, labels: Mapping[int, int], alpha=1.0,
                        new_range: tuple[int, int] = (1_000_000_000, 1_000_000_010)):
    """Yield (stream, probability) for every endpoint sequence of a fixed schedule.

    ``schedule`` is a list of (new_user_id, Direction). Used to check that the
    conditionals form a proper distribution over outcomes.
    """
    schedule = list(schedule)
    for choice in itertools.product(network.ids.tolist(), repeat=len(schedule)):
        stream = EdgeStream(np.arange(1, len(schedule) + 1), [int(d) for _, d in schedule],
                            [u for u, _ in schedule], list(choice), new_range)
        yield stream, math.exp(sequence_log_prob(network, stream, labels, alpha))
