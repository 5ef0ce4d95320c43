"""Per-new-user posteriors from a frozen attachment table and an edge stream.

Every event contributes a constant log factor per class (the table row of
its preexisting endpoint), so a user's log joint is a plain sum over their
events and the posterior is a softmax of ``log_joint + log prior``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .graph_core import FAKE, Direction, EdgeStream, check_prior
from .pa_tables import PATable

MODES = ("full", "send_only")


@dataclass(eq=False)
class PosteriorReport:
    user: int
    posterior: np.ndarray
    log_joint: np.ndarray
    edge_count_send: int
    edge_count_recv: int

    @property
    def p_fake(self) -> float:
        return float(self.posterior[FAKE])

    @property
    def n_edges(self) -> int:
        return self.edge_count_send + self.edge_count_recv


@dataclass(eq=False)
class Posteriors:
    """Column form of a batch of reports (users sorted by id)."""

    users: np.ndarray
    log_joint: np.ndarray
    posterior: np.ndarray
    n_send: np.ndarray
    n_recv: np.ndarray

    def reports(self) -> list[PosteriorReport]:
        return [
            PosteriorReport(u, p, lj, int(s), int(r))
            for u, p, lj, s, r in zip(self.users.tolist(), self.posterior, self.log_joint,
                                      self.n_send, self.n_recv)
        ]


def posterior_from_log_joint(log_joint: np.ndarray, prior: np.ndarray,
                             n_events: np.ndarray | None = None) -> np.ndarray:
    """Row-wise softmax of ``log_joint + log prior`` with the max shift.

    Rows with zero events get the prior back verbatim. A row where every
    class has zero probability raises.
    """
    log_joint = np.atleast_2d(log_joint)
    with np.errstate(divide="ignore"):
        logits = log_joint + np.log(prior)[None, :]
    top = logits.max(axis=1, keepdims=True)
    if np.any(np.isneginf(top)):
        bad = int(np.flatnonzero(np.isneginf(top[:, 0]))[0])
        raise ValueError(f"row {bad}: every class has zero probability")
    w = np.exp(logits - top)
    post = w / w.sum(axis=1, keepdims=True)
    if n_events is not None:
        post[np.asarray(n_events) == 0] = prior
    return post


def _user_index(stream: EdgeStream) -> tuple[np.ndarray, np.ndarray]:
    """Dense per-event user index plus the sorted id of each index."""
    lo, hi = stream.new_range
    span = hi - lo + 1
    if span <= max(4 * len(stream), 1 << 16):
        raw = (stream.new_user - np.uint64(lo)).astype(np.int64)
        present = np.bincount(raw, minlength=span) > 0
        remap = np.cumsum(present) - 1
        users = np.flatnonzero(present).astype(np.uint64) + np.uint64(lo)
        return remap[raw], users
    users, inv = np.unique(stream.new_user, return_inverse=True)
    return inv.astype(np.int64), users


def _event_terms(table: PATable, stream: EdgeStream, mode: str):
    """(user index, per-class log factor, send mask, used mask, users)."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    uidx, users = _user_index(stream)
    rows = table.lookup(stream.preexisting_user)
    is_send = stream.direction == int(Direction.SEND)
    terms = np.where(is_send[:, None], table.log_send[rows], table.log_recv[rows])
    used = is_send if mode == "send_only" else np.ones(len(stream), dtype=bool)
    return uidx, terms, is_send, used, users


def _accumulate(uidx, terms, n_users, threads: int) -> np.ndarray:
    k = terms.shape[1]

    def run(sel):
        out = np.zeros((n_users, k))
        ui = uidx if sel is None else uidx[sel]
        for c in range(k):
            t = terms[:, c] if sel is None else terms[sel, c]
            out[:, c] = np.bincount(ui, weights=t, minlength=n_users)
        return out

    if threads <= 1:
        return run(None)
    # shard by user: each user's terms stay in event order within one shard
    shard = uidx % threads
    with ThreadPoolExecutor(threads) as pool:
        parts = list(pool.map(lambda s: (s, run(shard == s)), range(threads)))
    out = np.zeros((n_users, k))
    owner = np.arange(n_users) % threads
    for s, part in parts:
        out[owner == s] = part[owner == s]
    return out


def score(table: PATable, stream: EdgeStream, prior, mode: str = "full", threads: int = 1) -> Posteriors:
    prior = check_prior(prior, table.k)
    uidx, terms, is_send, used, users = _event_terms(table, stream, mode)
    n = users.size
    if not np.all(used):
        terms = np.where(used[:, None], terms, 0.0)
    log_joint = _accumulate(uidx, terms, n, threads)
    n_send = np.bincount(uidx, weights=is_send & used, minlength=n).astype(np.int64)
    n_recv = np.bincount(uidx, weights=~is_send & used, minlength=n).astype(np.int64)
    post = posterior_from_log_joint(log_joint, prior, n_send + n_recv)
    return Posteriors(users, log_joint, post, n_send, n_recv)


def classify(table: PATable, stream: EdgeStream, prior, mode: str = "full",
             threads: int = 1) -> list[PosteriorReport]:
    """Binary posteriors (index 1 = fake) for every new user in the stream."""
    if table.k != 2:
        raise ValueError("classify is binary; use classify_multiclass for k > 2")
    return score(table, stream, prior, mode, threads).reports()


def classify_multiclass(table: PATable, stream: EdgeStream, prior, mode: str = "full",
                        threads: int = 1) -> list[PosteriorReport]:
    prior = np.asarray(prior, dtype=float)
    if prior.size != table.k:
        raise ValueError(f"prior has {prior.size} classes but the table has {table.k}")
    return score(table, stream, prior, mode, threads).reports()


@dataclass(eq=False)
class PrefixPosteriors:
    users: np.ndarray
    checkpoints: np.ndarray
    log_joint: np.ndarray  # (checkpoints, users, k)
    posterior: np.ndarray  # (checkpoints, users, k)
    n_send: np.ndarray  # (checkpoints, users)
    n_recv: np.ndarray
    n_total: np.ndarray  # (users,) usable events in the whole stream

    def report(self, user: int, checkpoint: int) -> PosteriorReport:
        ci = int(np.searchsorted(self.checkpoints, checkpoint))
        if ci >= self.checkpoints.size or self.checkpoints[ci] != checkpoint:
            raise KeyError(f"checkpoint {checkpoint} not computed")
        ui = int(np.searchsorted(self.users, np.uint64(user)))
        if ui >= self.users.size or self.users[ui] != user:
            raise KeyError(f"user {user} not in stream")
        return PosteriorReport(user, self.posterior[ci, ui], self.log_joint[ci, ui],
                               int(self.n_send[ci, ui]), int(self.n_recv[ci, ui]))


def score_prefixes(table: PATable, stream: EdgeStream, prior, checkpoints: Sequence[int],
                   mode: str = "full") -> PrefixPosteriors:
    """Posteriors after each user's first x usable events, for every checkpoint x.

    Usable events are sends in send-only mode, sends and receives otherwise.
    Running per-user sums are advanced one event rank at a time and copied
    out at each checkpoint, so each snapshot is the same float sum a
    from-scratch pass over the truncated stream produces.
    """
    prior = check_prior(prior, table.k)
    cps = np.asarray(checkpoints, dtype=np.int64)
    if cps.size and (np.any(np.diff(cps) <= 0) or cps[0] < 0):
        raise ValueError("checkpoints must be nonnegative and strictly ascending")
    uidx, terms, is_send, used, users = _event_terms(table, stream, mode)
    n, k = users.size, table.k
    ev = np.flatnonzero(used)
    ev_user = uidx[ev]
    # rank of each usable event within its user's sequence
    order = np.argsort(ev_user, kind="stable")
    sorted_users = ev_user[order]
    starts = np.flatnonzero(np.r_[True, sorted_users[1:] != sorted_users[:-1]]) if ev.size else np.zeros(0, int)
    group_start = np.repeat(starts, np.diff(np.r_[starts, ev.size]))
    rank = np.empty(ev.size, dtype=np.int64)
    rank[order] = np.arange(ev.size) - group_start
    n_total = np.bincount(ev_user, minlength=n)

    by_rank = np.argsort(rank, kind="stable")
    rank_bounds = np.searchsorted(rank[by_rank], np.arange((rank.max() + 2) if ev.size else 1))

    running = np.zeros((n, k))
    sends = np.zeros(n, dtype=np.int64)
    recvs = np.zeros(n, dtype=np.int64)
    out_lj = np.zeros((cps.size, n, k))
    out_s = np.zeros((cps.size, n), dtype=np.int64)
    out_r = np.zeros((cps.size, n), dtype=np.int64)
    done = 0
    for ci, x in enumerate(cps.tolist()):
        while done < x and done + 1 < rank_bounds.size:
            sel = ev[by_rank[rank_bounds[done]:rank_bounds[done + 1]]]
            u = uidx[sel]
            running[u] += terms[sel]
            s = is_send[sel]
            sends[u[s]] += 1
            recvs[u[~s]] += 1
            done += 1
        out_lj[ci], out_s[ci], out_r[ci] = running, sends, recvs
    post = np.empty_like(out_lj)
    for ci in range(cps.size):
        post[ci] = posterior_from_log_joint(out_lj[ci], prior, out_s[ci] + out_r[ci])
    return PrefixPosteriors(users, cps, out_lj, post, out_s, out_r, n_total)


def classify_prefixes(table: PATable, stream: EdgeStream, prior, checkpoints: Sequence[int],
                      mode: str = "full") -> dict[tuple[int, int], PosteriorReport]:
    res = score_prefixes(table, stream, prior, checkpoints, mode)
    out = {}
    for ci, x in enumerate(res.checkpoints.tolist()):
        for ui, u in enumerate(res.users.tolist()):
            out[(u, x)] = PosteriorReport(u, res.posterior[ci, ui], res.log_joint[ci, ui],
                                          int(res.n_send[ci, ui]), int(res.n_recv[ci, ui]))
    return out
