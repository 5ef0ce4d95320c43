"""Frozen-E0 attachment probability tables, stored as natural logs.

For a touched preexisting user v and class c:

    send side:    P(v | new class-c user sends)    = (a + recv_from[v, c]) / (A + total_sent_by[c])
    receive side: P(v | new class-c user receives) = (a + sent_to[v, c])   / (A + total_recv_by[c])

where ``a`` is the (possibly label dependent) pseudo-count for v and ``A``
the same pseudo-count summed over every preexisting user.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .graph_core import Direction, EdgeStream, LabeledNetwork
from .kcdpa_sim import AlphaSpec


class ZeroDenominatorError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PATable:
    """Log attachment probabilities for the touched preexisting users.

    ``rows`` are network row indices of the materialized users, ``position``
    maps every network row to its table row (-1 when not materialized).
    ``log_send[i, c]`` / ``log_recv[i, c]`` hold the send/receive log
    probabilities for class c.
    """

    network: LabeledNetwork
    alpha: AlphaSpec
    kind: str
    rows: np.ndarray
    position: np.ndarray
    log_send: np.ndarray
    log_recv: np.ndarray
    log_send_denom: np.ndarray
    log_recv_denom: np.ndarray

    @property
    def k(self) -> int:
        return self.log_send.shape[1]

    @property
    def ids(self) -> np.ndarray:
        return self.network.ids[self.rows]

    def lookup(self, users) -> np.ndarray:
        """Table rows for preexisting user ids; KeyError if not materialized."""
        pos = self.position[self.network.index_of(users)]
        if np.any(pos < 0):
            missing = np.asarray(users, dtype=np.uint64)[pos < 0]
            raise KeyError(f"no table entry for preexisting user(s) {missing[:5].tolist()}")
        return pos

    def log_prob(self, user: int, cls: int, direction: Direction) -> float:
        row = self.lookup([user])[0]
        return float((self.log_send if direction == Direction.SEND else self.log_recv)[row, cls])

    def prob(self, user: int, cls: int, direction: Direction) -> float:
        return float(np.exp(self.log_prob(user, cls, direction)))

    def dump(self, path) -> None:
        """Write ``nu,class,direction,log_prob`` rows for audit."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(f"#preattack-table v1 kind={self.kind}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["nu", "class", "direction", "log_prob"])
            for i, nu in enumerate(self.ids.tolist()):
                for d, arr in (("S", self.log_send), ("R", self.log_recv)):
                    for c in range(self.k):
                        w.writerow([nu, c, d, repr(float(arr[i, c]))])


def touched_users(stream: EdgeStream) -> np.ndarray:
    """Distinct preexisting ids appearing in the stream."""
    return np.unique(stream.preexisting_user)


def _resolve_rows(network: LabeledNetwork, touched) -> np.ndarray:
    if touched is None:
        return np.arange(network.user_count)
    if isinstance(touched, EdgeStream):
        idx = network.index_of(touched.preexisting_user)
        return np.flatnonzero(np.bincount(idx, minlength=network.user_count))
    touched = np.asarray(sorted(touched) if isinstance(touched, (set, frozenset)) else touched, dtype=np.uint64)
    return np.unique(network.index_of(touched))


def _build(network: LabeledNetwork, alpha: AlphaSpec, touched, kind: str) -> PATable:
    if alpha.k != network.k:
        raise ValueError(f"alpha has {alpha.k} classes, network has {network.k}")
    rows = _resolve_rows(network, touched)
    position = np.full(network.user_count, -1, dtype=np.int64)
    position[rows] = np.arange(rows.size)
    sizes = network.class_sizes.astype(float)
    pre_labels = network.labels[rows]

    def side(a_mat, counts, totals, name):
        # a_mat[c, b]: pseudo-count for a class-c new user and a class-b preexisting user
        denom = a_mat @ sizes + totals
        if np.any(denom <= 0):
            c = int(np.flatnonzero(denom <= 0)[0])
            raise ZeroDenominatorError(f"zero {name} denominator for class {c}: alpha is 0 and E0 has no matching edges")
        numer = a_mat.T[pre_labels] + counts[rows]
        with np.errstate(divide="ignore"):
            logp = np.log(numer) - np.log(denom)[None, :]
        return logp, np.log(denom)

    log_send, ls_den = side(alpha.send, network.recv_from, network.total_sent_by, "send")
    log_recv, lr_den = side(alpha.recv, network.sent_to, network.total_recv_by, "receive")
    for arr in (rows, position, log_send, log_recv, ls_den, lr_den):
        arr.flags.writeable = False
    return PATable(network, alpha, kind, rows, position, log_send, log_recv, ls_den, lr_den)


def build_preattack_table(network: LabeledNetwork, alpha: float, touched=None) -> PATable:
    """Scalar-alpha table. ``touched`` may be an id collection or a stream;
    ``None`` materializes every preexisting user."""
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    return _build(network, AlphaSpec.uniform(alpha, network.k), touched, "preattack")


def build_plusplus_table(network: LabeledNetwork, alpha8: AlphaSpec, touched=None) -> PATable:
    """Label-dependent alpha; denominators sum each user's own alpha over V."""
    return _build(network, alpha8, touched, "preattack_pp")


def build_homophily_table(network: LabeledNetwork, alpha8: AlphaSpec, touched=None) -> PATable:
    """Class-rate-only table: the label-dependent table over an empty E0."""
    table = _build(network.without_edges(), alpha8, touched, "homophily")
    return table


def materialize(table: PATable, direction: Direction) -> np.ndarray:
    """Linear-space probabilities for the table's rows, shape (rows, k)."""
    return np.exp(table.log_send if direction == Direction.SEND else table.log_recv)
