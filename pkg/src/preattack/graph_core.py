"""Domain types, label stores, edge-stream I/O and attachment-count summaries.

Class index convention for the binary case: 0 = Real, 1 = Fake.

File formats are line-oriented UTF-8 with a versioned header line:

    labels:  ``#preattack-labels v1 k=<k>``         then ``user_id,class_index``
    edges:   ``#preattack-edges v1``                then ``src_id,dst_id``
    stream:  ``#preattack-stream v1 new_range=<lo>-<hi>``
             then ``seq,direction(S|R),new_user,preexisting_user``
"""

from __future__ import annotations

import enum
import os
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

import numpy as np

REAL = 0
FAKE = 1

LABELS_HEADER = "#preattack-labels v1"
EDGES_HEADER = "#preattack-edges v1"
STREAM_HEADER = "#preattack-stream v1"

_LABELS_RE = re.compile(r"^#preattack-labels v1 k=(\d+)$")
_STREAM_RE = re.compile(r"^#preattack-stream v1 new_range=(\d+)-(\d+)$")


class FormatError(ValueError):
    """Raised for malformed input files or structurally invalid data."""

    def __init__(self, message: str, path: str | os.PathLike | None = None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{os.fspath(path)}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line


class Direction(enum.IntEnum):
    SEND = 0  # new user -> preexisting user
    RECEIVE = 1  # preexisting user -> new user

    @property
    def code(self) -> str:
        return "S" if self is Direction.SEND else "R"

    @classmethod
    def from_code(cls, code: str) -> "Direction":
        if code == "S":
            return cls.SEND
        if code == "R":
            return cls.RECEIVE
        raise ValueError(f"unknown direction {code!r} (expected S or R)")


@dataclass(frozen=True)
class EdgeEvent:
    seq: int
    new_user: int
    preexisting_user: int
    direction: Direction


def check_prior(pi, k: int | None = None) -> np.ndarray:
    """Validate a prior vector and return it as a float array.

    A scalar is read as the binary P[fake] and expanded to ``[1 - pi, pi]``.
    """
    arr = np.atleast_1d(np.asarray(pi, dtype=float))
    if arr.size == 1:
        arr = np.array([1.0 - arr[0], arr[0]])
    if arr.ndim != 1 or arr.size < 2:
        raise ValueError("prior must be a vector over at least two classes")
    if np.any(arr < 0) or np.any(arr > 1) or not np.all(np.isfinite(arr)):
        raise ValueError(f"prior entries must lie in [0, 1]: {arr.tolist()}")
    if abs(arr.sum() - 1.0) > 1e-12:
        raise ValueError(f"prior must sum to 1 (got {arr.sum()!r})")
    if k is not None and arr.size != k:
        raise ValueError(f"prior has {arr.size} classes, expected {k}")
    return arr


@dataclass(frozen=True, eq=False)
class LabeledNetwork:
    """Preexisting request graph E0 reduced to per-user, per-class counts.

    ``ids`` is sorted; every per-user array is aligned with it.
    ``recv_from[i, c]`` counts edges x -> ids[i] with label(x) == c and
    ``sent_to[i, c]`` counts edges ids[i] -> y with label(y) == c.
    """

    ids: np.ndarray
    labels: np.ndarray
    k: int
    recv_from: np.ndarray
    sent_to: np.ndarray
    n_edges: int = 0
    _class_sizes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_class_sizes", np.bincount(self.labels, minlength=self.k))
        for arr in (self.ids, self.labels, self.recv_from, self.sent_to):
            arr.flags.writeable = False

    @property
    def user_count(self) -> int:
        return int(self.ids.size)

    @property
    def total_sent_by(self) -> np.ndarray:
        return self.recv_from.sum(axis=0)

    @property
    def total_recv_by(self) -> np.ndarray:
        return self.sent_to.sum(axis=0)

    @property
    def class_sizes(self) -> np.ndarray:
        return self._class_sizes

    def index_of(self, users) -> np.ndarray:
        """Map user ids to row indices; raises KeyError for unknown ids."""
        users = np.asarray(users, dtype=np.uint64)
        if self.ids.size == 0:
            if users.size:
                raise KeyError(f"unknown preexisting user(s): {users.ravel()[:5].tolist()}")
            return np.zeros(users.shape, np.int64)
        pos = np.minimum(np.searchsorted(self.ids, users), self.ids.size - 1)
        miss = self.ids[pos] != users
        if np.any(miss):
            raise KeyError(f"unknown preexisting user(s): {users[miss][:5].tolist()}")
        return pos.astype(np.int64)

    def __contains__(self, user) -> bool:
        i = np.searchsorted(self.ids, np.uint64(user))
        return bool(i < self.ids.size and self.ids[i] == user)

    def label_of(self, user: int) -> int:
        return int(self.labels[self.index_of([user])[0]])

    def label_map(self) -> dict[int, int]:
        return {int(u): int(c) for u, c in zip(self.ids, self.labels)}

    def without_edges(self) -> "LabeledNetwork":
        zeros = np.zeros_like(self.recv_from)
        return LabeledNetwork(self.ids, self.labels, self.k, zeros, zeros.copy(), 0)

    @classmethod
    def from_arrays(cls, ids, labels, src=(), dst=(), k: int | None = None) -> "LabeledNetwork":
        ids = np.asarray(ids, dtype=np.uint64)
        labels = np.asarray(labels, dtype=np.int64)
        if ids.shape != labels.shape:
            raise ValueError("ids and labels differ in length")
        order = np.argsort(ids, kind="stable")
        ids, labels = ids[order], labels[order]
        if ids.size > 1 and np.any(ids[1:] == ids[:-1]):
            dup = ids[1:][ids[1:] == ids[:-1]][0]
            raise FormatError(f"duplicate label for user {int(dup)}")
        if k is None:
            k = max(2, int(labels.max()) + 1 if labels.size else 2)
        if labels.size and (labels.min() < 0 or labels.max() >= k):
            raise FormatError(f"class index outside [0, {k})")
        net = cls(ids, labels, k, np.zeros((ids.size, k), np.int64), np.zeros((ids.size, k), np.int64))
        src = np.asarray(src, dtype=np.uint64)
        dst = np.asarray(dst, dtype=np.uint64)
        if src.size == 0:
            return net
        si, di = net.index_of(src), net.index_of(dst)
        recv_from = np.zeros((ids.size, k), np.int64)
        sent_to = np.zeros((ids.size, k), np.int64)
        np.add.at(recv_from, (di, labels[si]), 1)
        np.add.at(sent_to, (si, labels[di]), 1)
        return cls(ids, labels, k, recv_from, sent_to, int(src.size))


@dataclass(eq=False)
class EdgeStream:
    """Ordered new-user edge events stored column-wise.

    Iterating yields :class:`EdgeEvent` objects; numeric work reads the
    columns directly.
    """

    seq: np.ndarray
    direction: np.ndarray
    new_user: np.ndarray
    preexisting_user: np.ndarray
    new_range: tuple[int, int]

    def __post_init__(self):
        self.seq = np.asarray(self.seq, dtype=np.int64)
        self.direction = np.asarray(self.direction, dtype=np.int8)
        self.new_user = np.asarray(self.new_user, dtype=np.uint64)
        self.preexisting_user = np.asarray(self.preexisting_user, dtype=np.uint64)
        n = self.seq.size
        if not (self.direction.size == self.new_user.size == self.preexisting_user.size == n):
            raise ValueError("stream columns differ in length")
        lo, hi = int(self.new_range[0]), int(self.new_range[1])
        if lo > hi:
            raise ValueError(f"empty new-user range {lo}-{hi}")
        self.new_range = (lo, hi)

    def __len__(self) -> int:
        return int(self.seq.size)

    def __iter__(self) -> Iterator[EdgeEvent]:
        for s, d, u, v in zip(self.seq.tolist(), self.direction.tolist(),
                              self.new_user.tolist(), self.preexisting_user.tolist()):
            yield EdgeEvent(s, u, v, Direction(d))

    def __getitem__(self, item):
        if isinstance(item, slice) or isinstance(item, np.ndarray):
            return EdgeStream(self.seq[item], self.direction[item], self.new_user[item],
                              self.preexisting_user[item], self.new_range)
        return EdgeEvent(int(self.seq[item]), int(self.new_user[item]),
                         int(self.preexisting_user[item]), Direction(int(self.direction[item])))

    def select(self, mask) -> "EdgeStream":
        return self[np.asarray(mask)]

    def equals(self, other: "EdgeStream") -> bool:
        return (self.new_range == other.new_range
                and np.array_equal(self.seq, other.seq)
                and np.array_equal(self.direction, other.direction)
                and np.array_equal(self.new_user, other.new_user)
                and np.array_equal(self.preexisting_user, other.preexisting_user))

    def users(self) -> np.ndarray:
        """Distinct new users in order of first appearance."""
        _, first = np.unique(self.new_user, return_index=True)
        return self.new_user[np.sort(first)]

    def validate(self, network: LabeledNetwork | None = None) -> None:
        if self.seq.size > 1 and np.any(np.diff(self.seq) <= 0):
            i = int(np.flatnonzero(np.diff(self.seq) <= 0)[0]) + 1
            raise FormatError(f"out-of-order seq {int(self.seq[i])} at event {i}")
        lo, hi = self.new_range
        in_new = (self.new_user >= np.uint64(lo)) & (self.new_user <= np.uint64(hi))
        if not np.all(in_new):
            raise FormatError(f"new user {int(self.new_user[~in_new][0])} outside new range {lo}-{hi}")
        pre_new = (self.preexisting_user >= np.uint64(lo)) & (self.preexisting_user <= np.uint64(hi))
        if np.any(pre_new):
            raise FormatError(
                f"new-to-new edge: user {int(self.preexisting_user[pre_new][0])} is in the new range")
        if network is not None and len(self):
            network.index_of(self.preexisting_user)

    @classmethod
    def from_events(cls, events: Iterable[EdgeEvent], new_range: tuple[int, int]) -> "EdgeStream":
        events = list(events)
        return cls(
            [e.seq for e in events],
            [int(e.direction) for e in events],
            [e.new_user for e in events],
            [e.preexisting_user for e in events],
            new_range,
        )


def _content_lines(fh, path) -> Iterator[tuple[int, str]]:
    for lineno, raw in enumerate(fh, start=2):
        line = raw.strip()
        if line and not line.startswith("#"):
            yield lineno, line


def _read_header(fh, path, expected: str) -> str:
    header = fh.readline().rstrip("\n")
    if not header.startswith(expected):
        raise FormatError(f"bad header {header!r}, expected {expected!r}", path, 1)
    return header


def read_labels(path) -> tuple[dict[int, int], int]:
    """Read a labels file, returning ``(labels, k)``."""
    with open(path, encoding="utf-8") as fh:
        header = _read_header(fh, path, LABELS_HEADER)
        m = _LABELS_RE.match(header.strip())
        if not m:
            raise FormatError(f"labels header must declare k: {header!r}", path, 1)
        k = int(m.group(1))
        if k < 2:
            raise FormatError("k must be at least 2", path, 1)
        labels: dict[int, int] = {}
        for lineno, line in _content_lines(fh, path):
            parts = line.split(",")
            try:
                if len(parts) != 2:
                    raise ValueError
                user, cls_ = int(parts[0]), int(parts[1])
            except ValueError:
                raise FormatError(f"malformed label line {line!r}", path, lineno) from None
            if user < 0 or not 0 <= cls_ < k:
                raise FormatError(f"label out of range in {line!r}", path, lineno)
            if user in labels:
                raise FormatError(f"duplicate label for user {user}", path, lineno)
            labels[user] = cls_
    return labels, k


def write_labels(labels: Mapping[int, int], path, k: int | None = None) -> None:
    if k is None:
        k = max(2, max(labels.values(), default=0) + 1)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{LABELS_HEADER} k={k}\n")
        for user in sorted(labels):
            fh.write(f"{user},{labels[user]}\n")


def ingest_network(labels_file, edges_file) -> LabeledNetwork:
    """Build a :class:`LabeledNetwork` from a labels file and an E0 edges file.

    The edges file is read once; only the count tables are retained.
    """
    labels, k = read_labels(labels_file)
    ids = np.fromiter(labels.keys(), dtype=np.uint64, count=len(labels))
    labs = np.fromiter(labels.values(), dtype=np.int64, count=len(labels))
    net = LabeledNetwork.from_arrays(ids, labs, k=k)
    row = {int(u): i for i, u in enumerate(net.ids.tolist())}
    recv_from = np.zeros((net.user_count, k), np.int64)
    sent_to = np.zeros((net.user_count, k), np.int64)
    lab = net.labels
    n_edges = 0
    with open(edges_file, encoding="utf-8") as fh:
        _read_header(fh, edges_file, EDGES_HEADER)
        for lineno, line in _content_lines(fh, edges_file):
            parts = line.split(",")
            try:
                if len(parts) != 2:
                    raise ValueError
                src, dst = int(parts[0]), int(parts[1])
            except ValueError:
                raise FormatError(f"malformed edge line {line!r}", edges_file, lineno) from None
            try:
                si, di = row[src], row[dst]
            except KeyError as exc:
                raise FormatError(f"unlabeled endpoint {exc.args[0]}", edges_file, lineno) from None
            recv_from[di, lab[si]] += 1
            sent_to[si, lab[di]] += 1
            n_edges += 1
    return LabeledNetwork(net.ids, net.labels, k, recv_from, sent_to, n_edges)


def write_edges(src, dst, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(EDGES_HEADER + "\n")
        for s, d in zip(np.asarray(src).tolist(), np.asarray(dst).tolist()):
            fh.write(f"{s},{d}\n")


def ingest_stream(stream_file, network: LabeledNetwork | None = None) -> EdgeStream:
    """Read a stream file; enforces seq order and the new/preexisting id split."""
    with open(stream_file, encoding="utf-8") as fh:
        header = _read_header(fh, stream_file, STREAM_HEADER)
        m = _STREAM_RE.match(header.strip())
        if not m:
            raise FormatError(f"stream header must declare new_range: {header!r}", stream_file, 1)
        lo, hi = int(m.group(1)), int(m.group(2))
        seqs, dirs, news, pres = [], [], [], []
        last = None
        for lineno, line in _content_lines(fh, stream_file):
            parts = line.split(",")
            try:
                if len(parts) != 4:
                    raise ValueError
                seq = int(parts[0])
                d = Direction.from_code(parts[1])
                u, v = int(parts[2]), int(parts[3])
            except ValueError:
                raise FormatError(f"malformed stream line {line!r}", stream_file, lineno) from None
            if last is not None and seq <= last:
                raise FormatError(f"out-of-order seq {seq} after {last}", stream_file, lineno)
            if not lo <= u <= hi:
                raise FormatError(f"new user {u} outside new range {lo}-{hi}", stream_file, lineno)
            if lo <= v <= hi:
                raise FormatError(f"new-to-new edge between {u} and {v}", stream_file, lineno)
            if network is not None and v not in network:
                raise FormatError(f"unknown preexisting user {v}", stream_file, lineno)
            last = seq
            seqs.append(seq)
            dirs.append(int(d))
            news.append(u)
            pres.append(v)
    return EdgeStream(seqs, dirs, news, pres, (lo, hi))


def write_stream(events: EdgeStream, path) -> None:
    lo, hi = events.new_range
    codes = ("S", "R")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{STREAM_HEADER} new_range={lo}-{hi}\n")
        fh.writelines(
            f"{s},{codes[d]},{u},{v}\n"
            for s, d, u, v in zip(events.seq.tolist(), events.direction.tolist(),
                                  events.new_user.tolist(), events.preexisting_user.tolist())
        )
