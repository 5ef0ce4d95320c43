"""Sampling new-user labels and request streams from the k-class directed
preferential-attachment process.

Randomness comes from numpy's counter-based Philox bit generator keyed by
``SimConfig.rng_seed``; labels and the stream use two independent child
seeds spawned from one ``SeedSequence``, so a config reproduces the same
output on every platform numpy supports.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .graph_core import Direction, EdgeStream, LabeledNetwork, check_prior

log = logging.getLogger(__name__)


def make_rng(seed: int, n_children: int = 1) -> list[np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(n_children)
    return [np.random.Generator(np.random.Philox(c)) for c in children]


@dataclass(frozen=True, eq=False)
class AlphaSpec:
    """Attachment pseudo-counts, possibly label dependent.

    Both matrices are indexed ``[new_user_label, preexisting_label]``:
    ``send[a, b]`` is the pseudo-count for a new class-``a`` user sending to a
    class-``b`` preexisting user, ``recv[a, b]`` for a new class-``a`` user
    receiving from a class-``b`` preexisting user.
    """

    send: np.ndarray
    recv: np.ndarray

    def __post_init__(self):
        # C order so matrix products sum in the same order whatever the input layout
        send = np.array(self.send, dtype=float, order="C")
        recv = np.array(self.recv, dtype=float, order="C")
        if send.ndim != 2 or send.shape[0] != send.shape[1] or send.shape != recv.shape:
            raise ValueError("alpha matrices must both be k x k")
        if np.any(send < 0) or np.any(recv < 0) or not (np.all(np.isfinite(send)) and np.all(np.isfinite(recv))):
            raise ValueError("alpha entries must be finite and nonnegative")
        send.flags.writeable = False
        recv.flags.writeable = False
        object.__setattr__(self, "send", send)
        object.__setattr__(self, "recv", recv)

    @classmethod
    def uniform(cls, alpha: float, k: int = 2) -> "AlphaSpec":
        full = np.full((k, k), float(alpha))
        return cls(full, full.copy())

    @classmethod
    def from_values(cls, values: Sequence[float], k: int = 2) -> "AlphaSpec":
        """Build from a flat list: one scalar, or 2k^2 values.

        The 2k^2 layout is the send block ``send[new][pre]`` row-major followed
        by the receive block in sender-first order ``recv[pre][new]`` row-major.
        For k=2 that is (RR, RF, FR, FF) for sends then (RR, RF, FR, FF) for
        receives, each pair written sender -> recipient.
        """
        values = [float(v) for v in values]
        if len(values) == 1:
            return cls.uniform(values[0], k)
        if len(values) != 2 * k * k:
            raise ValueError(f"alpha needs 1 or {2 * k * k} values for k={k}, got {len(values)}")
        send = np.array(values[: k * k]).reshape(k, k)
        recv = np.array(values[k * k:]).reshape(k, k).T
        return cls(send, recv)

    def to_values(self) -> list[float]:
        return self.send.ravel().tolist() + self.recv.T.ravel().tolist()

    @property
    def k(self) -> int:
        return self.send.shape[0]

    @property
    def is_scalar(self) -> bool:
        return bool(np.all(self.send == self.send.flat[0]) and np.all(self.recv == self.send.flat[0]))

    @property
    def scalar(self) -> float:
        if not self.is_scalar:
            raise ValueError("alpha is label dependent")
        return float(self.send.flat[0])

    def matrix(self, direction: Direction) -> np.ndarray:
        return self.send if direction == Direction.SEND else self.recv


@dataclass(eq=False)
class ActivityDistribution:
    """How events are spread over new users and directions.

    Either proportional weights per user (``weight_send``/``weight_recv``) or
    a fixed ``schedule`` of ``(user_index, direction)`` pairs replayed in order.
    """

    weight_send: np.ndarray | None = None
    weight_recv: np.ndarray | None = None
    schedule: list[tuple[int, Direction]] | None = None

    def __post_init__(self):
        if self.schedule is not None:
            self.schedule = [(int(u), Direction(d)) for u, d in self.schedule]
            return
        if self.weight_send is None or self.weight_recv is None:
            raise ValueError("activity needs weights or a schedule")
        self.weight_send = np.asarray(self.weight_send, dtype=float)
        self.weight_recv = np.asarray(self.weight_recv, dtype=float)
        if self.weight_send.shape != self.weight_recv.shape:
            raise ValueError("send and receive weights differ in length")
        if np.any(self.weight_send < 0) or np.any(self.weight_recv < 0):
            raise ValueError("activity weights must be nonnegative")
        if not (self.weight_send.sum() + self.weight_recv.sum()) > 0:
            raise ValueError("at least one activity weight must be positive")

    @classmethod
    def uniform(cls, m: int, send_share: float = 0.5) -> "ActivityDistribution":
        return cls(np.full(m, send_share), np.full(m, 1.0 - send_share))

    @classmethod
    def send_only(cls, m: int) -> "ActivityDistribution":
        return cls(np.ones(m), np.zeros(m))

    def draw(self, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Return (user_index, direction) arrays for n events."""
        if self.schedule is not None:
            if n > len(self.schedule):
                raise ValueError(f"schedule has {len(self.schedule)} events, {n} requested")
            users = np.array([u for u, _ in self.schedule[:n]], dtype=np.int64)
            dirs = np.array([int(d) for _, d in self.schedule[:n]], dtype=np.int8)
            return users, dirs
        w = np.concatenate([self.weight_send, self.weight_recv])
        picks = rng.choice(w.size, size=n, p=w / w.sum())
        m = self.weight_send.size
        return (picks % m).astype(np.int64), (picks >= m).astype(np.int8)


@dataclass(eq=False)
class SimConfig:
    prior: np.ndarray
    alpha: AlphaSpec
    activity: ActivityDistribution
    n_events: int
    rng_seed: int
    new_user_count: int
    new_id_start: int = 1_000_000_000

    def __post_init__(self):
        self.prior = check_prior(self.prior)
        if self.alpha.k != self.prior.size:
            raise ValueError("alpha and prior disagree on the number of classes")
        if self.n_events < 0:
            raise ValueError("n_events must be nonnegative")
        if self.new_user_count < 1:
            raise ValueError("need at least one new user")
        if self.activity.schedule is None and self.activity.weight_send.size != self.new_user_count:
            raise ValueError("activity weights must cover every new user")

    @property
    def k(self) -> int:
        return self.prior.size

    @property
    def new_range(self) -> tuple[int, int]:
        return self.new_id_start, self.new_id_start + self.new_user_count - 1

    def new_ids(self) -> np.ndarray:
        return np.arange(self.new_id_start, self.new_id_start + self.new_user_count, dtype=np.uint64)


def sample_labels(config: SimConfig) -> dict[int, int]:
    """Draw i.i.d. class labels for the new users from the prior."""
    (rng,) = make_rng(config.rng_seed, 2)[:1]
    labels = rng.choice(config.k, size=config.new_user_count, p=config.prior)
    return dict(zip(config.new_ids().tolist(), labels.tolist()))


class ZeroWeightError(ValueError):
    pass


class _Urn:
    """Draws preexisting users with probability proportional to
    ``alpha[label(v)] + count(v)`` for one (new-class, direction) pair.

    Counts are kept as a multiset list of user rows (one entry per edge), so a
    draw is O(1) and an update is an append.
    """

    def __init__(self, pool: np.ndarray, alpha_row: np.ndarray, members: list[np.ndarray]):
        self.pool = pool.tolist()
        self.members = members
        mass = np.array([alpha_row[b] * len(members[b]) for b in range(len(members))])
        self.alpha_per_class = alpha_row
        self.cum_mass = np.cumsum(mass).tolist()
        self.alpha_mass = float(mass.sum())

    def draw(self, r: float) -> int:
        """Map a uniform r in [0, 1) to a user row."""
        n = len(self.pool)
        total = self.alpha_mass + n
        if total <= 0:
            raise ZeroWeightError("all attachment weights are zero")
        x = r * total
        if x < self.alpha_mass:
            prev = 0.0
            for b, cm in enumerate(self.cum_mass):
                if x < cm:
                    members = self.members[b]
                    j = int((x - prev) / self.alpha_per_class[b])
                    return int(members[min(j, len(members) - 1)])
                prev = cm
            # float round-off at the boundary; fall through to the last class
            b = max(i for i, cm in enumerate(self.cum_mass) if len(self.members[i]) and self.alpha_per_class[i] > 0)
            return int(self.members[b][-1])
        j = int(x - self.alpha_mass)
        return self.pool[min(j, n - 1)]


def _make_urn(network: LabeledNetwork, alpha: AlphaSpec, new_class: int, direction: Direction,
              members: list[np.ndarray] | None = None) -> _Urn:
    if members is None:
        members = [np.flatnonzero(network.labels == b) for b in range(network.k)]
    counts = network.recv_from if direction == Direction.SEND else network.sent_to
    rows = np.arange(network.user_count)
    return _Urn(np.repeat(rows, counts[:, new_class]), alpha.matrix(direction)[new_class], members)


def next_draws(network: LabeledNetwork, alpha: AlphaSpec, new_class: int, direction: Direction,
               size: int, seed: int = 0, earlier=()) -> np.ndarray:
    """``size`` independent next-endpoint draws (preexisting ids) from the sampler's urn.

    ``earlier`` lists preexisting ids already drawn by new edges of the same
    class and direction; they enter the counts exactly as in :func:`sample_stream`.
    """
    urn = _make_urn(network, alpha, new_class, direction)
    for v in np.atleast_1d(network.index_of(list(earlier))).tolist() if len(earlier) else []:
        urn.pool.append(int(v))
    (rng,) = make_rng(seed)
    rows = [urn.draw(r) for r in rng.random(size).tolist()]
    return network.ids[np.asarray(rows, dtype=np.int64)]


def sample_stream(network: LabeledNetwork, labels: dict[int, int], config: SimConfig) -> EdgeStream:
    """Run the generative process for ``config.n_events`` steps.

    At every step a (new user, direction) pair comes from the activity
    distribution, then the preexisting endpoint is drawn in proportion to
    alpha plus the running same-class count, where the running counts include
    every earlier new edge.
    """
    lo, hi = config.new_range
    if network.user_count and (int(network.ids[-1]) >= lo and int(network.ids[0]) <= hi):
        overlap = network.ids[(network.ids >= np.uint64(lo)) & (network.ids <= np.uint64(hi))]
        if overlap.size:
            raise ValueError(f"new id range {lo}-{hi} overlaps preexisting ids")
    if network.k != config.k:
        raise ValueError("network and config disagree on k")
    new_ids = config.new_ids()
    try:
        new_labels = np.array([labels[int(u)] for u in new_ids.tolist()], dtype=np.int64)
    except KeyError as exc:
        raise ValueError(f"no label for new user {exc.args[0]}") from None

    _, rng = make_rng(config.rng_seed, 2)
    users, dirs = config.activity.draw(config.n_events, rng)
    uniforms = rng.random(config.n_events).tolist()

    k = config.k
    members = [np.flatnonzero(network.labels == b) for b in range(k)]
    send_urns = [_make_urn(network, config.alpha, c, Direction.SEND, members) for c in range(k)]
    recv_urns = [_make_urn(network, config.alpha, c, Direction.RECEIVE, members) for c in range(k)]

    drawn = np.empty(config.n_events, dtype=np.int64)
    lab = new_labels.tolist()
    for i, (u, d, r) in enumerate(zip(users.tolist(), dirs.tolist(), uniforms)):
        urn = (send_urns if d == 0 else recv_urns)[lab[u]]
        try:
            v = urn.draw(r)
        except ZeroWeightError:
            raise ZeroWeightError(
                f"step {i + 1}: every attachment weight is zero for class {lab[u]} "
                f"({Direction(d).name.lower()}); use alpha > 0") from None
        urn.pool.append(v)
        drawn[i] = v

    return EdgeStream(
        np.arange(1, config.n_events + 1),
        dirs,
        new_ids[users],
        network.ids[drawn] if config.n_events else np.zeros(0, np.uint64),
        config.new_range,
    )


def attachment_weights(network: LabeledNetwork, alpha: AlphaSpec, new_class: int,
                       direction: Direction, extra_counts: np.ndarray | None = None) -> np.ndarray:
    """Unnormalized next-draw weights over all preexisting users (oracle path)."""
    a = alpha.matrix(direction)[new_class][network.labels]
    counts = (network.recv_from if direction == Direction.SEND else network.sent_to)[:, new_class]
    w = a + counts
    if extra_counts is not None:
        w = w + extra_counts
    return w


# -- reference preexisting networks ------------------------------------------

@dataclass
class NetworkRecipe:
    """Recipe for a synthetic preexisting network.

    ``kind`` is one of ``separated`` (fakes and reals favour disjoint sets of
    popular users, both as recipients and as senders), ``symmetric`` (every
    user's counts are identical across classes) or ``random``.
    """

    kind: str = "separated"
    n_users: int = 10_000
    fake_frac: float = 0.1
    n_edges: int = 100_000
    overlap: float = 0.1
    zipf: float = 1.0
    seed: int = 0
    id_start: int = 0
    extra: dict = field(default_factory=dict)


def _zipf_weights(n: int, s: float) -> np.ndarray:
    w = 1.0 / np.arange(1, n + 1) ** s
    return w / w.sum()


def _matched_pools(reals: np.ndarray, fakes: np.ndarray, rng) -> tuple[np.ndarray, np.ndarray]:
    """Two disjoint popularity-ordered pools with the same label at every rank,
    so popularity-weighted class composition is identical in both."""
    pairs = []
    for members in (reals, fakes):
        shuffled = rng.permutation(members)
        n_pairs = shuffled.size // 2
        pairs.append(shuffled[: 2 * n_pairs].reshape(n_pairs, 2))
    pairs = np.concatenate(pairs)[rng.permutation(sum(p.shape[0] for p in pairs))]
    return pairs[:, 0], pairs[:, 1]


def reference_network(recipe: NetworkRecipe) -> tuple[LabeledNetwork, np.ndarray, np.ndarray]:
    """Build a binary-labeled preexisting network; returns (network, src_ids, dst_ids)."""
    (rng,) = make_rng(recipe.seed)
    n = recipe.n_users
    ids = np.arange(recipe.id_start, recipe.id_start + n, dtype=np.uint64)
    labels = (rng.random(n) < recipe.fake_frac).astype(np.int64)
    if n >= 2 and labels.min() == labels.max():
        labels[rng.integers(n)] ^= 1
    reals, fakes = np.flatnonzero(labels == 0), np.flatnonzero(labels == 1)

    if recipe.kind == "symmetric":
        # 2x2 blocks (real+fake sender) x (real+fake recipient) keep every
        # user's per-class counts equal.
        n_blocks = max(recipe.n_edges // 4, 0)
        wr, wf = _zipf_weights(reals.size, recipe.zipf), _zipf_weights(fakes.size, recipe.zipf)
        s_r = reals[rng.choice(reals.size, n_blocks, p=wr)]
        s_f = fakes[rng.choice(fakes.size, n_blocks, p=wf)]
        y_r = reals[rng.choice(reals.size, n_blocks, p=wr)]
        y_f = fakes[rng.choice(fakes.size, n_blocks, p=wf)]
        ok = (s_r != y_r) & (s_f != y_f)  # drop whole blocks, never single edges
        s_r, s_f, y_r, y_f = s_r[ok], s_f[ok], y_r[ok], y_f[ok]
        src = np.concatenate([s_r, s_r, s_f, s_f])
        dst = np.concatenate([y_r, y_f, y_r, y_f])
    elif recipe.kind in ("separated", "random"):
        half = recipe.n_edges // 2
        pools = _matched_pools(reals, fakes, rng)  # (real-preferred, fake-preferred)
        sender_pools = _matched_pools(reals, fakes, rng)
        if recipe.kind == "random":
            pools = sender_pools = (np.arange(n), np.arange(n))

        def pick(pool_pair, cls, flip):
            out = np.empty(cls.size, dtype=np.int64)
            side = np.where(flip, 1 - cls, cls)
            for s in (0, 1):
                pool = pool_pair[s]
                sel = side == s
                out[sel] = pool[rng.choice(pool.size, int(sel.sum()), p=_zipf_weights(pool.size, recipe.zipf))]
            return out

        # send-driven half: sender's label picks the recipient pool
        src1 = rng.integers(n, size=half)
        dst1 = pick(pools, labels[src1], rng.random(half) < recipe.overlap)
        # receive-driven half: recipient's label picks the sender pool
        dst2 = rng.integers(n, size=recipe.n_edges - half)
        src2 = pick(sender_pools, labels[dst2], rng.random(dst2.size) < recipe.overlap)
        src = np.concatenate([src1, src2])
        dst = np.concatenate([dst1, dst2])
        keep = src != dst
        src, dst = src[keep], dst[keep]
    else:
        raise ValueError(f"unknown network kind {recipe.kind!r}")

    net = LabeledNetwork.from_arrays(ids, labels, ids[src], ids[dst], k=2)
    log.debug("reference network %s: |V|=%d |E0|=%d fakes=%d", recipe.kind, n, src.size, fakes.size)
    return net, ids[src], ids[dst]


def estimate_class_rates(network: LabeledNetwork, scale: float = 1.0) -> AlphaSpec:
    """Class-level attachment rates from E0, usable as a label-dependent alpha.

    ``send[a, b]`` is proportional to the number of E0 edges from class ``a``
    senders per class ``b`` recipient, rescaled so each row averages ``scale``.
    """
    k = network.k
    sizes = np.maximum(network.class_sizes, 1).astype(float)
    # edges from class a to class b: sum over class-b recipients of recv_from[:, a]
    flow = np.zeros((k, k))
    for b in range(k):
        flow[:, b] = network.recv_from[network.labels == b].sum(axis=0)
    send = flow / sizes[None, :]
    # receive side: edges from class b senders to class a recipients, per class-b sender
    recv = flow.T / sizes[None, :]
    recv = recv.copy()

    def norm(m):
        row = m.mean(axis=1, keepdims=True)
        row[row == 0] = 1.0
        out = m / row * scale
        out[m.sum(axis=1) == 0] = scale
        return out

    return AlphaSpec(norm(send), norm(recv))
