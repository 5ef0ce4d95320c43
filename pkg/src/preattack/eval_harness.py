"""AUC-versus-request-count curves on simulated data.

Ground truth is always the simulator's sampled labels; there are no
production labels anywhere in this package.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .classifier import score_prefixes
from .config import ExperimentConfig
from .graph_core import FAKE, LabeledNetwork
from .kcdpa_sim import sample_labels, sample_stream
from .pa_tables import build_homophily_table, build_plusplus_table, build_preattack_table

log = logging.getLogger(__name__)

BASE_VARIANTS = ("preattack", "preattack_pp", "homophily")
VARIANTS = tuple(v + s for v in BASE_VARIANTS for s in ("", "-send"))


def auc(scores: Sequence[float], truth: Sequence[int]) -> float:
    """ROC AUC as the Mann-Whitney statistic U / (n_pos * n_neg), ties counted 1/2."""
    scores = np.asarray(scores, dtype=float)
    truth = np.asarray(truth).astype(bool)
    n_pos = int(truth.sum())
    n_neg = truth.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs at least one positive and one negative")
    order = np.argsort(scores, kind="mergesort")
    s = scores[order]
    # average 1-based ranks over tie groups
    edges = np.flatnonzero(np.r_[True, s[1:] != s[:-1], True])
    ranks = np.empty(s.size)
    for lo, hi in zip(edges[:-1], edges[1:]):
        ranks[lo:hi] = (lo + 1 + hi) / 2.0
    rank_of = np.empty_like(ranks)
    rank_of[order] = ranks
    u = rank_of[truth].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def auc_pairs(scores: Sequence[float], truth: Sequence[int]) -> float:
    """All-pairs AUC; quadratic, used to check :func:`auc`."""
    scores = np.asarray(scores, dtype=float)
    truth = np.asarray(truth).astype(bool)
    pos, neg = scores[truth], scores[~truth]
    if pos.size == 0 or neg.size == 0:
        raise ValueError("AUC needs at least one positive and one negative")
    diff = pos[:, None] - neg[None, :]
    return float(((diff > 0).sum() + 0.5 * (diff == 0).sum()) / diff.size)


@dataclass
class ConvergenceCurve:
    variant: str
    points: list[tuple[int, float, float]] = field(default_factory=list)  # (checkpoint, mean AUC, mean users)
    seeds: list[int] = field(default_factory=list)

    def auc_at(self, checkpoint: int) -> float:
        for x, a, _ in self.points:
            if x == checkpoint:
                return a
        raise KeyError(checkpoint)


@dataclass
class CurveRow:
    variant: str
    checkpoint: int
    seed: int
    auc: float
    n_users: int


def _split(variant: str) -> tuple[str, str]:
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; choose from {VARIANTS}")
    base, _, send = variant.partition("-")
    return base, ("send_only" if send else "full")


def parse_variants(spec: str | Iterable[str]) -> list[str]:
    if isinstance(spec, str):
        spec = ["all"] if spec == "all" else [s.strip() for s in spec.split(",") if s.strip()]
    out = []
    for v in spec:
        out.extend(VARIANTS if v == "all" else [v])
    for v in out:
        _split(v)
    return list(dict.fromkeys(out))


def draw_world(cfg: ExperimentConfig, network: LabeledNetwork, seed: int, max_tries: int = 10):
    """Labels and stream for one seed; re-seeds if every new user got the same class."""
    for attempt in range(max_tries):
        s = seed + 1_000_003 * attempt
        sim = cfg.sim_config(network, s)
        labels = sample_labels(sim)
        if len(set(labels.values())) > 1 or cfg.new_users == 1:
            if attempt:
                log.warning("seed %d drew a single class; used re-seed %d", seed, s)
            return labels, sample_stream(network, labels, sim)
    raise RuntimeError(f"seed {seed}: every label draw was single-class after {max_tries} tries")


def run_seed(cfg: ExperimentConfig, network: LabeledNetwork, variants: Sequence[str],
             seed: int, checkpoints: Sequence[int] | None = None) -> list[CurveRow]:
    checkpoints = list(cfg.checkpoints if checkpoints is None else checkpoints)
    labels, stream = draw_world(cfg, network, seed)
    tables = {}
    rows: list[CurveRow] = []
    for variant in variants:
        base, mode = _split(variant)
        if base not in tables:
            if base == "preattack":
                tables[base] = build_preattack_table(network, cfg.classifier_alpha, stream)
            elif base == "preattack_pp":
                tables[base] = build_plusplus_table(network, cfg.plusplus(network), stream)
            else:
                tables[base] = build_homophily_table(network, cfg.homophily(network), stream)
        res = score_prefixes(tables[base], stream, cfg.prior, checkpoints, mode)
        truth = np.array([labels[u] == FAKE for u in res.users.tolist()])
        for ci, x in enumerate(res.checkpoints.tolist()):
            # score users who have at least x usable events
            keep = res.n_total >= max(x, 1)
            lj = res.log_joint[ci, keep]
            if lj.shape[1] == 2:
                score = lj[:, FAKE] - lj[:, 1 - FAKE]
            else:
                score = res.posterior[ci, keep, FAKE]
            t = truth[keep]
            a = auc(score, t) if 0 < t.sum() < t.size else float("nan")
            rows.append(CurveRow(variant, x, seed, a, int(keep.sum())))
    return rows


def run_experiment(cfg: ExperimentConfig, variants: Sequence[str] = VARIANTS, seeds: Sequence[int] | int = 1,
                   checkpoints: Sequence[int] | None = None, threads: int = 1,
                   network: LabeledNetwork | None = None) -> tuple[list[ConvergenceCurve], list[CurveRow]]:
    """Simulate, score every variant at every checkpoint, and average AUC over seeds."""
    variants = parse_variants(variants)
    if isinstance(seeds, int):
        seeds = [cfg.seed + i for i in range(seeds)]
    if network is None:
        network, _, _ = cfg.build_network()
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            per_seed = list(pool.map(lambda s: run_seed(cfg, network, variants, s, checkpoints), seeds))
    else:
        per_seed = [run_seed(cfg, network, variants, s, checkpoints) for s in seeds]
    rows = [r for chunk in per_seed for r in chunk]
    curves = []
    for variant in variants:
        mine = [r for r in rows if r.variant == variant]
        xs = sorted({r.checkpoint for r in mine})
        pts = []
        for x in xs:
            at = [r for r in mine if r.checkpoint == x]
            aucs = np.array([r.auc for r in at])
            mean = float(np.nanmean(aucs)) if np.any(~np.isnan(aucs)) else float("nan")
            pts.append((x, mean, float(np.mean([r.n_users for r in at]))))
        curves.append(ConvergenceCurve(variant, pts, list(seeds)))
    return curves, rows


def write_rows(rows: Sequence[CurveRow], path_or_file) -> None:
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="", encoding="utf-8") if own else path_or_file
    try:
        fh.write("#preattack-curves v1\n# ground truth: simulator-sampled labels\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["variant", "checkpoint", "seed", "auc", "n_users"])
        for r in rows:
            w.writerow([r.variant, r.checkpoint, r.seed, repr(r.auc), r.n_users])
    finally:
        if own:
            fh.close()


def write_dat(curves: Sequence[ConvergenceCurve], path) -> None:
    """gnuplot-style blocks, one per variant: ``checkpoint mean_auc mean_users``."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("#preattack-curves-dat v1\n# ground truth: simulator-sampled labels\n")
        for c in curves:
            fh.write(f"# {c.variant}\n")
            for x, a, n in c.points:
                fh.write(f"{x} {a!r} {n!r}\n")
            fh.write("\n\n")
