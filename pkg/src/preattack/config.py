"""``#preattack-config v1`` key=value files and the experiment config they describe."""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np

from .graph_core import LabeledNetwork, check_prior, ingest_network
from .kcdpa_sim import (ActivityDistribution, AlphaSpec, NetworkRecipe, SimConfig, estimate_class_rates,
                        make_rng, reference_network)

CONFIG_HEADER = "#preattack-config v1"
DEFAULT_CHECKPOINTS = (1, 2, 3, 5, 10, 15, 20, 25, 30, 40, 50)
REFERENCE_CONFIGS = ("ref-null", "ref-separated", "ref-homophily", "ref-monophily")


class ConfigError(ValueError):
    pass


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    lines = text.splitlines()
    if not lines or lines[0].strip() != CONFIG_HEADER:
        raise ConfigError(f"{source}: first line must be {CONFIG_HEADER!r}")
    out: dict[str, str] = {}
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def reference_config_path(name: str):
    fname = name if name.endswith(".cfg") else name + ".cfg"
    return resources.files("preattack") / "configs" / fname


def read_config(path_or_name) -> dict[str, str]:
    """Read a config file; bare reference names (``ref-separated``) resolve to shipped files."""
    path = os.fspath(path_or_name)
    if not os.path.exists(path):
        ref = reference_config_path(os.path.basename(path))
        if ref.is_file():
            return parse_config_text(ref.read_text(encoding="utf-8"), str(path))
        raise FileNotFoundError(path)
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read(), path)


def _floats(s: str) -> list[float]:
    return [float(x) for x in s.split(",") if x.strip()]


def _ints(s: str) -> list[int]:
    return [int(x) for x in s.split(",") if x.strip()]


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    network_kind: str = "separated"
    recipe: NetworkRecipe = field(default_factory=NetworkRecipe)
    labels_file: str | None = None
    edges_file: str | None = None
    prior: np.ndarray = field(default_factory=lambda: np.array([0.9, 0.1]))
    alpha: AlphaSpec = field(default_factory=lambda: AlphaSpec.uniform(1.0))
    classifier_alpha: float = 1.0
    plusplus_alpha: AlphaSpec | None = None
    homophily_alpha: AlphaSpec | None = None
    new_users: int = 2000
    events_per_user: float = 40.0
    send_share: float = 0.5
    activity: str = "uniform"
    activity_sigma: float = 1.0
    seed: int = 0
    checkpoints: tuple[int, ...] = DEFAULT_CHECKPOINTS

    @property
    def k(self) -> int:
        return self.prior.size

    @property
    def n_events(self) -> int:
        return int(round(self.new_users * self.events_per_user))

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=seed)

    def build_network(self) -> tuple[LabeledNetwork, np.ndarray | None, np.ndarray | None]:
        """The preexisting network; edge arrays are returned only when synthesized."""
        if self.network_kind == "file":
            return ingest_network(self.labels_file, self.edges_file), None, None
        return reference_network(self.recipe)

    def sim_config(self, network: LabeledNetwork, seed: int | None = None) -> SimConfig:
        seed = self.seed if seed is None else seed
        m = self.new_users
        if self.activity == "uniform":
            act = ActivityDistribution.uniform(m, self.send_share)
        elif self.activity == "lognormal":
            (rng,) = make_rng(seed + 7_919)
            w = rng.lognormal(0.0, self.activity_sigma, size=m)
            act = ActivityDistribution(w * self.send_share, w * (1.0 - self.send_share))
        else:
            raise ConfigError(f"unknown activity {self.activity!r}")
        start = max(1_000_000_000, int(network.ids[-1]) + 1 if network.user_count else 0)
        return SimConfig(self.prior, self.alpha, act, self.n_events, seed, m, start)

    def plusplus(self, network: LabeledNetwork) -> AlphaSpec:
        if self.plusplus_alpha is not None:
            return self.plusplus_alpha
        return estimate_class_rates(network, self.classifier_alpha)

    def homophily(self, network: LabeledNetwork) -> AlphaSpec:
        if self.homophily_alpha is not None:
            return self.homophily_alpha
        return estimate_class_rates(network, self.classifier_alpha)

    def to_text(self) -> str:
        r = self.recipe
        lines = [CONFIG_HEADER, f"name={self.name}", f"network={self.network_kind}"]
        if self.network_kind == "file":
            lines += [f"labels_file={self.labels_file}", f"edges_file={self.edges_file}"]
        else:
            lines += [f"network_users={r.n_users}", f"network_fake_frac={r.fake_frac!r}",
                      f"network_edges={r.n_edges}", f"network_overlap={r.overlap!r}",
                      f"network_zipf={r.zipf!r}", f"network_seed={r.seed}"]
        prior = float(self.prior[1]) if self.k == 2 else None
        lines.append(f"prior={prior!r}" if prior is not None else "prior=" + ",".join(map(repr, self.prior.tolist())))
        lines.append(f"k={self.k}")
        lines.append("alpha=" + ",".join(repr(v) for v in (
            [self.alpha.scalar] if self.alpha.is_scalar else self.alpha.to_values())))
        lines.append(f"classifier_alpha={self.classifier_alpha!r}")
        for key, val in (("plusplus_alpha", self.plusplus_alpha), ("homophily_alpha", self.homophily_alpha)):
            lines.append(f"{key}=" + ("estimate" if val is None else ",".join(map(repr, val.to_values()))))
        lines += [f"new_users={self.new_users}", f"events_per_user={self.events_per_user!r}",
                  f"send_share={self.send_share!r}", f"activity={self.activity}",
                  f"activity_sigma={self.activity_sigma!r}", f"seed={self.seed}",
                  "checkpoints=" + ",".join(map(str, self.checkpoints))]
        return "\n".join(lines) + "\n"


_KNOWN = {
    "name", "network", "network_users", "network_fake_frac", "network_edges", "network_overlap",
    "network_zipf", "network_seed", "labels_file", "edges_file", "prior", "k", "alpha",
    "classifier_alpha", "plusplus_alpha", "homophily_alpha", "new_users", "events_per_user",
    "send_share", "activity", "activity_sigma", "seed", "checkpoints",
}


def experiment_from_dict(values: dict[str, str]) -> ExperimentConfig:
    unknown = set(values) - _KNOWN
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    try:
        k = int(values.get("k", 2))
        prior = check_prior(_floats(values.get("prior", "0.1")), k)
        kind = values.get("network", "separated")
        recipe = NetworkRecipe(
            kind=kind if kind != "file" else "separated",
            n_users=int(values.get("network_users", 10_000)),
            fake_frac=float(values.get("network_fake_frac", 0.1)),
            n_edges=int(values.get("network_edges", 100_000)),
            overlap=float(values.get("network_overlap", 0.1)),
            zipf=float(values.get("network_zipf", 1.0)),
            seed=int(values.get("network_seed", 0)),
        )
        if kind == "file" and not ("labels_file" in values and "edges_file" in values):
            raise ConfigError("network=file needs labels_file and edges_file")
        if kind not in ("file", "separated", "symmetric", "random"):
            raise ConfigError(f"unknown network kind {kind!r}")

        def alpha_opt(key):
            raw = values.get(key, "estimate")
            return None if raw == "estimate" else AlphaSpec.from_values(_floats(raw), k)

        cfg = ExperimentConfig(
            name=values.get("name", "experiment"),
            network_kind=kind,
            recipe=recipe,
            labels_file=values.get("labels_file"),
            edges_file=values.get("edges_file"),
            prior=prior,
            alpha=AlphaSpec.from_values(_floats(values.get("alpha", "1")), k),
            classifier_alpha=float(values.get("classifier_alpha", 1.0)),
            plusplus_alpha=alpha_opt("plusplus_alpha"),
            homophily_alpha=alpha_opt("homophily_alpha"),
            new_users=int(values.get("new_users", 2000)),
            events_per_user=float(values.get("events_per_user", 40)),
            send_share=float(values.get("send_share", 0.5)),
            activity=values.get("activity", "uniform"),
            activity_sigma=float(values.get("activity_sigma", 1.0)),
            seed=int(values.get("seed", 0)),
            checkpoints=tuple(_ints(values.get("checkpoints", ",".join(map(str, DEFAULT_CHECKPOINTS))))),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if cfg.new_users < 1 or cfg.events_per_user < 0:
        raise ConfigError("new_users must be >= 1 and events_per_user >= 0")
    if not 0.0 <= cfg.send_share <= 1.0:
        raise ConfigError("send_share must lie in [0, 1]")
    return cfg


def load_experiment(path_or_name, overrides: dict[str, str] | None = None) -> ExperimentConfig:
    values = read_config(path_or_name)
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    return experiment_from_dict(values)
