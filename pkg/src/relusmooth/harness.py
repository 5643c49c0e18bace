"""Experiment orchestration.

Builds Clean/Attacked evaluation sets, measures accuracy and defence rate
for raw and post-averaged models, and runs whole config-driven experiments:
one report row per (attack, sampler, radius, direction-count) combination.
Misclassified originals stay in the attacked set untouched and are never
counted as adversarial; every replaced sample is re-verified against the
budget and the top-k-miss criterion.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass

import numpy as np

from . import attacks
from .attacks import AttackResult, ThreatModel, is_adversarial
from .data import AttackedSet, LabeledDataset, generate_dataset
from .defense import DefenseConfig, post_average_predict
from .errors import ConfigError, InvariantViolation
from .nn import Network, SgdConfig, init_network, predict_topk, train

ATTACK_NAMES = ("fgsm", "pgd", "deepfool", "cw")


@dataclass(frozen=True)
class DefendedModel:
    """A network wrapped with a post-averaging config; quacks like a predictor."""

    net: Network
    cfg: DefenseConfig
    bounds: tuple | None = None

    def topk(self, x, k: int) -> list[int]:
        _, order = post_average_predict(self.net, x, self.cfg, bounds=self.bounds)
        return order[:k]


def model_topk(model, x, k: int) -> list[int]:
    if isinstance(model, Network):
        return predict_topk(model, x, k)
    return model.topk(x, k)


def run_attack(net: Network, name: str, x, y: int, tm: ThreatModel, seed: int = 0, options: dict | None = None) -> AttackResult:
    """Dispatch one attack by name with its default settings."""
    options = options or {}
    if name == "fgsm":
        return attacks.fgsm(net, x, y, tm)
    if name == "pgd":
        return attacks.pgd(
            net,
            x,
            y,
            tm,
            steps=int(options.get("steps", 40)),
            step_size=options.get("step_size"),
            random_start=bool(options.get("random_start", True)),
            seed=seed,
        )
    if name == "deepfool":
        return attacks.deepfool(
            net,
            x,
            y,
            tm,
            max_iter=int(options.get("max_iter", 50)),
            overshoot=float(options.get("overshoot", 0.02)),
        )
    if name == "cw":
        cfg = attacks.CwConfig(
            confidence=float(options.get("confidence", 0.0)),
            binary_search_steps=int(options.get("binary_search_steps", 9)),
            max_iter=int(options.get("max_iter", 1000)),
            learning_rate=float(options.get("learning_rate", 0.01)),
        )
        return attacks.cw_l2(net, x, y, tm, cfg)
    raise ConfigError(f"attacks.names: unknown attack {name!r}")


def attack_dataset(
    net: Network,
    clean: LabeledDataset,
    attack: str,
    tm: ThreatModel,
    seed: int = 0,
    options: dict | None = None,
) -> tuple[AttackedSet, list[AttackResult | None]]:
    """Attack every correctly classified sample; keep the rest unchanged.

    Returns the attacked set plus one AttackResult per attacked sample
    (None for samples that were already misclassified and left alone).
    """
    inputs = clean.inputs.copy()
    mask = np.zeros(len(clean), dtype=bool)
    results: list[AttackResult | None] = []
    for i, (x, y) in enumerate(zip(clean.inputs, clean.labels)):
        y = int(y)
        if is_adversarial(net, x, y, tm.miss_k):
            results.append(None)  # already misclassified: kept, not adversarial
            continue
        result = run_attack(net, attack, x, y, tm, seed=seed + i, options=options)
        results.append(result)
        if result.success:
            inputs[i] = result.adversarial_x
            mask[i] = True
    aset = AttackedSet(clean.name, inputs, clean.labels.copy(), mask)
    verify_attacked_set(net, clean, aset, tm)
    return aset, results


def build_attacked_set(
    net: Network,
    clean: LabeledDataset,
    attack: str,
    tm: ThreatModel,
    seed: int = 0,
    options: dict | None = None,
) -> AttackedSet:
    return attack_dataset(net, clean, attack, tm, seed=seed, options=options)[0]


def verify_attacked_set(net, clean, aset, tm):
    """Re-check the attacked-set invariants (size, budget, adversariality)."""
    if len(aset) != len(clean):
        raise InvariantViolation("attacked set must preserve the clean set size")
    for i in np.nonzero(aset.adv_mask)[0]:
        delta = float(np.max(np.abs(aset.inputs[i] - clean.inputs[i])))
        if delta > tm.epsilon + attacks.BUDGET_SLACK:
            raise InvariantViolation(f"sample {i} exceeds the l-inf budget")
        if not is_adversarial(net, aset.inputs[i], int(aset.labels[i]), tm.miss_k):
            raise InvariantViolation(f"sample {i} is masked adversarial but classified correctly")


def accuracy(model, dataset, k: int = 1) -> float:
    """Fraction of samples whose label is in the model's top-k prediction."""
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    hits = sum(
        1
        for x, y in zip(dataset.inputs, dataset.labels)
        if int(y) in model_topk(model, x, k)
    )
    return hits / len(dataset)


def defence_rate(defended: DefendedModel, attacked: AttackedSet, k: int = 1) -> float | None:
    """Fraction of adversarial samples the defended model classifies correctly.

    Undefined (None) when the attacked set contains no adversarials; callers
    report it as not-applicable rather than 0/0.
    """
    idx = np.nonzero(attacked.adv_mask)[0]
    if len(idx) == 0:
        return None
    hits = sum(
        1
        for i in idx
        if int(attacked.labels[i]) in defended.topk(attacked.inputs[i], k)
    )
    return hits / len(idx)


@dataclass(frozen=True)
class EvaluationRow:
    """One (attack, defense, sweep point) record; rates are in [0, 1]."""

    attack: str
    sampler: str
    radius: float
    directions: int
    aggregation: str
    epsilon: float
    miss_k: int
    clean_top1: float
    attacked_top1: float
    defended_clean_top1: float
    defended_attacked_top1: float
    clean_topk: float
    attacked_topk: float
    defended_clean_topk: float
    defended_attacked_topk: float
    defence_rate: float | None
    adv_count: int
    seeds: str

    def __post_init__(self):
        rates = [
            self.clean_top1,
            self.attacked_top1,
            self.defended_clean_top1,
            self.defended_attacked_top1,
            self.clean_topk,
            self.attacked_topk,
            self.defended_clean_topk,
            self.defended_attacked_topk,
        ]
        if self.defence_rate is not None:
            rates.append(self.defence_rate)
        if any(not 0.0 <= r <= 1.0 for r in rates):
            raise InvariantViolation("report rates must lie in [0, 1]")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset_kind: str
    dataset_size: int
    dataset_noise: float
    dataset_seed: int
    hidden: tuple[int, ...]
    model_seed: int
    epochs: int
    learning_rate: float
    momentum: float
    batch_size: int | None
    epsilon: float
    miss_k: int
    lo: float
    hi: float
    attack_names: tuple[str, ...]
    attack_seed: int
    attack_options: dict
    samplers: tuple[str, ...]
    radii: tuple[float, ...]
    direction_counts: tuple[int, ...]
    aggregation: str
    defense_seed: int


def _get(cp, section, key, cast, default=None, required=False):
    if not cp.has_option(section, key):
        if required:
            raise ConfigError(f"{section}.{key}: missing required field")
        return default
    raw = cp.get(section, key)
    try:
        return cast(raw)
    except ValueError:
        raise ConfigError(f"{section}.{key}: cannot parse {raw!r}") from None


def _csv(cast):
    def parse(raw):
        return tuple(cast(v.strip()) for v in raw.split(",") if v.strip())

    return parse


def load_experiment_config(path) -> ExperimentConfig:
    """Parse the sectioned key-value experiment config format."""
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise ConfigError(f"config file not found: {path}")
    for section in ("dataset", "model", "threat", "attacks", "defense"):
        if not cp.has_section(section):
            raise ConfigError(f"{section}: missing required section")

    attack_names = _get(cp, "attacks", "names", _csv(str), required=True)
    for name in attack_names:
        if name not in ATTACK_NAMES:
            raise ConfigError(f"attacks.names: unknown attack {name!r}")
    samplers = _get(cp, "defense", "samplers", _csv(str), default=("random",))
    for s in samplers:
        if s not in ("random", "approx"):
            raise ConfigError(f"defense.samplers: unknown sampler {s!r}")
    aggregation = _get(cp, "defense", "aggregation", str, default="logits")
    if aggregation not in ("logits", "probabilities"):
        raise ConfigError(f"defense.aggregation: unknown domain {aggregation!r}")

    # per-attack tuning keys: <attack>_<param>, e.g. pgd_steps or cw_max_iter
    int_params = {"steps", "max_iter", "binary_search_steps"}
    float_params = {"step_size", "overshoot", "confidence", "learning_rate"}
    attack_options: dict = {}
    for key in cp.options("attacks"):
        if key in ("names", "seed"):
            continue
        attack, _, param = key.partition("_")
        if attack not in ATTACK_NAMES:
            raise ConfigError(f"attacks.{key}: unknown attack prefix {attack!r}")
        if param in int_params:
            value = _get(cp, "attacks", key, int)
        elif param in float_params:
            value = _get(cp, "attacks", key, float)
        elif param == "random_start":
            value = _get(cp, "attacks", key, lambda v: v.lower() == "true")
        else:
            raise ConfigError(f"attacks.{key}: unknown parameter {param!r}")
        attack_options.setdefault(attack, {})[param] = value

    cfg = ExperimentConfig(
        dataset_kind=_get(cp, "dataset", "kind", str, required=True),
        dataset_size=_get(cp, "dataset", "size", int, required=True),
        dataset_noise=_get(cp, "dataset", "noise", float, default=0.1),
        dataset_seed=_get(cp, "dataset", "seed", int, default=0),
        hidden=_get(cp, "model", "hidden", _csv(int), required=True),
        model_seed=_get(cp, "model", "seed", int, default=0),
        epochs=_get(cp, "model", "epochs", int, default=200),
        learning_rate=_get(cp, "model", "learning_rate", float, default=0.5),
        momentum=_get(cp, "model", "momentum", float, default=0.9),
        batch_size=_get(cp, "model", "batch_size", int, default=None),
        epsilon=_get(cp, "threat", "epsilon", float, required=True),
        miss_k=_get(cp, "threat", "miss_k", int, default=1),
        lo=_get(cp, "threat", "lo", float, default=0.0),
        hi=_get(cp, "threat", "hi", float, default=1.0),
        attack_names=attack_names,
        attack_seed=_get(cp, "attacks", "seed", int, default=0),
        attack_options=attack_options,
        samplers=samplers,
        radii=_get(cp, "defense", "radii", _csv(float), required=True),
        direction_counts=_get(cp, "defense", "directions", _csv(int), default=(20,)),
        aggregation=aggregation,
        defense_seed=_get(cp, "defense", "seed", int, default=0),
    )
    if cfg.epsilon <= 0:
        raise ConfigError("threat.epsilon: must be positive")
    if any(r <= 0 for r in cfg.radii):
        raise ConfigError("defense.radii: must be positive")
    if any(k < 1 for k in cfg.direction_counts):
        raise ConfigError("defense.directions: must be >= 1")
    return cfg


def prepare_model(cfg: ExperimentConfig) -> tuple[Network, LabeledDataset]:
    ds = generate_dataset(cfg.dataset_kind, cfg.dataset_size, cfg.dataset_noise, cfg.dataset_seed)
    dims = (ds.n, *cfg.hidden, ds.class_count)
    net = init_network(dims, seed=cfg.model_seed, biased=True)
    sgd = SgdConfig(
        epochs=cfg.epochs,
        learning_rate=cfg.learning_rate,
        momentum=cfg.momentum,
        batch_size=cfg.batch_size,
        seed=cfg.model_seed,
    )
    return train(net, ds.inputs, ds.labels, sgd), ds


def run_experiment(cfg: ExperimentConfig, net: Network | None = None, clean: LabeledDataset | None = None) -> list[EvaluationRow]:
    """Train (or reuse) a model, build attacked sets, evaluate every sweep point."""
    if net is None or clean is None:
        net, clean = prepare_model(cfg)
    tm = ThreatModel(
        cfg.epsilon,
        np.full(clean.n, cfg.lo),
        np.full(clean.n, cfg.hi),
        cfg.miss_k,
    )
    seeds = (
        f"data={cfg.dataset_seed} model={cfg.model_seed} "
        f"attack={cfg.attack_seed} defense={cfg.defense_seed}"
    )
    clean_top1 = accuracy(net, clean, 1)
    clean_topk = accuracy(net, clean, cfg.miss_k)

    rows = []
    for attack in cfg.attack_names:
        attacked = build_attacked_set(
            net, clean, attack, tm, seed=cfg.attack_seed, options=cfg.attack_options.get(attack)
        )
        attacked_top1 = accuracy(net, attacked, 1)
        attacked_topk = accuracy(net, attacked, cfg.miss_k)
        for sampler in cfg.samplers:
            for directions in cfg.direction_counts:
                for radius in cfg.radii:
                    dcfg = DefenseConfig(
                        radius=radius,
                        directions=directions,
                        sampler=sampler,
                        aggregation=cfg.aggregation,
                        seed=cfg.defense_seed,
                    )
                    defended = DefendedModel(net, dcfg, bounds=(tm.lo, tm.hi))
                    rows.append(
                        EvaluationRow(
                            attack=attack,
                            sampler=sampler,
                            radius=radius,
                            directions=directions,
                            aggregation=cfg.aggregation,
                            epsilon=cfg.epsilon,
                            miss_k=cfg.miss_k,
                            clean_top1=clean_top1,
                            attacked_top1=attacked_top1,
                            defended_clean_top1=accuracy(defended, clean, 1),
                            defended_attacked_top1=accuracy(defended, attacked, 1),
                            clean_topk=clean_topk,
                            attacked_topk=attacked_topk,
                            defended_clean_topk=accuracy(defended, clean, cfg.miss_k),
                            defended_attacked_topk=accuracy(defended, attacked, cfg.miss_k),
                            defence_rate=defence_rate(defended, attacked, cfg.miss_k),
                            adv_count=attacked.adv_count,
                            seeds=seeds,
                        )
                    )
    return rows
