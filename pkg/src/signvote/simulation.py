"""Synchronous parameter-server rounds with adversarial workers.

One canonical parameter vector stands in for the per-worker replicas: the
server broadcasts the same direction to everyone, so the replicas can never
diverge (a small-scale consistency test asserts this).  Each round runs in
two phases -- honest and blind workers commit messages first, omniscient
adversaries observe them and answer -- followed by aggregation and the shared
update.

Determinism contract: every random draw comes from an :class:`~signvote.core.RngStream`
keyed by (seed, stream id).  Worker m uses stream id m and synthetic data
generation uses :data:`DATA_STREAM_ID`, so results depend on neither execution
order nor the ``parallel`` flag.
"""

from __future__ import annotations

import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .adversaries import (
    SGD_ONLY_STRATEGIES,
    SIGN_ONLY_STRATEGIES,
    STRATEGIES,
    AdversarySpec,
    blind_invert,
    byz_collude_signs,
    byz_inverse_sum,
    byz_oppose_true_sign,
)
from .core import RngStream, sum_signs
from .models import (
    Dataset,
    ModelSpec,
    accuracy,
    full_batch,
    generate_synthetic,
    grad,
    initial_params,
    load_idx,
    loss,
    sample_batch,
)
from .optimizers import (
    SIGN_RULES,
    OptimizerConfig,
    Schedule,
    WorkerState,
    apply_update,
    effective_eta,
    server_aggregate_sgd,
    server_aggregate_signs,
    worker_message,
)

__all__ = [
    "AdversaryConfig",
    "DATA_STREAM_ID",
    "INIT_STREAM_ID",
    "ExperimentConfig",
    "IdxData",
    "METRICS_HEADER",
    "RoundMetrics",
    "RunRecord",
    "SyntheticData",
    "byzantine_count",
    "config_from_mapping",
    "config_to_mapping",
    "load_data",
    "run_experiment",
    "run_sweep",
    "sweep_configs",
    "write_metrics_csv",
    "write_summary_json",
]

# reserved stream ids, far above any worker index
DATA_STREAM_ID = 2**32
INIT_STREAM_ID = 2**32 + 1


def byzantine_count(alpha: float, n_workers: int) -> int:
    """Adversarial worker count f = round(alpha * M), half rounding away from zero."""
    if not 0.0 <= alpha < 1.0:
        raise ValueError("alpha must lie in [0, 1)")
    return int(np.floor(alpha * n_workers + 0.5))


@dataclass(frozen=True)
class SyntheticData:
    """Synthetic dataset request; ``kind`` names the generating family."""

    kind: str
    input_dim: int
    n_samples: int
    noise_level: float = 0.0


@dataclass(frozen=True)
class IdxData:
    """Paths to a big-endian IDX image/label pair."""

    images_path: str
    labels_path: str


@dataclass(frozen=True)
class AdversaryConfig:
    strategy: str = "none"
    alpha: float = 0.0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}, expected one of {STRATEGIES}")
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError("alpha must lie in [0, 1)")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run needs; two configs with equal fields replay identically."""

    model: ModelSpec
    data: SyntheticData | IdxData
    optimizer: OptimizerConfig
    n_workers: int
    adversary: AdversaryConfig = field(default_factory=AdversaryConfig)
    n_rounds: int = 100
    seed: int = 0
    eval_every: int = 10
    p_estimate: float | None = None
    out_dir: str | None = None

    def __post_init__(self):
        if self.n_workers < 1:
            raise ValueError("n_workers must be >= 1")
        if self.n_rounds < 1:
            raise ValueError("n_rounds must be >= 1")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")
        f = byzantine_count(self.adversary.alpha, self.n_workers)
        if f > 0:
            strategy = self.adversary.strategy
            rule = self.optimizer.rule
            if strategy in SIGN_ONLY_STRATEGIES and rule not in SIGN_RULES:
                raise ValueError(f"strategy {strategy!r} requires a sign rule, got {rule!r}")
            if strategy in SGD_ONLY_STRATEGIES and rule != "dist-sgd":
                raise ValueError(f"strategy {strategy!r} requires rule 'dist-sgd', got {rule!r}")
        if self.p_estimate is not None:
            if not 0.0 < self.p_estimate <= 1.0:
                raise ValueError("p_estimate must lie in (0, 1]")
            edge = 1.0 - 1.0 / (2.0 * self.p_estimate)
            if self.adversary.alpha >= edge:
                warnings.warn(
                    f"alpha={self.adversary.alpha:g} is at or beyond the admissible "
                    f"fraction 1 - 1/(2p) = {edge:g} for p={self.p_estimate:g}; "
                    "the vote-failure guarantees do not apply",
                    stacklevel=2,
                )


@dataclass(frozen=True)
class RoundMetrics:
    """One recorded evaluation point.

    ``sign_agreement`` is the fraction of coordinates where the broadcast
    direction's sign matches the true full-batch gradient's sign, and
    ``zero_fraction`` the fraction of exactly-zero broadcast coordinates;
    both are NaN on the pre-update baseline row.  ``eval_accuracy`` is NaN
    for regression models.
    """

    step: int
    train_loss: float
    eval_accuracy: float
    effective_eta: float
    sign_agreement: float
    zero_fraction: float


@dataclass
class RunRecord:
    config: ExperimentConfig
    metrics: list[RoundMetrics]
    final_params: np.ndarray
    wall_time_s: float


def load_data(cfg: ExperimentConfig) -> Dataset:
    """Materialize the configured dataset (synthetic generation is seeded)."""
    if isinstance(cfg.data, IdxData):
        return load_idx(cfg.data.images_path, cfg.data.labels_path)
    data, _ = generate_synthetic(
        RngStream(cfg.seed, DATA_STREAM_ID),
        cfg.data.kind,
        cfg.data.input_dim,
        cfg.data.n_samples,
        cfg.data.noise_level,
    )
    return data


def run_experiment(cfg: ExperimentConfig, parallel: bool = False) -> RunRecord:
    """Execute the configured run and collect metrics every ``eval_every`` steps.

    ``parallel`` fans the first (honest) phase out over a thread pool; results
    are collected back in worker order, so the record is bit-identical to a
    sequential run.
    """
    t_start = time.perf_counter()
    data = load_data(cfg)
    spec, opt = cfg.model, cfg.optimizer
    dim = spec.param_dim
    n_workers = cfg.n_workers
    f = 0 if cfg.adversary.strategy == "none" else byzantine_count(cfg.adversary.alpha, n_workers)
    assignment = AdversarySpec(cfg.adversary.strategy if f > 0 else "none", f)
    strategy, f = assignment.strategy, assignment.byzantine_count
    sign_rule = opt.rule in SIGN_RULES

    x = initial_params(spec, RngStream(cfg.seed, INIT_STREAM_ID))
    streams = [RngStream(cfg.seed, m) for m in range(n_workers)]
    states = [WorkerState(dim) for _ in range(n_workers)]
    # phase-one workers: everyone for none/blind (blind workers see nothing and
    # flip only their own estimate); only the honest tail for omniscient attacks
    phase_one = range(n_workers) if strategy in ("none", "blind-invert") else range(f, n_workers)
    whole = full_batch(data)

    def evaluate(step: int, eta: float, agreement: float, zero_frac: float) -> RoundMetrics:
        acc = accuracy(spec, x, data) if spec.is_classification else float("nan")
        return RoundMetrics(step, loss(spec, x, data, whole), acc, eta, agreement, zero_frac)

    metrics = [evaluate(0, effective_eta(opt, 0), float("nan"), float("nan"))]
    executor = ThreadPoolExecutor(max_workers=max(1, len(phase_one))) if parallel else None
    try:
        for t in range(cfg.n_rounds):
            eval_now = (t + 1) % cfg.eval_every == 0 or t + 1 == cfg.n_rounds
            true_grad = None
            if eval_now or strategy == "byz-oppose-true-sign":
                true_grad = grad(spec, x, data, whole)

            def phase_one_message(m: int, x=x) -> np.ndarray:
                batch = sample_batch(streams[m], data.n_samples, opt.batch_size)
                g = grad(spec, x, data, batch)
                if strategy == "blind-invert" and m < f:
                    g = blind_invert(g)
                return worker_message(opt, states[m], g)

            if executor is not None:
                messages = list(executor.map(phase_one_message, phase_one))
            else:
                messages = [phase_one_message(m) for m in phase_one]

            if strategy == "byz-inverse-sum":
                messages += byz_inverse_sum(messages, f, dim=dim)
            elif strategy == "byz-oppose-true-sign":
                messages += byz_oppose_true_sign(true_grad, f)
            elif strategy in ("byz-collude-zeroing", "byz-collude-alternating"):
                honest_sum = sum_signs(messages) if messages else np.zeros(dim)
                variant = "zeroing" if strategy == "byz-collude-zeroing" else "alternating"
                byz_messages, _ = byz_collude_signs(honest_sum, f, variant)
                messages += byz_messages

            if sign_rule:
                direction = server_aggregate_signs(messages)
            else:
                direction = server_aggregate_sgd(messages)
            x = apply_update(opt, x, direction, t)

            if eval_now:
                dense = np.asarray(direction, dtype=np.float64)
                agreement = float(np.mean(np.sign(dense) == np.sign(true_grad)))
                zero_frac = float(np.mean(dense == 0.0))
                metrics.append(evaluate(t + 1, effective_eta(opt, t), agreement, zero_frac))
    finally:
        if executor is not None:
            executor.shutdown()

    return RunRecord(cfg, metrics, x, time.perf_counter() - t_start)


def sweep_configs(base: ExperimentConfig, alpha_grid, rule_grid):
    """Name/config pairs for every (alpha, rule) combination, row-major in alpha.

    Rules other than signum force beta to 0 (momentum is signum's defining
    feature); every other knob carries over from the base config.
    """
    alphas = list(alpha_grid)
    rules = list(rule_grid)
    if not alphas or not rules:
        raise ValueError("alpha and rule grids must be non-empty")
    pairs = []
    for alpha in alphas:
        for rule in rules:
            beta = base.optimizer.beta if rule == "signum" else 0.0
            cfg = replace(
                base,
                optimizer=replace(base.optimizer, rule=rule, beta=beta),
                adversary=replace(base.adversary, alpha=float(alpha)),
            )
            pairs.append((f"{rule}-alpha{float(alpha):g}", cfg))
    return pairs


def run_sweep(base: ExperimentConfig, alpha_grid, rule_grid,
              parallel: bool = False) -> list[RunRecord]:
    """One run per (alpha, rule) combination; see :func:`sweep_configs`."""
    return [run_experiment(cfg, parallel=parallel) for _, cfg in sweep_configs(base, alpha_grid, rule_grid)]


# -- artifacts -----------------------------------------------------------------

METRICS_HEADER = ("step", "loss", "accuracy", "eta", "sign_agreement", "zero_fraction")


def _fmt(value: float) -> str:
    """Shortest decimal that round-trips the float64 exactly."""
    return repr(float(value))


def write_metrics_csv(record: RunRecord, path) -> None:
    lines = [",".join(METRICS_HEADER)]
    for row in record.metrics:
        lines.append(",".join([
            str(row.step),
            _fmt(row.train_loss),
            _fmt(row.eval_accuracy),
            _fmt(row.effective_eta),
            _fmt(row.sign_agreement),
            _fmt(row.zero_fraction),
        ]))
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")


def write_summary_json(record: RunRecord, path) -> None:
    import json

    last = record.metrics[-1]
    payload = {
        "config": config_to_mapping(record.config),
        "final": {
            "step": last.step,
            "loss": last.train_loss,
            "accuracy": last.eval_accuracy,
            "sign_agreement": last.sign_agreement,
            "zero_fraction": last.zero_fraction,
        },
        "wall_time_s": record.wall_time_s,
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


# -- config <-> plain mapping ---------------------------------------------------


def config_to_mapping(cfg: ExperimentConfig) -> dict:
    """Flatten a config into the five-section mapping used by config files."""
    model = {"kind": cfg.model.kind, "input_dim": cfg.model.input_dim}
    if cfg.model.hidden_dim is not None:
        model["hidden_dim"] = cfg.model.hidden_dim
    if cfg.model.num_classes is not None:
        model["num_classes"] = cfg.model.num_classes
    if isinstance(cfg.data, IdxData):
        data = {"source": "idx", "images": cfg.data.images_path, "labels": cfg.data.labels_path}
    else:
        data = {
            "source": "synthetic",
            "kind": cfg.data.kind,
            "samples": cfg.data.n_samples,
            "noise_level": cfg.data.noise_level,
        }
    optimizer = {
        "rule": cfg.optimizer.rule,
        "eta": cfg.optimizer.eta,
        "beta": cfg.optimizer.beta,
        "weight_decay": cfg.optimizer.weight_decay,
        "batch_size": cfg.optimizer.batch_size,
        "decay_factor": cfg.optimizer.schedule.decay_factor,
        "decay_every": cfg.optimizer.schedule.decay_every,
    }
    adversary = {"strategy": cfg.adversary.strategy, "alpha": cfg.adversary.alpha}
    run = {
        "workers": cfg.n_workers,
        "rounds": cfg.n_rounds,
        "seed": cfg.seed,
        "eval_every": cfg.eval_every,
    }
    if cfg.p_estimate is not None:
        run["p_estimate"] = cfg.p_estimate
    if cfg.out_dir is not None:
        run["out"] = cfg.out_dir
    return {"model": model, "data": data, "optimizer": optimizer, "adversary": adversary, "run": run}


def _take(section: dict, key: str, convert, default=None, required=False):
    if key not in section:
        if required:
            raise ValueError(f"missing config key {key!r}")
        return default
    try:
        return convert(section[key])
    except (TypeError, ValueError) as exc:
        raise ValueError(f"bad value for config key {key!r}: {section[key]!r}") from exc


def config_from_mapping(mapping: dict) -> ExperimentConfig:
    """Build a validated config from the five-section mapping.

    Values may be strings (fresh from a config file) or already typed (from a
    summary-JSON echo); both parse identically, so echoed configs replay.
    """
    for name in ("model", "data", "optimizer", "run"):
        if name not in mapping:
            raise ValueError(f"missing config section [{name}]")
    msec = dict(mapping["model"])
    model = ModelSpec(
        kind=_take(msec, "kind", str, required=True),
        input_dim=_take(msec, "input_dim", int, required=True),
        hidden_dim=_take(msec, "hidden_dim", int),
        num_classes=_take(msec, "num_classes", int),
    )
    dsec = dict(mapping["data"])
    source = _take(dsec, "source", str, default="synthetic")
    if source == "idx":
        data = IdxData(
            images_path=_take(dsec, "images", str, required=True),
            labels_path=_take(dsec, "labels", str, required=True),
        )
    elif source == "synthetic":
        data = SyntheticData(
            kind=_take(dsec, "kind", str, default=model.kind),
            input_dim=model.input_dim,
            n_samples=_take(dsec, "samples", int, required=True),
            noise_level=_take(dsec, "noise_level", float, default=0.0),
        )
    else:
        raise ValueError(f"unknown data source {source!r} (expected 'synthetic' or 'idx')")
    osec = dict(mapping["optimizer"])
    optimizer = OptimizerConfig(
        rule=_take(osec, "rule", str, required=True),
        eta=_take(osec, "eta", float, required=True),
        beta=_take(osec, "beta", float, default=0.0),
        weight_decay=_take(osec, "weight_decay", float, default=0.0),
        batch_size=_take(osec, "batch_size", int, default=32),
        schedule=Schedule(
            decay_factor=_take(osec, "decay_factor", float, default=10.0),
            decay_every=_take(osec, "decay_every", int, default=30),
        ),
    )
    asec = dict(mapping.get("adversary", {}))
    adversary = AdversaryConfig(
        strategy=_take(asec, "strategy", str, default="none"),
        alpha=_take(asec, "alpha", float, default=0.0),
    )
    rsec = dict(mapping["run"])
    return ExperimentConfig(
        model=model,
        data=data,
        optimizer=optimizer,
        n_workers=_take(rsec, "workers", int, required=True),
        adversary=adversary,
        n_rounds=_take(rsec, "rounds", int, required=True),
        seed=_take(rsec, "seed", int, default=0),
        eval_every=_take(rsec, "eval_every", int, default=10),
        p_estimate=_take(rsec, "p_estimate", float),
        out_dir=_take(rsec, "out", str),
    )
