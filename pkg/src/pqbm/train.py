"""Discriminative training of the Boltzmann machine.

Each update contrasts two sampling phases per data point: the positive
phase clamps inputs and labels (hidden units free), the negative phase
clamps only the inputs (hidden and label units free).  The gradient is
the exact ascent direction of the conditional label likelihood under the
model's energy convention:

    g_b  = -(<s>_pos  - <s>_neg ) / T
    g_W  = +(<ss>_pos - <ss>_neg) / T

so that ``params + lr * g`` decreases the negative log-likelihood.  The
bias component's sign follows from the energy carrying ``+b`` while pair
terms carry ``-W``; deriving both from the energy function keeps the
sampled gradient equal to the true NLL gradient, which the tests pin by
finite differences.

Sampling within a mini-batch is stacked: one kernel call per phase
handles every point at once.  Seeds are derived per (seed, epoch, batch,
phase), so runs are reproducible regardless of execution order.
"""

from __future__ import annotations

import csv
import zlib
from dataclasses import dataclass, field, replace

import numpy as np

from .metrics import accuracy_score, auc_score
from .model import (
    BMParameters,
    EncodedDataPoint,
    ReducedBatch,
    clamp_inputs_batch,
    clamp_visible_batch,
)
from .samplers import (
    ENUMERATION_LIMIT,
    SampleSet,
    SamplerConfig,
    exact_marginals_batch,
    exact_moments_batch,
    log_partition_batch,
    moments,
    sample_batch,
)

POSITIVE, NEGATIVE = "positive", "negative"


def derive_seed(*parts) -> int:
    """Stable child seed from mixed int/str context parts."""
    ints = [
        zlib.crc32(p.encode()) if isinstance(p, str) else int(p) & 0xFFFFFFFF
        for p in parts
    ]
    return int(np.random.SeedSequence(ints).generate_state(1)[0])


@dataclass(frozen=True)
class TrainConfig:
    """Optimization settings; sampling settings live in ``sampler``."""

    learning_rate: float = 0.45295
    batch_size: int = 73
    epochs: int = 20
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


@dataclass(frozen=True)
class Gradient:
    """Ascent direction with the same array shapes as the parameters."""

    db: np.ndarray
    dW: np.ndarray


def _as_arrays(batch) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(batch, tuple):
        inputs, labels = batch
        return np.atleast_2d(np.asarray(inputs, float)), np.atleast_2d(
            np.asarray(labels, float)
        )
    inputs = np.stack([dp.input_values for dp in batch])
    labels = np.stack([dp.label_values for dp in batch])
    return inputs, labels


def _stack_sampled_moments(sets: list[SampleSet]) -> tuple[np.ndarray, np.ndarray]:
    firsts, seconds = zip(*(moments(ss) for ss in sets))
    return np.stack(firsts), np.stack(seconds)


def _batch_moments(batch: ReducedBatch, cfg: SamplerConfig, seed: int):
    if cfg.kind == "exact":
        return exact_moments_batch(batch)
    return _stack_sampled_moments(sample_batch(batch, replace(cfg, seed=seed)))


def _positive_moments(params, inputs, labels, cfg, seed):
    """Moments over the non-input units with labels clamped: hidden moments
    come from sampling, label coordinates carry their clamped values."""
    lay = params.layout
    h1, h2 = _batch_moments(
        clamp_visible_batch(params, inputs, labels, cfg.temperature), cfg, seed
    )
    p, nh, f = inputs.shape[0], lay.n_hidden, lay.n_free
    first = np.empty((p, f))
    first[:, :nh] = h1
    first[:, nh:] = labels
    second = np.zeros((p, f, f))
    second[:, :nh, :nh] = h2
    second[:, :nh, nh:] = h1[:, :, None] * labels[:, None, :]
    second[:, nh:, nh:] = np.triu(labels[:, :, None] * labels[:, None, :], k=1)
    return first, second


def _negative_moments(params, inputs, cfg, seed):
    return _batch_moments(
        clamp_inputs_batch(params, inputs, cfg.temperature), cfg, seed
    )


def phase_moments(
    params: BMParameters,
    dp: EncodedDataPoint,
    phase: str,
    sampler: SamplerConfig,
    seed: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """First and second moments of one phase for one data point, indexed
    over the non-input units in model order (hidden block, then labels)."""
    seed = sampler.seed if seed is None else seed
    v = dp.input_values[None, :]
    if phase == POSITIVE:
        first, second = _positive_moments(
            params, v, dp.label_values[None, :], sampler, seed
        )
    elif phase == NEGATIVE:
        first, second = _negative_moments(params, v, sampler, seed)
    else:
        raise ValueError(f"phase must be {POSITIVE!r} or {NEGATIVE!r}, got {phase!r}")
    return first[0], second[0]


def compute_gradient(
    params: BMParameters,
    batch,
    sampler: SamplerConfig,
    seed: int | None = None,
) -> Gradient:
    """Batch-averaged likelihood-ascent direction from the two phases."""
    inputs, labels = _as_arrays(batch)
    if inputs.shape[0] == 0:
        raise ValueError("gradient of an empty batch is undefined")
    seed = sampler.seed if seed is None else seed
    p1, p2 = _positive_moments(params, inputs, labels, sampler, derive_seed(seed, 0))
    n1, n2 = _negative_moments(params, inputs, sampler, derive_seed(seed, 1))
    return assemble_gradient(params, inputs, p1 - n1, p2 - n2, sampler.temperature)


def assemble_gradient(
    params: BMParameters,
    inputs: np.ndarray,
    delta_first: np.ndarray,
    delta_second: np.ndarray,
    temperature: float,
) -> Gradient:
    """Turn per-point moment differences (positive minus negative) into a
    gradient over the stored parameter slots."""
    lay = params.layout
    d, n = lay.n_inputs, lay.n_units
    p = inputs.shape[0]
    db = np.zeros(n)
    dw = np.zeros((n, n))
    db[d:] = -delta_first.mean(axis=0) / temperature
    dw[d:, d:] = delta_second.mean(axis=0) / temperature
    dw[:d, d:] = np.einsum("pi,pk->ki", delta_first, inputs) / (p * temperature)
    return Gradient(db, dw)


def apply_update(
    params: BMParameters, g: Gradient, learning_rate: float
) -> BMParameters:
    if g.db.shape != params.biases.shape or g.dW.shape != params.weights.shape:
        raise ValueError("gradient shape does not match parameters")
    return BMParameters(
        params.layout,
        params.biases + learning_rate * g.db,
        params.weights + learning_rate * g.dW,
    )


def nll(params: BMParameters, inputs, labels, temperature: float = 1.0) -> float:
    """Exact negative log-likelihood of the labels given the inputs,
    summed over the data set.  Requires enumerable free space."""
    if params.layout.n_free > ENUMERATION_LIMIT:
        raise ValueError(
            f"exact NLL needs n_hidden + n_labels <= {ENUMERATION_LIMIT}"
        )
    inputs, labels = _as_arrays((inputs, labels))
    neg = clamp_inputs_batch(params, inputs, temperature)
    pos = clamp_visible_batch(params, inputs, labels, temperature)
    return float(np.sum(log_partition_batch(neg) - log_partition_batch(pos)))


def predict_scores(
    params: BMParameters,
    inputs: np.ndarray,
    sampler: SamplerConfig,
    seed: int | None = None,
) -> np.ndarray:
    """Per-input probability that the label unit is on, from the negative
    phase.  The exact sampler returns the true conditional; the chain
    samplers return the empirical label-unit frequency."""
    if params.layout.n_labels != 1:
        raise ValueError("prediction requires exactly one label unit")
    inputs = np.atleast_2d(np.asarray(inputs, float))
    batch = clamp_inputs_batch(params, inputs, sampler.temperature)
    if sampler.kind == "exact":
        return exact_marginals_batch(batch)[:, -1]
    seed = sampler.seed if seed is None else seed
    sets = sample_batch(batch, replace(sampler, seed=seed))
    return np.array(
        [float(ss.counts @ ss.states[:, -1]) / ss.total for ss in sets]
    )


def predict(
    params: BMParameters,
    input_values: np.ndarray,
    sampler: SamplerConfig,
    seed: int | None = None,
) -> tuple[int, float]:
    """Label (threshold 0.5, ties toward 1) and its score for one input."""
    score = float(predict_scores(params, input_values[None, :], sampler, seed)[0])
    return int(score >= 0.5), score


def evaluate(
    params: BMParameters,
    inputs: np.ndarray,
    labels: np.ndarray,
    sampler: SamplerConfig,
    seed: int | None = None,
) -> tuple[float, float]:
    """(accuracy, AUC) on a labelled set; scores double as the AUC ranking."""
    scores = predict_scores(params, inputs, sampler, seed)
    truth = np.asarray(labels).reshape(-1).astype(int)
    acc = accuracy_score(truth, (scores >= 0.5).astype(int))
    return acc, auc_score(truth, scores)


def train(
    params: BMParameters,
    inputs: np.ndarray,
    labels: np.ndarray,
    config: TrainConfig,
    eval_sets: dict[str, tuple[np.ndarray, np.ndarray]] | None = None,
    eval_each_epoch: bool = True,
    track_nll: bool = False,
    log=None,
) -> tuple[BMParameters, list[dict]]:
    """Mini-batch training loop, deterministic for a fixed config.

    Per epoch: seeded shuffle, one update per batch (final partial batch
    included), then optional evaluation of every named eval set.  The
    trace holds one row per (epoch, split) with acc/auc and, when
    ``track_nll`` on an enumerable layout, the train-set NLL.
    """
    inputs, labels = _as_arrays((inputs, labels))
    n = inputs.shape[0]
    trace: list[dict] = []
    for epoch in range(config.epochs):
        order = np.random.default_rng(
            np.random.SeedSequence([config.seed & 0xFFFFFFFF, epoch])
        ).permutation(n)
        for b, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start : start + config.batch_size]
            g = compute_gradient(
                params,
                (inputs[idx], labels[idx]),
                config.sampler,
                seed=derive_seed(config.seed, "batch", epoch, b),
            )
            params = apply_update(params, g, config.learning_rate)
        if eval_each_epoch and eval_sets:
            for split, (ev_x, ev_y) in eval_sets.items():
                acc, auc = evaluate(
                    params,
                    ev_x,
                    ev_y,
                    config.sampler,
                    seed=derive_seed(config.seed, "eval", epoch, split),
                )
                row = {"epoch": epoch, "split": split, "acc": acc, "auc": auc}
                if track_nll:
                    row["nll"] = nll(params, inputs, labels, config.sampler.temperature)
                trace.append(row)
                if log is not None:
                    log(f"epoch {epoch} {split}: acc={acc:.4f} auc={auc:.4f}")
    return params, trace


def write_trace_csv(trace: list[dict], path) -> None:
    """CSV columns: epoch, split, acc, auc, nll (blank when untracked)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "split", "acc", "auc", "nll"])
        for row in trace:
            writer.writerow(
                [row["epoch"], row["split"], f"{row['acc']:.6f}", f"{row['auc']:.6f}",
                 "" if row.get("nll") is None else f"{row['nll']:.6f}"]
            )
