"""Samplers for the free units of a reduced Boltzmann problem.

Three kinds share one contract: draw configurations whose distribution is
(exactly or approximately) proportional to exp(-E(s)/T) for the reduced
energy E and the problem's stored temperature T.

* ``exact``  - enumerate all states, sample from the exact table.
* ``gibbs``  - heat-bath sweeps; each unit is set to 1 with probability
               1 / (1 + exp(dE/T)) where dE = E(s_i=1) - E(s_i=0).
* ``sa``     - Metropolis single-flip sweeps along an inverse-temperature
               schedule; with a constant schedule at 1/T the chain targets
               the same distribution, with an increasing one it behaves
               like an annealer and concentrates on low-energy states.

All draws are vectorized over reads (and, via ``sample_batch``, over a
stack of problems sharing couplings).  Randomness comes from a single
generator seeded by the config; draws are consumed in a fixed array
order, so results are a deterministic function of (problem, config).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .model import ReducedBatch, ReducedProblem

ENUMERATION_LIMIT = 24

KINDS = ("exact", "gibbs", "sa")


def default_sa_schedule(temperature: float = 1.0, sweeps: int = 50) -> np.ndarray:
    """Geometric ramp from a hot start up to the target inverse temperature.

    Ending at beta = 1/T makes the final sweeps approximate equilibrium at
    T, which both the distribution-fidelity tests and training require;
    colder endpoints (annealer-style ground-state search) remain available
    by passing an explicit schedule.
    """
    return np.geomspace(0.1 / temperature, 1.0 / temperature, sweeps)


@dataclass(frozen=True)
class SamplerConfig:
    """How to draw: sampler kind, read count, chain settings, seed.

    ``temperature`` is the T used by training code when it builds the
    reduced problems it samples from; sampling itself always reads the
    reduced problem's stored temperature.  ``sa_schedule`` of None means
    the default geometric ramp.
    """

    kind: str = "sa"
    reads: int = 100
    sweeps: int = 50
    sa_schedule: tuple | None = None
    temperature: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.reads < 1:
            raise ValueError("reads must be >= 1")
        if self.sweeps < 1:
            raise ValueError("sweeps must be >= 1")
        if self.sa_schedule is not None:
            sched = tuple(float(b) for b in self.sa_schedule)
            if len(sched) == 0:
                raise ValueError("sa_schedule must be non-empty")
            if any(b <= 0 for b in sched):
                raise ValueError("sa_schedule entries must be positive")
            if any(b < a for a, b in zip(sched, sched[1:])):
                raise ValueError("sa_schedule must be non-decreasing")
            object.__setattr__(self, "sa_schedule", sched)
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")

    def schedule_for(self, temperature: float) -> np.ndarray:
        if self.sa_schedule is not None:
            return np.asarray(self.sa_schedule, dtype=float)
        return default_sa_schedule(temperature, self.sweeps)


@dataclass(frozen=True)
class SampleSet:
    """Multiset of binary configurations with per-state multiplicities."""

    states: np.ndarray   # (S, m) uint8
    counts: np.ndarray   # (S,) int64

    def __post_init__(self):
        st = np.ascontiguousarray(np.asarray(self.states, dtype=np.uint8))
        ct = np.ascontiguousarray(np.asarray(self.counts, dtype=np.int64))
        if st.ndim != 2 or ct.shape != (st.shape[0],):
            raise ValueError("states must be (S, m) with one count per state")
        if st.shape[0] == 0 or np.any(ct < 1):
            raise ValueError("sample set must contain at least one sample")
        st.setflags(write=False)
        ct.setflags(write=False)
        object.__setattr__(self, "states", st)
        object.__setattr__(self, "counts", ct)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def num_units(self) -> int:
        return self.states.shape[1]

    @classmethod
    def from_matrix(cls, raw: np.ndarray) -> "SampleSet":
        """Collapse a (reads, m) 0/1 matrix into unique states with counts."""
        states, counts = np.unique(
            np.asarray(raw, dtype=np.uint8), axis=0, return_counts=True
        )
        return cls(states, counts)

    def modal_state(self) -> np.ndarray:
        return self.states[int(np.argmax(self.counts))]

    def to_text(self) -> str:
        lines = [
            "".join(str(int(b)) for b in s) + f" {int(c)}"
            for s, c in zip(self.states, self.counts)
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "SampleSet":
        states, counts = [], []
        for line in text.strip().splitlines():
            bits, mult = line.split()
            states.append([int(ch) for ch in bits])
            counts.append(int(mult))
        return cls(np.asarray(states, dtype=np.uint8), np.asarray(counts))


def moments(ss: SampleSet) -> tuple[np.ndarray, np.ndarray]:
    """Sample averages <s_i> and <s_i s_j> (strictly upper triangular)."""
    w = ss.counts / ss.total
    s = ss.states.astype(float)
    first = w @ s
    second = np.triu((s * w[:, None]).T @ s, k=1)
    return first, second


def enumerate_states(m: int) -> np.ndarray:
    """All of {0,1}^m as a (2^m, m) table; unit i is bit i of the row index."""
    if m > ENUMERATION_LIMIT:
        raise ValueError(f"enumeration limited to {ENUMERATION_LIMIT} units, got {m}")
    idx = np.arange(2**m, dtype=np.uint32)
    return ((idx[:, None] >> np.arange(m)) & 1).astype(np.uint8)


def _as_batch(rp) -> ReducedBatch:
    if isinstance(rp, ReducedBatch):
        return rp
    return ReducedBatch(
        rp.linear[None, :], rp.couplings, np.array([rp.offset]), rp.temperature
    )


def exact_table_batch(batch: ReducedBatch) -> tuple[np.ndarray, np.ndarray]:
    """Exact Boltzmann tables for every problem in the stack.

    Returns (probs (P, 2^m), states (2^m, m)).  Probabilities are
    normalized per problem; offsets cancel and are ignored.
    """
    m = batch.num_free
    states = enumerate_states(m)
    s = states.astype(float)
    quad = np.einsum("si,ij,sj->s", s, batch.couplings, s)
    e = batch.linear @ s.T - quad[None, :]
    logits = -e / batch.temperature
    logits -= logits.max(axis=1, keepdims=True)
    probs = np.exp(logits)
    probs /= probs.sum(axis=1, keepdims=True)
    return probs, states


def exact_distribution(rp: ReducedProblem) -> np.ndarray:
    """Probability table over {0,1}^m indexed as in ``enumerate_states``."""
    probs, _ = exact_table_batch(_as_batch(rp))
    return probs[0]


def log_partition_batch(batch: ReducedBatch) -> np.ndarray:
    """log sum_s exp(-(E_p(s) + offset_p) / T) per stacked problem.

    Offsets are included so that ratios of partition functions across
    different clampings of the same model are meaningful.
    """
    m = batch.num_free
    states = enumerate_states(m).astype(float)
    quad = np.einsum("si,ij,sj->s", states, batch.couplings, states)
    e = batch.linear @ states.T - quad[None, :]
    logits = -(e + batch.offsets[:, None]) / batch.temperature
    mx = logits.max(axis=1, keepdims=True)
    return mx[:, 0] + np.log(np.exp(logits - mx).sum(axis=1))


def exact_marginals_batch(batch: ReducedBatch) -> np.ndarray:
    """Per-unit expectations <s_i> under the exact distribution, (P, m)."""
    probs, states = exact_table_batch(batch)
    return probs @ states.astype(float)


def exact_moments_batch(batch: ReducedBatch) -> tuple[np.ndarray, np.ndarray]:
    """Expectations <s_i> and <s_i s_j> under the exact distribution,
    per stacked problem: first (P, m), second (P, m, m) strictly upper."""
    probs, states = exact_table_batch(batch)
    s = states.astype(float)
    first = probs @ s
    second = np.einsum("ps,si,sj->pij", probs, s, s)
    iu = np.tril_indices(batch.num_free)
    second[:, iu[0], iu[1]] = 0.0
    return first, second


def _draw_exact(batch: ReducedBatch, config: SamplerConfig) -> np.ndarray:
    probs, states = exact_table_batch(batch)
    rng = np.random.default_rng(config.seed)
    out = np.empty((batch.num_problems, config.reads, batch.num_free), dtype=np.uint8)
    for p in range(batch.num_problems):
        picks = rng.choice(probs.shape[1], size=config.reads, p=probs[p])
        out[p] = states[picks]
    return out


def _chain_fields(lin_rows, s, w_sym, i):
    # dE for flipping unit i on to 1: b_eff_i - sum_m W~_im s_m
    return lin_rows[:, i] - s @ w_sym[:, i]


def _draw_gibbs(batch: ReducedBatch, config: SamplerConfig) -> np.ndarray:
    p_count, m = batch.num_problems, batch.num_free
    t = batch.temperature
    w_sym = batch.couplings + batch.couplings.T
    lin_rows = np.repeat(batch.linear, config.reads, axis=0)
    rng = np.random.default_rng(config.seed)
    s = rng.integers(0, 2, size=lin_rows.shape).astype(float)
    for _ in range(config.sweeps):
        u = rng.random(size=lin_rows.shape)
        for i in range(m):
            de = _chain_fields(lin_rows, s, w_sym, i)
            p_one = 1.0 / (1.0 + np.exp(np.clip(de / t, -700.0, 700.0)))
            s[:, i] = u[:, i] < p_one
    return s.astype(np.uint8).reshape(p_count, config.reads, m)


def _draw_sa(batch: ReducedBatch, config: SamplerConfig) -> np.ndarray:
    p_count, m = batch.num_problems, batch.num_free
    schedule = config.schedule_for(batch.temperature)
    w_sym = batch.couplings + batch.couplings.T
    lin_rows = np.repeat(batch.linear, config.reads, axis=0)
    rng = np.random.default_rng(config.seed)
    s = rng.integers(0, 2, size=lin_rows.shape).astype(float)
    for beta in schedule:
        u = rng.random(size=lin_rows.shape)
        for i in range(m):
            de = (1.0 - 2.0 * s[:, i]) * _chain_fields(lin_rows, s, w_sym, i)
            accept = u[:, i] < np.exp(-beta * np.maximum(de, 0.0))
            s[:, i] = np.where(accept, 1.0 - s[:, i], s[:, i])
    return s.astype(np.uint8).reshape(p_count, config.reads, m)


_DRAWERS = {"exact": _draw_exact, "gibbs": _draw_gibbs, "sa": _draw_sa}


def sample_batch(batch: ReducedBatch, config: SamplerConfig) -> list[SampleSet]:
    """Draw ``config.reads`` configurations for every stacked problem."""
    raw = _DRAWERS[config.kind](batch, config)
    return [SampleSet.from_matrix(raw[p]) for p in range(batch.num_problems)]


def sample(rp: ReducedProblem, config: SamplerConfig) -> SampleSet:
    return sample_batch(_as_batch(rp), config)[0]


def exact_sample(rp: ReducedProblem, config: SamplerConfig) -> SampleSet:
    """I.i.d. draws from the exact table (inverse-transform sampling)."""
    return sample_batch(_as_batch(rp), replace(config, kind="exact"))[0]


def gibbs_sample(rp: ReducedProblem, config: SamplerConfig) -> SampleSet:
    """Random initial state, then ``config.sweeps`` full heat-bath passes
    per read; the chain's stationary law is the exact distribution."""
    return sample_batch(_as_batch(rp), replace(config, kind="gibbs"))[0]


def sa_sample(rp: ReducedProblem, config: SamplerConfig) -> SampleSet:
    """One Metropolis sweep per schedule entry; the final state of each
    read is recorded."""
    return sample_batch(_as_batch(rp), replace(config, kind="sa"))[0]
