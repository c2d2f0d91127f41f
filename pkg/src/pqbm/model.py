"""Fully connected Boltzmann machine over input, hidden and label units.

The energy of a configuration ``s`` in ``{0,1}^n`` is

    E(s) = sum_i b_i * s_i  -  sum_{i<j} W_ij * s_i * s_j

Note the sign split: biases enter with a plus, pairwise weights with a
minus.  Every downstream quantity (reductions, samplers, gradients) is
derived from this convention; do not mix in the opposite one.

Units are indexed input block first, then hidden, then label units.
Input units carry no biases and no input-input weights: clamping folds
them into effective biases on the free units, so they are never
represented as variables.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

PARAMS_MAGIC = b"PBM1"


@dataclass(frozen=True)
class UnitLayout:
    """Unit counts of the network: inputs, hidden, labels."""

    n_inputs: int
    n_hidden: int
    n_labels: int = 1

    def __post_init__(self):
        if self.n_inputs < 0:
            raise ValueError(f"n_inputs must be >= 0, got {self.n_inputs}")
        if self.n_hidden < 1:
            raise ValueError(f"n_hidden must be >= 1, got {self.n_hidden}")
        if self.n_labels < 1:
            raise ValueError(f"n_labels must be >= 1, got {self.n_labels}")

    @property
    def n_units(self) -> int:
        return self.n_inputs + self.n_hidden + self.n_labels

    @property
    def n_free(self) -> int:
        """Units that remain variables when inputs are clamped."""
        return self.n_hidden + self.n_labels

    @property
    def input_slice(self) -> slice:
        return slice(0, self.n_inputs)

    @property
    def hidden_slice(self) -> slice:
        return slice(self.n_inputs, self.n_inputs + self.n_hidden)

    @property
    def label_slice(self) -> slice:
        return slice(self.n_inputs + self.n_hidden, self.n_units)

    @property
    def free_slice(self) -> slice:
        return slice(self.n_inputs, self.n_units)


def parameter_count(layout: UnitLayout) -> int:
    """Number of trainable reals: input-to-free weights, free-free weights,
    and biases of the free units.  Input biases and input-input weights do
    not exist in this model."""
    f = layout.n_free
    return layout.n_inputs * f + f * (f - 1) // 2 + f


def _as_readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True, order="C")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class BMParameters:
    """Biases and strictly-upper-triangular weights of the full network.

    ``biases`` has length n with the input block structurally zero;
    ``weights`` is (n, n) with entries only at i < j and a zero
    input-input block.  Instances are immutable; updates construct new
    objects.
    """

    layout: UnitLayout
    biases: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        n = self.layout.n_units
        b = _as_readonly(self.biases)
        w = _as_readonly(self.weights)
        if b.shape != (n,):
            raise ValueError(f"biases must have shape ({n},), got {b.shape}")
        if w.shape != (n, n):
            raise ValueError(f"weights must have shape ({n}, {n}), got {w.shape}")
        if np.any(np.tril(w) != 0.0):
            raise ValueError("weights must be strictly upper triangular")
        d = self.layout.n_inputs
        if np.any(b[:d] != 0.0):
            raise ValueError("input units carry no biases")
        if np.any(w[:d, :d] != 0.0):
            raise ValueError("input-input weights do not exist in this model")
        object.__setattr__(self, "biases", b)
        object.__setattr__(self, "weights", w)

    def symmetric_weights(self) -> np.ndarray:
        """Symmetric view W~ with W~[i, j] = W[min, max]."""
        return self.weights + self.weights.T


def init_params(layout: UnitLayout, seed: int) -> BMParameters:
    """All trainable parameters drawn independently from U[-1, 1].

    Draw order (fixed for reproducibility): free biases, input-to-free
    weights row-major, free-free upper triangle row-major.
    """
    rng = np.random.default_rng(seed)
    d, f, n = layout.n_inputs, layout.n_free, layout.n_units
    biases = np.zeros(n)
    weights = np.zeros((n, n))
    biases[d:] = rng.uniform(-1.0, 1.0, size=f)
    weights[:d, d:] = rng.uniform(-1.0, 1.0, size=(d, f))
    iu, ju = np.triu_indices(f, k=1)
    weights[iu + d, ju + d] = rng.uniform(-1.0, 1.0, size=iu.size)
    return BMParameters(layout, biases, weights)


def energy(state: np.ndarray, params: BMParameters) -> float:
    """E(s) per the module convention.  ``state`` is a single length-n
    bit vector."""
    s = np.asarray(state, dtype=float)
    if s.shape != (params.layout.n_units,):
        raise ValueError(
            f"state must have length {params.layout.n_units}, got shape {s.shape}"
        )
    return float(params.biases @ s - s @ params.weights @ s)


def energies(states: np.ndarray, params: BMParameters) -> np.ndarray:
    """Vectorized ``energy`` over rows of ``states`` (N, n)."""
    s = np.asarray(states, dtype=float)
    return s @ params.biases - np.einsum("ni,ij,nj->n", s, params.weights, s)


@dataclass(frozen=True)
class ReducedProblem:
    """Energy function over the free units after clamping.

    ``linear`` are the effective biases, ``couplings`` the restriction of
    W to free units (strictly upper triangular), ``offset`` the constant
    energy contributed by clamped-clamped terms.  ``energies`` excludes
    the offset; full-model energy = reduced energy + offset.
    """

    linear: np.ndarray
    couplings: np.ndarray
    offset: float
    temperature: float = 1.0

    def __post_init__(self):
        lin = _as_readonly(self.linear)
        cpl = _as_readonly(self.couplings)
        m = lin.shape[0]
        if lin.ndim != 1 or m < 1:
            raise ValueError("linear must be a non-empty vector")
        if cpl.shape != (m, m):
            raise ValueError(f"couplings must have shape ({m}, {m})")
        if np.any(np.tril(cpl) != 0.0):
            raise ValueError("couplings must be strictly upper triangular")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")
        object.__setattr__(self, "linear", lin)
        object.__setattr__(self, "couplings", cpl)

    @property
    def num_free(self) -> int:
        return self.linear.shape[0]

    def energies(self, states: np.ndarray) -> np.ndarray:
        s = np.atleast_2d(np.asarray(states, dtype=float))
        return s @ self.linear - np.einsum("ni,ij,nj->n", s, self.couplings, s)


@dataclass(frozen=True)
class ReducedBatch:
    """A stack of reduced problems sharing couplings and temperature.

    One clamping phase over a mini-batch yields problems that differ only
    in their effective biases (and offsets); stacking them lets samplers
    vectorize across the batch.
    """

    linear: np.ndarray      # (P, m)
    couplings: np.ndarray   # (m, m) strictly upper triangular, shared
    offsets: np.ndarray     # (P,)
    temperature: float = 1.0

    def __post_init__(self):
        lin = _as_readonly(self.linear)
        cpl = _as_readonly(self.couplings)
        off = _as_readonly(self.offsets)
        if lin.ndim != 2:
            raise ValueError("linear must be (P, m)")
        if off.shape != (lin.shape[0],):
            raise ValueError("offsets must have one entry per problem")
        if cpl.shape != (lin.shape[1], lin.shape[1]):
            raise ValueError("couplings shape mismatch")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")
        object.__setattr__(self, "linear", lin)
        object.__setattr__(self, "couplings", cpl)
        object.__setattr__(self, "offsets", off)

    @property
    def num_problems(self) -> int:
        return self.linear.shape[0]

    @property
    def num_free(self) -> int:
        return self.linear.shape[1]

    def problem(self, i: int) -> ReducedProblem:
        return ReducedProblem(
            self.linear[i], self.couplings, float(self.offsets[i]), self.temperature
        )


def clamp_inputs_batch(
    params: BMParameters, inputs: np.ndarray, temperature: float = 1.0
) -> ReducedBatch:
    """Clamp the input units of every row of ``inputs`` (P, n_inputs).

    Free units are hidden + label.  The effective bias of free unit i is
    b_i - sum_k W_ki v_k: the minus is forced by the module's energy
    convention (pair terms enter E with a minus), so that the reduced
    distribution is exactly the full model's conditional.  There are no
    clamped-clamped terms, so offsets are zero.
    """
    lay = params.layout
    v = np.atleast_2d(np.asarray(inputs, dtype=float))
    if v.shape[1] != lay.n_inputs:
        raise ValueError(f"inputs must have {lay.n_inputs} columns, got {v.shape[1]}")
    free = lay.free_slice
    lin = params.biases[free][None, :] - v @ params.weights[lay.input_slice, free]
    cpl = params.weights[free, free]
    return ReducedBatch(lin, cpl, np.zeros(v.shape[0]), temperature)


def clamp_visible_batch(
    params: BMParameters,
    inputs: np.ndarray,
    labels: np.ndarray,
    temperature: float = 1.0,
) -> ReducedBatch:
    """Clamp inputs and labels; only the hidden units stay free.

    Clamped label units act on the hidden biases exactly as inputs do,
    and their bias/pair terms among themselves land in the offset so
    that reduced + offset reproduces the full-model energy.
    """
    lay = params.layout
    v = np.atleast_2d(np.asarray(inputs, dtype=float))
    l = np.atleast_2d(np.asarray(labels, dtype=float))
    if v.shape[1] != lay.n_inputs:
        raise ValueError(f"inputs must have {lay.n_inputs} columns, got {v.shape[1]}")
    if l.shape[1] != lay.n_labels:
        raise ValueError(f"labels must have {lay.n_labels} columns, got {l.shape[1]}")
    if l.shape[0] != v.shape[0]:
        raise ValueError("inputs and labels must have the same number of rows")
    hid, lab = lay.hidden_slice, lay.label_slice
    lin = (
        params.biases[hid][None, :]
        - v @ params.weights[lay.input_slice, hid]
        - l @ params.weights[hid, lab].T
    )
    cpl = params.weights[hid, hid]
    w_lab = params.weights[lab, lab]
    offsets = (
        l @ params.biases[lab]
        - np.einsum("pk,kl,pl->p", v, params.weights[lay.input_slice, lab], l)
        - np.einsum("pk,kl,pl->p", l, w_lab, l)
    )
    return ReducedBatch(lin, cpl, offsets, temperature)


def clamp_inputs(
    params: BMParameters, input_values: np.ndarray, temperature: float = 1.0
) -> ReducedProblem:
    """Single-point form of :func:`clamp_inputs_batch`."""
    return clamp_inputs_batch(params, np.atleast_2d(input_values), temperature).problem(0)


def clamp_inputs_and_label(
    params: BMParameters,
    input_values: np.ndarray,
    label_values: np.ndarray,
    temperature: float = 1.0,
) -> ReducedProblem:
    """Single-point form of :func:`clamp_visible_batch`."""
    return clamp_visible_batch(
        params, np.atleast_2d(input_values), np.atleast_2d(label_values), temperature
    ).problem(0)


@dataclass(frozen=True)
class EncodedDataPoint:
    """One encoded sample: real-valued input vector in [0,1] plus bit labels."""

    input_values: np.ndarray
    label_values: np.ndarray

    def __post_init__(self):
        v = _as_readonly(self.input_values)
        l = _as_readonly(self.label_values)
        if v.ndim != 1 or l.ndim != 1:
            raise ValueError("input and label values must be vectors")
        if np.any(v < 0.0) or np.any(v > 1.0):
            raise ValueError("input values must lie in [0, 1]")
        if not np.all(np.isin(l, (0.0, 1.0))):
            raise ValueError("label values must be bits")
        object.__setattr__(self, "input_values", v)
        object.__setattr__(self, "label_values", l)


def _check_pair_keys(quadratic) -> None:
    for i, j in quadratic:
        if not i < j:
            raise ValueError(f"pair keys must be ordered i < j, got ({i}, {j})")


@dataclass(frozen=True)
class QuboProblem:
    """Quadratic model over binary variables: sum a_i x_i + sum q_ij x_i x_j + offset."""

    linear: dict
    quadratic: dict
    offset: float = 0.0

    def __post_init__(self):
        _check_pair_keys(self.quadratic)

    def variables(self) -> list:
        seen = dict.fromkeys(self.linear)
        for i, j in self.quadratic:
            seen.setdefault(i)
            seen.setdefault(j)
        return list(seen)

    def energy(self, assignment) -> float:
        e = self.offset
        for i, a in self.linear.items():
            e += a * assignment[i]
        for (i, j), q in self.quadratic.items():
            e += q * assignment[i] * assignment[j]
        return e


@dataclass(frozen=True)
class IsingProblem:
    """Quadratic model over spins in {-1,+1}: sum h_i s_i + sum J_ij s_i s_j + offset."""

    h: dict
    j: dict
    offset: float = 0.0

    def __post_init__(self):
        _check_pair_keys(self.j)

    def variables(self) -> list:
        seen = dict.fromkeys(self.h)
        for a, b in self.j:
            seen.setdefault(a)
            seen.setdefault(b)
        return list(seen)

    def energy(self, spins) -> float:
        e = self.offset
        for i, hi in self.h.items():
            e += hi * spins[i]
        for (i, j), jij in self.j.items():
            e += jij * spins[i] * spins[j]
        return e


def to_qubo(rp: ReducedProblem) -> QuboProblem:
    """QUBO with the same energy landscape as the reduced problem.

    Linear terms are the effective biases; the coupling sign flips
    because the model subtracts pair terms while a QUBO adds them.
    """
    linear = {i: float(rp.linear[i]) for i in range(rp.num_free)}
    quadratic = {}
    iu, ju = np.nonzero(rp.couplings)
    for i, j in zip(iu.tolist(), ju.tolist()):
        quadratic[(i, j)] = -float(rp.couplings[i, j])
    return QuboProblem(linear, quadratic, float(rp.offset))


def qubo_to_ising(q: QuboProblem) -> IsingProblem:
    """Change of variables x = (s + 1) / 2; energies agree state by state."""
    h = {i: a / 2.0 for i, a in q.linear.items()}
    j = {}
    offset = q.offset + sum(q.linear.values()) / 2.0
    for (a, b), qab in q.quadratic.items():
        if qab == 0.0:
            continue
        j[(a, b)] = qab / 4.0
        h[a] = h.get(a, 0.0) + qab / 4.0
        h[b] = h.get(b, 0.0) + qab / 4.0
        offset += qab / 4.0
    return IsingProblem(h, j, offset)


def save_params(params: BMParameters, path) -> None:
    """Flat binary record: magic, layout as three u32-LE, biases, then the
    row-major upper triangle of the weights, all float64-LE."""
    lay = params.layout
    n = lay.n_units
    iu, ju = np.triu_indices(n, k=1)
    with open(path, "wb") as fh:
        fh.write(PARAMS_MAGIC)
        fh.write(struct.pack("<III", lay.n_inputs, lay.n_hidden, lay.n_labels))
        fh.write(params.biases.astype("<f8").tobytes())
        fh.write(params.weights[iu, ju].astype("<f8").tobytes())


def load_params(path) -> BMParameters:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != PARAMS_MAGIC:
        raise ValueError(f"bad magic {blob[:4]!r}, expected {PARAMS_MAGIC!r}")
    if len(blob) < 16:
        raise ValueError("truncated parameter file header")
    d, nh, nl = struct.unpack("<III", blob[4:16])
    layout = UnitLayout(d, nh, nl)
    n = layout.n_units
    expected = 16 + 8 * n + 8 * (n * (n - 1) // 2)
    if len(blob) != expected:
        raise ValueError(f"parameter file has {len(blob)} bytes, expected {expected}")
    biases = np.frombuffer(blob, dtype="<f8", count=n, offset=16).astype(float)
    tri = np.frombuffer(blob, dtype="<f8", count=n * (n - 1) // 2, offset=16 + 8 * n)
    weights = np.zeros((n, n))
    iu, ju = np.triu_indices(n, k=1)
    weights[iu, ju] = tri
    return BMParameters(layout, biases, weights)
