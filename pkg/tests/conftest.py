import numpy as np
import pytest

from pqbm.model import BMParameters, UnitLayout


def random_params(layout: UnitLayout, rng, scale: float = 1.0) -> BMParameters:
    """Random parameters on the trainable slots only."""
    d, n = layout.n_inputs, layout.n_units
    biases = np.zeros(n)
    weights = np.zeros((n, n))
    biases[d:] = rng.uniform(-scale, scale, size=layout.n_free)
    weights[:d, d:] = rng.uniform(-scale, scale, size=(d, layout.n_free))
    iu, ju = np.triu_indices(layout.n_free, k=1)
    weights[iu + d, ju + d] = rng.uniform(-scale, scale, size=iu.size)
    return BMParameters(layout, biases, weights)


def bars_and_stripes() -> tuple[np.ndarray, np.ndarray]:
    """4x4 binary images: constant-row patterns labelled 1, constant-column
    patterns labelled 0; the two ambiguous uniform images are excluded."""
    imgs, labels = [], []
    for bits in range(1, 15):
        row = np.array([(bits >> i) & 1 for i in range(4)], dtype=float)
        stripe = np.repeat(row[:, None], 4, axis=1)
        imgs.append(stripe.ravel())
        labels.append([1.0])
        imgs.append(stripe.T.ravel())
        labels.append([0.0])
    return np.array(imgs), np.array(labels)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
