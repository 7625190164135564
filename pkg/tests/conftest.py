import numpy as np
import pytest

from gss_replay.model import Example, MlpModel
from gss_replay.streams import Dataset, load_digits_dataset


def make_examples(features, labels, start_index=0):
    return [
        Example(np.asarray(x, dtype=np.float64), int(y), start_index + i)
        for i, (x, y) in enumerate(zip(features, labels))
    ]


def make_dataset(n_per_class=12, n_classes=4, dim=6, seed=0, test_per_class=3, name="toy"):
    """Small separable dataset: class c lights up feature c % dim."""
    rng = np.random.default_rng(seed)

    def draw(count):
        labels = np.repeat(np.arange(n_classes), count)
        features = rng.uniform(0.0, 0.3, size=(labels.size, dim))
        features[np.arange(labels.size), labels % dim] += 0.7
        return features, labels.astype(np.int64)

    train_x, train_y = draw(n_per_class)
    test_x, test_y = draw(test_per_class)
    return Dataset(name, train_x, train_y, test_x, test_y, n_classes)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_model(rng):
    return MlpModel.initialize(5, 3, hidden_sizes=(7, 4), rng=rng)


@pytest.fixture
def toy_dataset():
    return make_dataset()


@pytest.fixture(scope="session")
def digits():
    return load_digits_dataset()
