import numpy as np
import pytest

from iaq.model import Budget, ImageTensor, ImportanceMap, side_info_bits


@pytest.fixture
def rng():
    return np.random.default_rng(20240813)


def random_image(rng, height=32, width=32, channels=1, lo=0.0, hi=255.0):
    return ImageTensor(rng.uniform(lo, hi, (height, width, channels)))


def bimodal_map(rng, n_patches, object_fraction=0.25):
    """Synthetic importance map: a few high-score 'object' patches, low background."""
    n_obj = max(1, int(n_patches * object_fraction))
    scores = np.concatenate(
        [rng.uniform(0.5, 1.0, n_obj), rng.uniform(0.0, 0.1, n_patches - n_obj)]
    )
    rng.shuffle(scores)
    return ImportanceMap.from_raw(scores)


def budget_for_increments(n_patches, pixels_per_patch, m_max, increments, slack=0):
    """Budget granting exactly `increments` patch-bits plus `slack` extra bits."""
    b_add = side_info_bits(n_patches, m_max)
    return Budget(
        b_target=b_add + increments * pixels_per_patch + slack,
        m_max=m_max,
        n_patches=n_patches,
        pixels_per_patch=pixels_per_patch,
    )


@pytest.fixture
def make_image():
    return random_image


@pytest.fixture
def make_map():
    return bimodal_map


@pytest.fixture
def make_budget():
    return budget_for_increments
