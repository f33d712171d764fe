"""Shared fixtures: canonical phantoms and their preprocessing products."""
import numpy as np
import pytest

from tumorseg import phantom, preprocess


@pytest.fixture(scope="session")
def lesion_phantom():
    """Standard noisy lesion phantom (seed 1) with both truth masks."""
    image, head_truth, lesion_truth = phantom.generate(phantom.standard_lesion_spec(seed=1))
    return image, head_truth, lesion_truth


@pytest.fixture(scope="session")
def symmetric_phantom():
    """Noise-free, perfectly mirror-symmetric phantom."""
    image, head_truth, lesion_truth = phantom.generate(phantom.symmetric_spec())
    return image, head_truth, lesion_truth


@pytest.fixture(scope="session")
def smoothed_lesion(lesion_phantom):
    """Skull-stripped and diffused standard phantom, plus the head mask."""
    image, _, _ = lesion_phantom
    head = preprocess.skull_strip(image)
    smoothed = preprocess.diffuse(head.stripped, preprocess.DiffusionParams())
    return smoothed, head


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
