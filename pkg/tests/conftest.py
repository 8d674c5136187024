import numpy as np
import pytest
import torch

from crater_xai.scenesim import generate_dataset, read_dataset


@pytest.fixture(scope="session", autouse=True)
def _determinism():
    torch.manual_seed(0)
    torch.set_num_threads(1)


@pytest.fixture(scope="session")
def small_dataset_dir(tmp_path_factory):
    """A rendered 2-trajectory x 5-frame dataset on disk."""
    out = tmp_path_factory.mktemp("ds")
    generate_dataset(out, seed=11, n_trajectories=2, n_frames=5,
                     area_m=3000.0, crater_count=2000, noise_sigma=2.0,
                     att_sigma_deg=0.5)
    return out


@pytest.fixture(scope="session")
def small_manifest(small_dataset_dir):
    return read_dataset(small_dataset_dir)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
