import numpy as np
import pytest

from freqface.dataset import prepare_data
from freqface.training import RunConfig


def micro_run_config(data_dir: str, out_dir: str, **overrides) -> RunConfig:
    """Smallest legal training configuration; single steps take ~30 ms."""
    base = dict(
        data_dir=data_dir, out_dir=out_dir, steps=3, seed=11, batch_size=2,
        scale=4, hr_size=32, channels=6, modules_per_stage=1, blocks_per_module=1,
        structure_blocks=1, freq_channels=8, freq_hidden=8,
        disc_widths=(4, 4), disc_strides=(2, 2), disc_dense=8)
    base.update(overrides)
    return RunConfig(**base)


@pytest.fixture(scope="session")
def micro_dataset(tmp_path_factory):
    """Three synthetic 32px images prepared at scale 4."""
    data_dir = tmp_path_factory.mktemp("micro_data")
    prepare_data(None, str(data_dir), scale=4, seed=7, hr_size=32, synthetic=3)
    return str(data_dir)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
