import pytest

from rppgbench.settings import Layout
from rppgbench.synth import generate_dataset, suite_specs


@pytest.fixture(autouse=True)
def no_color(monkeypatch):
    monkeypatch.setenv("RPPGBENCH_NOCOLOR", "1")


@pytest.fixture(scope="session")
def clean_suite(tmp_path_factory):
    """20 clean records between 72 and 120 bpm."""
    root = tmp_path_factory.mktemp("clean_suite")
    generate_dataset(suite_specs(20, sensor_noise_std=0.1), root)
    return root


@pytest.fixture(scope="session")
def noisy_suite(tmp_path_factory):
    root = tmp_path_factory.mktemp("noisy_suite")
    generate_dataset(
        suite_specs(20, first_seed=100, sensor_noise_std=1.0, quantize_8bit=True),
        root,
    )
    return root


@pytest.fixture(scope="session")
def frame_suite(tmp_path_factory):
    root = tmp_path_factory.mktemp("frame_suite")
    generate_dataset(
        suite_specs(
            6,
            first_seed=200,
            pulse_amplitude=0.02,
            sensor_noise_std=1.0,
        ),
        root,
        layout=Layout.RAW_FRAMES,
        frame_size=(16, 16),
    )
    return root


@pytest.fixture(scope="session")
def noise_free_suite(tmp_path_factory):
    """Four records without any noise; their channels are linearly dependent."""
    root = tmp_path_factory.mktemp("noise_free_suite")
    generate_dataset(suite_specs(4, first_seed=300), root)
    return root
