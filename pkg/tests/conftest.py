import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from scipy.spatial.transform import Rotation

from pose_consensus.geometry import Pose

settings.register_profile(
    "suite",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")

TESTS_DIR = Path(__file__).resolve().parent
FIXTURES_DIR = TESTS_DIR / "fixtures"
ECHO_BACKEND = TESTS_DIR / "helpers" / "echo_backend.py"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES_DIR


@pytest.fixture
def echo_command() -> str:
    return f"{sys.executable} {ECHO_BACKEND}"


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def random_rotation_matrix(rng: np.random.Generator) -> np.ndarray:
    return Rotation.random(random_state=rng).as_matrix()


def random_pose(rng: np.random.Generator, translation_scale: float = 2.0) -> Pose:
    return Pose(
        rotation=random_rotation_matrix(rng),
        translation=rng.normal(scale=translation_scale, size=3),
    )
