# Import Libraries
from src.distributions import MvtSettings
from src.estimators import OneWayLayout
import numpy as np
import pytest
import yaml

@pytest.fixture(scope="session")
def project_root(tmp_path_factory):
    """Creates a temporary root directory for the entire test session."""
    return tmp_path_factory.mktemp("project")

@pytest.fixture(scope="session")
def mock_config_path(project_root):
    """
    Creates a fake config.yaml file in a temporary directory and returns its path.
    This allows tests to run with a known, consistent configuration.
    """
    config_data = {
        "analysis": {
            "alpha": 0.05, "direction": "increasing", "sides": "one", "variance": "pooled",
            "hc": "hc3", "studentize": "full", "permutations": 999, "permutation_seed": 7,
        },
        "mvt": {
            "abs_tolerance": 1.0e-3, "seed": 1729, "randomizations": 8,
            "initial_points": 512, "max_points": 16384, "jitter": 1.0e-10,
        },
        "simulation": {
            "abs_tolerance": 2.0e-3, "permutations": 199, "parallel": 1,
            "conservative_below": 0.04, "liberal_above": 0.065,
        },
        "logging": {
            "level": "INFO",
            "format": "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
            "datefmt": "%Y-%m-%d %H:%M:%S",
        },
    }
    config_path = project_root / "config.yaml"
    with open(config_path, 'w') as file:
        yaml.dump(config_data, file)
    return config_path

@pytest.fixture
def base_config(mock_config_path):
    """
    A fixture that loads the mock config file and returns it as a Python dictionary.
    Every test gets a fresh copy, so it may be modified freely.
    """
    from src.config import load_config
    return load_config(mock_config_path)

@pytest.fixture
def fast_mvt():
    """Integrator settings loose enough for unit tests, tight enough for 2-3 decimals."""
    return MvtSettings(abs_tolerance=1e-3, randomizations=8, initial_points=512, max_points=2 ** 14)

@pytest.fixture
def balanced_layout():
    """Four groups of five with a clear increasing trend and unequal spreads."""
    return OneWayLayout.from_groups({
        "0": [9.8, 10.4, 10.1, 9.6, 10.2],
        "1": [10.3, 10.9, 10.0, 10.6, 10.5],
        "2": [11.2, 10.7, 11.6, 11.0, 11.4],
        "3": [12.5, 11.8, 12.9, 12.2, 11.9],
    })

@pytest.fixture
def null_layout():
    """Three balanced groups with identical means."""
    return OneWayLayout.from_groups({
        "a": [0.0, 1.0, 2.0],
        "b": [2.0, 0.0, 1.0],
        "c": [1.0, 2.0, 0.0],
    })

@pytest.fixture
def random_layout():
    """A seeded unbalanced layout with a mild trend."""
    rng = np.random.default_rng(11)
    sizes = (6, 8, 7, 9)
    return OneWayLayout.from_groups({
        f"d{i}": rng.normal(0.3 * i, 1.0 + 0.2 * i, size) for i, size in enumerate(sizes)
    })

@pytest.fixture
def dose_response_csv(tmp_path):
    """Writes a well-formed long-format file with 4 doses and 10 rows each."""
    rng = np.random.default_rng(5)
    lines = ["dose,response"]
    for dose in range(4):
        lines.extend(f"{dose},{value:.4f}" for value in rng.normal(dose * 0.4, 1.0, 10))
    path = tmp_path / "dose_response.csv"
    path.write_text("\n".join(lines) + "\n")
    return path
