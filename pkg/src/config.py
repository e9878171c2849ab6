# Import Libraries
from pathlib import Path
from src.exceptions import ConfigurationError
import logging
import yaml

# Initialization
logger = logging.getLogger(__name__)

# Define a constant path to the configuration file.
# `__file__` is the current file, `.parent.parent` goes up two directories to the project root.
CONFIG_PATH = Path(__file__).parent.parent / 'config.yaml'

REQUIRED_KEYS = {
    "analysis": ["alpha", "direction", "sides", "variance", "hc", "studentize", "permutations", "permutation_seed"],
    "mvt": ["abs_tolerance", "seed", "randomizations", "initial_points", "max_points", "jitter"],
    "simulation": ["abs_tolerance", "permutations", "parallel", "conservative_below", "liberal_above"],
    "logging": ["level", "format", "datefmt"],
}

ALLOWED_VALUES = {
    "direction": ("increasing", "decreasing"),
    "sides": ("one", "two"),
    "variance": ("pooled", "sandwich"),
    "hc": ("hc0", "hc1", "hc2", "hc3"),
    "studentize": ("full", "sigma-only"),
}

def load_config(config_path: Path = CONFIG_PATH) -> dict:
    """
    Loads, parses, and returns the YAML configuration file.

    Args:
        config_path (Path): The path to the YAML configuration file.

    Returns:
        dict: The configuration loaded as a Python dictionary.
    """
    with open(config_path, 'r') as file:
        config = yaml.safe_load(file)
    return config

def validate_config(config: dict) -> dict:
    """
    Performs a strict check on the loaded configuration to ensure all required
    sections and keys are present. Fails fast on startup if the config is invalid.

    Args:
        config (dict): The configuration loaded from config.yaml.

    Returns:
        dict: The same configuration, for chaining.
    """
    if not isinstance(config, dict):
        raise ConfigurationError("Configuration Error: config.yaml does not contain a mapping")
    for section, keys in REQUIRED_KEYS.items():
        if section not in config:
            raise ConfigurationError(f"Configuration Error: Section '{section}' is missing from config.yaml")
        for key in keys:
            if key not in config[section]:
                raise ConfigurationError(f"Configuration Error: Key '{key}' is missing from '{section}'")
    alpha = config["analysis"]["alpha"]
    if not 0 < alpha < 1:
        raise ConfigurationError(f"Configuration Error: 'alpha' must lie in (0, 1), got {alpha}")
    for key, allowed in ALLOWED_VALUES.items():
        if config["analysis"][key] not in allowed:
            raise ConfigurationError(f"Configuration Error: 'analysis.{key}' must be one of {allowed}, got {config['analysis'][key]!r}")
    for section in ("mvt", "simulation"):
        if config[section]["abs_tolerance"] <= 0:
            raise ConfigurationError(f"Configuration Error: '{section}.abs_tolerance' must be positive")
    logger.debug("All required configuration sections and keys are present.")
    return config
