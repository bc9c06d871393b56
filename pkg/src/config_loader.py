import os
import json
import logging

from dotenv import load_dotenv

from .errors import ConfigurationError

load_dotenv()

# Paths
CONFIG_PATH = os.getenv("LAGRANGE_BNB_CONFIG", "config/lagrange_bnb_config.json")
DEFAULT_OUTPUT_PATH = "output"
DEFAULT_LOGS_PATH = "logs"

THREADS_ENV_VAR = "LAGRANGE_BNB_THREADS"

# Branching strategies and what they do
SUPPORTED_STRATEGIES = {
    "mostviol": "most violated constraint satisfaction",
    "allviol": "all violated constraints satisfaction",
    "allcst": "all constraints satisfaction",
    "lp4": "LP-based 4-look-ahead",
    "lp8": "LP-based 8-look-ahead",
    "freq4": "frequency-based 4-look-ahead",
    "freq8": "frequency-based 8-look-ahead",
    "maxsd": "maximum solution density",
}

SUPPORTED_BOUND_MODES = ("ld", "lp", "both")

# Default configuration values
DEFAULT_CONFIG = {
    "STRATEGY": "mostviol",
    "ORACLE": "exact",
    "RHO": 3,
    "BOUND_MODE": "ld",
    "K_SPEC": 32,
    "MAX_CUTS": 200,
    "TAU_CONV": 1e-6,
    "LP_ITER_CAP": 50,
    "MAX_NODES": 1_000_000,
    "MAX_TIME": 600,
    "MAX_LOCAL_SEARCH_POPS": 50_000,
    "SA_SWEEPS": 2000,
    "SA_RESTARTS": 20,
    "SEED": 0,
}


def validate_strategy(strategy):
    """Validate and return the strategy name."""
    name = str(strategy).lower()
    if name in SUPPORTED_STRATEGIES:
        return name
    logging.warning(f"⚠️ Unsupported strategy: {strategy}. Defaulting to {DEFAULT_CONFIG['STRATEGY']}.")
    return DEFAULT_CONFIG["STRATEGY"]


def validate_bound_mode(mode):
    """Validate and return the bound mode."""
    name = str(mode).lower()
    if name in SUPPORTED_BOUND_MODES:
        return name
    logging.warning(f"⚠️ Unsupported bound mode: {mode}. Defaulting to {DEFAULT_CONFIG['BOUND_MODE']}.")
    return DEFAULT_CONFIG["BOUND_MODE"]


def parse_oracle_name(name):
    """Split an oracle name into (kind, epsilon): exact, sa or noisy:<eps>."""
    name = str(name).strip().lower()
    if name in ("exact", "sa"):
        return name, 0
    if name.startswith("noisy:"):
        try:
            epsilon = int(name.split(":", 1)[1])
        except ValueError:
            raise ConfigurationError(f"Invalid noise level in oracle name: {name}") from None
        if epsilon < 0:
            raise ConfigurationError(f"Noise level must be nonnegative: {name}")
        return "noisy", epsilon
    raise ConfigurationError(f"Unknown oracle: {name}")


def get_thread_count():
    """Get the benchmark worker count from LAGRANGE_BNB_THREADS or the CPU count."""
    fallback = os.cpu_count() or 1
    raw = os.getenv(THREADS_ENV_VAR)
    if not raw:
        return fallback

    raw = raw.strip('"\'')
    try:
        threads = int(raw)
    except ValueError:
        logging.warning(f"⚠️ {THREADS_ENV_VAR}={raw} is not an integer. Using {fallback} workers.")
        return fallback
    if threads < 1:
        logging.warning(f"⚠️ {THREADS_ENV_VAR} must be positive. Using {fallback} workers.")
        return fallback
    return threads


def _normalized(config):
    config["STRATEGY"] = validate_strategy(config["STRATEGY"])
    config["BOUND_MODE"] = validate_bound_mode(config["BOUND_MODE"])
    return config


def load_config(path=None):
    """Load configuration from JSON file with defaults."""
    path = path or CONFIG_PATH

    # Load user config if exists
    if os.path.exists(path):
        try:
            with open(path, 'r') as f:
                user_config = json.load(f)
            # Merge user config with defaults, keeping user values
            config = DEFAULT_CONFIG.copy()
            config.update(user_config)
            return _normalized(config)
        except Exception as e:
            logging.error(f"⚠️ Error loading config: {e}")
            logging.warning("⚠️ Using default configuration")
            return _normalized(DEFAULT_CONFIG.copy())

    # If config file doesn't exist, create it with defaults
    try:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, 'w') as f:
            json.dump(DEFAULT_CONFIG, f, indent=4)
        logging.info("✅ Created default configuration file")
    except Exception as e:
        logging.error(f"⚠️ Error creating config file: {e}")
    return _normalized(DEFAULT_CONFIG.copy())
