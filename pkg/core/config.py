import os

from dotenv import load_dotenv

# Load secrets first, then config (config can override)
load_dotenv(".env.secret")
load_dotenv(".env")


def _env_bool(name: str, default: bool) -> bool:
    value = os.getenv(name)
    if value is None:
        return default
    return value.strip().lower() in ("1", "true", "yes", "on")


class Config:
    # Reproducibility / execution
    SEED = int(os.getenv("FKWC_SEED", 0))
    THREADS = int(os.getenv("FKWC_THREADS", 1))

    # Testing defaults
    ALPHA = float(os.getenv("FKWC_ALPHA", 0.05))
    NUM_PROJECTIONS = int(os.getenv("FKWC_PROJECTIONS", 20))
    BAND_ORDER = 2

    # Simulation defaults
    GRID_SIZE = int(os.getenv("FKWC_GRID_SIZE", 101))
    SKEW_SHAPE = float(os.getenv("FKWC_SKEW_SHAPE", 4.0))
    JITTER_SCHEDULE = (1e-10, 1e-8, 1e-6)  # times beta

    # Power / sample size search
    MIN_SAMPLE_PER_GROUP = 4
    MAX_SAMPLE_SIZE = 10_000_000

    # JSON event log
    LOG_DIR = os.getenv("FKWC_LOG_DIR", "logs")
    LOG_DAYS = int(os.getenv("FKWC_LOG_DAYS", 30))
    LOG_TIMEZONE = os.getenv("FKWC_LOG_TIMEZONE", "UTC")
    LOG_ENABLED = _env_bool("FKWC_LOG_ENABLED", True)
