import os
import logging

from dotenv import load_dotenv

load_dotenv()

# Shipped files (pinned experiment configs and the attack dataset)
BASE_DIR = os.path.abspath(os.path.dirname(__file__))
PACKAGE_DIR = os.path.dirname(BASE_DIR)
EXPERIMENTS_DIR = os.path.join(BASE_DIR, "experiments")
DATA_DIR = os.path.join(PACKAGE_DIR, "data")
ATTACK_DATASET_PATH = os.path.join(DATA_DIR, "adversarial_dataset.csv")

LOG_FORMAT = "%(asctime)s %(levelname)-7s %(name)s: %(message)s"


def output_dir() -> str:
    """Artifact directory; read on every call so tests can repoint it."""
    return os.getenv("DUALDYN_OUTPUT_DIR", os.path.join(os.getcwd(), "output"))


def max_workers() -> int:
    return int(os.getenv("DUALDYN_MAX_WORKERS", "4"))


def cache_size() -> int:
    return int(os.getenv("DUALDYN_CACHE_SIZE", "32"))


def setup_logging(level: str = None) -> None:
    level_name = (level or os.getenv("DUALDYN_LOG_LEVEL", "INFO")).upper()
    logging.basicConfig(
        level=getattr(logging, level_name, logging.INFO),
        format=LOG_FORMAT,
        force=True,
    )
