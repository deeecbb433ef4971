import json
import time
import warnings
from functools import lru_cache
from pathlib import Path

import pytest

from mcflab.cli import execute, load_config
from mcflab.errors import NoSeparatingNecks
from mcflab.surgery import SurgeryParamWarning

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"
ORACLES = Path(__file__).resolve().parent / "oracles"


@lru_cache(maxsize=None)
def frozen() -> dict:
    return json.loads((ORACLES / "frozen.json").read_text())


@lru_cache(maxsize=None)
def timed_run(name: str):
    """``(history, seconds)`` of a checked-in configuration, run once per session."""
    t0 = time.perf_counter()
    hist = execute(load_config(CONFIGS / name))
    return hist, time.perf_counter() - t0


def run_config(name: str):
    return timed_run(name)[0]


@lru_cache(maxsize=None)
def surgery_run(name: str):
    """``(history, error)`` of a surgery configuration.

    ``error`` is the :class:`NoSeparatingNecks` raised by the run (``None`` on
    success); the history is then the one carried in its dump.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SurgeryParamWarning)
        try:
            return execute(load_config(CONFIGS / name)), None
        except NoSeparatingNecks as exc:
            return exc.dump.get("history"), exc


@pytest.fixture(scope="session")
def oracle():
    return frozen()


@pytest.fixture(autouse=True)
def _quiet_surgery_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SurgeryParamWarning)
        yield
