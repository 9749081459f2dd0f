import os

import numpy as np
import pytest
import torch
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

torch.set_num_threads(max(1, int(os.environ.get("BIASCOPE_THREADS", "0") or 0)) or torch.get_num_threads())


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def cue_bench(tmp_path_factory):
    """Small dual-labelled cue-conflict set shared by evaluation tests."""
    from biascope.synthgen import build_dataset

    return build_dataset("CueConflict", 96, 64, tmp_path_factory.mktemp("bench"), seed=3)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
