import numpy as np
import pytest
import torch

from viasnet.corpus.io import load_manifest
from viasnet.corpus.synth import SynthConfig, synth_corpus
from viasnet.network import ModelConfig

torch.set_num_threads(1)

TINY_SYNTH = dict(n_videos=4, scenes_per_video=3.0, frames_per_scene=24.0, viewers_per_video=4)


@pytest.fixture(scope="session")
def tiny_corpus(tmp_path_factory):
    """A 4-video desk corpus shared by read-only tests."""
    root = tmp_path_factory.mktemp("tiny_corpus")
    synth_corpus(SynthConfig.desk(test_fraction=0.5, **TINY_SYNTH), 3, str(root))
    return load_manifest(str(root / "manifest.json"))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def desk_config():
    return ModelConfig.for_profile("desk")


# -- acceptance reporting --------------------------------------------------

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion covered by a test")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    marker = _MARKS.get(report.nodeid)
    if marker is not None:
        n, title = marker
        ok = report.outcome == "passed"
        prev = _CRITERIA.get(n, (title, True))
        _CRITERIA[n] = (title, prev[1] and ok)


_MARKS = {}


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            _MARKS[item.nodeid] = tuple(m.args)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, ok = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}")
