import sys
from pathlib import Path

import matplotlib
import numpy as np
import pytest

matplotlib.use("Agg")
sys.path.insert(0, str(Path(__file__).parent))

from aoiadapt.gaze_data import Dataset, GazeRecording  # noqa: E402


def make_recording(rid, label, stim, xs, ys):
    xs = np.asarray(xs, dtype=float)
    return GazeRecording(rid, label, stim, np.arange(xs.size) * 4.0, xs, np.asarray(ys, dtype=float))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULT_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_dataset():
    """Twelve recordings, two classes, four stimuli on a 20x20 stimulus."""
    gen = np.random.default_rng(7)
    recs = []
    for i in range(12):
        label = str(i % 2)
        cx = 5.0 if label == "0" else 14.0
        xs = np.clip(gen.normal(cx, 2.0, 30), 0, 19.9)
        ys = np.clip(gen.normal(10.0, 3.0, 30), 0, 19.9)
        recs.append(make_recording(f"r{i:02d}", label, f"s{i % 4}", xs, ys))
    return Dataset(recs, 20, 20)
