import os
from pathlib import Path

import numpy as np
import pytest
from scipy.signal import lfilter

FS = 173.61

# Acceptance outcomes, keyed by criterion label, filled in by the report hook.
_ACCEPTANCE: dict[str, list[str]] = {}


def write_segment(path: Path, samples) -> None:
    path.write_text("\n".join(str(int(round(v))) for v in samples) + "\n")


def synthetic_bonn(root: Path, n_per_class: int, length: int = 4097, seed: int = 0) -> Path:
    """Bonn-shaped integer text files: coloured noise in O/, spike-wave in S/."""
    rng = np.random.default_rng(seed)
    t = np.arange(length) / FS
    for sub in ("O", "S"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    for i in range(n_per_class):
        noise = lfilter([1.0], [1.0, -0.9, 0.2], rng.normal(size=length)) * 20
        write_segment(root / "O" / f"O{i + 1:03d}.txt", noise)
        f0 = rng.uniform(2.5, 4.0)
        s = np.sin(2 * np.pi * f0 * t + rng.uniform(0, 2 * np.pi))
        wave = 200 * (s + 0.5 * np.sign(s) * np.abs(s) ** 8)
        wave += lfilter([1.0], [1.0, -0.9, 0.2], rng.normal(size=length)) * 10
        write_segment(root / "S" / f"S{i + 1:03d}.txt", wave)
    return root


@pytest.fixture(scope="session")
def small_bonn(tmp_path_factory) -> Path:
    return synthetic_bonn(tmp_path_factory.mktemp("bonn"), n_per_class=10, length=1024)


@pytest.fixture(scope="session")
def bonn_dir():
    """Real Bonn sets O and S from ``$BONN_DIR/O`` and ``$BONN_DIR/S``."""
    root = os.environ.get("BONN_DIR")
    if not root or not (Path(root) / "O").is_dir() or not (Path(root) / "S").is_dir():
        pytest.skip("set BONN_DIR to a directory holding the Bonn O/ and S/ segment folders")
    return Path(root)


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark:
            _ACCEPTANCE.setdefault(mark.args[0], [])


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        status = "SKIP" if report.skipped else ("PASS" if report.passed else "FAIL")
        _ACCEPTANCE[mark.args[0]].append(f"{status} {item.name}")


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion a test belongs to")


def pytest_terminal_summary(terminalreporter):
    if not any(_ACCEPTANCE.values()):
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_ACCEPTANCE):
        results = _ACCEPTANCE[label]
        statuses = {r.split()[0] for r in results}
        if "FAIL" in statuses:
            overall = "FAIL"
        elif statuses == {"SKIP"}:
            overall = "SKIP"
        else:
            overall = "PASS"
        terminalreporter.write_line(f"{overall} criterion {label}")
        for r in results:
            terminalreporter.write_line(f"    {r}")
