"""Shared fixtures and the acceptance-summary plugin.

Tests marked @pytest.mark.acceptance("<criterion>") get one
ACCEPTANCE: <criterion>: PASS/FAIL/SKIP line in the terminal summary.
"""
from __future__ import annotations

from pathlib import Path

import pytest

REPO = Path(__file__).resolve().parent.parent

CRITERIA_ORDER = [
    "pool-construction-oracle",
    "prompt-golden-suite",
    "bleu-oracle",
    "length-metrics",
    "truncation-properties",
    "selection-brute-force",
    "escalation-simulation",
    "significance-machinery",
    "e2e-mock-matrix",
    "devset-pool-stats (optional)",
]

_results: dict[str, str] = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "acceptance(name): marks a test as one acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    name = marker.args[0]
    if report.when == "call":
        _results[name] = ("PASS" if report.passed
                          else "SKIP" if report.skipped else "FAIL")
    elif report.when == "setup" and not report.passed:
        _results[name] = "SKIP" if report.skipped else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    seen = set()
    for name in CRITERIA_ORDER:
        if name in _results:
            seen.add(name)
            terminalreporter.write_line(
                f"ACCEPTANCE: {name}: {_results[name]}")
    for name, status in _results.items():
        if name not in seen:
            terminalreporter.write_line(f"ACCEPTANCE: {name}: {status}")


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return REPO / "fixtures"


@pytest.fixture(scope="session")
def golden_dir() -> Path:
    return REPO / "golden" / "prompts"


@pytest.fixture(scope="session")
def toy_corpus(fixtures_dir):
    from isoforge.corpus import load_parallel
    return load_parallel(fixtures_dir / "toy.en", fixtures_dir / "toy.de")


_FILLER_BASE = ("lorem ipsum dolor sit amet consetetur sadipscing elitr "
                "sed diam nonumy eirmod tempor invidunt ut labore et "
                "dolore magna aliquyam erat sed diam voluptua ")


def filler(n: int, prefix: str = "") -> str:
    """Deterministic text whose stripped length is exactly n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    s = (prefix + _FILLER_BASE * (n // len(_FILLER_BASE) + 2))[:n]
    s = s.rstrip()
    return s + "x" * (n - len(s))


# ratios chosen away from the 0.90/1.10 boundary so integer rounding
# cannot flip pool membership
SCRIPT_RATIOS = (0.5, 0.8, 0.95, 1.0, 1.05, 1.3)


def scripted_corpus(n: int, start_len: int = 20, span: int = 40
                    ) -> tuple[list[str], list[str]]:
    """n unique source/target line pairs cycling through SCRIPT_RATIOS."""
    src_lines, tgt_lines = [], []
    for i in range(n):
        length = start_len + (i * 7) % span
        r = SCRIPT_RATIOS[i % len(SCRIPT_RATIOS)]
        src_lines.append(filler(length, f"s{i} "))
        tgt_lines.append(filler(max(1, int(length * r)), f"t{i} "))
    return src_lines, tgt_lines


def write_corpus(path_src: Path, path_tgt: Path, n: int,
                 start_len: int = 20, span: int = 40) -> None:
    src_lines, tgt_lines = scripted_corpus(n, start_len, span)
    path_src.write_text("\n".join(src_lines) + "\n", encoding="utf-8")
    path_tgt.write_text("\n".join(tgt_lines) + "\n", encoding="utf-8")


CONFIG_TEMPLATE = """\
[experiment]
name = "{name}"
language_pair = "en-de"
demo_src = "demo.en"
demo_tgt = "demo.de"
test_src = "test.en"
test_ref = "test.de"
models = [{models}]
pool_types = [{pools}]
shots = [{shots}]
runs = {runs}
seed = {seed}
n_cap = {n_cap}
cache_dir = "cache"
reports_dir = "reports"

[backend]
kind = "mock"
max_in_flight = 4

[backend.mock]
mode = "{mock_mode}"
{mock_extra}
"""


@pytest.fixture
def mock_experiment(tmp_path):
    """Write a self-contained mock-backend experiment; returns the
    config path."""

    def make(name="exp", n_demo=24, n_test=4, models=("mock-a",),
             pools=("Random", "Isometric"), shots=(0, 2), runs=2,
             seed=7, n_cap=5, mock_mode="ratio", mock_extra="noise = 0.2",
             ) -> Path:
        write_corpus(tmp_path / "demo.en", tmp_path / "demo.de", n_demo)
        write_corpus(tmp_path / "test.en", tmp_path / "test.de", n_test,
                     start_len=30, span=25)
        text = CONFIG_TEMPLATE.format(
            name=name,
            models=", ".join(f'"{m}"' for m in models),
            pools=", ".join(f'"{p}"' for p in pools),
            shots=", ".join(str(s) for s in shots),
            runs=runs, seed=seed, n_cap=n_cap,
            mock_mode=mock_mode, mock_extra=mock_extra)
        path = tmp_path / "experiment.toml"
        path.write_text(text, encoding="utf-8")
        return path

    return make
