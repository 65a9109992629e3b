import os
import sys
from functools import lru_cache

import pytest

sys.path.insert(0, os.path.dirname(__file__))


def pytest_addoption(parser):
    parser.addoption("--run-slow", action="store_true", default=False, help="run long-running criteria")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-slow") or os.environ.get("VORLAT_SLOW") == "1":
        return
    skip = pytest.mark.skip(reason="long-running; enable with --run-slow or VORLAT_SLOW=1")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@lru_cache(maxsize=None)
def analysis_of(name: str):
    """Shared full analysis of a catalog lattice (cached per session)."""
    from vorlat import analyze_lattice, get_lattice

    return analyze_lattice(get_lattice(name), streak=300)


@lru_cache(maxsize=None)
def naive_of(name: str):
    from oracles import NaiveCell
    from vorlat import get_lattice

    lat = get_lattice(name)
    return NaiveCell([[c for c in row] for row in lat.gram.rows])


@lru_cache(maxsize=None)
def laminated_a2_family():
    from vorlat.catalog import hexagonal, hexagonal_deep_hole
    from vorlat.family import analyze_family, validity_window

    fam = analyze_family(hexagonal(), list(hexagonal_deep_hole()), "1/5", streak=100)
    return fam, validity_window(fam)
