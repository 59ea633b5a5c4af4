import math

import pytest

from uvnlos.atmosphere import TABLE1
from uvnlos.config import parse_config, preset_text
from uvnlos.scene import Scene, TransceiverGeometry
from uvnlos.source import SourceModel

pi = math.pi


def table1_geom(r=100.0, **kw):
    return TransceiverGeometry(r, 7 * pi / 36, 7 * pi / 36, -19 * pi / 36, 19 * pi / 36, pi / 6, 1.92e-4, **kw)


def table2_geom(r=100.0, **kw):
    return TransceiverGeometry(r, pi / 9, pi / 9, -2 * pi / 3, 2 * pi / 3, pi / 12, 1.92e-4, **kw)


def table1_scene(r=100.0, obstacle=None, check_area=True):
    return Scene(table1_geom(r), SourceModel(half_width=pi / 6), TABLE1, obstacle, check_area)


def preset_scene(name, r, obstacle=True):
    return parse_config(preset_text(name)).scene(r, obstacle=obstacle)


@pytest.fixture
def rp_scene():
    return preset_scene("fig5_alpha0", 100.0)


ACCEPTANCE_LINES = []


def record(label, passed, detail):
    line = f"{label}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
    sixes = [line for line in ACCEPTANCE_LINES if line.startswith("CRITERION 6.")]
    if sixes:
        ok = all(": PASS" in line for line in sixes)
        terminalreporter.write_line(f"CRITERION 6: {'PASS' if ok else 'FAIL'}  "
                                    f"{sum(': PASS' in line for line in sixes)}/{len(sixes)} property suites")
