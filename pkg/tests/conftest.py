import pytest
from hypothesis import HealthCheck, settings

from unifem.mesh import unit_cube_tet, unit_interval, unit_square_quad, unit_square_tri

settings.register_profile(
    "default", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

_RESULTS: dict[int, dict] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or rep.when not in ("setup", "call"):
        return
    number, title = marker.args
    entry = _RESULTS.setdefault(number, {"title": title, "passed": True, "seen": False, "tests": 0})
    if rep.when == "call":
        entry["seen"] = True
        entry["tests"] += 1
    if rep.failed or rep.skipped:
        entry["passed"] = False


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        e = _RESULTS[number]
        ok = e["passed"] and e["seen"]
        terminalreporter.write_line(
            f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {e['title']} ({e['tests']} checks)"
        )


MESH_CASES = {
    "interval": lambda: unit_interval(5),
    "tri": lambda: unit_square_tri(3),
    "quad": lambda: unit_square_quad(3),
    "tet": lambda: unit_cube_tet(2),
}


@pytest.fixture(params=sorted(MESH_CASES))
def small_mesh(request):
    return MESH_CASES[request.param]()
