import pytest

from retf.simrun import build_scenario, default_config, with_overrides

PITCH = 5.0  # default patch length 4 m plus 1 m spacing


def small_config(n_e, sus=(), seed=0, mode="geometry", switch_time=0.2, **extra):
    """Short road fitted to an ``n_e``-patch array, BS at the midpoint, interferers scaled with it."""
    length = n_e * PITCH
    mid = length / 2
    overrides = {
        "road.length": length, "rpp.count": n_e, "capacity_mode": mode, "seed": seed,
        "rpp.switch_time": switch_time,
        "transmitters.serving.position": [mid, -35.0, 25.0],
        "transmitters.interferers": [
            {"position": [mid - 1.5 * length, -35.0, 25.0], "orientation": [1, 0, 0]},
            {"position": [mid + 1.5 * length, -35.0, 25.0], "orientation": [-1, 0, 0]},
            {"position": [mid, 1.5 * length + 40.0, 25.0], "orientation": [0, -1, 0]},
        ],
        "sus": {"explicit": list(sus)},
    }
    overrides.update(extra)
    return build_scenario(with_overrides(default_config(), overrides))


def su(x, y=0.0, serving=1, speed=0.0):
    return {"encounter_x": x, "lateral_y": y, "serving_index": serving, "speed": speed}


@pytest.fixture
def small():
    return small_config


@pytest.fixture(scope="session")
def default_cfg():
    return build_scenario(default_config())


# ---------------------------------------------------------------- acceptance report

_RESULTS: dict[int, tuple[str, str]] = {}
_NOTES: dict[int, list[str]] = {}


@pytest.fixture
def note(request):
    """Attach a line of figures to the test's criterion in the final summary."""
    number = request.node.get_closest_marker("criterion").args[0]
    return _NOTES.setdefault(number, []).append


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")
    config.addinivalue_line("markers", "slow: takes more than a few seconds")


def pytest_runtest_logreport(report):
    mark = getattr(report, "_criterion", None)
    if mark is None:
        return
    number, title = mark
    if report.when == "call" or (report.when == "setup" and not report.passed):
        if hasattr(report, "wasxfail"):
            status = "FAIL (known, see ledger)" if report.skipped else "PASS (unexpected)"
        else:
            status = "PASS" if report.passed else "FAIL"
        # a criterion split over several tests reports its worst part
        if _RESULTS.get(number, (title, "PASS"))[1] == "PASS":
            _RESULTS[number] = (title, status)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    m = item.get_closest_marker("criterion")
    if m is not None:
        outcome.get_result()._criterion = (m.args[0], m.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        title, status = _RESULTS[number]
        terminalreporter.write_line(f"[{number}] {title}: {status}")
        for line in _NOTES.get(number, []):
            terminalreporter.write_line(f"      {line}")
