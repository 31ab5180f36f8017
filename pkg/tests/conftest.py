import functools

import pytest

from rydsim.gates import bell_sequence, default_config

_ACCEPTANCE = pytest.StashKey[dict]()


@functools.lru_cache(maxsize=None)
def _cached_bell(protocol: str, with_phases: bool, overrides: tuple):
    cfg = default_config(protocol, **dict(overrides))
    return bell_sequence(cfg, with_phases=with_phases)


@pytest.fixture(scope="session")
def bell_run():
    """Cached Bell-sequence results keyed by protocol and scalar config overrides."""

    def run(protocol, with_phases=False, **overrides):
        return _cached_bell(protocol, with_phases, tuple(sorted(overrides.items())))

    return run


@pytest.fixture
def record_criterion(request):
    """Store a one-line verdict for the terminal summary."""
    store = request.config.stash.setdefault(_ACCEPTANCE, {})

    def record(number: int, passed: bool, detail: str):
        store[number] = (passed, detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} | {detail}")

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(_ACCEPTANCE, {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(store):
        passed, detail = store[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'} | {detail}")
