import pytest

from bondheat.coupling import fixed_point
from bondheat.dataio import default_config
from bondheat.materials import Drive

# (criterion, passed, detail) lines collected by the acceptance tests
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in sorted(ACCEPTANCE, key=lambda r: int(r[0][2:])):
        terminalreporter.write_line(f"{name} {'PASS' if passed else 'FAIL'}: {detail}")


@pytest.fixture(scope="session")
def au_run():
    """Reference package: Au, 2 mil, 2.5 mm, epoxy block, 80/40/35/20 degC."""
    return default_config("Au", 2.0, 2.5)


@pytest.fixture(scope="session")
def au(au_run):
    return au_run.model


@pytest.fixture(scope="session")
def ref_drive():
    return Drive(3.7, 0.5)


@pytest.fixture(scope="session")
def ref_coupling(au, ref_drive):
    return fixed_point(au, ref_drive)


@pytest.fixture(scope="session")
def ref_state(ref_coupling):
    return ref_coupling.state
