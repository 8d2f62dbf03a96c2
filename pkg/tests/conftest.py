import pytest


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: heavier multi-second tests")
    config.addinivalue_line(
        "markers", "acceptance: reference-scale acceptance criteria"
    )


@pytest.fixture(autouse=True)
def _quiet_leakage_warnings(recwarn):
    # support-leakage warnings are part of several contracts and tested
    # explicitly; elsewhere they are expected chatter on evolved states
    import warnings

    from dbarlab.core import SupportLeakageWarning

    with warnings.catch_warnings():
        warnings.simplefilter("always", SupportLeakageWarning)
        yield
