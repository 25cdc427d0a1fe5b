import pytest

from finitekey import ChannelModel, ProtocolParams


@pytest.fixture
def channel():
    return ChannelModel()


@pytest.fixture
def params_k3():
    return ProtocolParams((0.2009, 0.1009, 1e-6), (0.6139, 0.2688, 0.1173), 0.9062, 1e9)


@pytest.fixture
def params_k4():
    return ProtocolParams((0.8468, 0.2467, 0.1467, 1e-6), (0.0064, 0.1956, 0.6363, 0.1617),
                          0.866, 1e8)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import REPORT
    if REPORT:
        terminalreporter.section("acceptance criteria")
        for line in sorted(REPORT):
            terminalreporter.write_line(line)
