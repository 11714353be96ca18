import pytest

from glidernav.clocks import SimClock
from glidernav.dockserver import DockserverClient, MockDockserver


@pytest.fixture
def sim_clock():
    return SimClock(start=0.0)


@pytest.fixture
def mock_server(tmp_path, sim_clock):
    root = tmp_path / "dock"
    root.mkdir()
    server = MockDockserver(root, "127.0.0.1", 0, "sesame", clock=sim_clock).start()
    yield server
    server.stop()


@pytest.fixture
def client(mock_server):
    host, port = mock_server.address
    c = DockserverClient(host, port, "sesame")
    yield c
    c.quit()
