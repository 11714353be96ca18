"""Mock dockserver, its client, and the autonomous pilot polling loop.

The shore side of a deployment is a file drop: the terminal appends each
surfacing to a per-glider log, and the pilot answers by storing a goto
file.  The mock serves exactly that contract over a small line-based
authenticated protocol (AUTH / LIST / GET / PUT / QUIT, LF-terminated
lines, raw payloads after the size header).  Stores are atomic: a file is
never listed half-written.

The pilot loop polls every 10 seconds by default, fetches changed logs,
plans once per unseen surfacing event, and uploads the resulting goto.
Transient connection failures back off exponentially (2 s base, 60 s cap)
without ever skipping an event; after 10 consecutive failures an operator
alert fires but the loop keeps retrying.  All waiting and timestamping
goes through an injectable clock.
"""

from __future__ import annotations

import os
import re
import socket
import socketserver
import threading
from dataclasses import dataclass, field
from pathlib import Path

from .clocks import SystemClock
from .formats import event_key, goto_name, parse_surfacing_log
from .geo import LatLon

DEFAULT_POLL_PERIOD_S = 10.0
BACKOFF_BASE_S = 2.0
BACKOFF_CAP_S = 60.0
ALERT_AFTER_FAILURES = 10

_NAME_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]*$")


class DockserverError(Exception):
    """Protocol-level failure talking to the dockserver."""


class AuthError(DockserverError):
    """Rejected credentials; not retryable."""


def _safe_name(name: str) -> bool:
    return bool(_NAME_RE.match(name)) and ".." not in name


# --------------------------------------------------------------------------
# server


class _SessionHandler(socketserver.StreamRequestHandler):
    def handle(self) -> None:  # noqa: C901 - one branch per protocol verb
        server: MockDockserver = self.server.owner  # type: ignore[attr-defined]
        line = self.rfile.readline()
        if not line:
            return
        parts = line.decode("ascii", errors="replace").strip().split(" ", 1)
        if len(parts) != 2 or parts[0] != "AUTH" or parts[1] != server.token:
            self.wfile.write(b"ERR auth\n")
            return
        self.wfile.write(b"OK\n")
        while True:
            line = self.rfile.readline()
            if not line:
                return
            words = line.decode("ascii", errors="replace").strip().split()
            if not words:
                continue
            verb = words[0]
            if verb == "QUIT":
                return
            if verb == "LIST" and len(words) == 2:
                self._list(server, words[1])
            elif verb == "GET" and len(words) == 2:
                self._get(server, words[1])
            elif verb == "PUT" and len(words) == 3:
                self._put(server, words[1], words[2])
            else:
                self.wfile.write(b"ERR\n")

    def _list(self, server: "MockDockserver", glider: str) -> None:
        if not _safe_name(glider):
            self.wfile.write(b"ERR\n")
            return
        entries = server.list_dir(glider)
        out = [f"OK {len(entries)}"]
        out.extend(f"{name} {size} {mtime}" for name, size, mtime in entries)
        self.wfile.write(("\n".join(out) + "\n").encode("ascii"))

    def _get(self, server: "MockDockserver", spec: str) -> None:
        glider, _, name = spec.partition("/")
        if not (_safe_name(glider) and _safe_name(name)):
            self.wfile.write(b"ERR notfound\n")
            return
        path = server.root / glider / name
        if not path.is_file():
            self.wfile.write(b"ERR notfound\n")
            return
        data = path.read_bytes()
        self.wfile.write(f"OK {len(data)}\n".encode("ascii"))
        self.wfile.write(data)

    def _put(self, server: "MockDockserver", spec: str, size_text: str) -> None:
        glider, _, name = spec.partition("/")
        try:
            size = int(size_text)
        except ValueError:
            self.wfile.write(b"ERR\n")
            return
        if not (_safe_name(glider) and _safe_name(name)) or size < 0:
            self.wfile.write(b"ERR\n")
            return
        data = self.rfile.read(size)
        if len(data) != size:
            self.wfile.write(b"ERR\n")
            return
        server.store(glider, name, data)
        self.wfile.write(b"OK\n")


class _ThreadingTCP(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


class MockDockserver:
    """Stand-in shore server exposing per-glider file trees.

    Files live on disk under ``root/<glider>/``; stores go to a temp file
    and are renamed into place so concurrent readers never see a torn file.
    Modification times come from the injected clock so simulated-time tests
    measure real end-to-end latency.
    """

    def __init__(self, root: str | Path, host: str, port: int, token: str, clock=None):
        self.root = Path(root)
        if not self.root.is_dir():
            raise DockserverError(f"server root {self.root} is not a directory")
        self.token = token
        self.clock = clock or SystemClock()
        self._meta: dict[tuple[str, str], int] = {}
        self._meta_lock = threading.Lock()
        try:
            self._tcp = _ThreadingTCP((host, port), _SessionHandler)
        except OSError as exc:
            raise DockserverError(f"cannot bind {host}:{port}: {exc}") from exc
        self._tcp.owner = self  # type: ignore[attr-defined]
        self._thread = threading.Thread(
            target=self._tcp.serve_forever, kwargs={"poll_interval": 0.05}, daemon=True
        )

    @property
    def address(self) -> tuple[str, int]:
        host, port = self._tcp.server_address[:2]
        return str(host), int(port)

    def start(self) -> "MockDockserver":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._tcp.shutdown()
        self._tcp.server_close()

    def list_dir(self, glider: str) -> list[tuple[str, int, int]]:
        d = self.root / glider
        if not d.is_dir():
            return []
        out = []
        for p in sorted(d.iterdir()):
            if p.is_file():
                out.append((p.name, p.stat().st_size, self._mtime(glider, p)))
        return out

    def _mtime(self, glider: str, p: Path) -> int:
        with self._meta_lock:
            known = self._meta.get((glider, p.name))
        return known if known is not None else int(p.stat().st_mtime)

    def store(self, glider: str, name: str, data: bytes) -> None:
        d = self.root / glider
        d.mkdir(parents=True, exist_ok=True)
        tmp = d / f".{name}.partial"
        tmp.write_bytes(data)
        os.replace(tmp, d / name)
        with self._meta_lock:
            self._meta[(glider, name)] = int(self.clock.now())


def serve_mock(root_dir: str | Path, endpoint: str, auth_token: str, clock=None) -> MockDockserver:
    """Start a mock dockserver on ``host:port`` and return its handle."""
    host, _, port_text = endpoint.partition(":")
    try:
        port = int(port_text)
    except ValueError as exc:
        raise DockserverError(f"bad endpoint {endpoint!r}") from exc
    return MockDockserver(root_dir, host or "127.0.0.1", port, auth_token, clock).start()


# --------------------------------------------------------------------------
# client


class DockserverClient:
    """One authenticated protocol session; reconnects on demand."""

    def __init__(self, host: str, port: int, token: str, timeout: float = 10.0):
        self.host = host
        self.port = port
        self.token = token
        self.timeout = timeout
        self._sock: socket.socket | None = None
        self._file = None

    def _connect(self) -> None:
        try:
            self._sock = socket.create_connection((self.host, self.port), self.timeout)
        except OSError as exc:
            raise DockserverError(f"cannot reach {self.host}:{self.port}: {exc}") from exc
        self._file = self._sock.makefile("rb")
        self._send(f"AUTH {self.token}")
        if self._readline() != "OK":
            self.close()
            raise AuthError("dockserver rejected the auth token")

    def _ensure(self) -> None:
        if self._sock is None:
            self._connect()

    def _send(self, line: str) -> None:
        assert self._sock is not None
        try:
            self._sock.sendall((line + "\n").encode("ascii"))
        except OSError as exc:
            self.close()
            raise DockserverError(f"send failed: {exc}") from exc

    def _readline(self) -> str:
        assert self._file is not None
        try:
            raw = self._file.readline()
        except OSError as exc:
            self.close()
            raise DockserverError(f"read failed: {exc}") from exc
        if not raw:
            self.close()
            raise DockserverError("connection closed by server")
        return raw.decode("ascii", errors="replace").rstrip("\n")

    def _read_exact(self, n: int) -> bytes:
        assert self._file is not None
        data = self._file.read(n)
        if data is None or len(data) != n:
            self.close()
            raise DockserverError("short read from server")
        return data

    def list(self, glider: str) -> list[tuple[str, int, int]]:
        self._ensure()
        self._send(f"LIST {glider}")
        reply = self._readline()
        if not reply.startswith("OK "):
            raise DockserverError(f"LIST failed: {reply}")
        n = int(reply.split()[1])
        entries = []
        for _ in range(n):
            name, size, mtime = self._readline().split()
            entries.append((name, int(size), int(mtime)))
        return entries

    def get(self, glider: str, name: str) -> bytes:
        self._ensure()
        self._send(f"GET {glider}/{name}")
        reply = self._readline()
        if not reply.startswith("OK "):
            raise DockserverError(f"GET {glider}/{name} failed: {reply}")
        return self._read_exact(int(reply.split()[1]))

    def put(self, glider: str, name: str, data: bytes) -> None:
        self._ensure()
        self._send(f"PUT {glider}/{name} {len(data)}")
        assert self._sock is not None
        self._sock.sendall(data)
        reply = self._readline()
        if reply != "OK":
            raise DockserverError(f"PUT {glider}/{name} failed: {reply}")

    def quit(self) -> None:
        if self._sock is not None:
            try:
                self._send("QUIT")
            except DockserverError:
                pass
        self.close()

    def close(self) -> None:
        if self._file is not None:
            try:
                self._file.close()
            except OSError:
                pass
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass
        self._sock = None
        self._file = None


# --------------------------------------------------------------------------
# pilot loop


@dataclass
class PollState:
    """What the pilot has already seen, durable across restarts."""

    files: dict = field(default_factory=dict)  # glider -> {name: [size, mtime]}
    last_event: dict = field(default_factory=dict)  # glider -> [t_end, t_start]
    last_gps: dict = field(default_factory=dict)  # glider -> [lat, lon]
    failures: int = 0

    def to_dict(self) -> dict:
        return {
            "files": self.files,
            "last_event": self.last_event,
            "last_gps": self.last_gps,
            "failures": self.failures,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PollState":
        return cls(
            files={g: dict(v) for g, v in d.get("files", {}).items()},
            last_event={g: list(v) for g, v in d.get("last_event", {}).items()},
            last_gps={g: list(v) for g, v in d.get("last_gps", {}).items()},
            failures=int(d.get("failures", 0)),
        )


class PilotLoop:
    """Poll logs, plan per event, upload gotos; never drop an event.

    ``planner`` is called once per unseen surfacing event and returns the
    goto bytes to store.  ``on_event`` (if given) runs after each event is
    fully processed and the state updated, which is the checkpoint hook.
    ``alert`` is called with a message when connectivity has failed
    ``ALERT_AFTER_FAILURES`` times in a row.
    """

    def __init__(
        self,
        client: DockserverClient,
        gliders: list[str],
        planner,
        clock=None,
        poll_period: float = DEFAULT_POLL_PERIOD_S,
        state: PollState | None = None,
        on_event=None,
        alert=None,
        log_suffix: str = ".log",
    ):
        self.client = client
        self.gliders = gliders
        self.planner = planner
        self.clock = clock or SystemClock()
        self.poll_period = poll_period
        self.state = state or PollState()
        self.on_event = on_event
        self.alert = alert
        self.log_suffix = log_suffix
        self.latencies: list[float] = []
        self.uploads: list[tuple[str, str]] = []  # (glider, goto name), in order
        self._stop = threading.Event()

    def stop(self) -> None:
        self._stop.set()

    def run(self, max_polls: int | None = None) -> None:
        polls = 0
        while not self._stop.is_set():
            try:
                self.poll_once()
            except AuthError:
                raise
            except DockserverError:
                self.state.failures += 1
                if self.state.failures == ALERT_AFTER_FAILURES and self.alert:
                    self.alert(
                        f"dockserver unreachable after {self.state.failures} attempts"
                    )
                delay = min(
                    BACKOFF_CAP_S, BACKOFF_BASE_S * 2 ** (self.state.failures - 1)
                )
                self.clock.sleep(delay)
                continue
            self.state.failures = 0
            polls += 1
            if max_polls is not None and polls >= max_polls:
                return
            if self._stop.is_set():
                return
            self.clock.sleep(self.poll_period)

    def poll_once(self) -> int:
        """One LIST/GET/plan/PUT cycle; returns events processed."""
        processed = 0
        for glider in self.gliders:
            seen = self.state.files.setdefault(glider, {})
            for name, size, mtime in self.client.list(glider):
                if not name.endswith(self.log_suffix):
                    continue
                if seen.get(name) == [size, mtime]:
                    continue
                data = self.client.get(glider, name)
                events, _ = parse_surfacing_log(data)
                processed += self._handle_events(glider, events, mtime)
                seen[name] = [size, mtime]
        return processed

    def _handle_events(self, glider: str, events, visible_mtime: int) -> int:
        last = self.state.last_event.get(glider)
        fresh = [
            ev
            for ev in events
            if last is None or list(event_key(ev)) > last
        ]
        fresh.sort(key=event_key)
        count = 0
        for ev in fresh:
            prior = self.state.last_gps.get(glider)
            if prior is not None and ev.start_pos is None:
                ev = _with_start(ev, LatLon(prior[0], prior[1]))
            goto = self.planner(ev)
            name = goto_name(ev)
            self.client.put(glider, name, goto)
            self.latencies.append(max(0.0, self.clock.now() - visible_mtime))
            self.uploads.append((glider, name))
            self.state.last_event[glider] = list(event_key(ev))
            self.state.last_gps[glider] = [ev.gps_pos.lat, ev.gps_pos.lon]
            if self.on_event is not None:
                self.on_event(ev)
            count += 1
        return count


def _with_start(ev, start: LatLon):
    from dataclasses import replace

    return replace(ev, start_pos=start)
