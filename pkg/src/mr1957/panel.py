"""Panel protocol service: live machine state and control for operators.

One listening port speaks three dialects, told apart by the first bytes
of each connection:

  * raw TCP: newline-delimited JSON, one document per line (tests)
  * WebSocket: one JSON document per text message (the browser panel)
  * plain HTTP GET: static front-panel assets, when an asset directory
    is configured

Exactly one client may hold the controller role (claimed via the hello
command); any number of observers may watch.  All mutating commands go
through one FIFO queue to the machine executor thread, so effects
appear in snapshots in command order, and hot commands (breakpoints,
stop) reach the running machine between microwords through the
machine's own command queue.  Observers that fall behind receive
coalesced snapshots: always the newest state, never an older one after
a newer one.  If the controller disconnects while the machine runs,
the machine is paused (dead-man rule).

The message schema is documented in docs/panel-protocol.md and pinned
by golden files shared with the front panel's own test suite.
"""

from __future__ import annotations

import base64
import binascii
import hashlib
import json
import queue
import socket
import struct
import threading
import time
from dataclasses import asdict

from . import devices, isa, machine as machine_mod

DEFAULT_PLANE = 17  # sign-bit plane: densest view for signed programs
_WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

CONTROLLER_COMMANDS = {
    "start", "stop", "step", "step_micro", "reset", "boot", "deposit",
    "mount_tape", "set_breakpoint", "clear_breakpoint",
}
OBSERVER_COMMANDS = {"hello", "examine", "select_plane"}


class ProtocolError(ValueError):
    pass


def _parse_octal(value, field, limit):
    if not isinstance(value, str):
        raise ProtocolError(f"{field} must be an octal string")
    try:
        number = int(value, 8)
    except ValueError:
        raise ProtocolError(f"{field} is not octal: {value!r}") from None
    if not 0 <= number < limit:
        raise ProtocolError(f"{field} out of range: {value}")
    return number


def snapshot_message(snap, plane_index, last_report) -> dict:
    """Render a machine snapshot as the normative state event."""
    cols = 32
    rows = []
    for y in range(32):
        base = y * cols
        rows.append(
            "".join(
                str((snap.memory[base + x] >> plane_index) & 1) for x in range(cols)
            )
        )
    return {
        "event": "state",
        "pc": isa.octal_addr(snap.pc),
        "acc": isa.octal_word(snap.acc),
        "ir": isa.octal_word(snap.ir),
        "overflow": snap.overflow,
        "status": snap.status,
        "sim_time_us": snap.sim_time_us,
        "plane": {"index": plane_index, "rows": rows},
        "breakpoints": [isa.octal_addr(a) for a in snap.breakpoints],
        "devices": list(snap.devices),
        "last_step": last_report,
    }


def _report_message(report) -> dict:
    if report is None:
        return None
    if isinstance(report, machine_mod.StepReport):
        return {
            "kind": "step",
            "pc": isa.octal_addr(report.pc_before),
            "disassembly": report.disassembly,
            "elapsed_us": report.elapsed_us,
            "status": report.status,
            "warnings": list(report.warnings),
        }
    return {
        "kind": "run",
        "reason": report.reason,
        "instructions": report.instructions,
        "elapsed_us": report.elapsed_us,
        "pc": isa.octal_addr(report.pc),
    }


# ---------------------------------------------------------------------------
# Transports
# ---------------------------------------------------------------------------


class LineTransport:
    """Newline-delimited JSON over a plain socket."""

    def __init__(self, sock, initial=b""):
        self.sock = sock
        self.buffer = bytearray(initial)
        self.lock = threading.Lock()

    def recv_message(self):
        while True:
            newline = self.buffer.find(b"\n")
            if newline >= 0:
                line = bytes(self.buffer[:newline])
                del self.buffer[: newline + 1]
                if line.strip():
                    return line.decode("utf-8")
                continue
            chunk = self.sock.recv(4096)
            if not chunk:
                return None
            self.buffer.extend(chunk)

    def send_message(self, text: str):
        with self.lock:
            self.sock.sendall(text.encode("utf-8") + b"\n")

    def close(self):
        try:
            self.sock.close()
        except OSError:
            pass


class WebSocketTransport:
    """Server side of RFC 6455, restricted to text messages."""

    def __init__(self, sock):
        self.sock = sock
        self.lock = threading.Lock()
        self.buffer = bytearray()

    def _read_exact(self, n):
        while len(self.buffer) < n:
            chunk = self.sock.recv(4096)
            if not chunk:
                return None
            self.buffer.extend(chunk)
        data = bytes(self.buffer[:n])
        del self.buffer[:n]
        return data

    def recv_message(self):
        fragments = []
        while True:
            head = self._read_exact(2)
            if head is None:
                return None
            fin = head[0] & 0x80
            opcode = head[0] & 0x0F
            masked = head[1] & 0x80
            length = head[1] & 0x7F
            if length == 126:
                ext = self._read_exact(2)
                if ext is None:
                    return None
                length = struct.unpack(">H", ext)[0]
            elif length == 127:
                ext = self._read_exact(8)
                if ext is None:
                    return None
                length = struct.unpack(">Q", ext)[0]
            mask = b"\x00\x00\x00\x00"
            if masked:
                mask = self._read_exact(4)
                if mask is None:
                    return None
            payload = self._read_exact(length) if length else b""
            if payload is None:
                return None
            if masked:
                payload = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
            if opcode == 0x8:  # close
                return None
            if opcode == 0x9:  # ping -> pong
                self._send_frame(0xA, payload)
                continue
            if opcode in (0x1, 0x0):
                fragments.append(payload)
                if fin:
                    return b"".join(fragments).decode("utf-8")
                continue
            # binary and reserved opcodes are ignored

    def _send_frame(self, opcode, payload: bytes):
        head = bytearray([0x80 | opcode])
        n = len(payload)
        if n < 126:
            head.append(n)
        elif n < 1 << 16:
            head.append(126)
            head += struct.pack(">H", n)
        else:
            head.append(127)
            head += struct.pack(">Q", n)
        with self.lock:
            self.sock.sendall(bytes(head) + payload)

    def send_message(self, text: str):
        self._send_frame(0x1, text.encode("utf-8"))

    def close(self):
        try:
            self._send_frame(0x8, b"")
        except OSError:
            pass
        try:
            self.sock.close()
        except OSError:
            pass


def websocket_accept_key(key: str) -> str:
    digest = hashlib.sha1((key + _WS_GUID).encode("ascii")).digest()
    return base64.b64encode(digest).decode("ascii")


# ---------------------------------------------------------------------------
# Clients
# ---------------------------------------------------------------------------


class _Client:
    """One connection: ordered event outbox plus a coalescing state slot."""

    _ids = iter(range(1, 1 << 30))

    def __init__(self, transport):
        self.id = next(self._ids)
        self.transport = transport
        self.role = "observer"
        self.plane = DEFAULT_PLANE
        self.events = []  # must all be delivered, in order
        self.pending_state = None  # only the newest snapshot survives
        self.cond = threading.Condition()
        self.closed = False

    def queue_event(self, message: dict):
        with self.cond:
            self.events.append(message)
            self.cond.notify()

    def queue_state(self, snap, last_report):
        with self.cond:
            self.pending_state = (snap, last_report)
            self.cond.notify()

    def writer_loop(self):
        while True:
            with self.cond:
                while not self.events and self.pending_state is None and not self.closed:
                    self.cond.wait()
                if self.closed:
                    return
                events, self.events = self.events, []
                state, self.pending_state = self.pending_state, None
            try:
                for message in events:
                    self.transport.send_message(json.dumps(message))
                if state is not None:
                    snap, report = state
                    self.transport.send_message(
                        json.dumps(snapshot_message(snap, self.plane, report))
                    )
            except OSError:
                return

    def close(self):
        with self.cond:
            self.closed = True
            self.cond.notify()
        self.transport.close()


# ---------------------------------------------------------------------------
# The server
# ---------------------------------------------------------------------------


class PanelServer:
    """Serves one machine to one controller and any number of observers."""

    RUN_SLICE = 4000  # instructions per executor slice while free-running

    def __init__(self, machine, host="127.0.0.1", port=0, refresh_hz=30,
                 assets_dir=None):
        self.machine = machine
        self.refresh_interval = 1.0 / refresh_hz if refresh_hz > 0 else 0.0
        self.assets_dir = assets_dir
        self.commands = queue.Queue()
        self.clients = []
        self.clients_lock = threading.Lock()
        self.controller = None
        self.last_report = None
        self._shutdown = threading.Event()
        self.listener = socket.create_server((host, port))
        self.address = self.listener.getsockname()
        self._threads = [
            threading.Thread(target=self._accept_loop, daemon=True),
            threading.Thread(target=self._executor_loop, daemon=True),
        ]

    def start(self):
        for t in self._threads:
            t.start()
        return self

    def close(self):
        self._shutdown.set()
        try:
            self.listener.close()
        except OSError:
            pass
        with self.clients_lock:
            clients = list(self.clients)
        for c in clients:
            c.close()

    # -- connection handling -------------------------------------------------

    def _accept_loop(self):
        while not self._shutdown.is_set():
            try:
                sock, _addr = self.listener.accept()
            except OSError:
                return
            threading.Thread(
                target=self._handshake, args=(sock,), daemon=True
            ).start()

    def _handshake(self, sock):
        try:
            first = sock.recv(4096)
        except OSError:
            sock.close()
            return
        if not first:
            sock.close()
            return
        if first.startswith(b"GET "):
            data = bytearray(first)
            while b"\r\n\r\n" not in data:
                chunk = sock.recv(4096)
                if not chunk:
                    sock.close()
                    return
                data.extend(chunk)
            head, _, _rest = bytes(data).partition(b"\r\n\r\n")
            headers = {}
            lines = head.decode("latin-1").split("\r\n")
            path = lines[0].split(" ")[1] if len(lines[0].split(" ")) > 1 else "/"
            for line in lines[1:]:
                if ":" in line:
                    k, v = line.split(":", 1)
                    headers[k.strip().lower()] = v.strip()
            if headers.get("upgrade", "").lower() == "websocket":
                key = headers.get("sec-websocket-key", "")
                accept = websocket_accept_key(key)
                sock.sendall(
                    (
                        "HTTP/1.1 101 Switching Protocols\r\n"
                        "Upgrade: websocket\r\n"
                        "Connection: Upgrade\r\n"
                        f"Sec-WebSocket-Accept: {accept}\r\n\r\n"
                    ).encode("ascii")
                )
                self._serve_client(WebSocketTransport(sock))
            else:
                self._serve_static(sock, path)
        else:
            self._serve_client(LineTransport(sock, initial=first))

    def _serve_static(self, sock, path):
        try:
            body, content_type = self._load_asset(path)
        except FileNotFoundError:
            sock.sendall(b"HTTP/1.1 404 Not Found\r\nContent-Length: 9\r\n\r\nnot found")
            sock.close()
            return
        head = (
            "HTTP/1.1 200 OK\r\n"
            f"Content-Type: {content_type}\r\n"
            f"Content-Length: {len(body)}\r\n"
            "Cache-Control: no-cache\r\n\r\n"
        ).encode("ascii")
        try:
            sock.sendall(head + body)
        finally:
            sock.close()

    def _load_asset(self, path):
        if self.assets_dir is None:
            raise FileNotFoundError(path)
        import pathlib

        root = pathlib.Path(self.assets_dir).resolve()
        name = path.split("?", 1)[0].lstrip("/") or "index.html"
        target = (root / name).resolve()
        if not str(target).startswith(str(root)) or not target.is_file():
            raise FileNotFoundError(path)
        types = {
            ".html": "text/html; charset=utf-8",
            ".js": "text/javascript; charset=utf-8",
            ".css": "text/css; charset=utf-8",
            ".json": "application/json",
            ".map": "application/json",
            ".svg": "image/svg+xml",
        }
        return target.read_bytes(), types.get(target.suffix, "application/octet-stream")

    def _serve_client(self, transport):
        # the server stays silent until the client's first message (it
        # has to: the transport is identified by the client's opening
        # bytes); the hello command answers with a hello event and the
        # first snapshot
        client = _Client(transport)
        with self.clients_lock:
            self.clients.append(client)
        writer = threading.Thread(target=client.writer_loop, daemon=True)
        writer.start()
        try:
            while True:
                text = transport.recv_message()
                if text is None:
                    break
                self._handle_message(client, text)
        except OSError:
            pass
        finally:
            self._disconnect(client)

    def _disconnect(self, client):
        with self.clients_lock:
            if client in self.clients:
                self.clients.remove(client)
            was_controller = self.controller is client
            if was_controller:
                self.controller = None
        client.close()
        if was_controller:
            # dead-man rule: an unattended machine must not spin forever
            self.machine.request_stop()
            self.commands.put(("__snapshot__", None, None))

    # -- command handling ----------------------------------------------------

    def _handle_message(self, client, text):
        cmd = None
        try:
            message = json.loads(text)
        except json.JSONDecodeError as exc:
            client.queue_event({"event": "error", "cmd": None, "message": str(exc)})
            return
        try:
            if not isinstance(message, dict) or "cmd" not in message:
                raise ProtocolError("message must be an object with a cmd field")
            cmd = message["cmd"]
            if cmd not in CONTROLLER_COMMANDS | OBSERVER_COMMANDS:
                raise ProtocolError(f"unknown command {cmd!r}")
            if cmd in CONTROLLER_COMMANDS and self.controller is not client:
                raise ProtocolError("not the controller")
            self._validate(message)
        except ProtocolError as exc:
            client.queue_event({"event": "error", "cmd": cmd, "message": str(exc)})
            return
        if cmd == "hello":
            self._handle_hello(client, message)
            return
        if cmd == "select_plane":
            client.plane = message["plane"]
            self.commands.put(("__snapshot__", client, None))
            return
        # single FIFO: effects appear in snapshots in command order; the
        # executor drains it between run slices, so breakpoints, stops
        # and deposits reach a running machine at microword boundaries
        self.commands.put((cmd, client, message))

    def _validate(self, message):
        cmd = message["cmd"]
        words = self.machine.config.memory_words
        if cmd in ("deposit", "examine", "set_breakpoint", "clear_breakpoint"):
            message["_addr"] = _parse_octal(message.get("addr"), "addr", words)
        if cmd == "deposit":
            message["_word"] = _parse_octal(
                message.get("word"), "word", 1 << self.machine.config.word_bits
            )
        if cmd == "select_plane":
            plane = message.get("plane")
            if not isinstance(plane, int) or not 0 <= plane < self.machine.config.plane_count:
                raise ProtocolError(f"plane out of range: {plane!r}")
        if cmd == "mount_tape":
            channel = message.get("channel")
            if not isinstance(channel, int) or not 0 <= channel < devices.CHANNEL_COUNT:
                raise ProtocolError(f"channel out of range: {channel!r}")
            data = message.get("data")
            if not isinstance(data, str):
                raise ProtocolError("mount_tape needs base64 data")
            try:
                raw = base64.b64decode(data, validate=True)
            except (binascii.Error, ValueError):
                raise ProtocolError("mount_tape data is not valid base64") from None
            try:
                message["_tape"] = devices.tape_from_bytes(raw)
            except devices.TapeError as exc:
                raise ProtocolError(str(exc)) from None
        if cmd == "hello":
            role = message.get("role", "observer")
            if role not in ("controller", "observer"):
                raise ProtocolError(f"unknown role {role!r}")

    def _handle_hello(self, client, message):
        role = message.get("role", "observer")
        if role == "controller":
            with self.clients_lock:
                if self.controller is not None and self.controller is not client:
                    client.queue_event(
                        {
                            "event": "error",
                            "cmd": "hello",
                            "message": "another controller is connected",
                        }
                    )
                    return
                self.controller = client
            client.role = "controller"
        client.queue_event({"event": "hello", "role": client.role,
                            "machine": {
                                "memory_words": self.machine.config.memory_words,
                                "word_bits": self.machine.config.word_bits,
                                "planes": self.machine.config.plane_count,
                            }})
        self.commands.put(("__snapshot__", client, None))

    # -- executor -------------------------------------------------------------

    def _publish(self, only_client=None):
        snap = self.machine.snapshot()
        report = _report_message(self.last_report)
        if only_client is not None:
            only_client.queue_state(snap, report)
            return
        with self.clients_lock:
            clients = list(self.clients)
        for c in clients:
            c.queue_state(snap, report)

    def _executor_loop(self):
        m = self.machine
        last_publish = 0.0
        while not self._shutdown.is_set():
            running = m.status == machine_mod.STATUS_RUNNING
            try:
                item = self.commands.get(timeout=0.0 if running else 0.2)
            except queue.Empty:
                item = None
            if item is not None:
                name, client, message = item
                if name == "__snapshot__":
                    self._publish(client)
                else:
                    self._execute_command(name, client, message)
                    self._publish()
                continue
            if m.status == machine_mod.STATUS_RUNNING:
                report = m.run(max_instructions=self.RUN_SLICE)
                self.last_report = report
                now = time.monotonic()
                if (
                    report.reason != "max_instructions"
                    or now - last_publish >= self.refresh_interval
                ):
                    self._publish()
                    last_publish = now

    def _execute_command(self, name, client, message):
        m = self.machine

        def fail(exc):
            client.queue_event(
                {"event": "error", "cmd": name, "message": str(exc)}
            )

        try:
            if name == "start":
                m.start()
                client.queue_event({"event": "ok", "cmd": name})
            elif name == "reset":
                m.reset()
                self.last_report = None
                client.queue_event({"event": "ok", "cmd": name})
            elif name == "step":
                if m.status == machine_mod.STATUS_HALTED:
                    # the operator's step switch arms a halted machine
                    m.start()
                self.last_report = m.step_instruction()
                m.pause()  # single-step leaves the machine paused, not free-running
                client.queue_event({"event": "ok", "cmd": name})
            elif name == "step_micro":
                if m.status == machine_mod.STATUS_HALTED:
                    m.start()
                phase = m.step_microword()
                m.pause()
                client.queue_event({"event": "ok", "cmd": name, "phase": phase["phase"]})
            elif name == "boot":
                reader = m.roster.get(machine_mod.BOOT_CHANNEL)
                if reader.tape is None:
                    raise machine_mod.MachineError(
                        f"no tape mounted on channel {machine_mod.BOOT_CHANNEL}"
                    )
                words = m.boot_load(reader.tape)
                client.queue_event({"event": "ok", "cmd": name, "words": words})
            elif name == "examine":
                word = m.examine(message["_addr"])
                client.queue_event(
                    {
                        "event": "examine",
                        "addr": isa.octal_addr(message["_addr"]),
                        "word": isa.octal_word(word),
                    }
                )
            elif name == "mount_tape":
                m.mount_tape(message["channel"], message["_tape"])
                client.queue_event(
                    {
                        "event": "ok",
                        "cmd": name,
                        "channel": message["channel"],
                        "frames": len(message["_tape"].frames),
                    }
                )
            elif name == "deposit":
                m.deposit(message["_addr"], message["_word"])
                client.queue_event({"event": "ok", "cmd": name})
            elif name == "set_breakpoint":
                m.set_breakpoint(message["_addr"])
                client.queue_event({"event": "ok", "cmd": name})
            elif name == "clear_breakpoint":
                m.clear_breakpoint(message["_addr"])
                client.queue_event({"event": "ok", "cmd": name})
            elif name == "stop":
                m.request_stop()
                if m.status == machine_mod.STATUS_RUNNING:
                    # the executor is between slices; let the machine
                    # consume the stop at the next microword boundary
                    self.last_report = m.run(max_instructions=1)
                client.queue_event({"event": "ok", "cmd": name})
            else:
                fail(ProtocolError(f"unknown command {name!r}"))
        except (machine_mod.MachineError, devices.DeviceError, devices.TapeError,
                isa.IsaError) as exc:
            fail(exc)


def serve(machine, host="127.0.0.1", port=1957, refresh_hz=30, assets_dir=None):
    """Start a panel server and return it (non-blocking)."""
    return PanelServer(machine, host, port, refresh_hz, assets_dir).start()
