"""The panel protocol service over raw TCP and WebSocket transports."""

import base64
import json
import time

import pytest

from mr1957 import devices, isa, machine as machine_mod, panel
from mr1957.machine import Machine

from conftest import GOLDEN, encode_op
from panelclient import TcpPanelClient, WsPanelClient

COMMANDS = GOLDEN / "panel" / "commands"


@pytest.fixture
def server():
    srv = panel.serve(Machine(), port=0)
    yield srv
    srv.close()


@pytest.fixture
def controller(server):
    client = TcpPanelClient(server.address)
    client.send(json.loads((COMMANDS / "hello.json").read_text()))
    hello = client.recv()
    assert hello["event"] == "hello" and hello["role"] == "controller"
    state = client.recv()
    assert state["event"] == "state"
    yield client
    client.close()


def command(name):
    return json.loads((COMMANDS / f"{name}.json").read_text())


def until_state(client):
    return client.recv_until(lambda e: e["event"] == "state")


# -- basic session ---------------------------------------------------------------


def test_reset_then_step_snapshots(controller):
    controller.send(command("reset"))
    state = until_state(controller)
    assert state["sim_time_us"] == 0
    controller.send(command("step"))
    state = until_state(controller)
    assert state["sim_time_us"] == 12
    assert state["status"] == "halted"  # word 0 is HLT


def test_hello_reports_machine_shape(server):
    client = TcpPanelClient(server.address)
    client.send({"cmd": "hello"})
    hello = client.recv()
    assert hello["machine"] == {"memory_words": 1024, "word_bits": 18, "planes": 18}
    assert hello["role"] == "observer"
    client.close()


def test_deposit_examine_and_plane(controller):
    controller.send(command("deposit"))  # word 010144 at 0144
    controller.recv_until(lambda e: e["event"] == "ok")
    controller.send(command("examine"))
    examined = controller.recv_until(lambda e: e["event"] == "examine")
    assert examined == {"event": "examine", "addr": "0144", "word": "010144"}
    # 0o0144 = 100 = y 3, x 4; word bit 5 set (0o010144 has bits 12, 6, 5, 2)
    controller.send({"cmd": "select_plane", "plane": 5})
    state = controller.recv_until(
        lambda e: e["event"] == "state" and e["plane"]["index"] == 5
    )
    assert state["plane"]["rows"][3][4] == "1"


def test_snapshot_plane_matches_memory(controller, server):
    controller.send(command("deposit"))
    controller.recv_until(lambda e: e["event"] == "ok")
    word = server.machine.examine(0o144)
    for plane in (0, 2, 5, 17):
        controller.send({"cmd": "select_plane", "plane": plane})
        state = controller.recv_until(
            lambda e, p=plane: e["event"] == "state" and e["plane"]["index"] == p
        )
        assert state["plane"]["rows"][3][4] == str((word >> plane) & 1)


def test_mount_tape_and_boot(controller):
    controller.send(command("mount_tape"))
    ok = controller.recv_until(lambda e: e["event"] == "ok")
    assert ok["frames"] == 4
    controller.send(command("boot"))
    ok = controller.recv_until(lambda e: e["event"] == "ok")
    assert ok["words"] == 1
    controller.send(command("examine"))  # examines 0144, untouched
    state = controller.recv_until(lambda e: e["event"] == "examine")
    assert state["word"] == "000000"


def test_step_micro(controller):
    controller.send(command("step_micro"))
    ok = controller.recv_until(lambda e: e["event"] == "ok")
    assert ok["phase"] == "fetch"
    state = until_state(controller)
    assert state["sim_time_us"] == 8


# -- roles and errors --------------------------------------------------------------


def test_observer_cannot_mutate(server):
    observer = TcpPanelClient(server.address)
    observer.send({"cmd": "hello"})
    observer.recv()
    observer.recv()
    observer.send({"cmd": "reset"})
    error = observer.recv()
    assert error["event"] == "error" and "controller" in error["message"]
    observer.close()


def test_second_controller_rejected(server, controller):
    second = TcpPanelClient(server.address)
    second.send(command("hello"))
    error = second.recv()
    assert error["event"] == "error"
    assert "another controller" in error["message"]
    second.close()


def test_malformed_json_answered(controller):
    controller.send("this is not json")
    error = controller.recv()
    assert error["event"] == "error"


def test_invalid_addr_answered(controller):
    controller.send({"cmd": "deposit", "addr": "9999", "word": "000001"})
    error = controller.recv()
    assert error["event"] == "error" and "octal" in error["message"]
    controller.send({"cmd": "deposit", "addr": "7777", "word": "000001"})
    error = controller.recv()
    assert error["event"] == "error" and "range" in error["message"]


def test_unknown_command_answered(controller):
    controller.send({"cmd": "frobnicate"})
    error = controller.recv()
    assert error["event"] == "error" and "unknown command" in error["message"]


def test_bad_base64_answered(controller):
    controller.send({"cmd": "mount_tape", "channel": 4, "data": "!!!"})
    error = controller.recv()
    assert error["event"] == "error" and "base64" in error["message"]


# -- broadcast, ordering, hot control ------------------------------------------------


def test_two_observers_identical_sequences(server, controller):
    observers = []
    for _ in range(2):
        obs = TcpPanelClient(server.address)
        obs.send({"cmd": "hello"})
        assert obs.recv()["event"] == "hello"
        assert obs.recv()["event"] == "state"
        observers.append(obs)
    seen = [[], []]
    for step in range(3):
        controller.send(command("step") if step else command("reset"))
        controller.recv_until(lambda e: e["event"] == "ok")
        for i, obs in enumerate(observers):
            state = obs.recv_until(lambda e: e["event"] == "state")
            seen[i].append(state)
    assert seen[0] == seen[1]
    for obs in observers:
        obs.close()


def test_command_effect_fifo_order(controller):
    # deposit then step then examine: effects appear in command order
    controller.send({"cmd": "deposit", "addr": "0000", "word": "000123"})
    controller.send(command("step"))
    controller.send({"cmd": "examine", "addr": "0000"})
    oks = []
    while True:
        event = controller.recv()
        if event["event"] == "examine":
            assert event["word"] == "000123"
            break
        oks.append(event["event"])
    assert "error" not in oks


def test_hot_breakpoint_while_running(server, controller):
    m = server.machine
    jmp = encode_op(m.table, "JMP", 5)
    controller.send({"cmd": "deposit", "addr": "0005", "word": f"{jmp:06o}"})
    controller.send({"cmd": "deposit", "addr": "0000", "word": f"{jmp:06o}"})
    controller.send(command("start"))
    controller.send({"cmd": "set_breakpoint", "addr": "0005"})
    state = controller.recv_until(
        lambda e: e["event"] == "state" and e["status"] == "paused_at_breakpoint"
    )
    assert state["pc"] == "0005"
    assert state["breakpoints"] == ["0005"]


def test_stop_while_running(server, controller):
    m = server.machine
    jmp = encode_op(m.table, "JMP", 0)
    controller.send({"cmd": "deposit", "addr": "0000", "word": f"{jmp:06o}"})
    controller.send(command("start"))
    controller.recv_until(lambda e: e["event"] == "state" and e["status"] == "running")
    controller.send(command("stop"))
    state = controller.recv_until(
        lambda e: e["event"] == "state" and e["status"] == "paused_at_breakpoint"
    )
    assert state["last_step"]["kind"] == "run"


def test_dead_man_pause_on_controller_disconnect(server, controller):
    m = server.machine
    jmp = encode_op(m.table, "JMP", 0)
    controller.send({"cmd": "deposit", "addr": "0000", "word": f"{jmp:06o}"})
    controller.send(command("start"))
    controller.recv_until(lambda e: e["event"] == "state" and e["status"] == "running")
    controller.close()
    deadline = time.time() + 10
    while time.time() < deadline:
        if m.status == machine_mod.STATUS_PAUSED:
            break
        time.sleep(0.01)
    assert m.status == machine_mod.STATUS_PAUSED


def test_slow_observer_snapshots_coalesce():
    # the outbox keeps ordered events but only the newest state: a
    # stalled observer never blocks the executor and never sees an old
    # state after a newer one
    class _NullTransport:
        def send_message(self, text):
            pass

        def close(self):
            pass

    client = panel._Client(_NullTransport())
    m = Machine()
    snaps = []
    for value in (1, 2, 3):
        m.deposit(0, value)
        snap = m.snapshot()
        snaps.append(snap)
        client.queue_state(snap, None)
        client.queue_event({"event": "ok", "cmd": f"deposit{value}"})
    # three states queued while the writer was stalled: only the newest
    # survives, and every ordered event is still there
    assert client.pending_state[0] is snaps[-1]
    assert [e["cmd"] for e in client.events] == ["deposit1", "deposit2", "deposit3"]


# -- websocket transport ---------------------------------------------------------------


def test_websocket_session(server):
    client = WsPanelClient(server.address)
    client.send(command("hello"))
    hello = client.recv()
    assert hello["event"] == "hello" and hello["role"] == "controller"
    assert client.recv()["event"] == "state"
    client.send(command("reset"))
    assert client.recv()["event"] == "ok"
    assert client.recv()["event"] == "state"
    client.send(command("step"))
    client.recv()
    state = client.recv()
    assert state["sim_time_us"] == 12
    client.close()


def test_websocket_large_snapshot_frames(server):
    # a state event is well over one small frame: exercise 16-bit lengths
    client = WsPanelClient(server.address)
    client.send({"cmd": "hello"})
    client.recv()
    state = client.recv()
    assert len(state["plane"]["rows"]) == 32
    client.close()


# -- golden command schemas --------------------------------------------------------------


def test_every_golden_command_is_accepted(server):
    client = TcpPanelClient(server.address)
    client.send(command("hello"))
    client.recv()
    client.recv()
    replies = {
        "start": "ok", "stop": "ok", "step": "ok", "step_micro": "ok",
        "reset": "ok", "deposit": "ok", "examine": "examine",
        "set_breakpoint": "ok", "clear_breakpoint": "ok",
        "mount_tape": "ok", "boot": "ok",
    }
    order = ["mount_tape", "boot", "start", "stop", "step", "step_micro",
             "reset", "deposit", "examine", "set_breakpoint", "clear_breakpoint"]
    for name in order:
        client.send(command(name))
        reply = client.recv_until(
            lambda e: e["event"] in ("ok", "examine", "error")
        )
        assert reply["event"] == replies[name], (name, reply)
    client.send(command("select_plane"))
    state = client.recv_until(
        lambda e: e["event"] == "state" and e["plane"]["index"] == 5
    )
    assert state["plane"]["rows"] and len(state["plane"]["rows"]) == 32
    client.close()


# -- the golden scripted session ----------------------------------------------------------


def test_golden_session_replay(server):
    """Replays the recorded session and requires the byte-identical
    event sequence (the front panel consumes the same file)."""
    client = TcpPanelClient(server.address)
    for line in (GOLDEN / "panel" / "session1.jsonl").read_text().splitlines():
        record = json.loads(line)
        if "send" in record:
            client.send(record["send"])
        else:
            assert client.recv() == record["recv"]
    client.close()
