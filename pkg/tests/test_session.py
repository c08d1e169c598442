"""Session daemon: control verbs over the unix socket, ask brokering with
subscribers, decision echoes, and commit gating."""

import os
import threading
import time

import pytest

from yolofs.config import SessionConfig
from yolofs.errors import SessionError
from yolofs.session import ControlClient, SessionDaemon, SubscriberClient

from oracle import disk_view


@pytest.fixture
def base(tmp_path):
    root = tmp_path / "base"
    (root / "d1").mkdir(parents=True)
    (root / "d1" / "x").write_bytes(b"base x\n")
    (root / "d1" / "y").write_bytes(b"base y\n")
    return root


@pytest.fixture
def daemon(base):
    cfg = SessionConfig(rules=[("/", "allow")], ask_timeout=1.0)
    d = SessionDaemon(base, cfg)
    d.start(serve_fuse=False)
    yield d
    d.stop()


@pytest.fixture
def client(daemon):
    c = ControlClient(daemon.socket_path)
    yield c
    c.close()


def stage_write(daemon, path, data):
    s = daemon.session
    h = s.open(path, write=True, create=True, trunc=True)
    try:
        s.write(h, data, 0)
    finally:
        s.release(h)


class TestControlVerbs:
    def test_ping(self, client, base):
        info = client.request("ping")
        assert info["base"] == str(base)
        assert info["generation"] == 0

    def test_snapshot_travel_cycle(self, daemon, client):
        assert client.request("snapshot", {"name": "barn"})["generation"] == 1
        stage_write(daemon, "f", b"1")
        assert client.request("travel", {"target": 1})["generation"] == 2
        assert client.request("diff")["entries"] == []

    def test_travel_by_name(self, daemon, client):
        client.request("snapshot", {"name": "keep"})
        stage_write(daemon, "f", b"1")
        gen = client.request("travel", {"target": "keep"})["generation"]
        assert gen == 2
        assert client.request("diff")["entries"] == []

    def test_travel_unknown_name(self, client):
        with pytest.raises(SessionError):
            client.request("travel", {"target": "never-was"})

    def test_travel_future_gen(self, client):
        with pytest.raises(SessionError):
            client.request("travel", {"target": 5})

    def test_diff_payload(self, daemon, client):
        stage_write(daemon, "d1/x", b"edited")
        daemon.session.remove("d1/y", is_dir=False)
        entries = client.request("diff")["entries"]
        assert {(e["kind"], e["path"]) for e in entries} == {
            ("modified", "d1/x"),
            ("deleted", "d1/y"),
        }

    def test_log_segments_and_markers(self, daemon, client):
        client.request("snapshot", {"name": "barn"})
        stage_write(daemon, "f", b"1")
        client.request("travel", {"target": 1})
        view = client.request("log")
        assert view["generation"] == 2
        assert [m["tag"] for m in view["markers"]] == ["P", "T"]
        live = {s["gen"] for s in view["segments"] if s["live"]}
        assert live == {0, 2}

    def test_commit_and_reset(self, daemon, client, base):
        stage_write(daemon, "new", b"data")
        summary = client.request("commit")
        assert summary["applied"] == 1
        assert (base / "new").read_bytes() == b"data"
        assert client.request("ping")["generation"] == 0

    def test_abort_restores(self, daemon, client, base):
        before = disk_view(base)
        stage_write(daemon, "d1/x", b"edited")
        client.request("abort")
        assert disk_view(base) == before

    def test_rule_admin(self, client):
        v1 = client.request("rule-add", {"path": "/sec", "state": "deny"})["version"]
        rules = client.request("rule-list")["rules"]
        assert ["sec", "deny"] in rules
        v2 = client.request("rule-remove", {"path": "/sec"})["version"]
        assert v2 > v1

    def test_rule_persist_writes_toml(self, client, base):
        client.request("rule-add", {"path": "/keep", "state": "allow", "persist": True})
        text = (base / "yolo.toml").read_text()
        assert 'path = "keep"' in text
        assert 'state = "allow"' in text

    def test_unknown_verb(self, client):
        with pytest.raises(SessionError):
            client.request("never-heard-of-it")

    def test_state_snapshot(self, daemon, client):
        stage_write(daemon, "f", b"1")
        state = client.request("state")
        assert state["pending_asks"] == []
        assert len(state["diff"]) == 1


class TestAskFlow:
    @pytest.fixture
    def ask_daemon(self, base):
        cfg = SessionConfig(rules=[], ask_timeout=5.0)
        d = SessionDaemon(base, cfg)
        d.start(serve_fuse=False)
        yield d
        d.stop()

    def blocked_read(self, daemon, results):
        def worker():
            try:
                h = daemon.session.open("d1/x", process="tester")
                daemon.session.release(h)
                results.append("allowed")
            except Exception:
                results.append("denied")

        t = threading.Thread(target=worker, daemon=True)
        t.start()
        return t

    def test_subscriber_sees_ask_and_allows(self, ask_daemon):
        sub = SubscriberClient(ask_daemon.socket_path)
        results = []
        t = self.blocked_read(ask_daemon, results)
        event = sub.next_event(timeout=3.0)
        assert event["event"] == "ask"
        ask = event["ask"]
        assert ask["path"] == "d1/x"
        assert ask["kind"] == "read"
        assert ask["process"] == "tester"
        sub.request("decision", {"ask_id": ask["id"], "verdict": "allow"})
        t.join(timeout=3.0)
        assert results == ["allowed"]
        # decision echo reaches subscribers
        echo = sub.next_event(timeout=3.0)
        assert echo["event"] == "decision"
        assert echo["ask_id"] == ask["id"]
        sub.close()

    def test_one_time_decision_asks_again(self, ask_daemon):
        sub = SubscriberClient(ask_daemon.socket_path)
        for _ in range(2):
            results = []
            t = self.blocked_read(ask_daemon, results)
            event = sub.next_event(timeout=3.0)
            assert event["event"] == "ask"
            sub.request("decision", {"ask_id": event["ask"]["id"], "verdict": "allow"})
            t.join(timeout=3.0)
            assert results == ["allowed"]
            while True:  # drain the decision echo
                e = sub.next_event(timeout=1.0)
                if e is None or e["event"] == "decision":
                    break
        sub.close()

    def test_install_rule_suppresses_next_ask(self, ask_daemon):
        sub = SubscriberClient(ask_daemon.socket_path)
        results = []
        t = self.blocked_read(ask_daemon, results)
        event = sub.next_event(timeout=3.0)
        sub.request(
            "decision",
            {
                "ask_id": event["ask"]["id"],
                "verdict": "allow",
                "install_path": "d1",
                "install_state": "allow",
            },
        )
        t.join(timeout=3.0)
        assert results == ["allowed"]
        # the sibling no longer asks
        h = ask_daemon.session.open("d1/y", process="tester")
        ask_daemon.session.release(h)
        sub.close()

    def test_no_subscriber_times_out_deny(self, base):
        cfg = SessionConfig(rules=[], ask_timeout=0.4)
        d = SessionDaemon(base, cfg)
        d.start(serve_fuse=False)
        try:
            results = []
            t0 = time.monotonic()
            t = self.blocked_read(d, results)
            t.join(timeout=5.0)
            elapsed = time.monotonic() - t0
            assert results == ["denied"]
            assert 0.3 <= elapsed < 3.0
        finally:
            d.stop()

    def test_commit_gated_on_pending_asks(self, ask_daemon):
        results = []
        self.blocked_read(ask_daemon, results)
        deadline = time.time() + 2.0
        while not ask_daemon.broker.pending() and time.time() < deadline:
            time.sleep(0.01)
        client = ControlClient(ask_daemon.socket_path)
        with pytest.raises(SessionError):
            client.request("commit")
        client.close()

    def test_first_decision_wins_two_subscribers(self, ask_daemon):
        sub1 = SubscriberClient(ask_daemon.socket_path)
        sub2 = SubscriberClient(ask_daemon.socket_path)
        results = []
        t = self.blocked_read(ask_daemon, results)
        e1 = sub1.next_event(timeout=3.0)
        e2 = sub2.next_event(timeout=3.0)
        assert e1["ask"]["id"] == e2["ask"]["id"]
        r1 = sub1.request("decision", {"ask_id": e1["ask"]["id"], "verdict": "allow"})
        r2 = sub2.request("decision", {"ask_id": e2["ask"]["id"], "verdict": "deny"})
        assert r1["accepted"] is True
        assert r2["accepted"] is False
        t.join(timeout=3.0)
        assert results == ["allowed"]
        sub1.close()
        sub2.close()


class TestJournalEvents:
    def test_record_events_pushed(self, daemon):
        sub = SubscriberClient(daemon.socket_path)
        stage_write(daemon, "watched", b"1")
        event = sub.next_event(timeout=3.0)
        assert event["event"] == "journal"
        assert event["record"][0] == "S"
        assert event["record"][1] == "watched"
        sub.close()

    def test_marker_events_pushed(self, daemon):
        sub = SubscriberClient(daemon.socket_path)
        client = ControlClient(daemon.socket_path)
        client.request("snapshot", {"name": "evt"})
        event = sub.next_event(timeout=3.0)
        assert event["event"] == "marker"
        assert event["tag"] == "P"
        assert event["label"] == "evt"
        client.close()
        sub.close()
