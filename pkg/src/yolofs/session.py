"""Session control daemon and its local control protocol.

One daemon per mounted session.  It owns the MountSession, brokers asks
between blocked filesystem operations and whoever is subscribed (CLI prompt,
browser console), and serves the control verbs the CLI and console use:
snapshot, travel, diff, log, commit, abort, rule administration.

Transport: a unix socket at `.yolo/control.sock`; each message is a 4-byte
little-endian length followed by a UTF-8 JSON object {id, verb, payload}.
Responses echo the id with {ok, payload | error}.  A connection that sends
`subscribe` also receives pushed events (ask, decision, journal, marker).
"""

from __future__ import annotations

import json
import logging
import os
import queue
import socket
import struct
import threading
import time

from yolofs.config import SessionConfig, dump_config
from yolofs.errors import SessionError, YoloError
from yolofs.permissions import AskBroker, Decision, RuleTree
from yolofs.vfs import MountSession

logger = logging.getLogger(__name__)

SOCKET_NAME = "control.sock"


def _send_msg(sock, obj):
    data = json.dumps(obj, separators=(",", ":")).encode("utf-8")
    sock.sendall(struct.pack("<I", len(data)) + data)


def _recv_msg(sock):
    header = _recv_exact(sock, 4)
    if header is None:
        return None
    (length,) = struct.unpack("<I", header)
    if length > 64 << 20:
        raise SessionError(f"control message too large: {length}")
    data = _recv_exact(sock, length)
    if data is None:
        return None
    return json.loads(data.decode("utf-8"))


def _recv_exact(sock, n):
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            return None
        buf += chunk
    return buf


class _Subscriber:
    """Event fan-out endpoint; a writer thread keeps slow clients from
    stalling the filesystem path that emits events."""

    def __init__(self, sock):
        self.sock = sock
        self.queue = queue.Queue(maxsize=1024)
        self.dead = False
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()

    def push(self, event):
        if self.dead:
            return
        try:
            self.queue.put_nowait(event)
        except queue.Full:
            self.dead = True

    def _run(self):
        while not self.dead:
            event = self.queue.get()
            if event is None:
                return
            try:
                _send_msg(self.sock, event)
            except OSError:
                self.dead = True

    def close(self):
        self.dead = True
        try:
            self.queue.put_nowait(None)
        except queue.Full:
            pass


class DaemonBroker(AskBroker):
    """Ask broker wired to the daemon's subscriber list."""

    def __init__(self, daemon, timeout):
        super().__init__(timeout)
        self.daemon = daemon

    def publish(self, request):
        self.daemon.push_event(
            {
                "event": "ask",
                "ask": {
                    "id": request.id,
                    "path": request.path,
                    "kind": request.kind,
                    "process": request.process,
                    "ts": time.time(),
                },
            }
        )


class SessionDaemon:
    def __init__(self, base_root, config=None, mount_point=None):
        self.config = config or SessionConfig()
        self.base_root = os.path.abspath(os.fspath(base_root))
        self.mount_point = (
            os.path.abspath(os.fspath(mount_point)) if mount_point else None
        )
        self.broker = DaemonBroker(self, self.config.ask_timeout)
        rules = RuleTree(self.config.rules)
        self.session = MountSession(self.base_root, rules=rules, broker=self.broker)
        self.session.on_record = self._on_record
        self.socket_path = os.path.join(self.session.yolo_dir, SOCKET_NAME)
        self._server = None
        self._subscribers = []
        self._sub_lock = threading.Lock()
        self._threads = []
        self._fuse = None
        self._stop = threading.Event()
        self._run_seq = 0

    # ------------------------------------------------------------------
    # lifecycle

    def start(self, serve_fuse=True):
        if os.path.exists(self.socket_path):
            os.unlink(self.socket_path)
        self._server = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
        self._server.bind(self.socket_path)
        self._server.listen(16)
        t = threading.Thread(target=self._accept_loop, daemon=True)
        t.start()
        self._threads.append(t)
        if serve_fuse and self.mount_point:
            from yolofs import fusebridge

            self._fuse = fusebridge.mount_session(self.session, self.mount_point)
        logger.info(
            "session daemon up: base=%s mount=%s socket=%s",
            self.base_root,
            self.mount_point,
            self.socket_path,
        )
        return self

    def wait(self):
        if self._fuse is not None:
            self._fuse.join()
        else:
            self._stop.wait()

    def stop(self):
        self._stop.set()
        if self._fuse is not None:
            self._fuse.unmount()
            self._fuse = None
        if self._server is not None:
            try:
                self._server.close()
            except OSError:
                pass
            self._server = None
        with self._sub_lock:
            for sub in self._subscribers:
                sub.close()
            self._subscribers.clear()
        if os.path.exists(self.socket_path):
            try:
                os.unlink(self.socket_path)
            except OSError:
                pass
        self.session.close()

    # ------------------------------------------------------------------
    # events

    def push_event(self, event):
        with self._sub_lock:
            subs = list(self._subscribers)
        for sub in subs:
            sub.push(event)
        self._reap()

    def _reap(self):
        with self._sub_lock:
            self._subscribers = [s for s in self._subscribers if not s.dead]

    def _on_record(self, record):
        self.push_event({"event": "journal", "record": list(record)})

    # ------------------------------------------------------------------
    # control protocol

    def _accept_loop(self):
        while True:
            try:
                conn, _ = self._server.accept()
            except OSError:
                return
            t = threading.Thread(target=self._serve_conn, args=(conn,), daemon=True)
            t.start()

    def _serve_conn(self, conn):
        subscriber = None
        try:
            while True:
                msg = _recv_msg(conn)
                if msg is None:
                    return
                msg_id = msg.get("id")
                verb = msg.get("verb")
                payload = msg.get("payload") or {}
                try:
                    if verb == "subscribe" and subscriber is None:
                        subscriber = _Subscriber(conn)
                        with self._sub_lock:
                            self._subscribers.append(subscriber)
                        result = {"subscribed": True}
                    else:
                        result = self.handle(verb, payload)
                    reply = {"id": msg_id, "ok": True, "payload": result}
                except YoloError as e:
                    reply = {"id": msg_id, "ok": False, "error": str(e)}
                except Exception as e:  # defensive: never kill the daemon
                    logger.exception("control verb %s failed", verb)
                    reply = {"id": msg_id, "ok": False, "error": f"internal: {e}"}
                if subscriber is not None:
                    subscriber.push({"id": msg_id, "reply": reply})
                else:
                    _send_msg(conn, reply)
        except OSError:
            pass
        finally:
            if subscriber is not None:
                subscriber.close()
                self._reap()
            try:
                conn.close()
            except OSError:
                pass

    def handle(self, verb, payload):
        """Dispatch one control verb; also callable in-process."""
        ses = self.session
        if verb == "ping":
            return {
                "pid": os.getpid(),
                "base": self.base_root,
                "mount": self.mount_point,
                "generation": ses.gen.value,
            }
        if verb == "snapshot":
            name = payload.get("name") or ""
            gen = ses.snapshot(name)
            self.push_event(
                {"event": "marker", "tag": "P", "label": name, "gen": gen}
            )
            return {"generation": gen}
        if verb == "travel":
            gen = ses.travel(
                self._travel_target(payload.get("target")),
                label=payload.get("label"),
            )
            self.push_event(
                {
                    "event": "marker",
                    "tag": "T",
                    "label": payload.get("label") or "",
                    "gen": gen,
                }
            )
            return {"generation": gen}
        if verb == "diff":
            return {"entries": [e.as_dict() for e in ses.session_diff()]}
        if verb == "log":
            return ses.log_view()
        if verb == "commit":
            summary = ses.commit()
            self.push_event({"event": "commit", "summary": summary.as_dict()})
            return summary.as_dict()
        if verb == "abort":
            ses.abort()
            self.push_event({"event": "abort"})
            return {}
        if verb == "rule-add":
            version = ses.rules.set_rule(payload["path"], payload["state"])
            if payload.get("persist"):
                self._persist_rules()
            return {"version": version}
        if verb == "rule-remove":
            version = ses.rules.remove_rule(payload["path"])
            if payload.get("persist"):
                self._persist_rules()
            return {"version": version}
        if verb == "rule-list":
            return {"rules": ses.rules.rules(), "version": ses.rules.version}
        if verb == "decision":
            decision = Decision(
                verdict=payload["verdict"],
                install=(
                    (payload["install_path"], payload["install_state"])
                    if payload.get("install_path")
                    else None
                ),
                source=payload.get("source", "client"),
            )
            accepted = self.broker.decide(payload["ask_id"], decision)
            if accepted:
                self.push_event(
                    {
                        "event": "decision",
                        "ask_id": payload["ask_id"],
                        "verdict": decision.verdict,
                        "source": decision.source,
                    }
                )
            return {"accepted": accepted}
        if verb == "state":
            pending = self.broker.pending_details()
            return {
                "base": self.base_root,
                "mount": self.mount_point,
                "generation": ses.gen.value,
                "pending_asks": pending,
                "diff": [e.as_dict() for e in ses.session_diff()],
                "log": ses.log_view(),
            }
        if verb == "run-seq":
            self._run_seq += 1
            return {"seq": self._run_seq}
        raise SessionError(f"unknown verb {verb!r}")

    def _travel_target(self, target):
        if isinstance(target, int):
            return target
        if isinstance(target, str):
            if target.isdigit():
                return int(target)
            return self.session.resolve_marker(target)
        raise SessionError(f"invalid travel target {target!r}")

    def _persist_rules(self):
        cfg = SessionConfig(
            base_root=self.config.base_root,
            ask_timeout=self.config.ask_timeout,
            rules=self.session.rules.rules(),
            console_listen=self.config.console_listen,
            extra_roots=self.config.extra_roots,
        )
        path = os.path.join(self.base_root, "yolo.toml")
        with open(path, "w", encoding="utf-8") as f:
            f.write(dump_config(cfg))


class ControlClient:
    """Blocking JSON client for the control socket."""

    def __init__(self, socket_path):
        self.socket_path = socket_path
        self.sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
        self.sock.connect(socket_path)
        self._seq = 0

    def request(self, verb, payload=None):
        self._seq += 1
        _send_msg(self.sock, {"id": self._seq, "verb": verb, "payload": payload or {}})
        reply = _recv_msg(self.sock)
        if reply is None:
            raise SessionError("daemon closed the connection")
        if not reply.get("ok"):
            raise SessionError(reply.get("error", "unknown daemon error"))
        return reply.get("payload")

    def close(self):
        try:
            self.sock.close()
        except OSError:
            pass


class SubscriberClient:
    """Client that subscribes to events; replies and events share the stream."""

    def __init__(self, socket_path):
        self.sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
        self.sock.connect(socket_path)
        self._seq = 0
        self.events = queue.Queue()
        self._replies = {}
        self._reply_cond = threading.Condition()
        self._send_lock = threading.Lock()
        sub_id = self._send("subscribe")
        self._thread = threading.Thread(target=self._pump, daemon=True)
        self._thread.start()
        # events published before the daemon registers this subscriber would
        # be lost; block until the subscription round-trips
        with self._reply_cond:
            deadline = time.time() + 10.0
            while sub_id not in self._replies:
                remaining = deadline - time.time()
                if remaining <= 0 or not self._thread.is_alive():
                    raise SessionError("subscribe handshake failed")
                self._reply_cond.wait(remaining)
            self._replies.pop(sub_id)

    def _send(self, verb, payload=None):
        self._seq += 1
        with self._send_lock:
            _send_msg(
                self.sock, {"id": self._seq, "verb": verb, "payload": payload or {}}
            )
        return self._seq

    def request(self, verb, payload=None, timeout=10.0):
        msg_id = self._send(verb, payload)
        with self._reply_cond:
            deadline = time.time() + timeout
            while msg_id not in self._replies:
                remaining = deadline - time.time()
                if remaining <= 0 or not self._thread.is_alive():
                    raise SessionError(f"no reply to {verb} within {timeout}s")
                self._reply_cond.wait(remaining)
            reply = self._replies.pop(msg_id)
        if not reply.get("ok"):
            raise SessionError(reply.get("error", "unknown daemon error"))
        return reply.get("payload")

    def _pump(self):
        try:
            while True:
                msg = _recv_msg(self.sock)
                if msg is None:
                    return
                if "reply" in msg:
                    with self._reply_cond:
                        self._replies[msg["reply"]["id"]] = msg["reply"]
                        self._reply_cond.notify_all()
                else:
                    self.events.put(msg)
        except OSError:
            pass
        finally:
            self.events.put(None)

    def next_event(self, timeout=None):
        try:
            return self.events.get(timeout=timeout)
        except queue.Empty:
            return None

    def close(self):
        try:
            self.sock.close()
        except OSError:
            pass
