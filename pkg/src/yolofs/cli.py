"""`yolo` command line: session lifecycle, review, and the agent exec hook.

Commands talk to a running session daemon over its control socket, found via
--socket, $YOLO_SOCKET, or a `.yolo/control.sock` discovered upward from the
current directory (the base directory side; the mount hides `.yolo`).
"""

from __future__ import annotations

import argparse
import json
import os
import signal
import subprocess
import sys
import threading

from yolofs import __version__
from yolofs.config import SessionConfig, load_config
from yolofs.errors import SessionError, YoloError
from yolofs.session import ControlClient, SessionDaemon, SubscriberClient

SENTINEL = "#yolo-changes"

_KIND_CODE = {"created": "C", "modified": "M", "deleted": "D", "renamed": "R"}


def render_diff(entries):
    """One line per change: `C|M|D|R<TAB>path[<TAB>← src]`."""
    lines = []
    for e in entries:
        code = _KIND_CODE[e["kind"]]
        if e["kind"] == "renamed":
            lines.append(f"{code}\t{e['path']}\t← {e['src']}")
        else:
            lines.append(f"{code}\t{e['path']}")
    return "\n".join(lines)


def find_socket(explicit=None):
    if explicit:
        return explicit
    env = os.environ.get("YOLO_SOCKET")
    if env:
        return env
    cur = os.getcwd()
    while True:
        cand = os.path.join(cur, ".yolo", "control.sock")
        if os.path.exists(cand):
            return cand
        parent = os.path.dirname(cur)
        if parent == cur:
            break
        cur = parent
    raise SessionError(
        "no control socket found; pass --socket or set YOLO_SOCKET"
    )


def _client(args):
    return ControlClient(find_socket(getattr(args, "socket", None)))


# ----------------------------------------------------------------------
# mount / unmount


def cmd_mount(args):
    base = os.path.abspath(args.base)
    cfg_path = args.config or os.path.join(base, "yolo.toml")
    if os.path.exists(cfg_path):
        config = load_config(cfg_path)
    else:
        config = SessionConfig()
    config.base_root = base
    if args.allow_all:
        config.rules.insert(0, ("/", "allow"))
    if args.ask_timeout is not None:
        config.ask_timeout = args.ask_timeout

    if args.detach:
        pid = os.fork()
        if pid:
            print(f"session daemon pid {pid}")
            return 0
        os.setsid()

    daemon = SessionDaemon(base, config, args.mnt)
    serve_fuse = not args.no_kernel_mount
    daemon.start(serve_fuse=serve_fuse)
    if not config.rules:
        print(
            "note: no rules configured; every access will ask "
            "(add rules to yolo.toml or use --allow-all)",
            file=sys.stderr,
        )

    def _shutdown(signum, frame):
        daemon.stop()
        sys.exit(0)

    signal.signal(signal.SIGTERM, _shutdown)
    signal.signal(signal.SIGINT, _shutdown)
    print(f"mounted {base} at {args.mnt} (socket {daemon.socket_path})")
    try:
        daemon.wait()
    finally:
        daemon.stop()
    return 0


def cmd_unmount(args):
    from yolofs import fusebridge

    fusebridge.unmount(args.mnt)
    print(f"unmounted {args.mnt}")
    return 0


# ----------------------------------------------------------------------
# run: the agent exec hook


def _diff_key(entry):
    return (entry["path"], entry["kind"], entry.get("src"))


def cmd_run(args):
    if not args.cmd:
        print("run: no command given", file=sys.stderr)
        return 2
    socket_path = find_socket(args.socket)
    client = ControlClient(socket_path)
    info = client.request("ping")
    mount, base = info["mount"], info["base"]
    if not mount:
        raise SessionError("session has no kernel mount; `yolo run` needs one")

    if not args.no_snapshot:
        seq = client.request("run-seq")["seq"]
        client.request("snapshot", {"name": f"pre:{seq}"})
    before = {_diff_key(e) for e in client.request("diff")["entries"]}

    prompt_stop = None
    if sys.stdin.isatty() and not args.no_prompt:
        prompt_stop = _start_prompt_loop(socket_path)

    cwd = os.getcwd()
    if cwd == base or cwd.startswith(base + os.sep):
        child_cwd = os.path.join(mount, os.path.relpath(cwd, base))
    elif cwd == mount or cwd.startswith(mount + os.sep):
        child_cwd = cwd
    else:
        child_cwd = mount
    env = dict(os.environ, YOLO_SOCKET=socket_path)
    try:
        # preexec_fn forces fork over vfork; vfork would suspend this whole
        # process while the child chdirs into the mount, which deadlocks when
        # the mount is served by one of our threads
        proc = subprocess.run(
            args.cmd, cwd=child_cwd, env=env, preexec_fn=lambda: None
        )
        status = proc.returncode
    except FileNotFoundError:
        print(f"run: command not found: {args.cmd[0]}", file=sys.stderr)
        status = 127
    finally:
        if prompt_stop:
            prompt_stop.set()

    after = client.request("diff")["entries"]
    delta = [e for e in after if _diff_key(e) not in before]
    print(f"{SENTINEL} {len(delta)}")
    if delta:
        print(render_diff(delta))
    client.close()
    return status


def _start_prompt_loop(socket_path):
    """Answer ask events on the terminal while a wrapped command runs."""
    stop = threading.Event()

    def loop():
        sub = SubscriberClient(socket_path)
        while not stop.is_set():
            event = sub.next_event(timeout=0.25)
            if event is None:
                continue
            if event.get("event") == "ask":
                _prompt_one(sub, event["ask"])
        sub.close()

    threading.Thread(target=loop, daemon=True).start()
    return stop


def _prompt_one(sub, ask):
    print(
        f"\n[yolo] {ask['process']} wants {ask['kind']} on {ask['path']!r}",
        file=sys.stderr,
    )
    print(
        "  [a]llow once  [d]eny once  [A]llow subtree  [D]eny subtree  [h]ide",
        file=sys.stderr,
    )
    try:
        choice = input("> ").strip() or "d"
    except EOFError:
        return
    payload = {"ask_id": ask["id"], "verdict": "deny", "source": "cli"}
    parent = os.path.dirname(ask["path"]) or "/"
    if choice == "a":
        payload["verdict"] = "allow"
    elif choice == "A":
        scope = input(f"rule path [{parent}]: ").strip() or parent
        payload.update(verdict="allow", install_path=scope, install_state="allow")
    elif choice == "D":
        scope = input(f"rule path [{parent}]: ").strip() or parent
        payload.update(verdict="deny", install_path=scope, install_state="deny")
    elif choice == "h":
        payload.update(verdict="deny", install_path=ask["path"], install_state="hidden")
    try:
        sub.request("decision", payload)
    except SessionError as e:
        print(f"[yolo] {e}", file=sys.stderr)


# ----------------------------------------------------------------------
# review verbs


def cmd_diff(args):
    client = _client(args)
    payload = client.request("diff")
    if args.json:
        print(json.dumps(payload))
    else:
        text = render_diff(payload["entries"])
        if text:
            print(text)
    return 0


def cmd_log(args):
    client = _client(args)
    view = client.request("log")
    print(f"generation {view['generation']}")
    for seg in view["segments"]:
        live = "live" if seg["live"] else "dead"
        print(f"  seg {seg['gen']}: {seg['records']} records [{live}]")
    for marker in view["markers"]:
        target = f" -> {marker['target']}" if marker["tag"] == "T" else ""
        print(f"  gen {marker['gen']}: {marker['tag']} {marker['label']!r}{target}")
    return 0


def cmd_snapshot(args):
    gen = _client(args).request("snapshot", {"name": args.name})["generation"]
    print(f"snapshot {args.name!r} at generation {gen}")
    return 0


def cmd_travel(args):
    target = int(args.target) if args.target.isdigit() else args.target
    gen = _client(args).request("travel", {"target": target})["generation"]
    print(f"traveled to {args.target} (now at generation {gen})")
    return 0


def cmd_commit(args):
    summary = _client(args).request("commit")
    print(
        f"committed {summary['applied']} records, "
        f"{summary['moved_files']} files, {summary['bytes_moved']} bytes"
    )
    return 0


def cmd_abort(args):
    _client(args).request("abort")
    print("aborted: all staged changes discarded")
    return 0


def cmd_rule(args):
    client = _client(args)
    if args.rule_cmd == "add":
        v = client.request(
            "rule-add",
            {"path": args.path, "state": args.state, "persist": args.persist},
        )["version"]
        print(f"rule added (version {v})")
    elif args.rule_cmd == "remove":
        v = client.request(
            "rule-remove", {"path": args.path, "persist": args.persist}
        )["version"]
        print(f"rule removed (version {v})")
    else:
        payload = client.request("rule-list")
        for path, state in payload["rules"]:
            print(f"{state}\t/{path}" if not path.startswith("/") else f"{state}\t{path}")
    return 0


def cmd_serve(args):
    from yolofs.console import serve_console

    socket_path = find_socket(args.socket)
    listen = args.listen
    if not listen:
        try:
            client = ControlClient(socket_path)
            client.request("ping")
            client.close()
        except OSError as e:
            raise SessionError(f"cannot reach daemon: {e}") from e
        listen = "127.0.0.1:7070"
    host, _, port = listen.rpartition(":")
    return serve_console(socket_path, host or "127.0.0.1", int(port), args.static)


def cmd_bench(args):
    from yolofs import bench

    return bench.run_suite(args)


# ----------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="yolo", description=__doc__)
    p.add_argument("--version", action="version", version=f"yolo {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("mount", help="start a session daemon over a base directory")
    sp.add_argument("base")
    sp.add_argument("mnt")
    sp.add_argument("--config", help="yolo.toml path (default: <base>/yolo.toml)")
    sp.add_argument("--allow-all", action="store_true",
                    help="prepend an allow rule for the whole tree")
    sp.add_argument("--ask-timeout", type=float, default=None)
    sp.add_argument("--no-kernel-mount", action="store_true",
                    help="control socket only; no FUSE mount")
    sp.add_argument("--detach", action="store_true")
    sp.set_defaults(func=cmd_mount)

    sp = sub.add_parser("unmount", help="unmount a session mount point")
    sp.add_argument("mnt")
    sp.set_defaults(func=cmd_unmount)

    sp = sub.add_parser("run", help="run a command against the mounted view")
    sp.add_argument("--no-snapshot", action="store_true",
                    help="skip the automatic pre:<n> snapshot")
    sp.add_argument("--no-prompt", action="store_true")
    sp.add_argument("--socket")
    sp.add_argument("cmd", nargs=argparse.REMAINDER)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("diff", help="staged changes against the base")
    sp.add_argument("--json", action="store_true")
    sp.add_argument("--socket")
    sp.set_defaults(func=cmd_diff)

    sp = sub.add_parser("log", help="journal segments and markers")
    sp.add_argument("--socket")
    sp.set_defaults(func=cmd_log)

    sp = sub.add_parser("snapshot", help="record a named snapshot")
    sp.add_argument("name")
    sp.add_argument("--socket")
    sp.set_defaults(func=cmd_snapshot)

    sp = sub.add_parser("travel", help="return to an earlier generation or name")
    sp.add_argument("target")
    sp.add_argument("--socket")
    sp.set_defaults(func=cmd_travel)

    sp = sub.add_parser("commit", help="replay staged changes onto the base")
    sp.add_argument("--socket")
    sp.set_defaults(func=cmd_commit)

    sp = sub.add_parser("abort", help="discard all staged changes")
    sp.add_argument("--socket")
    sp.set_defaults(func=cmd_abort)

    sp = sub.add_parser("rule", help="permission rule administration")
    rsub = sp.add_subparsers(dest="rule_cmd", required=True)
    rp = rsub.add_parser("add")
    rp.add_argument("path")
    rp.add_argument("state",
                    choices=["allow", "read_only", "deny", "hidden", "ask"])
    rp.add_argument("--persist", action="store_true",
                    help="also write the rule to yolo.toml")
    rp.add_argument("--socket")
    rp = rsub.add_parser("remove")
    rp.add_argument("path")
    rp.add_argument("--persist", action="store_true")
    rp.add_argument("--socket")
    rp = rsub.add_parser("list")
    rp.add_argument("--socket")
    sp.set_defaults(func=cmd_rule)

    sp = sub.add_parser("serve", help="HTTP/SSE shim for the browser console")
    sp.add_argument("--listen", help="host:port (default 127.0.0.1:7070)")
    sp.add_argument("--static", help="directory with the console frontend build")
    sp.add_argument("--socket")
    sp.set_defaults(func=cmd_serve)

    sp = sub.add_parser("bench", help="performance suites")
    sp.add_argument("suite", choices=["io", "meta", "snap", "commit", "core"])
    sp.add_argument("--csv", help="write raw samples to this CSV file")
    sp.add_argument("--seed", type=int, default=7)
    sp.add_argument("--quick", action="store_true",
                    help="reduced parameters for smoke testing")
    sp.add_argument("--workdir", help="scratch directory for benchmark trees")
    sp.set_defaults(func=cmd_bench)

    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "cmd", None) and args.cmd and args.cmd[0] == "--":
        args.cmd = args.cmd[1:]
    try:
        return args.func(args)
    except YoloError as e:
        print(f"yolo: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
