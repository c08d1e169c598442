"""Session configuration: `yolo.toml` under the project directory.

Schema:

    base = "/path/to/project"      # optional; CLI argument wins
    ask_timeout = 120              # seconds until an unanswered ask denies

    [[rule]]
    path = "/"
    state = "allow"                # allow | read_only | deny | hidden | ask

    [console]
    listen = "127.0.0.1:7070"      # enables the browser console shim

The stdlib of this interpreter has no TOML reader and the package carries no
dependencies, so this is a deliberately small parser covering exactly the
schema above (plus string lists for extra_roots): quoted strings, integers,
booleans, one-line string arrays, `[table]` and `[[array-of-table]]` headers,
and `#` comments.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from yolofs.errors import SessionError
from yolofs.permissions import RULE_STATES

_KEY_RE = re.compile(r"^([A-Za-z0-9_-]+)\s*=\s*(.+)$")


@dataclass
class SessionConfig:
    base_root: str | None = None
    ask_timeout: float = 120.0
    rules: list = field(default_factory=list)  # [(path, state), ...]
    console_listen: str | None = None
    extra_roots: list = field(default_factory=list)


def _strip_comment(line):
    out = []
    in_str = False
    for ch in line:
        if ch == '"':
            in_str = not in_str
        elif ch == "#" and not in_str:
            break
        out.append(ch)
    return "".join(out).strip()


def _parse_value(raw, where):
    raw = raw.strip()
    if raw.startswith('"') and raw.endswith('"') and len(raw) >= 2:
        return raw[1:-1].replace('\\"', '"').replace("\\\\", "\\")
    if raw in ("true", "false"):
        return raw == "true"
    if raw.startswith("[") and raw.endswith("]"):
        inner = raw[1:-1].strip()
        if not inner:
            return []
        return [_parse_value(item, where) for item in inner.split(",")]
    try:
        return int(raw)
    except ValueError:
        raise SessionError(f"{where}: cannot parse value {raw!r}") from None


def parse_config(text):
    cfg = SessionConfig()
    section = None  # None (top) | "console" | dict of the open [[rule]]
    pending_rule = None

    def close_rule():
        nonlocal pending_rule
        if pending_rule is not None:
            path = pending_rule.get("path")
            state = pending_rule.get("state")
            if path is None or state is None:
                raise SessionError("[[rule]] needs both path and state")
            if state not in RULE_STATES:
                raise SessionError(f"unknown rule state {state!r}")
            cfg.rules.append((path, state))
            pending_rule = None

    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw_line)
        if not line:
            continue
        where = f"yolo.toml line {lineno}"
        if line == "[[rule]]":
            close_rule()
            pending_rule = {}
            section = "rule"
            continue
        if line.startswith("[") and line.endswith("]"):
            close_rule()
            name = line.strip("[]")
            if name != "console":
                raise SessionError(f"{where}: unknown section {line}")
            section = "console"
            continue
        m = _KEY_RE.match(line)
        if not m:
            raise SessionError(f"{where}: cannot parse {line!r}")
        key, value = m.group(1), _parse_value(m.group(2), where)
        if section == "rule":
            pending_rule[key] = value
        elif section == "console":
            if key == "listen":
                cfg.console_listen = str(value)
            else:
                raise SessionError(f"{where}: unknown console key {key!r}")
        else:
            if key == "base":
                cfg.base_root = str(value)
            elif key == "ask_timeout":
                cfg.ask_timeout = float(value)
            elif key == "extra_roots":
                cfg.extra_roots = [str(v) for v in value]
            else:
                raise SessionError(f"{where}: unknown key {key!r}")
    close_rule()
    return cfg


def load_config(path):
    with open(path, encoding="utf-8") as f:
        return parse_config(f.read())


def dump_config(cfg):
    """Canonical regeneration (comments are not preserved)."""
    lines = []
    if cfg.base_root is not None:
        lines.append(f'base = "{cfg.base_root}"')
    lines.append(f"ask_timeout = {int(cfg.ask_timeout)}")
    if cfg.extra_roots:
        roots = ", ".join(f'"{r}"' for r in cfg.extra_roots)
        lines.append(f"extra_roots = [{roots}]")
    for path, state in cfg.rules:
        lines.append("")
        lines.append("[[rule]]")
        lines.append(f'path = "{path}"')
        lines.append(f'state = "{state}"')
    if cfg.console_listen:
        lines.append("")
        lines.append("[console]")
        lines.append(f'listen = "{cfg.console_listen}"')
    return "\n".join(lines) + "\n"
