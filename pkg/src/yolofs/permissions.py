"""Progressive path permissions.

Rules attach one of five states to logical paths: allow, read_only, deny,
hidden, ask.  The effective state of a path is the nearest governing rule on
its ancestor chain (more specific rules override broader ones), except that a
hidden ancestor wins outright — everything below it behaves as nonexistent.
Paths no rule governs default to ask.

Rule changes bump a global version instead of recomputing any subtree;
cached resolutions revalidate lazily by walking up to the nearest ancestor
with a fresh entry, so a change costs O(1) and the next access O(depth).
"""

from __future__ import annotations

import itertools
import logging
import threading
import time
import uuid
from dataclasses import dataclass, field

from yolofs import core
from yolofs.errors import InvalidPath

logger = logging.getLogger(__name__)

# rule states
ALLOW = "allow"
READ_ONLY = "read_only"
DENY = "deny"
HIDDEN = "hidden"
ASK = "ask"
RULE_STATES = (ALLOW, READ_ONLY, DENY, HIDDEN, ASK)

# access kinds; GETATTR is the metadata probe split out of READ because a
# denied path keeps its name and metadata visible while contents stay blocked
READ = "read"
WRITE = "write"
MUTATE = "mutate"
LIST = "list"
GETATTR = "getattr"

# check outcomes
ALLOWED = "allowed"
DENIED = "denied"
NOT_FOUND = "not_found"
NEEDS_ASK = "needs_ask"

_OUTCOME = {
    ALLOW: dict.fromkeys((READ, WRITE, MUTATE, LIST, GETATTR), ALLOWED),
    READ_ONLY: {
        READ: ALLOWED,
        LIST: ALLOWED,
        GETATTR: ALLOWED,
        WRITE: DENIED,
        MUTATE: DENIED,
    },
    DENY: {
        READ: DENIED,
        WRITE: DENIED,
        MUTATE: DENIED,
        LIST: DENIED,
        GETATTR: ALLOWED,
    },
    HIDDEN: dict.fromkeys((READ, WRITE, MUTATE, LIST, GETATTR), NOT_FOUND),
    ASK: dict.fromkeys((READ, WRITE, MUTATE, LIST, GETATTR), NEEDS_ASK),
}


class RuleTree:
    """Path-keyed rule map with a strictly increasing version."""

    def __init__(self, rules=None):
        self._flat = {}
        self._nested = {"state": None, "kids": {}}
        self.version = 1
        self._lock = threading.Lock()
        self._cache = {}
        self.last_probe_count = 0
        for path, state in rules or ():
            self.set_rule(path, state)

    @staticmethod
    def _parts(path):
        try:
            return core.norm_parts(path)
        except ValueError as e:
            raise InvalidPath(str(e)) from None

    def set_rule(self, path, state):
        if state not in RULE_STATES:
            raise InvalidPath(f"unknown rule state {state!r}")
        parts = self._parts(path)
        with self._lock:
            self._flat[parts] = state
            node = self._nested
            for comp in parts:
                node = node["kids"].setdefault(comp, {"state": None, "kids": {}})
            node["state"] = state
            self.version += 1
            return self.version

    def remove_rule(self, path):
        parts = self._parts(path)
        with self._lock:
            if parts in self._flat:
                del self._flat[parts]
                node = self._nested
                for comp in parts:
                    node = node["kids"][comp]
                node["state"] = None
            # version bumps either way: invalidation stays uniform
            self.version += 1
            return self.version

    def rules(self):
        return sorted(
            ("/".join(parts), state) for parts, state in self._flat.items()
        )

    def effective_nocache(self, path):
        """From-scratch effective state (ask when no rule governs the path)."""
        state = core.rule_effective(self._nested, self._parts(path))
        return state if state is not None else ASK

    def effective(self, path):
        """Cached effective state; revalidates bottom-up after rule changes."""
        return self._effective(self._parts(path))

    def _effective(self, parts):
        version = self.version
        cache = self._cache
        hit = cache.get(parts)
        if hit is not None and hit[1] == version:
            return hit[0]
        # walk up to the nearest ancestor with a fresh cache entry (or root),
        # then recompute downward; cost is bounded by path depth
        stale = []
        p = parts
        state = None
        probes = 0
        while True:
            probes += 1
            if not p:
                root_rule = self._flat.get((), None)
                state = root_rule if root_rule is not None else ASK
                cache[()] = (state, version)
                break
            stale.append(p)
            hit = cache.get(p[:-1])
            if hit is not None and hit[1] == version:
                state = hit[0]
                break
            p = p[:-1]
        for q in reversed(stale):
            if state != HIDDEN:
                rule = self._flat.get(q)
                if rule is not None:
                    state = rule
            cache[q] = (state, version)
        self.last_probe_count = probes
        return state

    def check(self, path, kind):
        """Outcome of one access: allowed, denied, not_found, or needs_ask."""
        return _OUTCOME[self._effective(self._parts(path))][kind]


@dataclass(frozen=True)
class AskRequest:
    """A blocked access waiting on a human decision."""

    path: str
    kind: str
    process: str
    id: str = field(default_factory=lambda: uuid.uuid4().hex[:12])


@dataclass(frozen=True)
class Decision:
    verdict: str  # "allow" | "deny"
    install: tuple[str, str] | None = None  # (path, rule state) to add first
    source: str = ""


class AskBroker:
    """Blocks an access until a decision arrives or the timeout denies it.

    Decisions are matched by request id; the first one wins.  Subclasses (the
    session daemon) override `publish` to fan the request out to subscribers;
    the base class has no audience, so every ask times out — the fail-safe.
    """

    def __init__(self, timeout=120.0):
        self.timeout = timeout
        self._pending = {}
        self._lock = threading.Lock()
        self._seq = itertools.count(1)

    def publish(self, request):  # pragma: no cover - overridden by the daemon
        pass

    def pending(self):
        with self._lock:
            return list(self._pending)

    def pending_details(self):
        with self._lock:
            return [
                {
                    "id": rid,
                    "path": slot["request"].path,
                    "kind": slot["request"].kind,
                    "process": slot["request"].process,
                    "ts": slot["ts"],
                }
                for rid, slot in self._pending.items()
            ]

    def ask(self, request):
        event = threading.Event()
        slot = {"event": event, "decision": None, "request": request, "ts": time.time()}
        with self._lock:
            self._pending[request.id] = slot
        try:
            self.publish(request)
            if not event.wait(self.timeout):
                logger.warning(
                    "ask timed out after %ss: %s %s by %s",
                    self.timeout,
                    request.kind,
                    request.path,
                    request.process,
                )
                return Decision("deny", source="timeout")
            return slot["decision"]
        finally:
            with self._lock:
                self._pending.pop(request.id, None)

    def decide(self, ask_id, decision):
        """Resolve a pending ask; returns False if it was already decided."""
        with self._lock:
            slot = self._pending.get(ask_id)
            if slot is None or slot["decision"] is not None:
                return False
            slot["decision"] = decision
            slot["event"].set()
            return True
