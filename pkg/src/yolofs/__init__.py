"""yolofs: a staging filesystem for agent sessions.

All mutations made through the mount are staged over an untouched base
directory, journaled for audit, snapshotable with non-destructive travel,
and gated by progressive path permissions until a human commits or aborts.
"""

__version__ = "0.1.0"
