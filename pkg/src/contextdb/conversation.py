"""Conversational tier: a durable append-only chat log.

One JSONL file holds every session; each line is exactly
{session_id, seq, role, text, timestamp, metadata}. The store assigns seq
(contiguous from 0 per session) and timestamp (non-decreasing per session),
so callers can never race a sequence number. Recovery tolerates a torn final
line -- the usual crash artifact of an interrupted append -- by truncating
it; corruption anywhere earlier is refused loudly.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Callable, Mapping

from .core import MetaValue, _validate_metadata
from .errors import StorageError

ROLES = ("user", "assistant", "system")


@dataclass(frozen=True)
class Message:
    session_id: str
    seq: int
    role: str
    text: str
    timestamp: int  # milliseconds since the Unix epoch
    metadata: Mapping[str, MetaValue] = field(default_factory=dict)

    def __post_init__(self):
        if not self.session_id:
            raise ValueError("session_id must be nonempty")
        if self.role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}, got {self.role!r}")
        if self.seq < 0:
            raise ValueError(f"seq must be >= 0, got {self.seq}")
        object.__setattr__(self, "metadata",
                           MappingProxyType(_validate_metadata(self.metadata)))


class ConversationStore:
    """Append-only message log, reopenable from its file at any time."""

    def __init__(self, path: str | Path, clock: Callable[[], float] = time.time):
        self._path = Path(path)
        self._clock = clock
        self._lock = threading.RLock()
        self._sessions: dict[str, list[Message]] = {}
        self._recover()
        try:
            self._fh = open(self._path, "ab")
        except OSError as exc:
            raise StorageError(f"cannot open {self._path}: {exc}") from exc

    def _recover(self) -> None:
        if not self._path.exists():
            return
        try:
            raw = self._path.read_bytes()
        except OSError as exc:
            raise StorageError(f"cannot read {self._path}: {exc}") from exc
        good = len(raw)
        lines = raw.split(b"\n")
        tail = lines.pop()  # bytes after the final newline ("" when clean)
        if tail:
            good -= len(tail)  # torn final line: drop it
        for lineno, line in enumerate(lines, start=1):
            try:
                rec = json.loads(line)
                msg = Message(session_id=rec["session_id"], seq=rec["seq"],
                              role=rec["role"], text=rec["text"],
                              timestamp=rec["timestamp"],
                              metadata=rec["metadata"])
            except Exception as exc:
                if lineno == len(lines) and not tail:
                    # torn final line that did get its newline out
                    good -= len(line) + 1
                    break
                raise StorageError(
                    f"{self._path}:{lineno}: corrupt record: {exc}") from exc
            history = self._sessions.setdefault(msg.session_id, [])
            if msg.seq != len(history):
                raise StorageError(
                    f"{self._path}:{lineno}: session {msg.session_id!r} "
                    f"expected seq {len(history)}, found {msg.seq}")
            history.append(msg)
        if good != len(raw):
            os.truncate(self._path, good)

    # -- writes ---------------------------------------------------------

    def append_message(self, session_id: str, role: str, text: str,
                       metadata: Mapping[str, MetaValue] | None = None) -> Message:
        """Durably append one message; the store assigns seq and timestamp."""
        with self._lock:
            history = self._sessions.get(session_id, [])
            now = int(self._clock() * 1000)
            if history:
                now = max(now, history[-1].timestamp)
            msg = Message(session_id=session_id, seq=len(history), role=role,
                          text=text, timestamp=now, metadata=metadata or {})
            line = json.dumps(
                {"session_id": msg.session_id, "seq": msg.seq,
                 "role": msg.role, "text": msg.text,
                 "timestamp": msg.timestamp,
                 "metadata": dict(msg.metadata)},
                ensure_ascii=False, separators=(",", ":")) + "\n"
            try:
                self._fh.write(line.encode("utf-8"))
                self._fh.flush()
            except OSError as exc:
                raise StorageError(
                    f"append to {self._path} failed: {exc}") from exc
            # memory is updated only after the bytes are down
            self._sessions.setdefault(session_id, history).append(msg)
            return msg

    # -- reads ------------------------------------------------------------

    def get_history(self, session_id: str, last_n: int) -> list[Message]:
        """Last min(last_n, length) messages, ascending seq; [] when unknown."""
        if last_n < 1:
            raise ValueError(f"last_n must be >= 1, got {last_n}")
        with self._lock:
            return list(self._sessions.get(session_id, [])[-last_n:])

    def count(self, session_id: str) -> int:
        with self._lock:
            return len(self._sessions.get(session_id, []))

    def list_sessions(self) -> list[tuple[str, int]]:
        """(session_id, message count) for every nonempty session, sorted."""
        with self._lock:
            return sorted((sid, len(msgs))
                          for sid, msgs in self._sessions.items() if msgs)

    # -- lifecycle -----------------------------------------------------------

    def close(self) -> None:
        with self._lock:
            if not self._fh.closed:
                self._fh.flush()
                os.fsync(self._fh.fileno())
                self._fh.close()

    def __enter__(self) -> "ConversationStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
