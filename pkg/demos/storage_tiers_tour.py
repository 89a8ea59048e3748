"""The three context tiers on disk: logs you can kill -9.

Conversational memory is an append-only JSONL log, situational memory is a
snapshot-on-write profile log (last line per user wins), and semantic memory
serializes to a checksummed snapshot file. All three reopen from disk into
exactly the state they left; the conversation log even heals a torn final
line, the signature a crash leaves behind.
"""

import tempfile
from pathlib import Path

import numpy as np

from contextdb import (ConversationStore, Document, HnswIndex, HnswParams,
                       ProfileStore, Vector, load_index, read_header)

workdir = Path(tempfile.mkdtemp(prefix="contextdb-tiers-"))

print("== tier 1: conversational (append-only log) ===================")

log = workdir / "conversations.jsonl"
with ConversationStore(log) as store:
    store.append_message("support-7", "user", "my order never arrived")
    store.append_message("support-7", "assistant", "let me look that up")
    store.append_message("support-7", "user", "order id is 88123")
print(f"appended 3 messages to {log.name}")

# crash simulation: a process dies halfway through a write, leaving a
# torn final line on disk
with open(log, "a", encoding="utf-8") as fh:
    fh.write('{"session_id": "support-7", "seq": 3, "role": "assist')
print("simulated a crash mid-append (torn final line)")

with ConversationStore(log) as store:
    history = store.get_history("support-7", last_n=10)
    print(f"reopened: {len(history)} intact messages, torn tail discarded")
    for msg in history:
        print(f"  seq={msg.seq} {msg.role}: {msg.text}")
    msg = store.append_message("support-7", "assistant", "found it")
    print(f"next append continues at seq={msg.seq}")

print()
print("== tier 2: situational (snapshot-on-write profiles) ===========")

with ProfileStore(workdir / "profiles.jsonl") as profiles:
    profiles.put_profile("casey", {"tier": "gold", "orders": 14})
    profiles.update_field("casey", "orders", 15)
    profiles.put_profile("rowan", {"tier": "gold"})
    prof = profiles.get_profile("casey")
    print(f"casey -> {dict(prof.fields)} (updated_at={prof.updated_at})")
    gold = [p.user_id for p in profiles.query_by_field("tier", "gold")]
    print(f"equality index, tier=gold -> {sorted(gold)}")

lines = (workdir / "profiles.jsonl").read_text().splitlines()
print(f"on disk: {len(lines)} snapshot lines (every write appends a full")
print("profile; replay keeps the last one per user)")

print()
print("== tier 3: semantic (checksummed index snapshot) ==============")

rng = np.random.default_rng(42)
index = HnswIndex(HnswParams(m=8, ef_construction=80, ef_search=40, seed=3))
for i, row in enumerate(rng.standard_normal((200, 16))):
    index.insert(Document(id=f"note-{i:03d}", text=f"note {i}",
                          metadata={"shelf": i % 4}, embedding=Vector(row)))
index.remove("note-007")  # tombstones serialize too

snap = workdir / "index.snap"
index.save(snap)
header = read_header(snap)
print(f"saved {snap.stat().st_size} bytes, header={header}")

loaded = load_index(snap)
q = Vector(rng.standard_normal(16))
before = [(h.doc_id, round(h.distance, 6)) for h in index.search(q, 5)]
after = [(h.doc_id, round(h.distance, 6)) for h in loaded.search(q, 5)]
print(f"search before save: {before}")
print(f"search after load:  {after}")
print(f"hit-for-hit identical: {before == after}")

print()
print(f"(everything written under {workdir})")
