"""One query's trip through the pipeline, stage by stage.

Every turn runs the same eight steps: cache probe, history fetch, profile
fetch, embed, vector search, prompt assembly, LLM call, persist. This script
makes each one visible — what the engineered prompt looks like once history,
situation, and retrieved documents are stitched in, what a cache hit skips,
and what a mid-flight LLM failure leaves behind (nothing).
"""

import tempfile
from pathlib import Path

from contextdb import (ConversationStore, FixtureEmbedder, MockLlm, Pipeline,
                       ProfileStore, ResponseCache, StageError)
from contextdb.cli import demo_index


class ShowPromptLlm(MockLlm):
    # keeps the last engineered prompt around so we can print it
    def complete(self, prompt):
        self.last_prompt = prompt
        return super().complete(prompt)


workdir = Path(tempfile.mkdtemp(prefix="contextdb-tour-"))
conversations = ConversationStore(workdir / "conversations.jsonl")
profiles = ProfileStore(workdir / "profiles.jsonl")
llm = ShowPromptLlm()

pipeline = Pipeline(index=demo_index(), conversations=conversations,
                    profiles=profiles, embedder=FixtureEmbedder(), llm=llm,
                    cache=ResponseCache(capacity=64, default_ttl_ms=60_000))

print("== turn 1: cold cache, empty history ==========================")

question = "I need comfortable running shoes under $100"
resp = pipeline.handle_query("demo-session", "casey", question, k=2)
print(f"answer:  {resp.text}")
print(f"cached:  {resp.cached}")
print("stages:  " + " ".join(f"{s}={ms:.2f}ms"
                             for s, ms in resp.latency_breakdown.items()))

print()
print("== the engineered prompt ======================================")
print(llm.last_prompt.rendered)

print()
print("== turn 2: identical question =================================")

resp2 = pipeline.handle_query("demo-session", "casey", question, k=2)
print(f"answer:  {resp2.text}")
print(f"cached:  {resp2.cached}  "
      f"(stages run: {', '.join(resp2.latency_breakdown)})")
print(f"messages on disk: {conversations.count('demo-session')} "
      "(a cached reply re-persists nothing)")

print()
print("== turn 3: the user now has a profile =========================")

profiles.put_profile("casey", {"activity": "marathon training",
                               "budget": 100, "prefers_cushioning": True})
pipeline.cache.clear()  # force a full pass so the new profile is consulted
resp3 = pipeline.handle_query("demo-session", "casey",
                              "Reebok Floatride", k=1)
print(f"answer:  {resp3.text}")
print()
print("prompt now carries the situation block and turn-1 history:")
print()
print(llm.last_prompt.rendered)

print()
print("== turn 4: the model fails mid-flight =========================")

before = conversations.count("demo-session")
llm.fail = True
try:
    pipeline.handle_query("demo-session", "casey", "ASICS Gel-Kayano", k=1)
except StageError as exc:
    print(f"raised:  {exc}")
    print(f"stage:   {exc.stage}")
llm.fail = False
after = conversations.count("demo-session")
print(f"messages on disk before={before} after={after} — a failed turn")
print("persists neither the question nor a half-made answer.")

conversations.close()
profiles.close()
print()
print(f"(stores written under {workdir})")
