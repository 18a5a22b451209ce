"""Merge-sort ranking annotation: a resumable state machine that elicits
a full dataset ranking from small sorted sub-lists plus one-at-a-time
pairwise choices.

Items are first partitioned into sub-lists (default size 6) which the
annotator sorts whole; sorted sub-lists are then merged pairwise, each
merge step asking only "which of these two is better". Session state is a
pure function of the creation config plus the response log, so crashed or
restarted sessions resume exactly, undo is log truncation + replay, and
replaying a log reproduces the final state byte for byte.
"""

from __future__ import annotations

import json
import math
import os
import time
import uuid
from dataclasses import dataclass, field

import numpy as np

from .metrics import spearman
from .numerics import RngStream

SNAPSHOT_VERSION = 1


class SessionError(ValueError):
    pass


@dataclass(frozen=True)
class Task:
    kind: str  # "sort" | "compare"
    ids: tuple[str, ...] = ()
    id_a: str | None = None
    id_b: str | None = None
    answered: int = 0
    estimated_remaining: int = 0

    @property
    def progress(self) -> tuple[int, int]:
        return (self.answered, self.estimated_remaining)


def _merge_worst(sizes: list[int]) -> int:
    """Worst-case comparisons to merge the given list sizes pairwise."""
    sizes = [s for s in sizes if s > 0]
    total = 0
    while len(sizes) > 1:
        nxt = []
        for i in range(0, len(sizes) - 1, 2):
            total += sizes[i] + sizes[i + 1] - 1
            nxt.append(sizes[i] + sizes[i + 1])
        if len(sizes) % 2:
            nxt.append(sizes[-1])
        sizes = nxt
    return total


class AnnotationSession:
    """One annotator's progress through the merge-sort protocol.

    All mutation goes through submit_response/undo; everything else is a
    read-only view derived from (config, log).
    """

    def __init__(
        self,
        item_ids: list[str],
        sublist_size: int = 6,
        seed: int | None = None,
        session_id: str | None = None,
        created_ts: float | None = None,
    ):
        ids = [str(i) for i in item_ids]
        if not ids:
            raise SessionError("no items")
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise SessionError(f"duplicate ids: {dup}")
        if sublist_size < 2:
            raise SessionError("sublist size must be >= 2")
        self.item_ids = ids
        self.sublist_size = int(sublist_size)
        self.rng_seed = None if seed is None else int(seed)
        self.session_id = session_id or uuid.uuid4().hex
        self.created_ts = time.time() if created_ts is None else float(created_ts)
        self.log: list[dict] = []
        self._rebuild()

    # -- derived state ------------------------------------------------

    def _layout(self) -> list[str]:
        if self.rng_seed is None:
            return list(self.item_ids)
        perm = RngStream(self.rng_seed, "annotation-layout").permutation(len(self.item_ids))
        return [self.item_ids[i] for i in perm]

    def _rebuild(self) -> None:
        """Recomputes derived state from (config, log)."""
        layout = self._layout()
        k = self.sublist_size
        self._chunks = [layout[i : i + k] for i in range(0, len(layout), k)]
        self._sorted: list[list[str] | None] = [
            list(c) if len(c) == 1 else None for c in self._chunks
        ]
        self.phase = "initial_sort"
        self._queue: list[list[str]] = []
        self._merged: list[list[str]] = []
        self._cur_a: list[str] = []
        self._cur_b: list[str] = []
        self._cur_out: list[str] = []
        self.final_order: list[str] = []
        self._maybe_finish_sorting()
        log, self.log = self.log, []
        for entry in log:
            self._apply(entry)

    def _maybe_finish_sorting(self) -> None:
        if any(s is None for s in self._sorted):
            return
        lists = [list(s) for s in self._sorted if s]
        if len(lists) == 1:
            self.final_order = lists[0]
            self.phase = "done"
            return
        self.phase = "merging"
        self._queue = lists
        self._merged = []
        self._open_next_pair()

    def _open_next_pair(self) -> None:
        while True:
            if len(self._queue) >= 2:
                self._cur_a = self._queue.pop(0)
                self._cur_b = self._queue.pop(0)
                self._cur_out = []
                return
            if len(self._queue) == 1:
                self._merged.append(self._queue.pop(0))
            if len(self._merged) == 1:
                self.final_order = self._merged[0]
                self.phase = "done"
                self._cur_a = self._cur_b = self._cur_out = []
                return
            self._queue = self._merged
            self._merged = []

    def _next_sort_chunk(self) -> list[str]:
        for i, s in enumerate(self._sorted):
            if s is None:
                return self._chunks[i]
        raise SessionError("no pending sort")

    # -- task & progress ----------------------------------------------

    def answered(self) -> int:
        return len(self.log)

    def estimated_remaining(self) -> int:
        if self.phase == "done":
            return 0
        pending_sorts = sum(1 for s in self._sorted if s is None)
        if self.phase == "initial_sort":
            compares = _merge_worst([len(c) for c in self._chunks])
        else:
            round_sizes = [len(m) for m in self._merged]
            compares = 0
            if self._cur_a or self._cur_b:
                if self._cur_a and self._cur_b:
                    compares += len(self._cur_a) + len(self._cur_b) - 1
                round_sizes.append(len(self._cur_a) + len(self._cur_b) + len(self._cur_out))
            qs = [len(q) for q in self._queue]
            while len(qs) >= 2:
                x, y = qs.pop(0), qs.pop(0)
                compares += x + y - 1
                round_sizes.append(x + y)
            if qs:
                round_sizes.append(qs[0])
            compares += _merge_worst(round_sizes)
        return pending_sorts + compares

    def current_task(self) -> Task:
        if self.phase == "done":
            raise SessionError("session complete")
        if self.phase == "initial_sort":
            return Task(
                kind="sort",
                ids=tuple(self._next_sort_chunk()),
                answered=self.answered(),
                estimated_remaining=self.estimated_remaining(),
            )
        return Task(
            kind="compare",
            id_a=self._cur_a[0],
            id_b=self._cur_b[0],
            answered=self.answered(),
            estimated_remaining=self.estimated_remaining(),
        )

    # -- transitions ----------------------------------------------------

    def _apply(self, entry: dict) -> None:
        """Validates a response record against the current task and
        advances; used for both live submissions and replay."""
        if self.phase == "done":
            raise SessionError("session complete")
        kind = entry.get("kind")
        if kind == "sort":
            if self.phase != "initial_sort":
                raise SessionError("no sort task pending")
            chunk = self._next_sort_chunk()
            order = [str(i) for i in entry.get("order", [])]
            if sorted(order) != sorted(chunk):
                raise SessionError(
                    f"sort response is not a permutation of the task ids {chunk}"
                )
            idx = self._sorted.index(None)
            self._sorted[idx] = order
            self.log.append(
                {"kind": "sort", "ids": list(chunk), "order": order, "ts": entry["ts"]}
            )
            self._maybe_finish_sorting()
        elif kind == "compare":
            if self.phase != "merging":
                raise SessionError("no compare task pending")
            a, b = self._cur_a[0], self._cur_b[0]
            choice = str(entry.get("choice"))
            if choice == a:
                self._cur_out.append(self._cur_a.pop(0))
            elif choice == b:
                self._cur_out.append(self._cur_b.pop(0))
            else:
                raise SessionError(
                    f"choice {choice!r} is neither head ({a!r}, {b!r})"
                )
            self.log.append(
                {"kind": "compare", "id_a": a, "id_b": b, "choice": choice, "ts": entry["ts"]}
            )
            if not self._cur_a or not self._cur_b:
                self._cur_out.extend(self._cur_a or self._cur_b)
                self._cur_a, self._cur_b = [], []
                self._merged.append(self._cur_out)
                self._cur_out = []
                self._open_next_pair()
        else:
            raise SessionError(f"unknown response kind {kind!r}")

    def submit_response(self, response: dict, timestamp: float | None = None) -> "AnnotationSession":
        """Applies a response to the current task; raises without mutating
        on a mismatched response."""
        entry = dict(response)
        entry["ts"] = time.time() if timestamp is None else float(timestamp)
        self._apply(entry)
        return self

    def undo(self) -> "AnnotationSession":
        """Reverts the last response exactly (replay of the shortened log)."""
        if not self.log:
            raise SessionError("nothing to undo")
        self.log = self.log[:-1]
        self._rebuild()
        return self

    # -- results ---------------------------------------------------------

    def export_ranking(self) -> dict[str, int]:
        """Ranks 1..n (larger = better); the first merged-out item is best."""
        if self.phase != "done":
            raise SessionError("session incomplete")
        n = len(self.final_order)
        return {item: n - i for i, item in enumerate(self.final_order)}

    # -- persistence -------------------------------------------------------

    def config_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "item_ids": list(self.item_ids),
            "sublist_size": self.sublist_size,
            "rng_seed": self.rng_seed,
            "created_ts": self.created_ts,
        }

    def snapshot(self) -> dict:
        return {"version": SNAPSHOT_VERSION, **self.config_dict(), "log": list(self.log)}

    def snapshot_bytes(self) -> bytes:
        return json.dumps(self.snapshot(), sort_keys=True).encode("utf-8")

    @property
    def updated_ts(self) -> float:
        return self.log[-1]["ts"] if self.log else self.created_ts

    @classmethod
    def from_config(cls, config: dict) -> "AnnotationSession":
        return cls(
            item_ids=config["item_ids"],
            sublist_size=config["sublist_size"],
            seed=config["rng_seed"],
            session_id=config["session_id"],
            created_ts=config["created_ts"],
        )

    @classmethod
    def from_snapshot(cls, snap: dict) -> "AnnotationSession":
        if snap.get("version") != SNAPSHOT_VERSION:
            raise SessionError(f"unsupported snapshot version {snap.get('version')!r}")
        session = cls.from_config(snap)
        for entry in snap.get("log", []):
            session._apply(dict(entry))
        return session


def replay(session: AnnotationSession) -> AnnotationSession:
    """Fresh session built from the same config with the same log applied."""
    return AnnotationSession.from_snapshot(session.snapshot())


def save_session(session: AnnotationSession, path) -> None:
    """Atomic snapshot write (write temp, fsync, rename)."""
    path = str(path)
    tmp = f"{path}.tmp.{os.getpid()}"
    data = json.dumps(session.snapshot(), sort_keys=True, indent=1)
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def load_session(path) -> AnnotationSession:
    with open(path, "r", encoding="utf-8") as fh:
        return AnnotationSession.from_snapshot(json.load(fh))


# -- function-style aliases over the session methods ------------------------


def new_session(ids, n_sub: int = 6, seed: int | None = None, **kw) -> AnnotationSession:
    return AnnotationSession(list(ids), sublist_size=n_sub, seed=seed, **kw)


def current_task(session: AnnotationSession) -> Task:
    return session.current_task()


def submit_response(session: AnnotationSession, response: dict) -> AnnotationSession:
    return session.submit_response(response)


def undo(session: AnnotationSession) -> AnnotationSession:
    return session.undo()


def export_ranking(session: AnnotationSession) -> dict[str, int]:
    return session.export_ranking()


# -- simulated annotator ----------------------------------------------------


@dataclass
class NoisyOracle:
    """Simulated annotator: picks a over b with probability
    sigmoid(beta * (q_a - q_b)); beta = inf means error-free."""

    beta: float
    latent: dict[str, float]
    seed: int = 0
    draws: int = field(default=0, init=False)

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        self._rng = RngStream(self.seed, "oracle")

    def quality(self, item_id: str) -> float:
        try:
            return self.latent[item_id]
        except KeyError:
            raise SessionError(f"oracle has no latent value for {item_id!r}") from None

    def prefers(self, id_a: str, id_b: str) -> bool:
        """True when the oracle picks a over b (one draw unless beta=inf)."""
        qa, qb = self.quality(id_a), self.quality(id_b)
        self.draws += 1
        if math.isinf(self.beta):
            return qa >= qb
        p = 1.0 / (1.0 + math.exp(-self.beta * (qa - qb)))
        return bool(self._rng.uniform() < p)


def _binary_insertion_sort(ids: list[str], oracle: NoisyOracle) -> list[str]:
    """Best-first insertion sort using oracle comparisons."""
    out: list[str] = []
    for item in ids:
        lo, hi = 0, len(out)
        while lo < hi:
            mid = (lo + hi) // 2
            if oracle.prefers(item, out[mid]):
                hi = mid
            else:
                lo = mid + 1
        out.insert(lo, item)
    return out


def simulate(session: AnnotationSession, oracle: NoisyOracle) -> tuple[AnnotationSession, dict]:
    """Answers every task with the oracle and reports comparison counts
    plus the Spearman correlation of the exported ranks against the
    oracle's latent ordering."""
    for item in session.item_ids:
        oracle.quality(item)
    start_draws = oracle.draws
    while session.phase != "done":
        task = session.current_task()
        if task.kind == "sort":
            order = _binary_insertion_sort(list(task.ids), oracle)
            session.submit_response({"kind": "sort", "order": order})
        else:
            winner = task.id_a if oracle.prefers(task.id_a, task.id_b) else task.id_b
            session.submit_response({"kind": "compare", "choice": winner})
    exported = session.export_ranking()
    qs = np.array([oracle.latent[i] for i in session.item_ids])
    order = np.argsort(qs, kind="stable")
    latent_ranks = np.empty(len(qs), dtype=np.int64)
    latent_ranks[order] = np.arange(1, len(qs) + 1)
    pred = np.array([exported[i] for i in session.item_ids], dtype=np.float64)
    stats = {
        "comparisons": oracle.draws - start_draws,
        "spc": spearman(latent_ranks, pred) if len(qs) >= 2 else 1.0,
    }
    return session, stats
