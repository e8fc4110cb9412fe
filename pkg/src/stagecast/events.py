"""Events, stages, streams, and labeled traces.

This is the shared vocabulary: every component in a predictor graph
consumes and produces :class:`Event` values, training and evaluation
data arrive as :class:`LabeledTrace`, and prediction sinks emit
:class:`Prediction`. All types here are immutable and safe to share.

Timestamps are integer microseconds since the Unix epoch. Stage ids are
plain ints indexing into a :class:`StageCatalog`; index 0 is always the
benign "Normal" stage so that lowest-index tie-breaking defaults to the
quiet state.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Sequence

from .errors import MalformedStream

NORMAL_STAGE = 0
MICROS = 1_000_000


class EventKind(str, Enum):
    """Schema tag deciding which payload fields an event must carry."""

    RAW = "RAW"
    ALERT = "ALERT"
    WINDOW = "WINDOW"
    FEATURE = "FEATURE"
    CATEGORY = "CATEGORY"
    PREDICTION = "PREDICTION"


@dataclass(frozen=True)
class StageCatalog:
    """Ordered, distinct stage names; index 0 is reserved for "Normal"."""

    names: tuple[str, ...]

    def __init__(self, names: Iterable[str]):
        object.__setattr__(self, "names", tuple(names))
        if len(self.names) < 2:
            raise ValueError("catalog needs at least two stages")
        if self.names[0] != "Normal":
            raise ValueError('catalog index 0 must be named "Normal"')
        if any(not n for n in self.names):
            raise ValueError("stage names must be non-empty")
        if len(set(self.names)) != len(self.names):
            raise ValueError("stage names must be distinct")

    def __len__(self) -> int:
        return len(self.names)

    def id_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown stage name {name!r}") from None

    def valid_id(self, stage: int) -> bool:
        return 0 <= stage < len(self.names)


@dataclass(frozen=True)
class Event:
    """One timestamped observation flowing on a stream.

    ``attrs`` holds string-valued payload (alert type, classification,
    category), ``nums`` holds named real values in a fixed order
    (priority, feature coordinates, per-stage probabilities). ``label``
    is only present on training traces. ``members`` is the in-memory
    payload of WINDOW events and is never serialized.
    """

    ts: int
    source: str
    kind: EventKind
    attrs: dict[str, str] = field(default_factory=dict)
    nums: tuple[tuple[str, float], ...] = ()
    label: int | None = None
    members: tuple["Event", ...] = ()

    def __post_init__(self):
        if self.ts < 0:
            raise ValueError(f"event ts must be >= 0, got {self.ts}")
        names = [n for n, _ in self.nums]
        if len(set(names)) != len(names):
            raise ValueError("duplicate names in nums")
        if self.kind is EventKind.ALERT and "alert_type" not in self.attrs:
            raise ValueError("ALERT events must carry attrs['alert_type']")
        if self.kind is EventKind.CATEGORY and "category" not in self.attrs:
            raise ValueError("CATEGORY events must carry attrs['category']")

    def values(self) -> list[float]:
        """Numeric payload in declaration order."""
        return [v for _, v in self.nums]

    def num(self, name: str) -> float | None:
        for n, v in self.nums:
            if n == name:
                return v
        return None


@dataclass(frozen=True)
class LabeledTrace:
    """A time-ordered event sequence with ground-truth stage labels."""

    events: tuple[Event, ...]
    catalog: StageCatalog
    trace_id: str = ""

    def __init__(self, events: Iterable[Event], catalog: StageCatalog, trace_id: str = ""):
        object.__setattr__(self, "events", tuple(events))
        object.__setattr__(self, "catalog", catalog)
        object.__setattr__(self, "trace_id", trace_id)

    def __len__(self) -> int:
        return len(self.events)


@dataclass(frozen=True)
class Prediction:
    """A probability distribution over attack stages at one instant."""

    ts: int
    probs: tuple[float, ...]
    stage: int
    sink: str = ""

    def __post_init__(self):
        if any(p < 0 for p in self.probs):
            raise ValueError("probabilities must be non-negative")
        if abs(sum(self.probs) - 1.0) > 1e-9:
            raise ValueError(f"probabilities must sum to 1, got {sum(self.probs)}")
        if self.stage != _argmax_low(self.probs):
            raise ValueError("stage must be the lowest-index maximizer of probs")

    @classmethod
    def from_probs(cls, ts: int, probs: Sequence[float], sink: str = "") -> "Prediction":
        probs = tuple(float(p) for p in probs)
        return cls(ts=ts, probs=probs, stage=_argmax_low(probs), sink=sink)


def _argmax_low(values: Sequence[float]) -> int:
    best, best_i = values[0], 0
    for i, v in enumerate(values):
        if v > best:
            best, best_i = v, i
    return best_i


@dataclass(frozen=True)
class Violation:
    """One broken invariant found by a validator; data, not an error."""

    code: str
    index: int
    detail: str

    def __str__(self) -> str:
        return f"{self.code}[{self.index}]: {self.detail}"


def merge_streams(streams: Sequence[Sequence[Event]]) -> list[Event]:
    """Stable k-way merge of individually sorted event streams.

    Ties at equal timestamps are broken by source name ascending, then
    by the event's position within its own stream, so replays are fully
    deterministic regardless of sensor naming.
    """
    decorated = [_checked(stream, i) for i, stream in enumerate(streams)]
    return [item[-1] for item in heapq.merge(*decorated)]


def _checked(stream: Sequence[Event], stream_index: int) -> Iterator[tuple]:
    last = None
    for pos, ev in enumerate(stream):
        if last is not None and ev.ts < last:
            raise MalformedStream(
                f"stream {stream_index} not sorted: event {pos} from source "
                f"{ev.source!r} has ts {ev.ts} after {last}",
                source=ev.source,
                index=pos,
            )
        last = ev.ts
        yield (ev.ts, ev.source, pos, stream_index, ev)


def validate_trace(trace: LabeledTrace) -> list[Violation]:
    """Check LabeledTrace invariants, returning one record per break."""
    out: list[Violation] = []
    last = None
    for i, ev in enumerate(trace.events):
        if last is not None and ev.ts < last:
            out.append(Violation("OutOfOrder", i, f"ts {ev.ts} after {last}"))
        last = ev.ts
        if ev.label is not None and not trace.catalog.valid_id(ev.label):
            out.append(
                Violation(
                    "BadLabel", i, f"label {ev.label} outside catalog of size {len(trace.catalog)}"
                )
            )
    return out
