"""Reusable event-aggregation building blocks.

Four aggregators condense low-rate meaning out of high-rate streams: a
time-bin summarizer (per-interval alert counts), a count-based sliding
window, a per-window statistical feature extractor, and a k-means
categorizer that maps feature vectors onto a finite set of categories.

Each aggregator exists in two forms: a streaming class used by the
graph engine (strictly causal, per-trace state) and a batch function
matching the one-shot contract. The batch time-bin summarizer flushes
the final in-progress bin; the streaming form never does, so that the
output for any input prefix is a prefix of the full output.

Alert-type, source, and priority vocabularies are frozen when a
predictor is fitted; alert types unseen at that point fold into a
reserved OTHER coordinate at apply time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InsufficientData, KindMismatch, MalformedStream
from .events import MICROS, Event, EventKind

OTHER = "OTHER"


# ---------------------------------------------------------------------------
# time-bin summarizer


@dataclass(frozen=True)
class TimeBinParams:
    """Configuration of the per-interval alert summarizer."""

    bin_width: int = MICROS  # microseconds
    sources: tuple[str, ...] = ()
    alert_types: tuple[str, ...] = ()

    def __post_init__(self):
        if self.bin_width <= 0:
            raise ValueError("bin_width must be positive")
        for name, vocab in (("sources", self.sources), ("alert_types", self.alert_types)):
            if len(set(vocab)) != len(vocab):
                raise ValueError(f"duplicate entries in {name}")


class TimeBinner:
    """Streams ALERT events into per-bin count vectors.

    Emits one FEATURE event per elapsed bin, including all-zero vectors
    for empty bins, so downstream classifiers can learn the quiet
    signature between attack bursts. The vector layout is
    [count per source..., count per alert type..., OTHER, total] and the
    output timestamp is the bin's end boundary.
    """

    def __init__(self, params: TimeBinParams, emit_source: str = "time_bin"):
        self.params = params
        self.emit_source = emit_source
        self.reset()

    def reset(self):
        self._bin: int | None = None
        self._counts = self._zero()
        self._last_ts: int | None = None
        self._last_label: int | None = None

    def _zero(self) -> np.ndarray:
        p = self.params
        return np.zeros(len(p.sources) + len(p.alert_types) + 2)

    def _names(self) -> list[str]:
        p = self.params
        return (
            [f"src:{s}" for s in p.sources]
            + [f"type:{t}" for t in p.alert_types]
            + [f"type:{OTHER}", "total"]
        )

    def _emit(self, bin_index: int, counts: np.ndarray) -> Event:
        ts = (bin_index + 1) * self.params.bin_width
        nums = tuple(zip(self._names(), (float(c) for c in counts)))
        return Event(
            ts=ts,
            source=self.emit_source,
            kind=EventKind.FEATURE,
            nums=nums,
            label=self._last_label,
        )

    def process(self, event: Event) -> list[Event]:
        if event.kind is not EventKind.ALERT:
            raise KindMismatch(f"time_bin expects ALERT events, got {event.kind.value}")
        if self._last_ts is not None and event.ts < self._last_ts:
            raise MalformedStream(
                f"time_bin input not sorted: ts {event.ts} after {self._last_ts}",
                source=event.source,
            )
        self._last_ts = event.ts
        p = self.params
        b = event.ts // p.bin_width
        out: list[Event] = []
        if self._bin is None:
            self._bin = b
        while self._bin < b:
            out.append(self._emit(self._bin, self._counts))
            self._counts = self._zero()
            self._bin += 1
        n_src, n_typ = len(p.sources), len(p.alert_types)
        if event.source in p.sources:
            self._counts[p.sources.index(event.source)] += 1
        atype = event.attrs.get("alert_type", "")
        if atype in p.alert_types:
            self._counts[n_src + p.alert_types.index(atype)] += 1
        else:
            self._counts[n_src + n_typ] += 1
        self._counts[-1] += 1
        if event.label is not None:
            self._last_label = event.label
        return out

    def flush(self) -> list[Event]:
        """Emit the final in-progress bin (batch semantics only)."""
        if self._bin is None:
            return []
        out = [self._emit(self._bin, self._counts)]
        self._counts = self._zero()
        self._bin += 1
        return out


def time_bin_summarize(events: list[Event], params: TimeBinParams) -> list[Event]:
    """One FEATURE event per bin from the first event's bin to the last's."""
    binner = TimeBinner(params)
    out: list[Event] = []
    for ev in events:
        out.extend(binner.process(ev))
    out.extend(binner.flush())
    return out


# ---------------------------------------------------------------------------
# sliding window


@dataclass(frozen=True)
class SlidingWindowParams:
    size: int = 20
    stride: int = 1

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("size must be >= 1")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")


class SlidingWindower:
    """Aggregates the most recent n events into a single WINDOW event.

    Emits every ``stride`` arrivals once at least ``size`` events have
    arrived; the window timestamp is the newest member's, and state
    resets at trace boundaries.
    """

    def __init__(self, params: SlidingWindowParams, emit_source: str = "sliding_window"):
        self.params = params
        self.emit_source = emit_source
        self.reset()

    def reset(self):
        self._buf: list[Event] = []
        self._seen = 0
        self._last_ts: int | None = None

    def process(self, event: Event) -> list[Event]:
        if self._last_ts is not None and event.ts < self._last_ts:
            raise MalformedStream(
                f"sliding_window input not sorted: ts {event.ts} after {self._last_ts}",
                source=event.source,
            )
        self._last_ts = event.ts
        n, s = self.params.size, self.params.stride
        self._buf.append(event)
        if len(self._buf) > n:
            self._buf.pop(0)
        self._seen += 1
        if self._seen >= n and (self._seen - n) % s == 0:
            members = tuple(self._buf)
            return [
                Event(
                    ts=event.ts,
                    source=self.emit_source,
                    kind=EventKind.WINDOW,
                    label=event.label if event.label is not None else _latest_label(members),
                    members=members,
                )
            ]
        return []


def _latest_label(members: tuple[Event, ...]) -> int | None:
    for ev in reversed(members):
        if ev.label is not None:
            return ev.label
    return None


def sliding_window(events: list[Event], params: SlidingWindowParams) -> list[Event]:
    """Batch form; emits max(0, floor((N - n) / stride) + 1) windows."""
    win = SlidingWindower(params)
    out: list[Event] = []
    for ev in events:
        out.extend(win.process(ev))
    return out


# ---------------------------------------------------------------------------
# statistical features over a window


@dataclass(frozen=True)
class StatFeatureParams:
    """Frozen vocabularies for the per-window statistical summary."""

    alert_types: tuple[str, ...] = ()
    priorities: tuple[int, ...] = ()

    def __post_init__(self):
        for name, vocab in (("alert_types", self.alert_types), ("priorities", self.priorities)):
            if len(set(vocab)) != len(vocab):
                raise ValueError(f"duplicate entries in {name}")


def stat_features(
    window: Event, params: StatFeatureParams, emit_source: str = "stat_features"
) -> Event:
    """Summarize one WINDOW of alerts into a FEATURE vector.

    Layout: [count per alert type..., OTHER, count per priority level...,
    mean inter-arrival seconds]. A single-member window has mean
    inter-arrival 0.
    """
    if window.kind is not EventKind.WINDOW:
        raise KindMismatch(f"stat_features expects WINDOW events, got {window.kind.value}")
    members = window.members
    for m in members:
        if m.kind is not EventKind.ALERT:
            raise KindMismatch(f"window members must be ALERT events, got {m.kind.value}")
    type_counts = {t: 0.0 for t in params.alert_types}
    other = 0.0
    prio_counts = {p: 0.0 for p in params.priorities}
    for m in members:
        atype = m.attrs.get("alert_type", "")
        if atype in type_counts:
            type_counts[atype] += 1
        else:
            other += 1
        prio = m.num("priority")
        if prio is not None and int(prio) in prio_counts:
            prio_counts[int(prio)] += 1
    if len(members) > 1:
        gap = (members[-1].ts - members[0].ts) / (len(members) - 1) / MICROS
    else:
        gap = 0.0
    nums = (
        [(f"type:{t}", type_counts[t]) for t in params.alert_types]
        + [(f"type:{OTHER}", other)]
        + [(f"prio:{p}", prio_counts[p]) for p in params.priorities]
        + [("mean_gap_s", gap)]
    )
    return Event(
        ts=window.ts,
        source=emit_source,
        kind=EventKind.FEATURE,
        nums=tuple(nums),
        label=window.label,
    )


# ---------------------------------------------------------------------------
# k-means categorizer


@dataclass(frozen=True)
class CategorizerParams:
    k: int = 8
    max_iters: int = 100
    tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tol < 0:
            raise ValueError("tol must be >= 0")


@dataclass
class KMeansModel:
    """Fitted categorizer: standardization stats plus centroids.

    ``centroids`` are reported in the raw input space; assignment uses
    ``z_centroids`` (standardized space) so that save/load reproduces
    assignments exactly.
    """

    mean: np.ndarray
    scale: np.ndarray
    centroids: np.ndarray
    z_centroids: np.ndarray
    sse_history: list[float] = field(default_factory=list)

    @property
    def k(self) -> int:
        return len(self.centroids)

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]


def categorizer_fit(vectors: list[list[float]] | np.ndarray, params: CategorizerParams) -> KMeansModel:
    """Lloyd's iterations from a seeded draw of k distinct points.

    Distances are Euclidean after per-dimension standardization whose
    statistics are frozen here; centroids are returned in raw space.
    Deterministic given the seed.
    """
    x = np.asarray(vectors, dtype=float)
    if x.ndim != 2:
        raise DimensionMismatch("expected a 2-d array of vectors")
    if len(x) < params.k:
        raise InsufficientData(f"need at least k={params.k} vectors, got {len(x)}")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    scale = np.where(std > 0, std, 1.0)
    z = (x - mean) / scale

    distinct = np.unique(z, axis=0)
    if len(distinct) < params.k:
        raise InsufficientData(
            f"need at least k={params.k} distinct points, got {len(distinct)}"
        )
    rng = np.random.default_rng(params.seed)
    pick = rng.choice(len(distinct), size=params.k, replace=False)
    centers = distinct[pick].copy()

    sse_history: list[float] = []
    for _ in range(params.max_iters):
        d2 = ((z[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        assign = d2.argmin(axis=1)
        sse_history.append(float(d2[np.arange(len(z)), assign].sum()))
        new_centers = centers.copy()
        for j in range(params.k):
            mask = assign == j
            if mask.any():
                new_centers[j] = z[mask].mean(axis=0)
        movement = float(np.sqrt(((new_centers - centers) ** 2).sum(axis=1)).max())
        centers = new_centers
        if movement < params.tol:
            break

    return KMeansModel(
        mean=mean,
        scale=scale,
        centroids=centers * scale + mean,
        z_centroids=centers,
        sse_history=sse_history,
    )


def categorizer_assign(model: KMeansModel, vector: list[float] | np.ndarray) -> int:
    """Index of the nearest centroid, lowest index on ties."""
    v = np.asarray(vector, dtype=float)
    if v.shape != (model.dim,):
        raise DimensionMismatch(f"expected a vector of dim {model.dim}, got shape {v.shape}")
    zv = (v - model.mean) / model.scale
    d2 = ((model.z_centroids - zv) ** 2).sum(axis=1)
    return int(d2.argmin())


def categorizer_apply(
    vector_event: Event, model: KMeansModel, emit_source: str = "categorizer"
) -> Event:
    """Tag a FEATURE event with its nearest-centroid category.

    The original vector passes through in ``nums`` so downstream
    classifiers may use either representation.
    """
    if vector_event.kind is not EventKind.FEATURE:
        raise KindMismatch(
            f"categorizer expects FEATURE events, got {vector_event.kind.value}"
        )
    idx = categorizer_assign(model, vector_event.values())
    return Event(
        ts=vector_event.ts,
        source=emit_source,
        kind=EventKind.CATEGORY,
        attrs={"category": str(idx)},
        nums=vector_event.nums,
        label=vector_event.label,
    )
