"""Runtime component implementations behind the graph engine.

Every registered kind turns a :class:`~stagecast.graph.ComponentSpec`
into a stream processor with a uniform surface: ``process(event)``
pushes one input event and returns zero or more output events,
``reset()`` clears per-stream state at trace boundaries, and trainable
kinds additionally expose ``fit(events)`` plus JSON-serializable state.

Supervision labels ride along on events: an aggregate event carries the
label of the latest contributing basic event, which is what a
classifier downstream trains against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, ClassVar

import numpy as np

from . import aggregators as agg
from .errors import DimensionMismatch, InsufficientData, NoLabels, UnfittedComponent
from .events import Event, EventKind, StageCatalog
from .forest import Baseline, Forest, ForestParams, TrainingMatrix, baseline_fit, forest_fit
from .graph import ComponentSpec

ANY_INPUT = frozenset(
    {EventKind.RAW, EventKind.ALERT, EventKind.WINDOW, EventKind.FEATURE, EventKind.CATEGORY}
)


@dataclass(frozen=True)
class ParamSpec:
    types: tuple[type, ...]
    default: object
    check: Callable[[object], bool] | None = None
    expect: str = ""


def _positive(v) -> bool:
    return v > 0


def _non_negative(v) -> bool:
    return v >= 0


class Component:
    """Base class; subclasses register themselves by ``kind``."""

    kind: ClassVar[str] = ""
    PARAMS: ClassVar[dict[str, ParamSpec]] = {}
    input_kinds: ClassVar[frozenset[EventKind]] = frozenset()
    output_kind: ClassVar[EventKind] = EventKind.RAW
    trainable: ClassVar[bool] = False
    is_source: ClassVar[bool] = False
    arity: ClassVar[tuple[int, int | None]] = (1, None)

    def __init__(self, spec: ComponentSpec, catalog: StageCatalog):
        self.spec = spec
        self.catalog = catalog
        self.name = spec.name
        self.params = self._parse_params(spec.params)

    # -- parameter schema ---------------------------------------------------

    @classmethod
    def check_params(cls, params: dict) -> list[str]:
        problems = []
        for key, value in params.items():
            ps = cls.PARAMS.get(key)
            if ps is None:
                problems.append(f"unknown param {key!r} for kind {cls.kind!r}")
                continue
            if isinstance(value, bool) and bool not in ps.types:
                problems.append(f"param {key!r} must be {ps.expect or ps.types}")
                continue
            if not isinstance(value, ps.types):
                problems.append(f"param {key!r} must be {ps.expect or ps.types}")
                continue
            if ps.check is not None and not ps.check(value):
                problems.append(f"param {key!r} failed constraint: {ps.expect}")
        return problems

    @classmethod
    def _parse_params(cls, params: dict) -> dict:
        out = {}
        for key, ps in cls.PARAMS.items():
            out[key] = params.get(key, ps.default)
        return out

    @classmethod
    def static_input_kinds(cls, params: dict) -> frozenset[EventKind]:
        return cls.input_kinds

    @classmethod
    def static_output_kind(cls, params: dict) -> EventKind:
        return cls.output_kind

    # -- runtime ------------------------------------------------------------

    def reset(self) -> None:
        """Clear per-stream state at a trace boundary."""

    def process(self, event: Event) -> list[Event]:
        raise NotImplementedError

    # -- trainable state ----------------------------------------------------

    @property
    def has_state(self) -> bool:
        return not self.trainable

    def fit(self, events: list[Event]) -> int:
        """Fit on a materialized input stream; returns the sample count."""
        raise NotImplementedError(f"{self.kind} is not trainable")

    def dump_state(self) -> dict:
        return {}

    def load_state(self, state: dict) -> None:
        pass

    def require_state(self) -> None:
        if not self.has_state:
            raise UnfittedComponent(f"component {self.name!r} ({self.kind}) has no fitted state")


REGISTRY: dict[str, type[Component]] = {}


def register(cls: type[Component]) -> type[Component]:
    REGISTRY[cls.kind] = cls
    return cls


def _split_csv(text: str) -> tuple[str, ...]:
    return tuple(t.strip() for t in text.split(",") if t.strip())


# ---------------------------------------------------------------------------
# sources


@register
class TraceSource(Component):
    """Injects external events into the graph, optionally filtered by
    source name; declares the kind of stream it emits."""

    kind = "trace_source"
    PARAMS = {
        "sources": ParamSpec((str,), "", expect="comma-separated source names"),
        "emits": ParamSpec(
            (str,),
            "ALERT",
            check=lambda v: v in EventKind.__members__,
            expect="an event kind name",
        ),
    }
    is_source = True
    arity = (0, 0)

    def __init__(self, spec, catalog):
        super().__init__(spec, catalog)
        self._filter = set(_split_csv(self.params["sources"]))
        self._emits = EventKind[self.params["emits"]]

    @classmethod
    def static_output_kind(cls, params):
        name = params.get("emits", "ALERT")
        return EventKind[name] if name in EventKind.__members__ else EventKind.ALERT

    def process(self, event: Event) -> list[Event]:
        if event.kind is not self._emits:
            return []
        if self._filter and event.source not in self._filter:
            return []
        return [event]


@register
class SnortParserSource(TraceSource):
    """Alert stream produced by a Snort IDS run; parsing of the fast
    alert format itself lives in :mod:`stagecast.ingest`."""

    kind = "snort_parser_source"
    PARAMS = {"sources": ParamSpec((str,), "", expect="comma-separated source names")}

    def __init__(self, spec, catalog):
        Component.__init__(self, spec, catalog)
        self._filter = set(_split_csv(self.params["sources"]))
        self._emits = EventKind.ALERT

    @classmethod
    def static_output_kind(cls, params):
        return EventKind.ALERT


# ---------------------------------------------------------------------------
# aggregators


@register
class TimeBinComponent(Component):
    """Per-interval statistical summary of one or more alert streams."""

    kind = "time_bin"
    PARAMS = {
        "bin_width_us": ParamSpec((int,), agg.MICROS, check=_positive, expect="> 0"),
        "sources": ParamSpec((str,), "", expect="comma-separated source names"),
        "alert_types": ParamSpec((str,), "", expect="comma-separated alert types"),
    }
    input_kinds = frozenset({EventKind.ALERT})
    output_kind = EventKind.FEATURE
    trainable = True

    def __init__(self, spec, catalog):
        super().__init__(spec, catalog)
        self._binner: agg.TimeBinner | None = None
        sources = _split_csv(self.params["sources"])
        types = _split_csv(self.params["alert_types"])
        if sources and types:
            self.load_state({"sources": list(sources), "alert_types": list(types)})

    @property
    def has_state(self) -> bool:
        return self._binner is not None

    def fit(self, events: list[Event]) -> int:
        if not events:
            raise InsufficientData(f"{self.name}: no alerts to derive vocabularies from")
        sources = sorted({ev.source for ev in events})
        types = sorted({ev.attrs.get("alert_type", "") for ev in events})
        self.load_state({"sources": sources, "alert_types": types})
        return len(events)

    def dump_state(self) -> dict:
        p = self._binner.params
        return {"sources": list(p.sources), "alert_types": list(p.alert_types)}

    def load_state(self, state: dict) -> None:
        params = agg.TimeBinParams(
            bin_width=self.params["bin_width_us"],
            sources=tuple(state["sources"]),
            alert_types=tuple(state["alert_types"]),
        )
        self._binner = agg.TimeBinner(params, emit_source=self.name)

    def reset(self) -> None:
        if self._binner is not None:
            self._binner.reset()

    def process(self, event: Event) -> list[Event]:
        self.require_state()
        return self._binner.process(event)


@register
class SlidingWindowComponent(Component):
    """Aggregates the n most recent events into one WINDOW event."""

    kind = "sliding_window"
    PARAMS = {
        "size": ParamSpec((int,), 20, check=_positive, expect=">= 1"),
        "stride": ParamSpec((int,), 1, check=_positive, expect=">= 1"),
    }
    input_kinds = ANY_INPUT
    output_kind = EventKind.WINDOW

    def __init__(self, spec, catalog):
        super().__init__(spec, catalog)
        self._window = agg.SlidingWindower(
            agg.SlidingWindowParams(size=self.params["size"], stride=self.params["stride"]),
            emit_source=self.name,
        )

    def reset(self) -> None:
        self._window.reset()

    def process(self, event: Event) -> list[Event]:
        return self._window.process(event)


@register
class StatFeaturesComponent(Component):
    """Per-window alert statistics: counts by type and priority plus
    mean inter-arrival time."""

    kind = "stat_features"
    PARAMS = {
        "alert_types": ParamSpec((str,), "", expect="comma-separated alert types"),
        "priorities": ParamSpec((str,), "", expect="comma-separated priority levels"),
    }
    input_kinds = frozenset({EventKind.WINDOW})
    output_kind = EventKind.FEATURE
    trainable = True

    def __init__(self, spec, catalog):
        super().__init__(spec, catalog)
        self._params: agg.StatFeatureParams | None = None
        types = _split_csv(self.params["alert_types"])
        prios = _split_csv(self.params["priorities"])
        if types and prios:
            self.load_state({"alert_types": list(types), "priorities": [int(p) for p in prios]})

    @property
    def has_state(self) -> bool:
        return self._params is not None

    def fit(self, events: list[Event]) -> int:
        members = [m for ev in events for m in ev.members]
        if not members:
            raise InsufficientData(f"{self.name}: no window members to derive vocabularies from")
        types = sorted({m.attrs.get("alert_type", "") for m in members})
        prios = sorted(
            {int(m.num("priority")) for m in members if m.num("priority") is not None}
        )
        self.load_state({"alert_types": types, "priorities": prios})
        return len(events)

    def dump_state(self) -> dict:
        return {
            "alert_types": list(self._params.alert_types),
            "priorities": list(self._params.priorities),
        }

    def load_state(self, state: dict) -> None:
        self._params = agg.StatFeatureParams(
            alert_types=tuple(state["alert_types"]),
            priorities=tuple(int(p) for p in state["priorities"]),
        )

    def process(self, event: Event) -> list[Event]:
        self.require_state()
        return [agg.stat_features(event, self._params, emit_source=self.name)]


@register
class CategorizerComponent(Component):
    """Maps feature vectors onto a finite set of categories (k-means)."""

    kind = "kmeans_categorizer"
    PARAMS = {
        "k": ParamSpec((int,), 8, check=_positive, expect=">= 1"),
        "max_iters": ParamSpec((int,), 100, check=_positive, expect=">= 1"),
        "tol": ParamSpec((int, float), 1e-6, check=_non_negative, expect=">= 0"),
        "seed": ParamSpec((int,), 0),
    }
    input_kinds = frozenset({EventKind.FEATURE})
    output_kind = EventKind.CATEGORY
    trainable = True

    def __init__(self, spec, catalog):
        super().__init__(spec, catalog)
        self._model: agg.KMeansModel | None = None

    @property
    def has_state(self) -> bool:
        return self._model is not None

    def fit(self, events: list[Event]) -> int:
        vectors = [ev.values() for ev in events]
        if len(vectors) < self.params["k"]:
            raise InsufficientData(
                f"{self.name}: need at least k={self.params['k']} vectors, got {len(vectors)}"
            )
        self._model = agg.categorizer_fit(
            vectors,
            agg.CategorizerParams(
                k=self.params["k"],
                max_iters=self.params["max_iters"],
                tol=float(self.params["tol"]),
                seed=self.params["seed"],
            ),
        )
        return len(vectors)

    def dump_state(self) -> dict:
        m = self._model
        return {
            "mean": m.mean.tolist(),
            "scale": m.scale.tolist(),
            "centroids": m.centroids.tolist(),
            "z_centroids": m.z_centroids.tolist(),
        }

    def load_state(self, state: dict) -> None:
        self._model = agg.KMeansModel(
            mean=np.asarray(state["mean"], dtype=float),
            scale=np.asarray(state["scale"], dtype=float),
            centroids=np.asarray(state["centroids"], dtype=float),
            z_centroids=np.asarray(state["z_centroids"], dtype=float),
        )

    def process(self, event: Event) -> list[Event]:
        self.require_state()
        return [agg.categorizer_apply(event, self._model, emit_source=self.name)]


# ---------------------------------------------------------------------------
# classifiers


def _prediction_event(name: str, catalog: StageCatalog, ts: int, probs) -> Event:
    nums = tuple(zip(catalog.names, (float(p) for p in probs)))
    return Event(ts=ts, source=name, kind=EventKind.PREDICTION, nums=nums)


class _VectorAdapter:
    """Turns classifier input events into fixed-dimension vectors.

    FEATURE and ALERT events contribute their numeric payload, CATEGORY
    events one-hot encode the category index (size frozen at fit), and
    WINDOW events flatten their members' payloads in order.
    """

    def __init__(self, mode: str = "", dim: int = 0, n_categories: int = 0):
        self.mode = mode
        self.dim = dim
        self.n_categories = n_categories

    @staticmethod
    def mode_for(event: Event) -> str:
        if event.kind is EventKind.CATEGORY:
            return "category"
        if event.kind is EventKind.WINDOW:
            return "window"
        return "vector"

    def freeze(self, events: list[Event]) -> None:
        self.mode = self.mode_for(events[0])
        if self.mode == "category":
            self.n_categories = 1 + max(int(ev.attrs["category"]) for ev in events)
            self.dim = self.n_categories
        else:
            self.dim = len(self.vector(events[0], check=False))

    def vector(self, event: Event, check: bool = True) -> list[float]:
        if self.mode == "category":
            idx = int(event.attrs["category"])
            v = [0.0] * self.n_categories
            if 0 <= idx < self.n_categories:
                v[idx] = 1.0
        elif self.mode == "window" or (not self.mode and event.kind is EventKind.WINDOW):
            v = [x for m in event.members for x in m.values()]
        else:
            v = event.values()
        if check and len(v) != self.dim:
            raise DimensionMismatch(
                f"expected dim {self.dim}, got {len(v)} from a {event.kind.value} event"
            )
        return v

    def to_state(self) -> dict:
        return {"mode": self.mode, "dim": self.dim, "n_categories": self.n_categories}

    @classmethod
    def from_state(cls, state: dict) -> "_VectorAdapter":
        return cls(mode=state["mode"], dim=state["dim"], n_categories=state["n_categories"])


@register
class RandomForestComponent(Component):
    """Random-forest classifier emitting per-stage probabilities."""

    kind = "random_forest"
    PARAMS = {
        "n_trees": ParamSpec((int,), 50, check=_positive, expect=">= 1"),
        "max_depth": ParamSpec((int,), 0, check=_non_negative, expect=">= 0 (0 = unbounded)"),
        "min_samples_split": ParamSpec((int,), 2, check=lambda v: v >= 2, expect=">= 2"),
        "features_per_split": ParamSpec(
            (int, str),
            "sqrt",
            check=lambda v: v in ("sqrt", "all") if isinstance(v, str) else v >= 1,
            expect="'sqrt', 'all', or an int >= 1",
        ),
        "bootstrap": ParamSpec((bool,), True, expect="true/false"),
        "seed": ParamSpec((int,), 0),
    }
    input_kinds = frozenset(
        {EventKind.ALERT, EventKind.FEATURE, EventKind.CATEGORY, EventKind.WINDOW}
    )
    output_kind = EventKind.PREDICTION
    trainable = True
    arity = (1, 1)

    def __init__(self, spec, catalog):
        super().__init__(spec, catalog)
        self._forest: Forest | None = None
        self._adapter = _VectorAdapter()

    def _forest_params(self) -> ForestParams:
        return ForestParams(
            n_trees=self.params["n_trees"],
            max_depth=self.params["max_depth"] or None,
            min_samples_split=self.params["min_samples_split"],
            features_per_split=self.params["features_per_split"],
            bootstrap=self.params["bootstrap"],
            seed=self.params["seed"],
        )

    @property
    def has_state(self) -> bool:
        return self._forest is not None

    def fit(self, events: list[Event]) -> int:
        labeled = [ev for ev in events if ev.label is not None]
        if not labeled:
            raise NoLabels(f"{self.name}: training stream has no labeled events")
        self._adapter.freeze(labeled)
        x = np.array([self._adapter.vector(ev) for ev in labeled], dtype=float)
        y = np.array([ev.label for ev in labeled], dtype=int)
        data = TrainingMatrix(x=x, y=y, n_classes=len(self.catalog))
        self._forest = forest_fit(data, self._forest_params())
        return len(labeled)

    def dump_state(self) -> dict:
        return {"forest": self._forest.to_state(), "adapter": self._adapter.to_state()}

    def load_state(self, state: dict) -> None:
        self._forest = Forest.from_state(state["forest"], self._forest_params())
        self._adapter = _VectorAdapter.from_state(state["adapter"])

    def process(self, event: Event) -> list[Event]:
        self.require_state()
        probs = self._forest.predict_probs(self._adapter.vector(event))
        return [_prediction_event(self.name, self.catalog, event.ts, probs)]


@register
class MajorityBaselineComponent(Component):
    """Predicts the empirical label distribution unconditionally."""

    kind = "majority_baseline"
    PARAMS: ClassVar[dict[str, ParamSpec]] = {}
    input_kinds = ANY_INPUT
    output_kind = EventKind.PREDICTION
    trainable = True
    arity = (1, 1)

    def __init__(self, spec, catalog):
        super().__init__(spec, catalog)
        self._model: Baseline | None = None

    @property
    def has_state(self) -> bool:
        return self._model is not None

    def fit(self, events: list[Event]) -> int:
        labels = [ev.label for ev in events if ev.label is not None]
        if not labels:
            raise NoLabels(f"{self.name}: training stream has no labeled events")
        self._model = baseline_fit(labels, n_classes=len(self.catalog))
        return len(labels)

    def dump_state(self) -> dict:
        return self._model.to_state()

    def load_state(self, state: dict) -> None:
        self._model = Baseline.from_state(state)

    def process(self, event: Event) -> list[Event]:
        self.require_state()
        return [_prediction_event(self.name, self.catalog, event.ts, self._model.probs)]


def build_component(spec: ComponentSpec, catalog: StageCatalog) -> Component:
    cls = REGISTRY.get(spec.kind)
    if cls is None:
        raise KeyError(f"unknown component kind {spec.kind!r}")
    return cls(spec, catalog)
