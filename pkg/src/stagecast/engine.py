"""Executes predictor graphs over event streams and trains them.

Execution is event-driven with no wall clock: pushing one input event
through the DAG in topological order is one "round", and every sink
emission within a round becomes a :class:`Prediction` stamped with the
triggering event's timestamp. Because components only ever see events
in arrival order and never look ahead, the output for any prefix of a
stream is a prefix of the output for the whole stream.

Training walks the DAG in topological order: each tunable component's
input stream is materialized by replaying all traces through the
already-fitted upstream components, then the component is fitted on it.
Supervision labels arrive attached to the materialized events (each
aggregate carries the label of its latest contributing basic event).
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .components import Component, build_component
from .errors import (
    CatalogMismatch,
    ConfigurationError,
    EmptyInput,
    MalformedStream,
    UnfittedComponent,
)
from .events import Event, LabeledTrace, Prediction
from .graph import PredictorGraph, topo_order, validate_graph

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class TrainingStats:
    samples: int
    seconds: float


@dataclass(frozen=True)
class FittedPredictor:
    """An immutable trained predictor: graph plus per-component state."""

    graph: PredictorGraph
    state: dict[str, dict]
    training_report: dict[str, TrainingStats] = field(default_factory=dict)

    @property
    def training_seconds(self) -> float:
        return sum(s.seconds for s in self.training_report.values())


class _Runtime:
    """Instantiated components of one graph, ready to push events."""

    def __init__(self, graph: PredictorGraph):
        problems = validate_graph(graph)
        if problems:
            raise ConfigurationError("; ".join(str(p) for p in problems))
        self.graph = graph
        self.order, _ = topo_order(graph)
        self.specs = {s.name: s for s in graph.components}
        self.comps: dict[str, Component] = {
            name: build_component(self.specs[name], graph.catalog) for name in self.order
        }

    def load(self, state: Mapping[str, dict]) -> None:
        for name, comp in self.comps.items():
            if name in state:
                comp.load_state(state[name])

    def require_fitted(self) -> None:
        for comp in self.comps.values():
            comp.require_state()

    def reset(self) -> None:
        for comp in self.comps.values():
            comp.reset()

    def push(self, event: Event) -> dict[str, list[Event]]:
        """One round: route an external event through the whole DAG."""
        buffers: dict[str, list[Event]] = {}
        for name in self.order:
            comp = self.comps[name]
            if comp.is_source:
                ins = [event]
            else:
                ins = [e for up in self.specs[name].inputs for e in buffers.get(up, [])]
                if len(self.specs[name].inputs) > 1:
                    ins.sort(key=lambda e: e.ts)  # stable; declared order breaks ties
            outs: list[Event] = []
            for e in ins:
                outs.extend(comp.process(e))
            buffers[name] = outs
        return buffers


def _check_traces(graph: PredictorGraph, traces: Iterable[LabeledTrace]) -> list[LabeledTrace]:
    traces = list(traces)
    if not traces:
        raise EmptyInput("training needs at least one trace")
    for tr in traces:
        if tr.catalog.names != graph.catalog.names:
            raise CatalogMismatch(
                f"trace {tr.trace_id!r} catalog {tr.catalog.names} does not match graph"
            )
    return traces


def fit(
    graph: PredictorGraph,
    traces: Iterable[LabeledTrace],
    pretrained: Mapping[str, dict] | None = None,
) -> FittedPredictor:
    """Fit all tunable components in topological order.

    Frozen trainable components must receive their state through
    ``pretrained`` (or carry explicit vocabularies in their params);
    tunable ones are fitted on their materialized input streams and the
    wall-clock cost of each fit is recorded in the training report.
    """
    rt = _Runtime(graph)
    traces = _check_traces(graph, traces)
    if pretrained:
        rt.load(pretrained)

    consumers = graph.consumers()
    # per component, per trace: (round, emit_position, event)
    streams: dict[str, list[list[tuple[int, int, Event]]]] = {}
    report: dict[str, TrainingStats] = {}

    for name in rt.order:
        comp = rt.comps[name]
        spec = rt.specs[name]
        if comp.trainable and not comp.has_state:
            if spec.frozen:
                raise UnfittedComponent(
                    f"frozen component {name!r} ({spec.kind}) has no pretrained state"
                )
            fit_events = [
                ev
                for trace_inputs in _input_streams(rt, name, traces, streams)
                for _, _, ev in trace_inputs
            ]
            start = time.perf_counter()
            samples = comp.fit(fit_events)
            report[name] = TrainingStats(samples, time.perf_counter() - start)
        if consumers[name]:
            streams[name] = _materialize(rt, name, traces, streams)

    state = {n: c.dump_state() for n, c in rt.comps.items() if c.trainable}
    return FittedPredictor(graph=graph, state=state, training_report=report)


def _input_streams(
    rt: _Runtime,
    name: str,
    traces: list[LabeledTrace],
    streams: dict[str, list[list[tuple[int, int, Event]]]],
) -> list[list[tuple[int, int, Event]]]:
    """Per-trace input sequences for one component, in push order."""
    comp = rt.comps[name]
    spec = rt.specs[name]
    out = []
    for t, trace in enumerate(traces):
        if comp.is_source:
            out.append([(r, 0, ev) for r, ev in enumerate(trace.events)])
            continue
        rows: list[tuple[int, int, int, Event]] = []
        for k, up in enumerate(spec.inputs):
            rows.extend((r, k, p, ev) for r, p, ev in streams[up][t])
        # replicate online ordering: by round, then ts, stable on declared order
        rows.sort(key=lambda item: (item[0], item[3].ts, item[1], item[2]))
        out.append([(r, p, ev) for r, _, p, ev in rows])
    return out


def _materialize(
    rt: _Runtime,
    name: str,
    traces: list[LabeledTrace],
    streams: dict[str, list[list[tuple[int, int, Event]]]],
) -> list[list[tuple[int, int, Event]]]:
    comp = rt.comps[name]
    out = []
    for trace_inputs in _input_streams(rt, name, traces, streams):
        comp.reset()
        rows: list[tuple[int, int, Event]] = []
        counter = 0  # strictly increasing per trace so push order is recoverable
        for r, _, ev in trace_inputs:
            for produced in comp.process(ev):
                rows.append((r, counter, produced))
                counter += 1
        out.append(rows)
    return out


def stream_predictions(
    fitted: FittedPredictor, events: Iterable[Event]
) -> Iterator[Prediction]:
    """Lazily push events through the DAG, yielding sink emissions.

    Predictions appear as soon as their triggering event is consumed,
    so a caller reading from a live stream sees output online.
    """
    rt = _Runtime(fitted.graph)
    rt.load(fitted.state)
    rt.require_fitted()
    rt.reset()
    sinks = set(fitted.graph.sinks)
    last_ts: int | None = None
    for ev in events:
        if last_ts is not None and ev.ts < last_ts:
            raise MalformedStream(
                f"input events not sorted: ts {ev.ts} after {last_ts}", source=ev.source
            )
        last_ts = ev.ts
        buffers = rt.push(ev)
        for name in rt.order:
            if name not in sinks:
                continue
            for out in buffers.get(name, []):
                yield Prediction.from_probs(ev.ts, out.values(), sink=name)


def run_online(fitted: FittedPredictor, events: Iterable[Event]) -> list[Prediction]:
    """Push a time-ordered event sequence through a fitted predictor."""
    return list(stream_predictions(fitted, events))


def pretrain_states(graph: PredictorGraph, traces: Iterable[LabeledTrace]) -> dict[str, dict]:
    """Fit a fully tunable clone of a graph and return its state map.

    The result can be passed as ``pretrained=`` when fitting the
    original graph, supplying state for its frozen components.
    """
    unfrozen = PredictorGraph(
        [replace(spec, frozen=False) for spec in graph.components],
        graph.sinks,
        graph.catalog,
    )
    return dict(fit(unfrozen, traces).state)


# ---------------------------------------------------------------------------
# persistence


def save_model(fitted: FittedPredictor, path: str | Path) -> None:
    """Write a versioned JSON model file.

    Wall-clock timings are deliberately left out so files are
    byte-identical across runs with the same seed; sample counts stay.
    """
    from .config import graph_to_doc

    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "graph": graph_to_doc(fitted.graph),
        "state": fitted.state,
        "samples": {n: s.samples for n, s in fitted.training_report.items()},
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> FittedPredictor:
    from .config import doc_to_graph

    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    version = doc.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ConfigurationError(f"unsupported model format version {version!r}")
    graph = doc_to_graph(doc["graph"])
    report = {n: TrainingStats(samples, 0.0) for n, samples in doc.get("samples", {}).items()}
    return FittedPredictor(graph=graph, state=doc["state"], training_report=report)
