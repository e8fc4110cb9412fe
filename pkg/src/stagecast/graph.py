"""Predictor graphs: DAGs of components joined by event streams.

A :class:`PredictorGraph` is pure structure (names, kinds, params,
wiring); runtime behavior lives in :mod:`stagecast.components` and
execution in :mod:`stagecast.engine`. Validation returns violations as
data so configuration tooling can report all problems at once.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace

from .events import StageCatalog


@dataclass(frozen=True)
class ComponentSpec:
    """One node: a registered component kind plus its wiring and params."""

    name: str
    kind: str
    params: dict[str, object] = field(default_factory=dict)
    frozen: bool = False
    inputs: tuple[str, ...] = ()

    def __init__(self, name, kind, params=None, frozen=False, inputs=()):
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "params", dict(params or {}))
        object.__setattr__(self, "frozen", bool(frozen))
        object.__setattr__(self, "inputs", tuple(inputs))


@dataclass(frozen=True)
class PredictorGraph:
    components: tuple[ComponentSpec, ...]
    sinks: tuple[str, ...]
    catalog: StageCatalog

    def __init__(self, components, sinks, catalog):
        object.__setattr__(self, "components", tuple(components))
        object.__setattr__(self, "sinks", tuple(sinks))
        object.__setattr__(self, "catalog", catalog)

    def component(self, name: str) -> ComponentSpec:
        for spec in self.components:
            if spec.name == name:
                return spec
        raise KeyError(f"no component named {name!r}")

    def consumers(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {spec.name: [] for spec in self.components}
        for spec in self.components:
            for up in spec.inputs:
                if up in out:
                    out[up].append(spec.name)
        return out


@dataclass(frozen=True)
class GraphViolation:
    code: str
    where: str
    detail: str

    def __str__(self) -> str:
        return f"{self.code}({self.where}): {self.detail}"


def topo_order(graph: PredictorGraph) -> tuple[list[str], list[str]]:
    """Kahn's ordering in declaration order; second item is any cycle."""
    names = [s.name for s in graph.components]
    indeg = {s.name: 0 for s in graph.components}
    for spec in graph.components:
        for up in spec.inputs:
            if up in indeg:
                indeg[spec.name] += 1
    consumers = graph.consumers()
    ready = deque(n for n in names if indeg[n] == 0)
    order: list[str] = []
    while ready:
        n = ready.popleft()
        order.append(n)
        for down in consumers.get(n, []):
            indeg[down] -= 1
            if indeg[down] == 0:
                ready.append(down)
    leftover = [n for n in names if n not in set(order)]
    return order, leftover


def validate_graph(graph: PredictorGraph) -> list[GraphViolation]:
    """Check every PredictorGraph invariant; empty list means valid."""
    from .components import REGISTRY  # deferred: components import this module

    out: list[GraphViolation] = []
    names = [s.name for s in graph.components]
    seen: set[str] = set()
    for n in names:
        if n in seen:
            out.append(GraphViolation("DuplicateName", n, "component name repeated"))
        seen.add(n)

    for spec in graph.components:
        cls = REGISTRY.get(spec.kind)
        if cls is None:
            out.append(
                GraphViolation("UnknownKind", spec.name, f"no component kind {spec.kind!r}")
            )
            continue
        for problem in cls.check_params(spec.params):
            out.append(GraphViolation("BadParam", spec.name, problem))
        lo, hi = cls.arity
        n_in = len(spec.inputs)
        if n_in < lo or (hi is not None and n_in > hi):
            want = f"exactly {lo}" if lo == hi else f"at least {lo}"
            out.append(
                GraphViolation("BadArity", spec.name, f"{spec.kind} takes {want} inputs, got {n_in}")
            )
        if len(set(spec.inputs)) != n_in:
            out.append(GraphViolation("DuplicateInput", spec.name, "repeated input stream"))
        for up in spec.inputs:
            if up not in seen and up not in names:
                out.append(GraphViolation("MissingInput", spec.name, f"unknown input {up!r}"))

    # edge kind compatibility (only where both endpoints resolve)
    by_name = {s.name: s for s in graph.components}
    for spec in graph.components:
        cls = REGISTRY.get(spec.kind)
        if cls is None:
            continue
        accepted = cls.static_input_kinds(spec.params)
        for up in spec.inputs:
            upspec = by_name.get(up)
            upcls = REGISTRY.get(upspec.kind) if upspec else None
            if upcls is None:
                continue
            produced = upcls.static_output_kind(upspec.params)
            if produced not in accepted:
                out.append(
                    GraphViolation(
                        "KindMismatch",
                        f"{up}->{spec.name}",
                        f"{spec.kind} does not accept {produced.value} events",
                    )
                )

    order, leftover = topo_order(graph)
    if leftover:
        out.append(GraphViolation("CycleDetected", ",".join(leftover), "dependency cycle"))

    for sink in graph.sinks:
        if sink not in by_name:
            out.append(GraphViolation("MissingSink", sink, "sink names no component"))
            continue
        cls = REGISTRY.get(by_name[sink].kind)
        if cls is not None:
            from .events import EventKind

            if cls.static_output_kind(by_name[sink].params) is not EventKind.PREDICTION:
                out.append(
                    GraphViolation("BadSink", sink, "sink must emit PREDICTION events")
                )
    if not graph.sinks:
        out.append(GraphViolation("MissingSink", "<graph>", "graph declares no sinks"))

    # reachability from sources
    if not leftover:
        reachable = set()
        for spec in graph.components:
            cls = REGISTRY.get(spec.kind)
            if cls is not None and cls.is_source:
                reachable.add(spec.name)
        for n in order:
            spec = by_name[n]
            if spec.inputs and any(up in reachable for up in spec.inputs):
                reachable.add(n)
        for spec in graph.components:
            cls = REGISTRY.get(spec.kind)
            if cls is None or cls.is_source:
                continue
            if spec.name not in reachable:
                out.append(
                    GraphViolation("Unreachable", spec.name, "no path from any source")
                )
    return out


def with_default_seeds(graph: PredictorGraph, base_seed: int) -> PredictorGraph:
    """Fill in missing per-component seeds deterministically from a base."""
    from .components import REGISTRY

    specs = []
    for i, spec in enumerate(graph.components):
        cls = REGISTRY.get(spec.kind)
        if cls is not None and "seed" in cls.PARAMS and "seed" not in spec.params:
            params = dict(spec.params)
            params["seed"] = base_seed + i
            spec = replace(spec, params=params)
        specs.append(spec)
    return PredictorGraph(specs, graph.sinks, graph.catalog)
