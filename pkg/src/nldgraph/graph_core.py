"""Noncompact metric graphs: bounded edges, half-lines, compact core, trace signs.

Graph file format (line oriented, ``#`` starts a comment)::

    vertex <name>
    edge <name> <v_from> <v_to> <length>
    halfline <name> <v_attach>

On a bounded edge the coordinate is ``x = 0`` at ``v_from`` and ``x = length``
at ``v_to``; on a half-line ``x = 0`` at the attachment vertex.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from typing import NamedTuple

from .errors import GraphParseError

START, END = "start", "end"


@dataclass(frozen=True)
class BoundedEdge:
    name: str
    v_from: str
    v_to: str
    length: float

    @property
    def is_loop(self) -> bool:
        return self.v_from == self.v_to


@dataclass(frozen=True)
class HalfLine:
    name: str
    v_attach: str


class Incidence(NamedTuple):
    edge: str
    endpoint: str  # START or END
    sign: int  # +1 where x_e = 0 meets the vertex, -1 where x_e = length does


@dataclass(frozen=True)
class CompactCore:
    edges: tuple[BoundedEdge, ...]
    length: float

    @property
    def is_empty(self) -> bool:
        return not self.edges


@dataclass(frozen=True)
class MetricGraph:
    vertices: tuple[str, ...]
    bounded_edges: tuple[BoundedEdge, ...] = ()
    halflines: tuple[HalfLine, ...] = ()
    name: str = field(default="graph", compare=False)
    _edge_map: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_edge_map", {e.name: e for e in self.bounded_edges})

    def edge(self, name: str) -> BoundedEdge:
        return self._edge_map[name]

    @property
    def is_compact(self) -> bool:
        return not self.halflines

    def halflines_at(self, v: str) -> list[HalfLine]:
        return [h for h in self.halflines if h.v_attach == v]

    @property
    def core_vertices(self) -> tuple[str, ...]:
        """Vertices touched by at least one bounded edge, in declaration order."""
        touched = {e.v_from for e in self.bounded_edges} | {e.v_to for e in self.bounded_edges}
        return tuple(v for v in self.vertices if v in touched)

    @property
    def min_edge_length(self) -> float:
        return min((e.length for e in self.bounded_edges), default=math.inf)

    def flipped(self, edge_name: str) -> "MetricGraph":
        """Same graph with the orientation of one bounded edge reversed."""
        edges = tuple(
            BoundedEdge(e.name, e.v_to, e.v_from, e.length) if e.name == edge_name else e
            for e in self.bounded_edges
        )
        if edge_name not in self._edge_map:
            raise KeyError(edge_name)
        return MetricGraph(self.vertices, edges, self.halflines, self.name)

    def truncated(self, length: float, tip_suffix: str = "@tip") -> tuple["MetricGraph", frozenset]:
        """Replace every half-line by a bounded edge of the given length.

        Returns the compact graph and the set of new tip vertices.
        """
        tips = []
        edges = list(self.bounded_edges)
        for h in self.halflines:
            tip = h.name + tip_suffix
            tips.append(tip)
            edges.append(BoundedEdge(h.name, h.v_attach, tip, float(length)))
        g = MetricGraph(self.vertices + tuple(tips), tuple(edges), (), self.name + "-truncated")
        return g, frozenset(tips)


def _unreachable(vertices, bounded_edges):
    """First vertex (declaration order) not connected to the first vertex, or None."""
    parent = {v: v for v in vertices}

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for e in bounded_edges:
        parent[find(e.v_from)] = find(e.v_to)
    root = find(vertices[0])
    return next((v for v in vertices if find(v) != root), None)


def parse_graph(text: str, name: str = "graph") -> MetricGraph:
    """Parse and validate a graph description.

    Raises GraphParseError with the offending line number on duplicate names,
    unknown vertices, nonpositive or non-finite lengths, and disconnected graphs.
    """
    vertices: list[str] = []
    vertex_line: dict[str, int] = {}
    edges: list[BoundedEdge] = []
    halflines: list[HalfLine] = []
    edge_names: dict[str, int] = {}

    def need_vertex(v, lineno):
        if v not in vertex_line:
            raise GraphParseError(f"unknown vertex {v!r}", lineno, "unknown_vertex")

    def new_edge_name(n, lineno):
        if n in edge_names:
            raise GraphParseError(
                f"duplicate edge name {n!r} (first defined on line {edge_names[n]})", lineno, "duplicate"
            )
        edge_names[n] = lineno

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        kw = parts[0]
        if kw == "vertex":
            if len(parts) != 2:
                raise GraphParseError("expected 'vertex <name>'", lineno)
            v = parts[1]
            if v in vertex_line:
                raise GraphParseError(
                    f"duplicate vertex {v!r} (first defined on line {vertex_line[v]})", lineno, "duplicate"
                )
            vertex_line[v] = lineno
            vertices.append(v)
        elif kw == "edge":
            if len(parts) != 5:
                raise GraphParseError("expected 'edge <name> <v_from> <v_to> <length>'", lineno)
            n, a, b, s = parts[1:]
            new_edge_name(n, lineno)
            need_vertex(a, lineno)
            need_vertex(b, lineno)
            try:
                length = float(s)
            except ValueError:
                raise GraphParseError(f"length {s!r} is not a number", lineno, "length") from None
            if not (math.isfinite(length) and length > 0):
                raise GraphParseError(f"edge {n!r} length must be positive and finite, got {s}", lineno, "length")
            edges.append(BoundedEdge(n, a, b, length))
        elif kw == "halfline":
            if len(parts) != 3:
                raise GraphParseError("expected 'halfline <name> <v_attach>'", lineno)
            n, a = parts[1:]
            new_edge_name(n, lineno)
            need_vertex(a, lineno)
            halflines.append(HalfLine(n, a))
        else:
            raise GraphParseError(f"unknown keyword {kw!r}", lineno)

    if not vertices:
        raise GraphParseError("graph has no vertices", None, "empty")
    stray = _unreachable(vertices, edges)
    if stray is not None:
        raise GraphParseError(
            f"graph is disconnected: vertex {stray!r} cannot be reached from {vertices[0]!r}",
            vertex_line[stray],
            "disconnected",
        )
    return MetricGraph(tuple(vertices), tuple(edges), tuple(halflines), name)


def read_graph(path) -> MetricGraph:
    from pathlib import Path

    p = Path(path)
    return parse_graph(p.read_text(encoding="utf-8"), name=p.stem)


def serialize(g: MetricGraph) -> str:
    """Canonical text form; ``parse_graph(serialize(g)) == g``."""
    lines = [f"vertex {v}" for v in g.vertices]
    lines += [f"edge {e.name} {e.v_from} {e.v_to} {e.length!r}" for e in g.bounded_edges]
    lines += [f"halfline {h.name} {h.v_attach}" for h in g.halflines]
    return "\n".join(lines) + "\n"


def compact_core(g: MetricGraph) -> CompactCore:
    return CompactCore(tuple(g.bounded_edges), math.fsum(e.length for e in g.bounded_edges))


def vertex_star(g: MetricGraph, v: str) -> list[Incidence]:
    """All incidences at ``v``; a self-loop contributes both of its endpoints."""
    if v not in g.vertices:
        raise KeyError(f"unknown vertex {v!r}")
    star = []
    for e in g.bounded_edges:
        if e.v_from == v:
            star.append(Incidence(e.name, START, +1))
        if e.v_to == v:
            star.append(Incidence(e.name, END, -1))
    for h in g.halflines:
        if h.v_attach == v:
            star.append(Incidence(h.name, START, +1))
    return star


def trace_signs(g: MetricGraph) -> dict[tuple[str, str, str], int]:
    """Map (vertex, edge, endpoint) -> trace sign for every incidence."""
    return {(v, inc.edge, inc.endpoint): inc.sign for v in g.vertices for inc in vertex_star(g, v)}


CORPUS = ("segment", "three_star", "tadpole", "core_loop")


def load_corpus_graph(name: str) -> MetricGraph:
    """Graphs bundled with the package (see ``nldgraph/corpus``)."""
    text = resources.files("nldgraph.corpus").joinpath(f"{name}.graph").read_text(encoding="utf-8")
    return parse_graph(text, name=name)
