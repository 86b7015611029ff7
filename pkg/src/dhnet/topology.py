"""District heating network topology: graph model, validation, reduction.

The network is a directed graph with one heating-station node (id 0), load
nodes and junction nodes. Each edge represents a physical pipe pair (one
supply pipe, one return pipe running counter-flow) and is oriented along the
supply flow direction. Pipes whose flow direction is not fixed a priori are
stored as two opposite edges sharing a pair id.
"""

from __future__ import annotations

import hashlib
import heapq
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

STATION = "station"
LOAD = "load"
JUNCTION = "junction"
NODE_KINDS = (STATION, LOAD, JUNCTION)

SUPPLY = "supply"
RETURN = "return"


class TopologyError(ValueError):
    """Invalid graph structure or failed topology operation."""


class TopologyParseError(TopologyError):
    """Malformed topology file; message carries the offending line number."""


@dataclass(frozen=True)
class Node:
    id: int
    kind: str
    # Load-only parameters; ignored for station/junction nodes.
    t_ref_c: float = 45.0
    q_min_kgs: float = 0.05
    q_max_kgs: float = 20.0


@dataclass(frozen=True)
class PipeEdge:
    from_node: int
    to_node: int
    length_m: float
    diameter_m: float
    loss_w_per_mk: float
    reversible: bool = False
    # Edges of one physically reversible pipe share a pair_id.
    pair_id: int | None = None
    # Override for networks where the return pipe runs in the same direction
    # as the supply pipe instead of counter-flow.
    return_same_direction: bool = False


@dataclass(frozen=True)
class NetworkGraph:
    nodes: tuple[Node, ...]
    edges: tuple[PipeEdge, ...]

    @property
    def node_ids(self) -> tuple[int, ...]:
        return tuple(n.id for n in self.nodes)

    @property
    def load_ids(self) -> tuple[int, ...]:
        return tuple(n.id for n in self.nodes if n.kind == LOAD)

    @property
    def junction_ids(self) -> tuple[int, ...]:
        return tuple(n.id for n in self.nodes if n.kind == JUNCTION)

    @property
    def n_loads(self) -> int:
        return len(self.load_ids)

    def node(self, i: int) -> Node:
        for n in self.nodes:
            if n.id == i:
                return n
        raise TopologyError(f"unknown node id {i}")

    def has_node(self, i: int) -> bool:
        return any(n.id == i for n in self.nodes)

    def successors(self, i: int) -> list[int]:
        return sorted({e.to_node for e in self.edges if e.from_node == i})

    def predecessors(self, i: int) -> list[int]:
        return sorted({e.from_node for e in self.edges if e.to_node == i})

    def out_edges(self, i: int) -> list[PipeEdge]:
        return [e for e in self.edges if e.from_node == i]

    def in_edges(self, i: int) -> list[PipeEdge]:
        return [e for e in self.edges if e.to_node == i]

    def physical_pipes(self) -> list[PipeEdge]:
        """One edge per physical pipe: reversible pairs are counted once."""
        seen_pairs: set[int] = set()
        pipes = []
        for e in self.edges:
            if e.reversible and e.pair_id is not None:
                if e.pair_id in seen_pairs:
                    continue
                seen_pairs.add(e.pair_id)
            pipes.append(e)
        return pipes

    def total_pipe_length_m(self) -> float:
        """Combined supply + return pipeline length (each edge hosts both)."""
        return 2.0 * sum(e.length_m for e in self.physical_pipes())


@dataclass(frozen=True)
class ReducedGraph:
    """Graph over the significant nodes (station + loads) only.

    An edge (i, j) means the full graph contains a directed path from i to j
    whose interior nodes are all junctions.
    """

    nodes: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]

    def predecessors(self, i: int) -> list[int]:
        return sorted({a for (a, b) in self.edges if b == i})

    def fingerprint(self) -> str:
        text = "nodes=%s;edges=%s" % (list(self.nodes), list(self.edges))
        return hashlib.sha256(text.encode()).hexdigest()


@dataclass
class ValidationReport:
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


def validate_graph(g: NetworkGraph) -> ValidationReport:
    """Check structural invariants; violations are returned, not raised."""
    rep = ValidationReport()

    ids = [n.id for n in g.nodes]
    if len(ids) != len(set(ids)):
        rep.errors.append("duplicate node ids")
    stations = [n.id for n in g.nodes if n.kind == STATION]
    if len(stations) != 1:
        rep.errors.append(f"multiple stations ({len(stations)} found, expected 1)")
    elif stations[0] != 0:
        rep.errors.append(f"station must be node 0, found {stations[0]}")
    if not any(n.id == 0 for n in g.nodes):
        rep.errors.append("node 0 missing")
    for n in g.nodes:
        if n.kind not in NODE_KINDS:
            rep.errors.append(f"node {n.id}: unknown kind '{n.kind}'")
        if n.kind == LOAD and not (n.q_min_kgs >= 0 and n.q_max_kgs > n.q_min_kgs):
            rep.errors.append(f"node {n.id}: invalid flow limits")

    id_set = set(ids)
    for e in g.edges:
        if e.from_node == e.to_node:
            rep.errors.append(f"self-loop at node {e.from_node}")
        if e.from_node not in id_set or e.to_node not in id_set:
            rep.errors.append(f"edge ({e.from_node},{e.to_node}) references unknown node")
        if e.length_m <= 0 or e.diameter_m <= 0:
            rep.errors.append(f"edge ({e.from_node},{e.to_node}) needs positive length/diameter")
        if e.loss_w_per_mk < 0:
            rep.errors.append(f"edge ({e.from_node},{e.to_node}) has negative loss coefficient")

    # Reversible edges must come in opposite pairs sharing a pair_id.
    by_pair: dict[int, list[PipeEdge]] = {}
    for e in g.edges:
        if e.reversible:
            if e.pair_id is None:
                rep.errors.append(f"reversible edge ({e.from_node},{e.to_node}) lacks pair id")
            else:
                by_pair.setdefault(e.pair_id, []).append(e)
    for pid, pair in by_pair.items():
        if len(pair) != 2 or pair[0].from_node != pair[1].to_node or pair[0].to_node != pair[1].from_node:
            rep.errors.append(f"reversible pair {pid} is not a matched opposite pair")

    if rep.errors:
        return rep

    # Reachability of every load from the station along supply edges.
    reached = _reachable(g, 0)
    for i in g.load_ids:
        if i not in reached:
            rep.errors.append(f"load {i} not reachable from station")
    if set(ids) - _weakly_connected(g):
        rep.errors.append("graph is not weakly connected")

    # Numbering conventions are advisory only.
    loads = sorted(g.load_ids)
    if loads and loads != list(range(1, len(loads) + 1)):
        rep.warnings.append("load ids are not contiguous 1..n_c")
    if loads and g.junction_ids and min(g.junction_ids) <= max(loads):
        rep.warnings.append("junction ids do not all exceed load ids")
    dist = _distances_from_station(g)
    load_dist = [dist.get(i, math.inf) for i in loads]
    if any(b < a - 1e-9 for a, b in zip(load_dist, load_dist[1:])):
        rep.warnings.append("load ids are not ordered by distance from the station")
    junc = sorted(g.junction_ids)
    junc_dist = [dist.get(i, math.inf) for i in junc]
    if any(b < a - 1e-9 for a, b in zip(junc_dist, junc_dist[1:])):
        rep.warnings.append("junction ids are not ordered by distance from the station")
    return rep


def _reachable(g: NetworkGraph, start: int) -> set[int]:
    seen = {start}
    stack = [start]
    while stack:
        i = stack.pop()
        for j in g.successors(i):
            if j not in seen:
                seen.add(j)
                stack.append(j)
    return seen


def _weakly_connected(g: NetworkGraph) -> set[int]:
    if not g.nodes:
        return set()
    adj: dict[int, set[int]] = {n.id: set() for n in g.nodes}
    for e in g.edges:
        adj[e.from_node].add(e.to_node)
        adj[e.to_node].add(e.from_node)
    start = g.nodes[0].id
    seen = {start}
    stack = [start]
    while stack:
        i = stack.pop()
        for j in adj[i]:
            if j not in seen:
                seen.add(j)
                stack.append(j)
    return seen


def _distances_from_station(g: NetworkGraph) -> dict[int, float]:
    """Shortest pipeline distance (m) from node 0 along supply edges."""
    dist = {0: 0.0}
    heap = [(0.0, 0)]
    while heap:
        d, i = heapq.heappop(heap)
        if d > dist.get(i, math.inf):
            continue
        for e in g.out_edges(i):
            nd = d + e.length_m
            if nd < dist.get(e.to_node, math.inf) - 1e-12:
                dist[e.to_node] = nd
                heapq.heappush(heap, (nd, e.to_node))
    return dist


def load_distances(g: NetworkGraph) -> dict[int, float]:
    """Pipeline distance from the station to each load, in meters."""
    dist = _distances_from_station(g)
    return {i: dist[i] for i in g.load_ids if i in dist}


def inlet_set(g: NetworkGraph, i: int, side: str = SUPPLY) -> set[int]:
    """Nodes feeding node i on the given network side.

    On the supply side these are the predecessors of i. On the return side
    the flow runs counter to the supply orientation, so by default the
    successors of i feed its return node; per-edge overrides flip this.
    """
    if not g.has_node(i):
        raise TopologyError(f"unknown node id {i}")
    if side == SUPPLY:
        return {e.from_node for e in g.edges if e.to_node == i}
    if side == RETURN:
        out = {e.to_node for e in g.edges if e.from_node == i and not e.return_same_direction}
        out |= {e.from_node for e in g.edges if e.to_node == i and e.return_same_direction}
        return out
    raise ValueError(f"side must be '{SUPPLY}' or '{RETURN}', got {side!r}")


def significant_nodes(g: NetworkGraph) -> tuple[int, ...]:
    return tuple([0] + sorted(g.load_ids))


def reduce_graph(g: NetworkGraph) -> ReducedGraph:
    """Collapse junction-only paths between station/load nodes into edges."""
    rep = validate_graph(g)
    if not rep.ok:
        raise TopologyError("invalid graph: " + "; ".join(rep.errors))
    signif = set(significant_nodes(g))
    edges: set[tuple[int, int]] = set()
    for s in sorted(signif):
        # Reachability through junction-only interiors: expand junctions,
        # record significant nodes, do not walk past them.
        seen: set[int] = set()
        stack = [s]
        while stack:
            i = stack.pop()
            for j in g.successors(i):
                if j in signif:
                    if j != s:
                        edges.add((s, j))
                elif j not in seen:
                    seen.add(j)
                    stack.append(j)
    return ReducedGraph(nodes=significant_nodes(g), edges=tuple(sorted(edges)))


def topological_order(node_ids: list[int], edges: list[tuple[int, int]]) -> list[int]:
    """Kahn's algorithm with deterministic (sorted id) tie-breaking."""
    indeg = {i: 0 for i in node_ids}
    succ: dict[int, list[int]] = {i: [] for i in node_ids}
    for a, b in edges:
        indeg[b] += 1
        succ[a].append(b)
    ready = sorted(i for i in node_ids if indeg[i] == 0)
    order = []
    while ready:
        i = heapq.heappop(ready)
        order.append(i)
        for j in sorted(succ[i]):
            indeg[j] -= 1
            if indeg[j] == 0:
                heapq.heappush(ready, j)
    if len(order) != len(node_ids):
        raise TopologyError("graph contains a directed cycle")
    return order


# ---------------------------------------------------------------------------
# Topology file format
#
#   # comment
#   [nodes]
#   <id> <kind> [<t_ref_c> <q_min_kgs> <q_max_kgs>]
#   [edges]
#   <from> <to> <length_m> <diameter_m> <loss_w_per_mk> <reversible 0|1>
#          [<return_same_direction 0|1>]
#
# One edge line per physical pipe; a reversible pipe expands into two
# opposite directed edges sharing a pair id. Saving collapses them back,
# so load -> save -> load is the identity.
# ---------------------------------------------------------------------------


def load_topology(path: str | Path) -> NetworkGraph:
    text = Path(path).read_text()
    return parse_topology(text)


def parse_topology(text: str) -> NetworkGraph:
    nodes: list[Node] = []
    edges: list[PipeEdge] = []
    section = None
    next_pair = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if line not in ("[nodes]", "[edges]"):
                raise TopologyParseError(f"line {lineno}: unknown section {line}")
            section = line[1:-1]
            continue
        tokens = line.split()
        if section == "nodes":
            nodes.append(_parse_node(tokens, lineno))
        elif section == "edges":
            parsed = _parse_edge(tokens, lineno, next_pair)
            edges.extend(parsed)
            if parsed[0].reversible:
                next_pair += 1
        else:
            raise TopologyParseError(f"line {lineno}: data before any section header")
    g = NetworkGraph(nodes=tuple(nodes), edges=tuple(edges))
    rep = validate_graph(g)
    if not rep.ok:
        raise TopologyError("topology failed validation: " + "; ".join(rep.errors))
    return g


def _parse_node(tokens: list[str], lineno: int) -> Node:
    if len(tokens) not in (2, 5):
        raise TopologyParseError(f"line {lineno}: node needs 2 or 5 fields, got {len(tokens)}")
    try:
        nid = int(tokens[0])
    except ValueError:
        raise TopologyParseError(f"line {lineno}: bad node id {tokens[0]!r}") from None
    kind = tokens[1]
    if kind not in NODE_KINDS:
        raise TopologyParseError(f"line {lineno}: unknown node kind {kind!r}")
    if len(tokens) == 5:
        if kind != LOAD:
            raise TopologyParseError(f"line {lineno}: load parameters on non-load node")
        try:
            t_ref, q_min, q_max = (float(t) for t in tokens[2:5])
        except ValueError:
            raise TopologyParseError(f"line {lineno}: bad load parameters") from None
        return Node(nid, kind, t_ref_c=t_ref, q_min_kgs=q_min, q_max_kgs=q_max)
    return Node(nid, kind)


def _parse_edge(tokens: list[str], lineno: int, pair_id: int) -> list[PipeEdge]:
    if len(tokens) not in (6, 7):
        raise TopologyParseError(f"line {lineno}: edge needs 6 or 7 fields, got {len(tokens)}")
    try:
        a, b = int(tokens[0]), int(tokens[1])
        length, diam, loss = float(tokens[2]), float(tokens[3]), float(tokens[4])
        rev = bool(int(tokens[5]))
        same_dir = bool(int(tokens[6])) if len(tokens) == 7 else False
    except ValueError:
        raise TopologyParseError(f"line {lineno}: bad edge fields") from None
    if rev:
        return [
            PipeEdge(a, b, length, diam, loss, reversible=True, pair_id=pair_id,
                     return_same_direction=same_dir),
            PipeEdge(b, a, length, diam, loss, reversible=True, pair_id=pair_id,
                     return_same_direction=same_dir),
        ]
    return [PipeEdge(a, b, length, diam, loss, return_same_direction=same_dir)]


def format_topology(g: NetworkGraph) -> str:
    lines = ["[nodes]"]
    for n in g.nodes:
        if n.kind == LOAD:
            lines.append(f"{n.id} {n.kind} {n.t_ref_c!r} {n.q_min_kgs!r} {n.q_max_kgs!r}")
        else:
            lines.append(f"{n.id} {n.kind}")
    lines.append("[edges]")
    for e in g.physical_pipes():
        fields = [str(e.from_node), str(e.to_node), repr(e.length_m), repr(e.diameter_m),
                  repr(e.loss_w_per_mk), "1" if e.reversible else "0"]
        if e.return_same_direction:
            fields.append("1")
        lines.append(" ".join(fields))
    return "\n".join(lines) + "\n"


def save_topology(g: NetworkGraph, path: str | Path) -> None:
    Path(path).write_text(format_topology(g))


def aroma_path() -> Path:
    """Path of the bundled benchmark topology file."""
    return Path(resources.files("dhnet").joinpath("data/aroma.topo"))


def load_aroma() -> NetworkGraph:
    return load_topology(aroma_path())
