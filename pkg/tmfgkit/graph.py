"""Core data types: triangulations, clique trees, gain caches and filter results."""

from __future__ import annotations

import heapq
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Set, Tuple

import networkx as nx
import numpy as np

logger = logging.getLogger("tmfgkit.graph")

Edge = Tuple[int, int]
Face = Tuple[int, int, int]
Clique = Tuple[int, int, int, int]


def make_edge(i: int, j: int) -> Edge:
    if i == j:
        raise ValueError(f"self-loop on vertex {i}")
    return (i, j) if i < j else (j, i)


def make_face(a: int, b: int, c: int) -> Face:
    if len({a, b, c}) != 3:
        raise ValueError(f"face needs three distinct vertices, got {(a, b, c)}")
    return tuple(sorted((a, b, c)))  # type: ignore[return-value]


def face_edges(face: Sequence[int]) -> List[Edge]:
    a, b, c = face
    return [make_edge(a, b), make_edge(a, c), make_edge(b, c)]


def clique_edges(vertices: Sequence[int]) -> List[Edge]:
    ordered = sorted(vertices)
    return [(ordered[x], ordered[y]) for x in range(len(ordered)) for y in range(x + 1, len(ordered))]


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ValidationReport:
    """Named pass/fail checks; a passing check carries no detail."""

    checks: List[Check] = field(default_factory=list)

    def add(self, name: str, passed: bool, detail: str = "") -> None:
        self.checks.append(Check(name, passed, "" if passed else detail))

    def extend(self, other: "ValidationReport") -> None:
        self.checks.extend(other.checks)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def failures(self) -> List[Check]:
        return [check for check in self.checks if not check.passed]

    def __bool__(self) -> bool:
        return self.passed

    def to_dict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in self.checks],
        }


class Triangulation:
    """A planar graph held as adjacency sets plus a registry of triangular faces.

    Faces are sorted triples and edges sorted pairs. Only vertices in ``inserted``
    take part in the graph; the remaining ids up to ``p`` are free slots.
    """

    def __init__(self, p: int) -> None:
        if p < 0:
            raise ValueError("vertex count must be non-negative")
        self.p = p
        self.adjacency: List[Set[int]] = [set() for _ in range(p)]
        self.faces: Set[Face] = set()
        self.inserted: Set[int] = set()
        self._edge_faces: Dict[Edge, Set[Face]] = defaultdict(set)
        self._vertex_faces: Dict[int, Set[Face]] = defaultdict(set)
        self._edge_count = 0

    @classmethod
    def from_k4(cls, p: int, clique: Sequence[int]) -> "Triangulation":
        tri = cls(p)
        tri.seed(clique)
        return tri

    def seed(self, clique: Sequence[int]) -> None:
        vertices = sorted(set(clique))
        if len(vertices) != 4:
            raise ValueError(f"seed clique needs four distinct vertices, got {list(clique)}")
        if self.inserted:
            raise ValueError("triangulation already seeded")
        for v in vertices:
            self.insert_vertex(v)
        for i, j in clique_edges(vertices):
            self.add_edge(i, j)
        a, b, c, d = vertices
        for face in ((a, b, c), (a, b, d), (a, c, d), (b, c, d)):
            self.add_face(face)

    def _check_vertex(self, v: int) -> None:
        if not 0 <= v < self.p:
            raise ValueError(f"vertex {v} outside [0, {self.p})")

    def add_vertex_slot(self) -> int:
        self.adjacency.append(set())
        self.p += 1
        return self.p - 1

    def insert_vertex(self, v: int) -> None:
        self._check_vertex(v)
        if v in self.inserted:
            raise ValueError(f"vertex {v} already inserted")
        self.inserted.add(v)

    def remove_vertex(self, v: int) -> None:
        if self.adjacency[v]:
            raise ValueError(f"vertex {v} still has {len(self.adjacency[v])} edges")
        self.inserted.discard(v)

    def has_edge(self, i: int, j: int) -> bool:
        return 0 <= i < self.p and j in self.adjacency[i]

    def add_edge(self, i: int, j: int) -> None:
        edge = make_edge(i, j)
        self._check_vertex(edge[0])
        self._check_vertex(edge[1])
        if edge[1] in self.adjacency[edge[0]]:
            raise ValueError(f"edge {edge} already present")
        self.adjacency[i].add(j)
        self.adjacency[j].add(i)
        self._edge_count += 1

    def remove_edge(self, i: int, j: int) -> None:
        edge = make_edge(i, j)
        if edge[1] not in self.adjacency[edge[0]]:
            raise ValueError(f"edge {edge} not present")
        if self._edge_faces.get(edge):
            raise ValueError(f"edge {edge} still bounds registered faces")
        self.adjacency[i].discard(j)
        self.adjacency[j].discard(i)
        self._edge_count -= 1

    def add_face(self, vertices: Sequence[int]) -> Face:
        face = make_face(*vertices)
        if face in self.faces:
            raise ValueError(f"face {face} already registered")
        for i, j in face_edges(face):
            if not self.has_edge(i, j):
                raise ValueError(f"face {face} is missing edge {(i, j)}")
        self.faces.add(face)
        for edge in face_edges(face):
            self._edge_faces[edge].add(face)
        for v in face:
            self._vertex_faces[v].add(face)
        return face

    def remove_face(self, vertices: Sequence[int]) -> Face:
        face = make_face(*vertices)
        if face not in self.faces:
            raise ValueError(f"{face} is not a face")
        self.faces.discard(face)
        for edge in face_edges(face):
            bucket = self._edge_faces[edge]
            bucket.discard(face)
            if not bucket:
                del self._edge_faces[edge]
        for v in face:
            self._vertex_faces[v].discard(face)
        return face

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    def neighbors(self, v: int) -> List[int]:
        return sorted(self.adjacency[v])

    def faces_on_edge(self, i: int, j: int) -> List[Face]:
        return sorted(self._edge_faces.get(make_edge(i, j), ()))

    def faces_at(self, v: int) -> List[Face]:
        return sorted(self._vertex_faces.get(v, ()))

    def edges(self) -> List[Edge]:
        return [(i, j) for i in range(self.p) for j in sorted(self.adjacency[i]) if i < j]

    def iter_edges(self) -> Iterator[Edge]:
        for i in range(self.p):
            for j in self.adjacency[i]:
                if i < j:
                    yield (i, j)

    @property
    def edge_count(self) -> int:
        return self._edge_count

    @property
    def vertex_count(self) -> int:
        return len(self.inserted)

    def copy(self) -> "Triangulation":
        clone = Triangulation(self.p)
        clone.adjacency = [set(neigh) for neigh in self.adjacency]
        clone.faces = set(self.faces)
        clone.inserted = set(self.inserted)
        clone._edge_count = self._edge_count
        for edge, faces in self._edge_faces.items():
            clone._edge_faces[edge] = set(faces)
        for v, faces in self._vertex_faces.items():
            if faces:
                clone._vertex_faces[v] = set(faces)
        return clone

    def signature(self) -> Tuple[frozenset, frozenset]:
        """Hashable (edges, faces) pair for identity comparisons."""
        return frozenset(self.iter_edges()), frozenset(self.faces)

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(sorted(self.inserted))
        graph.add_edges_from(self.iter_edges())
        return graph


def total_weight(tri: Triangulation, w: Any) -> float:
    """Sum of oracle weights over the unordered edge set."""
    weights = []
    for i, j in tri.edges():
        if j >= w.p:
            raise ValueError(f"edge {(i, j)} outside oracle dimension {w.p}")
        weights.append(w.weight(i, j))
    return math.fsum(weights)


def verify_sphere_triangulation(tri: Triangulation) -> ValidationReport:
    report = ValidationReport()
    n = tri.vertex_count
    if n < 4:
        report.add("vertex-count", False, f"{n} inserted vertices, need at least 4")
        return report
    report.add("edge-count", tri.edge_count == 3 * n - 6, f"|E| = {tri.edge_count}, expected {3 * n - 6}")
    report.add("face-count", len(tri.faces) == 2 * n - 4, f"|faces| = {len(tri.faces)}, expected {2 * n - 4}")

    problems: List[str] = []
    for i, j in tri.edges():
        count = len(tri.faces_on_edge(i, j))
        if count == 1:
            problems.append(f"edge {(i, j)} in one face")
        elif count != 2:
            problems.append(f"edge {(i, j)} in {count} faces")
    for face in sorted(tri.faces):
        for i, j in face_edges(face):
            if not tri.has_edge(i, j):
                problems.append(f"face {face} misses edge {(i, j)}")
    report.add("edge-in-two-faces", not problems, "; ".join(problems[:10]))
    return report


@dataclass
class CliqueTree:
    """4-cliques linked through 3-vertex separators.

    ``links[i]`` is the separator joining clique ``i`` to ``parent[i]``; the root
    (index 0) has neither. ``face_owner`` maps every open face to the clique that
    created it, which is where the next clique spawned from that face attaches.
    """

    cliques: List[Clique] = field(default_factory=list)
    links: List[Optional[Face]] = field(default_factory=list)
    parent: List[Optional[int]] = field(default_factory=list)
    face_owner: Dict[Face, int] = field(default_factory=dict)

    @property
    def separators(self) -> List[Face]:
        return [link for link in self.links[1:] if link is not None]

    def seed(self, clique: Sequence[int]) -> None:
        members = tuple(sorted(clique))
        if len(members) != 4:
            raise ValueError("root clique needs four vertices")
        self.cliques = [members]  # type: ignore[list-item]
        self.links = [None]
        self.parent = [None]
        a, b, c, d = members
        self.face_owner = {make_face(*f): 0 for f in ((a, b, c), (a, b, d), (a, c, d), (b, c, d))}

    def add(self, clique: Sequence[int], separator: Sequence[int]) -> int:
        sep = make_face(*separator)
        members = tuple(sorted(clique))
        if sep not in self.face_owner:
            raise ValueError(f"separator {sep} is not an open face of the tree")
        if not set(sep) < set(members):
            raise ValueError(f"separator {sep} not inside clique {members}")
        owner = self.face_owner.pop(sep)
        index = len(self.cliques)
        self.cliques.append(members)  # type: ignore[arg-type]
        self.links.append(sep)
        self.parent.append(owner)
        (new_vertex,) = set(members) - set(sep)
        a, b, c = sep
        for pair in ((a, b), (a, c), (b, c)):
            self.face_owner[make_face(pair[0], pair[1], new_vertex)] = index
        return index

    def relabel(self, mapping: Mapping[int, int]) -> None:
        def remap(values: Iterable[int]) -> Tuple[int, ...]:
            return tuple(sorted(mapping.get(v, v) for v in values))

        self.cliques = [remap(c) for c in self.cliques]  # type: ignore[misc]
        self.links = [remap(s) if s is not None else None for s in self.links]  # type: ignore[misc]
        self.face_owner = {remap(f): owner for f, owner in self.face_owner.items()}  # type: ignore[misc]

    def copy(self) -> "CliqueTree":
        return CliqueTree(list(self.cliques), list(self.links), list(self.parent), dict(self.face_owner))

    @classmethod
    def from_triangulation(cls, tri: Triangulation) -> Optional["CliqueTree"]:
        """Rebuild the tree of a chordal maximal planar graph by peeling degree-3 vertices.

        Returns None when the graph cannot be peeled down to a K4, i.e. it is not a
        4-clique tree.
        """
        adjacency = {v: set(tri.adjacency[v]) for v in tri.inserted}
        if len(adjacency) < 4:
            return None
        heap = [v for v, neigh in adjacency.items() if len(neigh) == 3]
        heapq.heapify(heap)
        peeled: List[Tuple[int, Face]] = []
        while len(adjacency) > 4:
            while heap and (heap[0] not in adjacency or len(adjacency[heap[0]]) != 3):
                heapq.heappop(heap)
            if not heap:
                return None
            v = heapq.heappop(heap)
            a, b, c = sorted(adjacency[v])
            if not (b in adjacency[a] and c in adjacency[a] and c in adjacency[b]):
                return None
            peeled.append((v, (a, b, c)))
            for u in (a, b, c):
                adjacency[u].discard(v)
                if len(adjacency[u]) == 3:
                    heapq.heappush(heap, u)
            del adjacency[v]
        root = sorted(adjacency)
        if any(len(adjacency[v]) != 3 for v in root):
            return None
        tree = cls()
        tree.seed(root)
        for v, sep in reversed(peeled):
            tree.add(sep + (v,), sep)
        return tree

    def to_dict(self) -> Dict[str, Any]:
        return {
            "cliques": [list(c) for c in self.cliques],
            "separators": [list(s) for s in self.separators],
            "parents": list(self.parent),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "CliqueTree":
        cliques = [tuple(sorted(int(v) for v in c)) for c in data["cliques"]]
        separators = [tuple(sorted(int(v) for v in s)) for s in data["separators"]]
        parents = [None if p is None else int(p) for p in data["parents"]]
        if len(separators) != max(len(cliques) - 1, 0) or len(parents) != len(cliques):
            raise ValueError("clique tree lists have inconsistent lengths")
        return cls(cliques, [None] + separators, parents, {})  # type: ignore[arg-type]


class GainCache:
    """Best candidate per key (faces, or plaquette edges) over the remaining vertices.

    ``max_gain[key]`` / ``best_vertex[key]`` hold the maximum score and the
    lowest-index vertex attaining it. A lazily invalidated heap answers the global
    best entry; ties go to the lexicographically smallest key.
    """

    def __init__(self, remaining: Iterable[int]) -> None:
        self.remaining = np.array(sorted(set(remaining)), dtype=np.int64)
        self.max_gain: Dict[Tuple[int, ...], float] = {}
        self.best_vertex: Dict[Tuple[int, ...], int] = {}
        self.evaluations = 0
        self._by_vertex: Dict[int, Set[Tuple[int, ...]]] = defaultdict(set)
        self._stamp: Dict[Tuple[int, ...], int] = {}
        self._counter = 0
        self._heap: List[Tuple[float, Tuple[int, ...], int]] = []

    def __contains__(self, key: object) -> bool:
        return key in self.max_gain

    def __len__(self) -> int:
        return len(self.max_gain)

    def set(self, key: Tuple[int, ...], gain: float, vertex: int) -> None:
        self.drop(key)
        self.max_gain[key] = gain
        self.best_vertex[key] = vertex
        self._by_vertex[vertex].add(key)
        self._counter += 1
        self._stamp[key] = self._counter
        heapq.heappush(self._heap, (-gain, key, self._counter))

    def drop(self, key: Tuple[int, ...]) -> None:
        if key not in self.max_gain:
            return
        vertex = self.best_vertex.pop(key)
        self._by_vertex[vertex].discard(key)
        del self.max_gain[key]
        del self._stamp[key]

    def keys_with_best(self, vertex: int) -> List[Tuple[int, ...]]:
        return sorted(self._by_vertex.get(vertex, ()))

    def remove_remaining(self, vertex: int) -> None:
        pos = int(np.searchsorted(self.remaining, vertex))
        if pos >= len(self.remaining) or self.remaining[pos] != vertex:
            raise ValueError(f"vertex {vertex} is not among the remaining vertices")
        self.remaining = np.delete(self.remaining, pos)

    def best(self, accept: Optional[Callable[[Tuple[int, ...]], bool]] = None) -> Optional[Tuple[Tuple[int, ...], float, int]]:
        """Highest-gain live entry, optionally restricted to keys ``accept`` allows."""
        skipped = []
        found = None
        while self._heap:
            neg_gain, key, stamp = self._heap[0]
            if self._stamp.get(key) != stamp:
                heapq.heappop(self._heap)
                continue
            if accept is not None and not accept(key):
                skipped.append(heapq.heappop(self._heap))
                continue
            found = (key, -neg_gain, self.best_vertex[key])
            break
        for entry in skipped:
            heapq.heappush(self._heap, entry)
        return found


@dataclass
class BuildStats:
    score_evaluations: int = 0
    bookkeeping_total: Optional[float] = None
    seed_clique: Tuple[int, ...] = ()
    fallback_to_base: bool = False
    planarity_tests: int = 0


@dataclass
class FilterResult:
    """Filtered edge list with its total weight and, for chordal outputs, the clique tree."""

    p: int
    edges: List[Tuple[int, int, float]]
    total_weight: float
    clique_tree: Optional[CliqueTree]
    method: str
    elapsed: float = 0.0
    moves_applied: Dict[str, int] = field(default_factory=dict)
    triangulation: Optional[Triangulation] = None
    stats: BuildStats = field(default_factory=BuildStats)
    names: Optional[List[str]] = None

    @property
    def chordal(self) -> bool:
        return self.clique_tree is not None

    @property
    def vertices(self) -> List[int]:
        if self.triangulation is not None:
            return sorted(self.triangulation.inserted)
        seen = {i for i, _, _ in self.edges} | {j for _, j, _ in self.edges}
        return sorted(seen)

    def edge_set(self) -> Set[Edge]:
        return {(i, j) for i, j, _ in self.edges}

    def weight_map(self) -> Dict[Edge, float]:
        return {(i, j): wt for i, j, wt in self.edges}

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(self.vertices)
        for i, j, wt in self.edges:
            graph.add_edge(i, j, weight=wt)
        return graph

    @classmethod
    def from_triangulation(
        cls,
        tri: Triangulation,
        w: Any,
        *,
        method: str,
        clique_tree: Optional[CliqueTree],
        moves_applied: Optional[Dict[str, int]] = None,
        stats: Optional[BuildStats] = None,
        elapsed: float = 0.0,
    ) -> "FilterResult":
        edges = [(i, j, w.weight(i, j)) for i, j in tri.edges()]
        return cls(
            p=tri.p,
            edges=edges,
            total_weight=math.fsum(wt for _, _, wt in edges),
            clique_tree=clique_tree,
            method=method,
            elapsed=elapsed,
            moves_applied=dict(moves_applied or {}),
            triangulation=tri,
            stats=stats or BuildStats(),
        )

    def to_dict(self, *, include_timings: bool = False) -> Dict[str, Any]:
        payload: Dict[str, Any] = {
            "format": "tmfgkit.filter-result/1",
            "method": self.method,
            "p": self.p,
            "nodes": [
                {"id": v, "name": self.names[v]} if self.names and v < len(self.names) else {"id": v}
                for v in self.vertices
            ],
            "edges": [{"i": i, "j": j, "weight": wt} for i, j, wt in self.edges],
            "total_weight": self.total_weight,
            "chordal": self.chordal,
            "moves_applied": dict(sorted(self.moves_applied.items())),
            "score_evaluations": self.stats.score_evaluations,
            "seed_clique": list(self.stats.seed_clique),
            "fallback_to_base": self.stats.fallback_to_base,
        }
        if self.stats.bookkeeping_total is not None:
            payload["bookkeeping_total"] = self.stats.bookkeeping_total
        if self.clique_tree is not None:
            payload.update(self.clique_tree.to_dict())
        if self.triangulation is not None:
            payload["faces"] = [list(f) for f in sorted(self.triangulation.faces)]
        if include_timings:
            payload["elapsed"] = self.elapsed
        return payload

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "FilterResult":
        try:
            p = int(data["p"])
            edges = [(int(e["i"]), int(e["j"]), float(e["weight"])) for e in data["edges"]]
            method = str(data["method"])
            total = float(data["total_weight"])
            tree = None
            if data.get("chordal") and "cliques" in data:
                tree = CliqueTree.from_dict(data)
            tri = _registry_from_dict(p, edges, data) if "faces" in data else None
            names = None
            nodes = data.get("nodes") or []
            if nodes and all("name" in node for node in nodes):
                names = [""] * p
                for node in nodes:
                    names[int(node["id"])] = str(node["name"])
            moves = {str(k): int(v) for k, v in (data.get("moves_applied") or {}).items()}
            stats = BuildStats(
                score_evaluations=int(data.get("score_evaluations", 0)),
                bookkeeping_total=data.get("bookkeeping_total"),
                seed_clique=tuple(int(v) for v in data.get("seed_clique", ())),
                fallback_to_base=bool(data.get("fallback_to_base", False)),
            )
        except (KeyError, TypeError, ValueError, IndexError, AttributeError) as exc:
            raise ValueError(f"malformed filter result: {exc!r}") from exc
        return cls(
            p=p,
            edges=edges,
            total_weight=total,
            clique_tree=tree,
            method=method,
            moves_applied=moves,
            triangulation=tri,
            stats=stats,
            names=names,
        )


def _registry_from_dict(p: int, edges: Sequence[Tuple[int, int, float]], data: Mapping[str, Any]) -> Triangulation:
    tri = Triangulation(p)
    for node in data.get("nodes") or []:
        tri.insert_vertex(int(node["id"]))
    for i, j, _ in edges:
        for v in (i, j):
            if v not in tri.inserted:
                tri.insert_vertex(v)
        if not tri.has_edge(i, j):
            tri.add_edge(i, j)
    for face in data["faces"]:
        if len(face) != 3 or not all(0 <= int(v) < p for v in face):
            raise ValueError(f"face {face} is not three vertices in [0, {p})")
        try:
            tri.add_face(face)
        except ValueError:
            # kept for diagnostics; the sphere check reports the gap
            logger.debug("face %s does not match the edge list", face)
    return tri
