"""Local topological moves on a Triangulation: T2, T2 inverse, T1, A, A inverse and S.

Every move mutates the triangulation in place and returns a MoveRecord whose
``gain`` is the change in total edge weight under the oracle passed in.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

from .graph import Clique, Edge, Face, Triangulation, make_edge, make_face

logger = logging.getLogger("tmfgkit.moves")

MIN_VERTICES = 4
MOVE_KINDS = ("T2", "T2inv", "T1", "A", "Ainv", "S")


class MoveError(ValueError):
    """A move whose preconditions do not hold."""


@dataclass
class MoveRecord:
    kind: str
    participants: Tuple[int, ...]
    gain: float
    faces_removed: List[Face] = field(default_factory=list)
    faces_added: List[Face] = field(default_factory=list)
    edges_removed: List[Edge] = field(default_factory=list)
    edges_added: List[Edge] = field(default_factory=list)
    clique: Optional[Clique] = None
    separator: Optional[Face] = None
    mapping: Dict[int, int] = field(default_factory=dict)


def _require_new_vertex(tri: Triangulation, v: int) -> None:
    if not 0 <= v < tri.p:
        raise MoveError(f"vertex {v} outside [0, {tri.p})")
    if v in tri.inserted:
        raise MoveError(f"vertex {v} already inserted")


def _require_shrinkable(tri: Triangulation) -> None:
    if tri.vertex_count - 1 < MIN_VERTICES:
        raise MoveError(f"removal would leave {tri.vertex_count - 1} vertices, minimum is {MIN_VERTICES}")


def apply_t2(tri: Triangulation, v: int, face: Sequence[int], w: Any) -> MoveRecord:
    """Insert ``v`` inside ``face``, splitting it into three faces."""
    _require_new_vertex(tri, v)
    t = make_face(*face)
    if t not in tri.faces:
        raise MoveError(f"{t} is not a face")
    a, b, c = t
    tri.remove_face(t)
    tri.insert_vertex(v)
    for u in t:
        tri.add_edge(v, u)
    added = [tri.add_face((a, b, v)), tri.add_face((a, c, v)), tri.add_face((b, c, v))]
    gain = w.weight(v, a) + w.weight(v, b) + w.weight(v, c)
    return MoveRecord(
        kind="T2",
        participants=(v,) + t,
        gain=gain,
        faces_removed=[t],
        faces_added=added,
        edges_added=[make_edge(v, u) for u in t],
        clique=tuple(sorted(t + (v,))),  # type: ignore[arg-type]
        separator=t,
    )


def apply_t2_inverse(tri: Triangulation, v: int, w: Any) -> MoveRecord:
    """Remove a degree-3 vertex; its neighbour triangle becomes a face again."""
    if v not in tri.inserted:
        raise MoveError(f"vertex {v} is not inserted")
    if tri.degree(v) != 3:
        raise MoveError(f"vertex {v} not inside a three-clique (degree {tri.degree(v)})")
    _require_shrinkable(tri)
    a, b, c = tri.neighbors(v)
    if not (tri.has_edge(a, b) and tri.has_edge(a, c) and tri.has_edge(b, c)):
        raise MoveError(f"neighbours of {v} do not form a triangle")
    removed = tri.faces_at(v)
    for face in removed:
        tri.remove_face(face)
    for u in (a, b, c):
        tri.remove_edge(v, u)
    tri.remove_vertex(v)
    restored = tri.add_face((a, b, c))
    gain = -(w.weight(v, a) + w.weight(v, b) + w.weight(v, c))
    return MoveRecord(
        kind="T2inv",
        participants=(v, a, b, c),
        gain=gain,
        faces_removed=removed,
        faces_added=[restored],
        edges_removed=[make_edge(v, u) for u in (a, b, c)],
        clique=tuple(sorted((a, b, c, v))),  # type: ignore[arg-type]
        separator=restored,
    )


def plaquette(tri: Triangulation, edge: Sequence[int]) -> Tuple[int, int, int, int]:
    """Return (x, y, u, z): the shared edge (x, y) and the two opposite vertices."""
    x, y = make_edge(*edge)
    if not tri.has_edge(x, y):
        raise MoveError(f"edge {(x, y)} not present")
    faces = tri.faces_on_edge(x, y)
    if len(faces) != 2:
        raise MoveError(f"edge {(x, y)} lies in {len(faces)} faces, expected 2")
    (u,) = set(faces[0]) - {x, y}
    (z,) = set(faces[1]) - {x, y}
    return x, y, min(u, z), max(u, z)


def t1_violation(tri: Triangulation, edge: Sequence[int]) -> Optional[str]:
    """Name of the first T1 precondition that fails, or None."""
    try:
        x, y, u, z = plaquette(tri, edge)
    except (MoveError, ValueError) as exc:
        return str(exc)
    if tri.has_edge(u, z):
        return f"opposite pair {(u, z)} already adjacent"
    if tri.degree(x) < 4 or tri.degree(y) < 4:
        return f"endpoint degree below 4 on edge {(x, y)}"
    return None


def t1_gain(tri: Triangulation, edge: Sequence[int], w: Any) -> float:
    x, y, u, z = plaquette(tri, edge)
    return w.weight(u, z) - w.weight(x, y)


def apply_t1(tri: Triangulation, shared_edge: Sequence[int], w: Any) -> MoveRecord:
    """Flip the shared edge of two adjacent faces to the opposite diagonal."""
    problem = t1_violation(tri, shared_edge)
    if problem:
        raise MoveError(f"T1 rejected: {problem}")
    x, y, u, z = plaquette(tri, shared_edge)
    removed = [tri.remove_face((x, y, u)), tri.remove_face((x, y, z))]
    tri.remove_edge(x, y)
    tri.add_edge(u, z)
    added = [tri.add_face((x, u, z)), tri.add_face((y, u, z))]
    return MoveRecord(
        kind="T1",
        participants=(x, y, u, z),
        gain=w.weight(u, z) - w.weight(x, y),
        faces_removed=removed,
        faces_added=added,
        edges_removed=[(x, y)],
        edges_added=[make_edge(u, z)],
    )


def a_violation(tri: Triangulation, shared_edge: Sequence[int]) -> Optional[str]:
    try:
        x, y, _, _ = plaquette(tri, shared_edge)
    except (MoveError, ValueError) as exc:
        return str(exc)
    if tri.degree(x) < 4 or tri.degree(y) < 4:
        return f"endpoint degree below 4 on edge {(x, y)}"
    return None


def a_gain(tri: Triangulation, shared_edge: Sequence[int], v: int, w: Any) -> float:
    x, y, u, z = plaquette(tri, shared_edge)
    return w.weight(v, x) + w.weight(v, y) + w.weight(v, u) + w.weight(v, z) - w.weight(x, y)


def apply_a(tri: Triangulation, shared_edge: Sequence[int], v: int, w: Any) -> MoveRecord:
    """Replace the shared edge of a plaquette by a new degree-4 vertex."""
    _require_new_vertex(tri, v)
    problem = a_violation(tri, shared_edge)
    if problem:
        raise MoveError(f"A rejected: {problem}")
    x, y, u, z = plaquette(tri, shared_edge)
    gain = a_gain(tri, shared_edge, v, w)
    removed = [tri.remove_face((x, y, u)), tri.remove_face((x, y, z))]
    tri.remove_edge(x, y)
    tri.insert_vertex(v)
    for q in (x, u, y, z):
        tri.add_edge(v, q)
    added = [
        tri.add_face((x, u, v)),
        tri.add_face((u, y, v)),
        tri.add_face((y, z, v)),
        tri.add_face((z, x, v)),
    ]
    return MoveRecord(
        kind="A",
        participants=(v, x, y, u, z),
        gain=gain,
        faces_removed=removed,
        faces_added=added,
        edges_removed=[(x, y)],
        edges_added=[make_edge(v, q) for q in (x, y, u, z)],
    )


def link_cycle(tri: Triangulation, v: int) -> List[int]:
    """Neighbours of ``v`` in cyclic order, read off the faces around it."""
    faces = tri.faces_at(v)
    if len(faces) != tri.degree(v):
        raise MoveError(f"vertex {v} has {len(faces)} faces for degree {tri.degree(v)}")
    links: Dict[int, List[int]] = {}
    for face in faces:
        a, b = [q for q in face if q != v]
        links.setdefault(a, []).append(b)
        links.setdefault(b, []).append(a)
    if any(len(nbrs) != 2 for nbrs in links.values()):
        raise MoveError(f"faces around {v} do not close into a cycle")
    start = min(links)
    cycle = [start]
    prev, cur = start, min(links[start])
    while cur != start:
        cycle.append(cur)
        a, b = links[cur]
        prev, cur = cur, (b if a == prev else a)
    if len(cycle) != len(links):
        raise MoveError(f"faces around {v} form more than one cycle")
    return cycle


def apply_a_inverse(tri: Triangulation, v: int, w: Any) -> MoveRecord:
    """Remove a degree-4 vertex and restore the heavier absent diagonal of its 4-cycle."""
    if v not in tri.inserted:
        raise MoveError(f"vertex {v} is not inserted")
    if tri.degree(v) != 4:
        raise MoveError(f"vertex {v} has degree {tri.degree(v)}, A inverse needs 4")
    _require_shrinkable(tri)
    c0, c1, c2, c3 = link_cycle(tri, v)
    candidates = [make_edge(c0, c2), make_edge(c1, c3)]
    absent = [d for d in candidates if not tri.has_edge(*d)]
    if not absent:
        raise MoveError(f"both diagonals around {v} present, planar restoration impossible")
    # heaviest diagonal, ties to the lower pair
    diagonal = sorted(absent, key=lambda d: (-w.weight(*d), d))[0]
    removed = tri.faces_at(v)
    for face in removed:
        tri.remove_face(face)
    for q in (c0, c1, c2, c3):
        tri.remove_edge(v, q)
    tri.remove_vertex(v)
    tri.add_edge(*diagonal)
    if diagonal == make_edge(c0, c2):
        added = [tri.add_face((c0, c1, c2)), tri.add_face((c0, c2, c3))]
    else:
        added = [tri.add_face((c1, c2, c3)), tri.add_face((c1, c3, c0))]
    gain = w.weight(*diagonal) - (w.weight(v, c0) + w.weight(v, c1) + w.weight(v, c2) + w.weight(v, c3))
    return MoveRecord(
        kind="Ainv",
        participants=(v, c0, c1, c2, c3),
        gain=gain,
        faces_removed=removed,
        faces_added=added,
        edges_removed=[make_edge(v, q) for q in (c0, c1, c2, c3)],
        edges_added=[diagonal],
    )


def _require_four_clique(tri: Triangulation, clique: Sequence[int]) -> Tuple[int, ...]:
    members = tuple(sorted(set(clique)))
    if len(members) != 4:
        raise MoveError(f"{tuple(clique)} is not a 4-clique")
    for i, j in itertools.combinations(members, 2):
        if not tri.has_edge(i, j):
            raise MoveError(f"{members} is not a 4-clique (missing {(i, j)})")
    return members


def _as_mapping(members: Tuple[int, ...], permutation: Any) -> Dict[int, int]:
    if isinstance(permutation, Mapping):
        mapping = {int(k): int(v) for k, v in permutation.items()}
    else:
        targets = [int(t) for t in permutation]
        if len(targets) != len(members):
            raise MoveError("permutation must list one target per clique member")
        mapping = dict(zip(members, targets))
    if set(mapping) != set(members) or set(mapping.values()) != set(members):
        raise MoveError(f"permutation {mapping} is not a bijection on {members}")
    return mapping


def s_weight_table(tri: Triangulation, members: Sequence[int], w: Any) -> Dict[int, Dict[int, float]]:
    """table[x][z]: weight the outside edges of ``x`` would carry if routed to ``z``."""
    inside = set(members)
    table: Dict[int, Dict[int, float]] = {}
    for x in members:
        outside = sorted(tri.adjacency[x] - inside)
        table[x] = {z: sum(w.weight(z, y) for y in outside) for z in members}
    return table


def s_gain(tri: Triangulation, clique: Sequence[int], permutation: Any, w: Any) -> float:
    members = _require_four_clique(tri, clique)
    mapping = _as_mapping(members, permutation)
    table = s_weight_table(tri, members, w)
    return sum(table[x][mapping[x]] - table[x][x] for x in members)


def best_s_permutation(tri: Triangulation, clique: Sequence[int], w: Any) -> Tuple[Dict[int, int], float]:
    """Evaluate all 24 relabellings; the first best in lexicographic order wins."""
    members = _require_four_clique(tri, clique)
    table = s_weight_table(tri, members, w)
    base = sum(table[x][x] for x in members)
    best_map = {x: x for x in members}
    best_gain = 0.0
    for targets in itertools.permutations(members):
        gain = sum(table[x][t] for x, t in zip(members, targets)) - base
        if gain > best_gain:
            best_gain = gain
            best_map = dict(zip(members, targets))
    return best_map, best_gain


def apply_s(tri: Triangulation, clique: Sequence[int], permutation: Any, w: Any) -> MoveRecord:
    """Permute the labels inside a 4-clique, re-routing its outside edges."""
    members = _require_four_clique(tri, clique)
    mapping = _as_mapping(members, permutation)
    inside = set(members)
    outside = {x: sorted(tri.adjacency[x] - inside) for x in members}
    old_edges = [make_edge(x, y) for x in members for y in outside[x]]
    new_edges = {make_edge(mapping[x], y) for x in members for y in outside[x]}
    if len(new_edges) != len(old_edges):
        raise MoveError("re-routing would create a multi-edge")
    gain = sum(w.weight(mapping[x], y) - w.weight(x, y) for x in members for y in outside[x])

    touched = sorted({f for x in members for f in tri.faces_at(x)})
    relabelled = [make_face(*(mapping.get(q, q) for q in f)) for f in touched]
    for face in touched:
        tri.remove_face(face)
    for i, j in old_edges:
        tri.remove_edge(i, j)
    for i, j in sorted(new_edges):
        tri.add_edge(i, j)
    added = [tri.add_face(f) for f in relabelled]
    return MoveRecord(
        kind="S",
        participants=members,
        gain=gain,
        faces_removed=touched,
        faces_added=added,
        edges_removed=sorted(old_edges),
        edges_added=sorted(new_edges),
        clique=members,  # type: ignore[arg-type]
        mapping=mapping,
    )
