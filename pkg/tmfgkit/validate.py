"""Independent checkers and brute-force references for filtered graphs."""

from __future__ import annotations

import heapq
import itertools
import logging
import math
from typing import Any, Dict, List, Optional, Sequence, Set, Tuple

import networkx as nx
import numpy as np

from .graph import (
    BuildStats,
    CliqueTree,
    FilterResult,
    Triangulation,
    ValidationReport,
    clique_edges,
    face_edges,
    verify_sphere_triangulation,
)
from .moves import apply_t2
from .scores import ScoreFunction, WeightOracle
from .tmfg import BuildConfig, select_seed_clique

logger = logging.getLogger("tmfgkit.validate")

NAIVE_LIMIT = 200
EXHAUSTIVE_LIMIT = 7


def _as_graph(g: Any) -> nx.Graph:
    if isinstance(g, nx.Graph):
        return g
    if isinstance(g, (Triangulation, FilterResult)):
        return g.to_networkx()
    raise TypeError(f"cannot read a graph from {type(g).__name__}")


def mcs_order(g: Any) -> List[int]:
    """Maximum cardinality search visit order; ties go to the lowest vertex."""
    graph = _as_graph(g)
    nodes = sorted(graph.nodes())
    rank = {v: k for k, v in enumerate(nodes)}
    weight = {v: 0 for v in nodes}
    heap = [(0, rank[v], v) for v in nodes]
    heapq.heapify(heap)
    visited: Set[int] = set()
    order: List[int] = []
    while heap:
        neg, _, v = heapq.heappop(heap)
        if v in visited or -neg != weight[v]:
            continue
        visited.add(v)
        order.append(v)
        for u in graph.neighbors(v):
            if u not in visited:
                weight[u] += 1
                heapq.heappush(heap, (-weight[u], rank[u], u))
    return order


def check_chordal(g: Any) -> ValidationReport:
    """Chordality via maximum cardinality search and a perfect-elimination check."""
    graph = _as_graph(g)
    if graph.number_of_nodes() == 0:
        raise ValueError("empty graph")
    if not nx.is_connected(graph):
        raise ValueError("chordality check needs a connected graph")
    order = mcs_order(graph)
    position = {v: k for k, v in enumerate(order)}
    problems: List[str] = []
    for v in order:
        earlier = [u for u in graph.neighbors(v) if position[u] < position[v]]
        if len(earlier) < 2:
            continue
        anchor = max(earlier, key=position.__getitem__)
        missing = sorted(u for u in earlier if u != anchor and not graph.has_edge(u, anchor))
        if missing:
            problems.append(f"vertex {v}: earlier neighbours {missing} not adjacent to {anchor}")
    report = ValidationReport()
    report.add("chordal", not problems, "; ".join(problems[:5]))
    return report


def check_clique_tree(ct: CliqueTree, g: Any) -> ValidationReport:
    graph = _as_graph(g)
    report = ValidationReport()
    n = graph.number_of_nodes()
    seps = ct.separators
    report.add(
        "clique-count",
        len(ct.cliques) == n - 3 and len(seps) == n - 4,
        f"{len(ct.cliques)} cliques and {len(seps)} separators for {n} vertices, expected {n - 3} and {n - 4}",
    )

    incomplete = [c for c in ct.cliques if len(set(c)) != 4 or any(not graph.has_edge(i, j) for i, j in clique_edges(c))]
    report.add("cliques-complete", not incomplete, f"not 4-cliques of the graph: {incomplete[:5]}")

    bad_links: List[str] = []
    if not ct.parent or ct.parent[0] is not None:
        bad_links.append("clique 0 must be the root")
    for k in range(1, len(ct.cliques)):
        parent = ct.parent[k] if k < len(ct.parent) else None
        link = ct.links[k] if k < len(ct.links) else None
        if parent is None or not 0 <= parent < k:
            bad_links.append(f"clique {k} has parent {parent}")
            continue
        shared = tuple(sorted(set(ct.cliques[k]) & set(ct.cliques[parent])))
        if link is None or len(shared) != 3 or tuple(sorted(link)) != shared:
            bad_links.append(f"separator {link} of clique {k} differs from intersection {shared}")
    report.add("separators", not bad_links, "; ".join(bad_links[:5]))

    covered = {e for c in ct.cliques for e in clique_edges(c)}
    actual = {tuple(sorted(e)) for e in graph.edges()}
    report.add(
        "edge-cover",
        covered == actual,
        f"{len(actual - covered)} graph edges outside every clique, {len(covered - actual)} clique edges absent",
    )

    broken: List[int] = []
    holders: Dict[int, List[int]] = {}
    for k, clique in enumerate(ct.cliques):
        for v in clique:
            holders.setdefault(v, []).append(k)
    for v, members in sorted(holders.items()):
        inside = set(members)
        links = sum(
            1 for k in members if k < len(ct.parent) and ct.parent[k] is not None and ct.parent[k] in inside
        )
        if links != len(members) - 1:
            broken.append(v)
    report.add("running-intersection", not broken, f"cliques holding vertices {broken[:10]} are not connected")
    return report


def naive_tmfg_oracle(w: WeightOracle, cfg: Optional[BuildConfig] = None) -> FilterResult:
    """Base TMFG recomputing every (vertex, face) gain at every step."""
    cfg = cfg or BuildConfig()
    if w.p > NAIVE_LIMIT:
        raise ValueError(f"naive reference limited to p <= {NAIVE_LIMIT}, got {w.p}")
    if w.p < 4:
        raise ValueError(f"need at least 4 vertices, got {w.p}")
    if cfg.variant != "base":
        raise ValueError("naive reference covers the base variant only")
    score = cfg.score or ScoreFunction.sum_of_weights(w)
    seed = select_seed_clique(w, cfg.seed_strategy, limit=cfg.exhaustive_seed_limit)
    tri = Triangulation.from_k4(w.p, seed)
    tree = CliqueTree()
    tree.seed(seed)
    terms = [w.weight(i, j) for i, j in clique_edges(seed)]
    remaining = [v for v in range(w.p) if v not in seed]
    evaluations = 0
    while remaining:
        candidates = np.array(remaining, dtype=np.int64)
        best: Optional[Tuple[Tuple[int, int, int], int]] = None
        best_gain = -math.inf
        for face in sorted(tri.faces):
            gains = score.evaluate_many(face, candidates)
            evaluations += len(remaining)
            idx = int(np.argmax(gains))
            if gains[idx] > best_gain:
                best_gain = float(gains[idx])
                best = (face, int(candidates[idx]))
        face, v = best  # type: ignore[misc]
        record = apply_t2(tri, v, face, w)
        tree.add(record.clique, record.separator)  # type: ignore[arg-type]
        terms.extend(w.weight(i, j) for i, j in clique_edges(record.clique))  # type: ignore[arg-type]
        terms.extend(-w.weight(i, j) for i, j in face_edges(face))
        remaining.remove(v)
    return FilterResult.from_triangulation(
        tri,
        w,
        method="tmfg",
        clique_tree=tree,
        moves_applied={"T2": w.p - 4} if w.p > 4 else {},
        stats=BuildStats(score_evaluations=evaluations, bookkeeping_total=math.fsum(terms), seed_clique=tuple(seed)),
    )


def exhaustive_wmpg(w: WeightOracle) -> float:
    """Best total weight over all maximal planar subgraphs (branch and bound)."""
    p = w.p
    if p > EXHAUSTIVE_LIMIT:
        raise ValueError(f"exhaustive search limited to p <= {EXHAUSTIVE_LIMIT}, got {p}")
    if p < 2:
        return 0.0
    pairs = sorted(itertools.combinations(range(p), 2), key=lambda e: (-w.weight(*e), e))
    weights = [w.weight(*e) for e in pairs]
    if p <= 4:
        return math.fsum(weights)
    target = 3 * p - 6
    best = [-math.inf]
    graph = nx.Graph()
    graph.add_nodes_from(range(p))

    def search(start: int, chosen: List[float]) -> None:
        need = target - len(chosen)
        if need == 0:
            best[0] = max(best[0], math.fsum(chosen))
            return
        if len(pairs) - start < need:
            return
        if math.fsum(chosen) + math.fsum(weights[start:start + need]) <= best[0]:
            return
        i, j = pairs[start]
        graph.add_edge(i, j)
        if graph.number_of_edges() <= 8 or nx.check_planarity(graph)[0]:
            search(start + 1, chosen + [weights[start]])
        graph.remove_edge(i, j)
        search(start + 1, chosen)

    search(0, [])
    return best[0]


def smooth(h: nx.Graph) -> nx.Graph:
    """Suppress degree-2 vertices, replacing each path through them by one edge."""
    graph = nx.MultiGraph(h)
    graph.remove_nodes_from([v for v in list(graph.nodes()) if graph.degree(v) == 0])
    changed = True
    while changed:
        changed = False
        for v in sorted(graph.nodes()):
            if graph.degree(v) == 2 and graph.number_of_nodes() > 3:
                a, b = [u for _, u in graph.edges(v)]
                if a == v or b == v:
                    continue
                graph.remove_node(v)
                graph.add_edge(a, b)
                changed = True
                break
    return nx.Graph(graph)


def is_kuratowski_subdivision(h: nx.Graph) -> bool:
    """True iff ``h`` is a subdivision of K5 or K3,3."""
    core = smooth(h)
    return nx.is_isomorphic(core, nx.complete_graph(5)) or nx.is_isomorphic(core, nx.complete_bipartite_graph(3, 3))


def kuratowski_subgraph(g: Any) -> Optional[nx.Graph]:
    """A K5 / K3,3 subdivision inside ``g``, or None when ``g`` is planar."""
    planar, certificate = nx.check_planarity(_as_graph(g), counterexample=True)
    return None if planar else certificate


def _disjoint_paths(graph: nx.Graph, pairs: Sequence[Tuple[int, int]], blocked: Set[int]) -> bool:
    if not pairs:
        return True
    (a, b), rest = pairs[0], pairs[1:]
    if graph.has_edge(a, b):
        # an edge between two branch vertices lies on no other route
        return _disjoint_paths(graph, rest, blocked)
    allowed = graph.subgraph(set(graph.nodes()) - blocked | {a, b})
    for path in nx.all_simple_paths(allowed, a, b):
        if _disjoint_paths(graph, rest, blocked | set(path[1:-1])):
            return True
    return False


def has_kuratowski_subdivision(g: Any) -> bool:
    """Exhaustive search for a K5 or K3,3 subdivision; small graphs only."""
    graph = _as_graph(g)
    nodes = sorted(graph.nodes())
    if len(nodes) > 10:
        raise ValueError("exhaustive Kuratowski search limited to 10 vertices")
    rich = [v for v in nodes if graph.degree(v) >= 4]
    for branch in itertools.combinations(rich, 5):
        pairs = list(itertools.combinations(branch, 2))
        if _disjoint_paths(graph, pairs, set(branch)):
            return True
    hubs = [v for v in nodes if graph.degree(v) >= 3]
    for branch in itertools.combinations(hubs, 6):
        first = branch[0]
        for others in itertools.combinations(branch[1:], 2):
            left = (first,) + others
            right = tuple(v for v in branch if v not in left)
            pairs = [(x, y) for x in left for y in right]
            if _disjoint_paths(graph, pairs, set(branch)):
                return True
    return False


def validate_result(result: FilterResult, w: Optional[WeightOracle] = None) -> ValidationReport:
    """Structural checks on a filter result; chordality only when the result claims it."""
    graph = result.to_networkx()
    report = ValidationReport()
    n = len(result.vertices)

    pairs = [(i, j) for i, j, _ in result.edges]
    duplicates = len(pairs) - len({tuple(sorted(e)) for e in pairs})
    loops = sum(1 for i, j in pairs if i == j)
    report.add("simple-edges", duplicates == 0 and loops == 0, f"{duplicates} repeated pairs, {loops} self-loops")
    planar, _ = nx.check_planarity(graph)
    report.add("planarity", bool(planar), "graph is not planar")
    expected = 3 * n - 6 if n >= 3 else n * (n - 1) // 2
    report.add("edge-count", len(pairs) == expected, f"|E| = {len(pairs)}, expected {expected}")
    summed = math.fsum(wt for _, _, wt in result.edges)
    report.add("total-weight", summed == result.total_weight, f"edges sum to {summed!r}, file says {result.total_weight!r}")
    if w is not None:
        mismatched = [(i, j) for i, j, wt in result.edges if w.weight(i, j) != wt]
        report.add("oracle-weights", not mismatched, f"weights differ from the oracle on {mismatched[:5]}")

    if result.triangulation is not None and result.triangulation.vertex_count >= 4:
        report.extend(verify_sphere_triangulation(result.triangulation))
    if result.chordal:
        try:
            report.extend(check_chordal(graph))
        except ValueError as exc:
            report.add("chordal", False, str(exc))
        report.extend(check_clique_tree(result.clique_tree, graph))  # type: ignore[arg-type]
    else:
        logger.info("Chordality not claimed by %s; check skipped", result.method)
    return report
