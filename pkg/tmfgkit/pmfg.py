"""PMFG baseline: insert edges by non-increasing weight, keeping those that stay planar."""

from __future__ import annotations

import logging
import math
import time
from typing import Iterator, List, Sequence, Tuple

import networkx as nx
import numpy as np

from .graph import BuildStats, Edge, FilterResult, make_edge
from .scores import WeightOracle

logger = logging.getLogger("tmfgkit.pmfg")

# fewer edges than K3,3 can never be non-planar
SMALL_GRAPH_EDGES = 8


class PlanarGraph:
    """An always-planar simple graph on vertices 0..p-1.

    Components are tracked with union-find so that edges joining two components and
    edges that would exceed the 3n-6 bound of a component skip the full test.
    """

    def __init__(self, p: int) -> None:
        self.p = p
        self.graph = nx.Graph()
        self.graph.add_nodes_from(range(p))
        self._parent = list(range(p))
        self._size = [1] * p
        self._edges_in = [0] * p
        self.planarity_tests = 0

    def _find(self, v: int) -> int:
        root = v
        while self._parent[root] != root:
            root = self._parent[root]
        while self._parent[v] != root:
            self._parent[v], v = root, self._parent[v]
        return root

    @property
    def edge_count(self) -> int:
        return self.graph.number_of_edges()

    @property
    def max_edges(self) -> int:
        return max(3 * self.p - 6, 0) if self.p >= 3 else self.p * (self.p - 1) // 2

    def has_edge(self, i: int, j: int) -> bool:
        return self.graph.has_edge(i, j)

    def edges(self) -> List[Edge]:
        return sorted(make_edge(i, j) for i, j in self.graph.edges())

    def is_planar(self, candidate: Sequence[int]) -> bool:
        """True iff adding ``candidate`` keeps the graph planar."""
        i, j = make_edge(*candidate)
        if self.graph.has_edge(i, j):
            raise ValueError(f"edge {(i, j)} already present")
        ri, rj = self._find(i), self._find(j)
        if ri != rj:
            return True
        if self.edge_count + 1 <= SMALL_GRAPH_EDGES:
            return True
        n_c = self._size[ri]
        if n_c >= 3 and self._edges_in[ri] + 1 > 3 * n_c - 6:
            return False
        self.planarity_tests += 1
        self.graph.add_edge(i, j)
        planar, _ = nx.check_planarity(self.graph)
        self.graph.remove_edge(i, j)
        return bool(planar)

    def add_edge(self, i: int, j: int) -> None:
        ri, rj = self._find(i), self._find(j)
        self.graph.add_edge(i, j)
        if ri == rj:
            self._edges_in[ri] += 1
            return
        if self._size[ri] < self._size[rj]:
            ri, rj = rj, ri
        self._parent[rj] = ri
        self._size[ri] += self._size[rj]
        self._edges_in[ri] += self._edges_in[rj] + 1

    def try_add(self, i: int, j: int) -> bool:
        if self.is_planar((i, j)):
            self.add_edge(i, j)
            return True
        return False


def edge_order(w: WeightOracle) -> Iterator[Tuple[int, int, float]]:
    """All pairs by non-increasing weight; equal weights in lexicographic (i, j) order."""
    dense = w.dense()
    ii, jj = np.triu_indices(w.p, 1)
    vals = dense[ii, jj]
    order = np.lexsort((jj, ii, -vals))
    for k in order:
        yield int(ii[k]), int(jj[k]), float(vals[k])


def build_pmfg(w: WeightOracle) -> FilterResult:
    if w.p < 3:
        raise ValueError(f"need at least 3 vertices, got {w.p}")
    started = time.perf_counter()
    logger.info("Building pmfg on p=%d", w.p)
    graph = PlanarGraph(w.p)
    attempts = 0
    kept: List[Tuple[int, int, float]] = []
    for i, j, weight in edge_order(w):
        if graph.edge_count >= graph.max_edges:
            break
        attempts += 1
        if graph.try_add(i, j):
            kept.append((i, j, weight))
    kept.sort()
    elapsed = time.perf_counter() - started
    logger.info(
        "Finished pmfg: %d edges after %d attempts (%d full planarity tests) in %.3fs",
        len(kept),
        attempts,
        graph.planarity_tests,
        elapsed,
    )
    return FilterResult(
        p=w.p,
        edges=kept,
        total_weight=math.fsum(wt for _, _, wt in kept),
        clique_tree=None,
        method="pmfg",
        elapsed=elapsed,
        moves_applied={"edge_insertions": len(kept), "planarity_tests": graph.planarity_tests},
        stats=BuildStats(planarity_tests=graph.planarity_tests),
    )
