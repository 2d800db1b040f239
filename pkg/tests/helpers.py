"""Small fixtures shared by the test modules."""

from __future__ import annotations

import itertools

import networkx as nx
import numpy as np

from tmfgkit.graph import Triangulation
from tmfgkit.scores import WeightOracle
from tmfgkit.synth import MatrixSpec, generate


def uniform_oracle(p: int, seed: int = 0) -> WeightOracle:
    return generate(MatrixSpec("uniform", p=p, seed=seed))


def constant_oracle(p: int, value: float = 1.0) -> WeightOracle:
    return WeightOracle.from_matrix(np.full((p, p), value))


def oracle_with(p: int, overrides: dict, base: float = 1.0) -> WeightOracle:
    matrix = np.full((p, p), base)
    for (i, j), value in overrides.items():
        matrix[i, j] = matrix[j, i] = value
    return WeightOracle.from_matrix(matrix)


def random_spd(p: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.standard_normal((p, p + 5))
    return a @ a.T / (p + 5) + 0.1 * np.eye(p)


def k4_with_hat(p: int = 6) -> Triangulation:
    """K4 on 0..3 with vertex 4 inserted into face (0, 1, 2)."""
    tri = Triangulation.from_k4(p, (0, 1, 2, 3))
    tri.remove_face((0, 1, 2))
    tri.insert_vertex(4)
    for u in (0, 1, 2):
        tri.add_edge(4, u)
    for face in ((0, 1, 4), (0, 2, 4), (1, 2, 4)):
        tri.add_face(face)
    return tri


def has_chordless_cycle(graph: nx.Graph) -> bool:
    """Brute force: some induced subgraph on >= 4 vertices is a cycle."""
    nodes = sorted(graph.nodes())
    for size in range(4, len(nodes) + 1):
        for subset in itertools.combinations(nodes, size):
            sub = graph.subgraph(subset)
            if sub.number_of_edges() == size and all(d == 2 for _, d in sub.degree()) and nx.is_connected(sub):
                return True
    return False
