"""TMFG construction: greedy T2 insertions driven by a gain cache, plus the T1, S and A variants.

Tie-breaking is fixed everywhere: among equal gains the lowest vertex index and the
lexicographically smallest face (or edge) win, so a build is a pure function of its
oracle and configuration.
"""

from __future__ import annotations

import itertools
import logging
import math
import time
from collections import Counter
from dataclasses import dataclass, replace
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

import numpy as np

from .graph import (
    BuildStats,
    CliqueTree,
    Edge,
    Face,
    FilterResult,
    GainCache,
    Triangulation,
    clique_edges,
    face_edges,
    make_edge,
    make_face,
)
from .moves import (
    MoveError,
    MoveRecord,
    a_violation,
    apply_a,
    apply_a_inverse,
    apply_s,
    apply_t1,
    apply_t2,
    apply_t2_inverse,
    best_s_permutation,
    plaquette,
    t1_gain,
    t1_violation,
)
from .scores import ScoreFunction, WeightOracle

logger = logging.getLogger("tmfgkit.tmfg")

VARIANTS = ("base", "t1", "s", "a")
METHOD_NAMES: Dict[str, str] = {"tmfg": "base", "tmfg-t1": "t1", "tmfg-s": "s", "tmfg-a": "a"}
VARIANT_METHODS: Dict[str, str] = {variant: method for method, variant in METHOD_NAMES.items()}
SEED_STRATEGIES = ("greedy-expansion", "exhaustive")
TIE_BREAKS = ("lowest-index",)


@dataclass
class BuildConfig:
    variant: str = "base"
    score: Optional[ScoreFunction] = None
    seed_strategy: str = "greedy-expansion"
    t1_sweep_cap: int = 10
    tie_break: str = "lowest-index"
    exhaustive_seed_limit: int = 64
    dominance_guard: bool = True

    def __post_init__(self) -> None:
        if self.variant in METHOD_NAMES:
            self.variant = METHOD_NAMES[self.variant]
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {', '.join(VARIANTS)}")
        if self.seed_strategy not in SEED_STRATEGIES:
            raise ValueError(f"unknown seed strategy {self.seed_strategy!r}")
        if self.t1_sweep_cap < 0:
            raise ValueError("t1_sweep_cap must be >= 0")
        if self.tie_break not in TIE_BREAKS:
            raise ValueError(f"unknown tie-break rule {self.tie_break!r}")
        if self.exhaustive_seed_limit < 4:
            raise ValueError("exhaustive_seed_limit must be >= 4")

    @property
    def method(self) -> str:
        return VARIANT_METHODS[self.variant]


def select_seed_clique(
    w: WeightOracle,
    strategy: str = "greedy-expansion",
    *,
    limit: int = 64,
) -> Tuple[int, int, int, int]:
    """Starting tetrahedron for a build."""
    p = w.p
    if p < 4:
        raise ValueError(f"need at least 4 vertices, got {p}")
    dense = w.dense()
    if strategy == "exhaustive":
        if p > limit:
            raise ValueError(f"exhaustive seed search limited to p <= {limit}, got {p}")
        best: Optional[Tuple[int, int, int, int]] = None
        best_total = -math.inf
        for a, b, c in itertools.combinations(range(p), 3):
            if c + 1 >= p:
                continue
            rest = np.arange(c + 1, p)
            totals = (dense[a, b] + dense[a, c] + dense[b, c]) + (dense[a, rest] + dense[b, rest] + dense[c, rest])
            idx = int(np.argmax(totals))
            if totals[idx] > best_total:
                best_total = float(totals[idx])
                best = (a, b, c, int(rest[idx]))
        return best  # type: ignore[return-value]
    if strategy != "greedy-expansion":
        raise ValueError(f"unknown seed strategy {strategy!r}")

    upper = np.triu(dense, 1)
    mask = np.triu(np.ones((p, p), dtype=bool), 1)
    flat = np.where(mask, upper, -np.inf)
    i, j = np.unravel_index(int(np.argmax(flat)), flat.shape)
    chosen = [int(i), int(j)]
    for _ in range(2):
        totals = dense[chosen].sum(axis=0)
        totals[chosen] = -np.inf
        chosen.append(int(np.argmax(totals)))
    return tuple(sorted(chosen))  # type: ignore[return-value]


def _evaluate_face(cache: GainCache, face: Face, score: ScoreFunction) -> None:
    remaining = cache.remaining
    if remaining.size == 0:
        cache.drop(face)
        return
    gains = score.evaluate_many(face, remaining)
    cache.evaluations += int(remaining.size)
    idx = int(np.argmax(gains))
    cache.set(face, float(gains[idx]), int(remaining[idx]))


def _clear(cache: GainCache) -> None:
    for key in list(cache.max_gain):
        cache.drop(key)


def _update_faces(
    cache: GainCache,
    score: ScoreFunction,
    removed: Iterable[Face],
    added: Iterable[Face],
    inserted: Optional[int],
    live: Optional[Set[Face]] = None,
) -> None:
    for face in removed:
        cache.drop(face)
    stale: List[Tuple[int, ...]] = []
    if inserted is not None:
        cache.remove_remaining(inserted)
        if cache.remaining.size == 0:
            _clear(cache)
            return
        stale = cache.keys_with_best(inserted)
    todo = sorted(set(added) | set(stale))
    for face in todo:
        if live is not None and face not in live:
            cache.drop(face)
            continue
        _evaluate_face(cache, face, score)  # type: ignore[arg-type]


def refresh_cache(
    cache: GainCache,
    inserted: int,
    removed_face: Sequence[int],
    new_faces: Sequence[Sequence[int]],
    score: Optional[ScoreFunction] = None,
    w: Optional[WeightOracle] = None,
) -> GainCache:
    """Bring the cache up to date after ``inserted`` went into ``removed_face``.

    Only the removed face, the three new faces and the faces whose best vertex was
    ``inserted`` are touched.
    """
    if score is None:
        if w is None:
            raise ValueError("refresh_cache needs a score function or a weight oracle")
        score = ScoreFunction.sum_of_weights(w)
    removed = make_face(*removed_face)
    if removed not in cache:
        raise ValueError(f"gain cache has no entry for face {removed}; cache out of sync")
    faces = [make_face(*f) for f in new_faces]
    _update_faces(cache, score, [removed], faces, inserted)
    return cache


class _Builder:
    """One build: a triangulation, its gain caches and the running totals."""

    def __init__(self, w: WeightOracle, cfg: BuildConfig, score: ScoreFunction) -> None:
        self.w = w
        self.cfg = cfg
        self.score = score
        self.tri = Triangulation(w.p)
        self.tree: Optional[CliqueTree] = CliqueTree()
        self.moves: Counter = Counter()
        self.terms: List[float] = []
        self.cache: Optional[GainCache] = None
        self.edge_cache: Optional[GainCache] = None
        self.edge_evaluations = 0

    def run(self) -> FilterResult:
        started = time.perf_counter()
        seed = select_seed_clique(self.w, self.cfg.seed_strategy, limit=self.cfg.exhaustive_seed_limit)
        self.tri.seed(seed)
        self.tree.seed(seed)  # type: ignore[union-attr]
        self.terms.extend(self.w.weight(i, j) for i, j in clique_edges(seed))
        logger.debug("Seed clique %s", seed)

        remaining = [v for v in range(self.w.p) if v not in seed]
        self.cache = GainCache(remaining)
        for face in sorted(self.tri.faces):
            _evaluate_face(self.cache, face, self.score)
        if self.cfg.variant == "a":
            self.edge_cache = GainCache(remaining)
            for edge in self.tri.edges():
                self._evaluate_edge(edge)

        while self.cache.remaining.size:
            self._step()

        tree = self.tree
        if tree is None:
            tree = CliqueTree.from_triangulation(self.tri)
        stats = BuildStats(
            score_evaluations=self.cache.evaluations + self.edge_evaluations,
            bookkeeping_total=math.fsum(self.terms),
            seed_clique=tuple(seed),
        )
        result = FilterResult.from_triangulation(
            self.tri,
            self.w,
            method=self.cfg.method,
            clique_tree=tree,
            moves_applied=dict(self.moves),
            stats=stats,
            elapsed=time.perf_counter() - started,
        )
        return result

    def _step(self) -> None:
        best = self.cache.best()  # type: ignore[union-attr]
        if best is None:
            raise RuntimeError("gain cache is empty while vertices remain")
        face, gain, v = best
        if self.edge_cache is not None:
            t2_weight_gain = gain if self.score.kind == "sum" else math.fsum(self.w.weight(v, u) for u in face)
            candidate = self.edge_cache.best(accept=lambda edge: a_violation(self.tri, edge) is None)
            if candidate is not None and candidate[1] > t2_weight_gain:
                edge, _, a_vertex = candidate
                record = apply_a(self.tri, edge, a_vertex, self.w)
                self.moves["A"] += 1
                self._record_terms(record)
                self.tree = None
                logger.debug("A: vertex %d into plaquette of %s (gain %.6g)", a_vertex, edge, record.gain)
                self._sync(record, inserted=a_vertex)
                self._t1_sweep(record.faces_added)
                return

        record = apply_t2(self.tri, v, face, self.w)  # type: ignore[arg-type]
        self.moves["T2"] += 1
        self.terms.extend(self.w.weight(i, j) for i, j in clique_edges(record.clique))  # type: ignore[arg-type]
        self.terms.extend(-self.w.weight(i, j) for i, j in face_edges(record.separator))  # type: ignore[arg-type]
        if self.tree is not None:
            self.tree.add(record.clique, record.separator)  # type: ignore[arg-type]
        logger.debug("T2: vertex %d into %s (gain %.6g)", v, face, gain)
        self._sync(record, inserted=v)

        if self.cfg.variant == "s":
            self._s_move(record.clique)  # type: ignore[arg-type]
        elif self.cfg.variant in ("t1", "a"):
            self._t1_sweep(record.faces_added)

    def _record_terms(self, record: MoveRecord) -> None:
        self.terms.extend(self.w.weight(i, j) for i, j in record.edges_added)
        self.terms.extend(-self.w.weight(i, j) for i, j in record.edges_removed)

    def _sync(self, record: MoveRecord, inserted: Optional[int] = None) -> None:
        stale_edges: List[Tuple[int, ...]] = []
        if self.edge_cache is not None and inserted is not None:
            stale_edges = self.edge_cache.keys_with_best(inserted)
        _update_faces(self.cache, self.score, record.faces_removed, record.faces_added, inserted, self.tri.faces)  # type: ignore[arg-type]
        if self.edge_cache is None:
            return
        if inserted is not None:
            self.edge_cache.remove_remaining(inserted)
            if self.edge_cache.remaining.size == 0:
                _clear(self.edge_cache)
                return
        touched: Set[Tuple[int, ...]] = set(stale_edges)
        for face in list(record.faces_removed) + list(record.faces_added):
            touched.update(face_edges(face))
        for edge in sorted(touched):
            if self.tri.has_edge(*edge):
                self._evaluate_edge(edge)  # type: ignore[arg-type]
            else:
                self.edge_cache.drop(edge)

    def _evaluate_edge(self, edge: Edge) -> None:
        cache = self.edge_cache
        remaining = cache.remaining  # type: ignore[union-attr]
        if remaining.size == 0:
            cache.drop(edge)  # type: ignore[union-attr]
            return
        try:
            x, y, u, z = plaquette(self.tri, edge)
        except MoveError:
            cache.drop(edge)  # type: ignore[union-attr]
            return
        w = self.w
        gains = (w.row(x, remaining) + w.row(y, remaining) + w.row(u, remaining) + w.row(z, remaining)) - w.weight(x, y)
        self.edge_evaluations += int(remaining.size)
        idx = int(np.argmax(gains))
        cache.set(edge, float(gains[idx]), int(remaining[idx]))  # type: ignore[union-attr]

    def _t1_sweep(self, region: Iterable[Face]) -> None:
        candidates = {e for f in region for e in face_edges(f)}
        for _ in range(self.cfg.t1_sweep_cap):
            best: Optional[Tuple[Edge, float]] = None
            for edge in sorted(candidates):
                if not self.tri.has_edge(*edge) or t1_violation(self.tri, edge) is not None:
                    continue
                gain = t1_gain(self.tri, edge, self.w)
                if gain > 0.0 and (best is None or gain > best[1]):
                    best = (edge, gain)
            if best is None:
                return
            record = apply_t1(self.tri, best[0], self.w)
            self.moves["T1"] += 1
            self._record_terms(record)
            self.tree = None
            logger.debug("T1: flipped %s -> %s (gain %.6g)", record.edges_removed[0], record.edges_added[0], record.gain)
            self._sync(record)
            candidates = {e for f in record.faces_added for e in face_edges(f)}

    def _s_move(self, clique: Sequence[int]) -> None:
        mapping, gain = best_s_permutation(self.tri, clique, self.w)
        if gain <= 0.0:
            return
        record = apply_s(self.tri, clique, mapping, self.w)
        self.moves["S"] += 1
        self._record_terms(record)
        if self.tree is not None:
            self.tree.relabel(record.mapping)
        logger.debug("S: relabelled %s via %s (gain %.6g)", tuple(clique), record.mapping, record.gain)
        self._sync(record)


def _resolve_score(w: WeightOracle, cfg: BuildConfig) -> ScoreFunction:
    score = cfg.score or ScoreFunction.sum_of_weights(w)
    if score.p != w.p:
        raise ValueError(f"score covers {score.p} variables but the oracle has {w.p}")
    return score


def build(w: WeightOracle, cfg: Optional[BuildConfig] = None) -> FilterResult:
    """Filter ``w`` into a maximal planar graph with 3p-6 edges."""
    cfg = cfg or BuildConfig()
    if w.p < 4:
        raise ValueError(f"need at least 4 vertices, got {w.p}")
    score = _resolve_score(w, cfg)
    logger.info("Building %s on p=%d (%s score)", cfg.method, w.p, score.kind)
    result = _Builder(w, cfg, score).run()
    # elapsed covers the requested trajectory only, not the guard's base rerun
    elapsed = result.elapsed

    if cfg.variant != "base" and cfg.dominance_guard:
        base = _Builder(w, replace(cfg, variant="base"), score).run()
        logger.debug("Dominance guard base run took %.3fs", base.elapsed)
        evaluations = base.stats.score_evaluations + result.stats.score_evaluations
        if base.total_weight > result.total_weight:
            logger.info(
                "%s total %.6g below base %.6g; keeping the base graph",
                cfg.method,
                result.total_weight,
                base.total_weight,
            )
            base.method = cfg.method
            base.stats.fallback_to_base = True
            result = base
        result.stats.score_evaluations = evaluations

    result.elapsed = elapsed
    logger.info(
        "Finished %s: %d edges, total weight %.6g in %.3fs",
        result.method,
        len(result.edges),
        result.total_weight,
        result.elapsed,
    )
    return result


class _AppendedOracle:
    """Weights of an existing result extended by one new vertex row."""

    def __init__(self, result: FilterResult, row: np.ndarray, fallback: Optional[WeightOracle] = None) -> None:
        self.base = result.weight_map()
        self.row = row
        self.new_vertex = result.p
        self.p = result.p + 1
        self.fallback = fallback

    def weight(self, i: int, j: int) -> float:
        if i == j:
            return 0.0
        if i == self.new_vertex:
            return float(self.row[j])
        if j == self.new_vertex:
            return float(self.row[i])
        edge = make_edge(i, j)
        if edge in self.base:
            return self.base[edge]
        if self.fallback is not None:
            return self.fallback.weight(i, j)
        raise ValueError(f"no weight known for non-edge {edge}")


class _ResultOracle(_AppendedOracle):
    def __init__(self, result: FilterResult, fallback: Optional[WeightOracle] = None) -> None:
        self.base = result.weight_map()
        self.new_vertex = -1
        self.p = result.p
        self.fallback = fallback


def _require_registry(result: FilterResult) -> Triangulation:
    if result.triangulation is None:
        raise ValueError("result carries no face registry; online moves need a TMFG result")
    return result.triangulation


def insert_vertex_online(
    result: FilterResult,
    new_weights: Sequence[float],
    score: Optional[ScoreFunction] = None,
    *,
    allow_a: bool = False,
    w: Optional[WeightOracle] = None,
) -> FilterResult:
    """Place one new vertex (id ``result.p``) by the best T2 move, or A when enabled and better."""
    source = _require_registry(result)
    row = np.asarray(new_weights, dtype=np.float64)
    if row.ndim != 1 or row.shape[0] != result.p:
        raise ValueError(f"weight row needs {result.p} values, got {row.shape}")
    if not np.all(np.isfinite(row)) or (row < 0).any():
        raise ValueError("weight row must be finite and non-negative")
    oracle = _AppendedOracle(result, row, w)
    v = result.p
    if score is not None and score.p != result.p + 1:
        raise ValueError(f"score covers {score.p} variables, expected {result.p + 1}")

    tri = source.copy()
    tri.add_vertex_slot()
    best_face: Optional[Face] = None
    best_gain = -math.inf
    for face in sorted(tri.faces):
        if score is None:
            gain = row[face[0]] + row[face[1]] + row[face[2]]
        else:
            gain = score(v, face)
        if gain > best_gain:
            best_face, best_gain = face, float(gain)

    moves = Counter(result.moves_applied)
    tree: Optional[CliqueTree] = None
    best_edge: Optional[Edge] = None
    if allow_a:
        t2_weight = math.fsum(row[u] for u in best_face)  # type: ignore[union-attr]
        best_a = t2_weight
        for edge in tri.edges():
            if a_violation(tri, edge) is not None:
                continue
            x, y, u, z = plaquette(tri, edge)
            gain = row[x] + row[y] + row[u] + row[z] - oracle.weight(x, y)
            if gain > best_a:
                best_edge, best_a = edge, float(gain)

    if best_edge is not None:
        record = apply_a(tri, best_edge, v, oracle)
        moves["A"] += 1
        logger.info("Online A: vertex %d into plaquette of %s (gain %.6g)", v, best_edge, record.gain)
    else:
        record = apply_t2(tri, v, best_face, oracle)  # type: ignore[arg-type]
        moves["T2"] += 1
        if result.clique_tree is not None:
            if best_face in result.clique_tree.face_owner:
                tree = result.clique_tree.copy()
                tree.add(record.clique, record.separator)  # type: ignore[arg-type]
            else:
                tree = CliqueTree.from_triangulation(tri)
        logger.info("Online T2: vertex %d into %s (gain %.6g)", v, best_face, record.gain)

    updated = FilterResult.from_triangulation(
        tri,
        oracle,
        method=result.method,
        clique_tree=tree,
        moves_applied=dict(moves),
        stats=BuildStats(seed_clique=result.stats.seed_clique),
    )
    if result.names:
        updated.names = list(result.names) + [str(v)]
    return updated


def remove_vertex_online(result: FilterResult, v: int, w: Optional[WeightOracle] = None) -> FilterResult:
    """Remove ``v`` by T2 inverse (degree 3) or A inverse (degree 4).

    A inverse restores a diagonal that is not an edge of ``result``; its weight comes
    from ``w``.
    """
    source = _require_registry(result)
    if v not in source.inserted:
        raise ValueError(f"vertex {v} is not in the graph")
    degree = source.degree(v)
    if degree not in (3, 4):
        raise ValueError(f"vertex {v} has degree {degree}: not removable by local moves")
    oracle = _ResultOracle(result, w)
    tri = source.copy()
    moves = Counter(result.moves_applied)
    if degree == 3:
        record = apply_t2_inverse(tri, v, oracle)
        moves["T2inv"] += 1
    else:
        if w is None:
            raise ValueError("A inverse needs a weight oracle to weigh the absent diagonals")
        record = apply_a_inverse(tri, v, oracle)
        moves["Ainv"] += 1
    logger.info("Online %s removed vertex %d (gain %.6g)", record.kind, v, record.gain)
    updated = FilterResult.from_triangulation(
        tri,
        oracle,
        method=result.method,
        clique_tree=CliqueTree.from_triangulation(tri),
        moves_applied=dict(moves),
        stats=BuildStats(seed_clique=result.stats.seed_clique),
    )
    updated.names = result.names
    return updated


def build_many(w: WeightOracle, methods: Iterable[str], cfg: Optional[BuildConfig] = None) -> Mapping[str, FilterResult]:
    """Build several TMFG variants over one oracle."""
    cfg = cfg or BuildConfig()
    return {method: build(w, replace(cfg, variant=METHOD_NAMES[method])) for method in methods}
