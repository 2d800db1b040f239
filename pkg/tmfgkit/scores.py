"""Weight oracles and score functions S(v, t).

Two scores are available: the sum of the three weights a T2 insertion adds, and
the Gaussian entropy gain -H(Σ_u) + H(Σ_t) of the 4-clique u = t ∪ {v}.
"""

from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger("tmfgkit.scores")

TRANSFORMS = ("squared", "absolute", "raw")
SCORE_KINDS = ("sum", "entropy")
DET_FLOOR = 1e-12
SYMMETRY_TOLERANCE = 1e-9
LOG_2PIE = math.log(2.0 * math.pi * math.e)


def apply_transform(values: Any, transform: str) -> Any:
    if transform == "squared":
        return values * values
    if transform == "absolute":
        return abs(values)
    if transform == "raw":
        return values
    raise ValueError(f"unknown transform {transform!r}; expected one of {', '.join(TRANSFORMS)}")


def _center_columns(series: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Two-pass preparation: column means first, then centred columns and their sums of squares."""
    data = np.asarray(series, dtype=np.float64)
    if data.ndim != 2:
        raise ValueError("time series must be a 2-D table (observations x variables)")
    q = data.shape[0]
    if q < 2:
        raise ValueError(f"need at least 2 observations, got {q}")
    if not np.all(np.isfinite(data)):
        raise ValueError("time series contains non-finite values")
    means = data.sum(axis=0) / q
    centered = np.ascontiguousarray((data - means).T)
    sumsq = np.array([float(np.dot(col, col)) for col in centered])
    return centered, sumsq


def _pearson(ci: np.ndarray, cj: np.ndarray, ssi: float, ssj: float) -> float:
    r = float(np.dot(ci, cj)) / math.sqrt(ssi * ssj)
    return min(1.0, max(-1.0, r))


def correlation(i: int, j: int, series: np.ndarray) -> float:
    """Pearson correlation of columns i and j (two-pass)."""
    data = np.asarray(series, dtype=np.float64)
    pair = data[:, [i, j]]
    centered, sumsq = _center_columns(pair)
    for column, ss in zip((i, j), sumsq):
        if ss == 0.0:
            raise ValueError(f"column {column} has zero variance")
    return _pearson(centered[0], centered[1], float(sumsq[0]), float(sumsq[1]))


class WeightOracle:
    """Symmetric non-negative pairwise weights.

    Backed either by a dense matrix or by a time-series table whose correlations
    are computed on demand and cached. The lazy cache is guarded by a lock, so one
    oracle may serve concurrent builds.
    """

    def __init__(
        self,
        matrix: Optional[np.ndarray] = None,
        *,
        centered: Optional[np.ndarray] = None,
        sumsq: Optional[np.ndarray] = None,
        transform: str = "raw",
        metadata: Optional[Dict[str, Any]] = None,
    ) -> None:
        if transform not in TRANSFORMS:
            raise ValueError(f"unknown transform {transform!r}")
        if (matrix is None) == (centered is None):
            raise ValueError("oracle needs exactly one backing: a matrix or a centred series")
        self.transform = transform
        self.metadata: Dict[str, Any] = dict(metadata or {})
        self._matrix = matrix
        self._centered = centered
        self._sumsq = sumsq
        self._cache: Dict[Tuple[int, int], float] = {}
        self._lock = threading.Lock()
        self.p = int(matrix.shape[0]) if matrix is not None else int(centered.shape[0])  # type: ignore[union-attr]

    @classmethod
    def from_matrix(
        cls,
        matrix: Any,
        transform: str = "raw",
        *,
        tolerance: float = SYMMETRY_TOLERANCE,
        metadata: Optional[Dict[str, Any]] = None,
    ) -> "WeightOracle":
        data = np.array(matrix, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise ValueError(f"weight matrix must be square, got shape {data.shape}")
        p = data.shape[0]
        off = ~np.eye(p, dtype=bool)
        bad = off & ~np.isfinite(data)
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise ValueError(f"non-finite weight at ({i}, {j})")
        asym = np.abs(data - data.T)
        if p and asym[off].max(initial=0.0) > tolerance:
            i, j = np.argwhere(off & (asym > tolerance))[0]
            raise ValueError(f"matrix not symmetric at ({i}, {j}): {data[i, j]!r} vs {data[j, i]!r}")
        upper = np.triu(apply_transform(data, transform), 1)
        if (upper < 0).any():
            i, j = np.argwhere(upper < 0)[0]
            raise ValueError(f"negative weight {upper[i, j]!r} at ({i}, {j}) after {transform} transform")
        return cls(upper + upper.T, transform=transform, metadata=metadata)

    @classmethod
    def from_series(
        cls,
        series: Any,
        transform: str = "squared",
        *,
        lazy: bool = True,
        metadata: Optional[Dict[str, Any]] = None,
    ) -> "WeightOracle":
        centered, sumsq = _center_columns(np.asarray(series, dtype=np.float64))
        flat = np.flatnonzero(sumsq == 0.0)
        if flat.size:
            raise ValueError(f"column {int(flat[0])} has zero variance")
        if transform == "raw":
            raise ValueError("raw correlations can be negative; use squared or absolute")
        meta = dict(metadata or {})
        meta.setdefault("observations", int(centered.shape[1]))
        oracle = cls(centered=centered, sumsq=sumsq, transform=transform, metadata=meta)
        if lazy:
            return oracle
        return cls(oracle.dense(), transform=transform, metadata=meta)

    @property
    def is_lazy(self) -> bool:
        return self._matrix is None

    def _correlation(self, i: int, j: int) -> float:
        return _pearson(self._centered[i], self._centered[j], float(self._sumsq[i]), float(self._sumsq[j]))  # type: ignore[index]

    def weight(self, i: int, j: int) -> float:
        if i == j:
            return 0.0
        if self._matrix is not None:
            return float(self._matrix[i, j])
        key = (i, j) if i < j else (j, i)
        value = self._cache.get(key)
        if value is None:
            value = float(apply_transform(self._correlation(*key), self.transform))
            with self._lock:
                value = self._cache.setdefault(key, value)
        return value

    def row(self, i: int, columns: np.ndarray) -> np.ndarray:
        """Weights w(i, c) for every c in ``columns``."""
        if self._matrix is not None:
            return self._matrix[i, columns]
        return np.array([self.weight(i, int(c)) for c in columns], dtype=np.float64)

    def dense(self) -> np.ndarray:
        if self._matrix is not None:
            return self._matrix
        out = np.zeros((self.p, self.p), dtype=np.float64)
        for i in range(self.p):
            for j in range(i + 1, self.p):
                out[i, j] = out[j, i] = self.weight(i, j)
        return out

    def clique_weight(self, vertices: Sequence[int]) -> float:
        ordered = sorted(vertices)
        return math.fsum(
            self.weight(ordered[a], ordered[b]) for a in range(len(ordered)) for b in range(a + 1, len(ordered))
        )

    @property
    def cached_entries(self) -> int:
        return len(self._cache)


def correlation_matrix(series: Any) -> np.ndarray:
    """Full Pearson matrix (unit diagonal) using the same arithmetic as the lazy oracle."""
    centered, sumsq = _center_columns(np.asarray(series, dtype=np.float64))
    p = centered.shape[0]
    out = np.eye(p, dtype=np.float64)
    for i in range(p):
        for j in range(i + 1, p):
            out[i, j] = out[j, i] = _pearson(centered[i], centered[j], float(sumsq[i]), float(sumsq[j]))
    return out


def _checked_det(sub: np.ndarray) -> float:
    try:
        np.linalg.cholesky(sub)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"submatrix of size {sub.shape[0]} is not positive definite") from exc
    det = float(np.linalg.det(sub))
    if det <= DET_FLOOR:
        raise ValueError(f"submatrix of size {sub.shape[0]} has determinant {det!r} <= {DET_FLOOR}")
    return det


def gaussian_entropy(covariance: np.ndarray) -> float:
    """Differential entropy of a Gaussian with the given covariance (nats)."""
    k = covariance.shape[0]
    return 0.5 * (k * LOG_2PIE + math.log(_checked_det(covariance)))


@dataclass
class GaussianModel:
    covariance: np.ndarray

    def __post_init__(self) -> None:
        cov = np.asarray(self.covariance, dtype=np.float64)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
            raise ValueError(f"covariance must be square, got shape {cov.shape}")
        if not np.all(np.isfinite(cov)):
            raise ValueError("covariance contains non-finite values")
        if np.abs(cov - cov.T).max(initial=0.0) > SYMMETRY_TOLERANCE:
            raise ValueError("covariance is not symmetric")
        self.covariance = cov

    @property
    def p(self) -> int:
        return int(self.covariance.shape[0])

    @classmethod
    def from_series(cls, series: Any) -> "GaussianModel":
        data = np.asarray(series, dtype=np.float64)
        return cls(np.cov(data, rowvar=False, ddof=1))

    def submatrix(self, vertices: Sequence[int]) -> np.ndarray:
        idx = list(vertices)
        return self.covariance[np.ix_(idx, idx)]

    def entropy(self, vertices: Sequence[int]) -> float:
        return gaussian_entropy(self.submatrix(vertices))

    def weight_oracle(self, transform: str = "squared") -> WeightOracle:
        std = np.sqrt(np.diag(self.covariance))
        if np.any(std <= 0):
            raise ValueError("covariance has a non-positive variance")
        corr = np.clip(self.covariance / np.outer(std, std), -1.0, 1.0)
        return WeightOracle.from_matrix(corr, transform=transform)


def score_sum(v: int, t: Sequence[int], w: WeightOracle) -> float:
    """w(v,a) + w(v,b) + w(v,c) for t = {a, b, c}."""
    if v in t:
        raise ValueError(f"vertex {v} belongs to face {tuple(t)}")
    a, b, c = sorted(t)
    for q in (v, a, b, c):
        if not 0 <= q < w.p:
            raise ValueError(f"vertex {q} outside oracle dimension {w.p}")
    return w.weight(v, a) + w.weight(v, b) + w.weight(v, c)


def score_entropy_gaussian(v: int, t: Sequence[int], m: GaussianModel) -> float:
    """-H(Σ_u) + H(Σ_t) = -½·log(2πe · det Σ_u / det Σ_t)."""
    if v in t:
        raise ValueError(f"vertex {v} belongs to face {tuple(t)}")
    face = sorted(t)
    det_t = _checked_det(m.submatrix(face))
    det_u = _checked_det(m.submatrix(face + [v]))
    return -0.5 * math.log(2.0 * math.pi * math.e * det_u / det_t)


def model_entropy(ct: Any, m: GaussianModel) -> float:
    """H_m: clique entropies minus separator entropies."""
    terms = [m.entropy(c) for c in ct.cliques]
    terms.extend(-m.entropy(s) for s in ct.separators)
    return math.fsum(terms)


def kl_divergence_gaussian(full: GaussianModel, ct: Any) -> float:
    """D_KL(P || Q) = -H(Σ) + H_m for Q factorised on the clique tree."""
    covered = set()
    for clique in ct.cliques:
        covered.update(clique)
    if covered != set(range(full.p)):
        raise ValueError(f"clique tree covers {len(covered)} of {full.p} variables")
    value = -full.entropy(range(full.p)) + model_entropy(ct, full)
    if value < 0.0:
        if value < -1e-9:
            raise ValueError(f"negative divergence {value!r}; covariance is numerically unstable")
        value = 0.0
    return value


@dataclass
class ScoreFunction:
    """S(v, t): a deterministic score for inserting vertex v into face t."""

    kind: str
    oracle: Optional[WeightOracle] = None
    model: Optional[GaussianModel] = None
    _face_cache: Dict[Tuple[int, ...], Tuple[np.ndarray, float]] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if self.kind not in SCORE_KINDS:
            raise ValueError(f"unknown score {self.kind!r}; expected one of {', '.join(SCORE_KINDS)}")
        if self.kind == "sum" and self.oracle is None:
            raise ValueError("sum score needs a weight oracle")
        if self.kind == "entropy" and self.model is None:
            raise ValueError("entropy score needs a Gaussian model")

    @classmethod
    def sum_of_weights(cls, oracle: WeightOracle) -> "ScoreFunction":
        return cls("sum", oracle=oracle)

    @classmethod
    def gaussian_entropy(cls, model: GaussianModel) -> "ScoreFunction":
        return cls("entropy", model=model)

    @property
    def p(self) -> int:
        return self.oracle.p if self.kind == "sum" else self.model.p  # type: ignore[union-attr]

    def __call__(self, v: int, t: Sequence[int]) -> float:
        return float(self.evaluate_many(tuple(sorted(t)), np.array([v], dtype=np.int64))[0])

    def evaluate_many(self, face: Sequence[int], candidates: np.ndarray) -> np.ndarray:
        """Scores of every candidate vertex for one face, elementwise so each value is
        independent of which other candidates are present."""
        a, b, c = face
        if self.kind == "sum":
            w = self.oracle
            return w.row(a, candidates) + w.row(b, candidates) + w.row(c, candidates)  # type: ignore[union-attr]
        return self._entropy_many(tuple(face), candidates)

    def _face_inverse(self, face: Tuple[int, ...]) -> Tuple[np.ndarray, float]:
        cached = self._face_cache.get(face)
        if cached is None:
            sub = self.model.submatrix(face)  # type: ignore[union-attr]
            det_t = _checked_det(sub)
            cached = (np.linalg.inv(sub), det_t)
            if len(self._face_cache) > 4096:
                self._face_cache.clear()
            self._face_cache[face] = cached
        return cached

    def _entropy_many(self, face: Tuple[int, ...], candidates: np.ndarray) -> np.ndarray:
        cov = self.model.covariance  # type: ignore[union-attr]
        inv, det_t = self._face_inverse(face)
        cross = [cov[candidates, f] for f in face]
        quad = np.zeros(len(candidates), dtype=np.float64)
        for x in range(3):
            for y in range(3):
                quad = quad + cross[x] * inv[x, y] * cross[y]
        schur = cov[candidates, candidates] - quad
        if np.any(det_t * schur <= DET_FLOOR):
            bad = int(candidates[int(np.argmin(schur))])
            raise ValueError(f"clique {tuple(sorted(face + (bad,)))} is not positive definite")
        return -0.5 * np.log(2.0 * math.pi * math.e * schur)


def make_score(kind: str, oracle: Optional[WeightOracle] = None, model: Optional[GaussianModel] = None) -> ScoreFunction:
    return ScoreFunction(kind, oracle=oracle, model=model)


def iter_face_scores(score: ScoreFunction, v: int, faces: Iterable[Sequence[int]]) -> Iterable[Tuple[Tuple[int, ...], float]]:
    for face in faces:
        yield tuple(face), score(v, face)
