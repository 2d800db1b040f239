"""Weight-matrix generators and file ingestion.

Families: ``uniform``, ``beta(a,b)``, ``pareto(exponent)``, ``factor(k)`` or
``factor(k,q)``, ``file-matrix:PATH`` and ``file-timeseries:PATH``. Every random
sample comes from a PCG64 generator seeded by the MatrixSpec, so the same MatrixSpec always
yields the same matrix.
"""

from __future__ import annotations

import io
import logging
import math
import re
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import requests

from .scores import TRANSFORMS, WeightOracle, apply_transform, correlation_matrix
from .utils import is_remote

logger = logging.getLogger("tmfgkit.synth")

RNG_ALGORITHM = "numpy.PCG64"
FAMILIES = ("uniform", "beta", "pareto", "factor", "file-matrix", "file-timeseries")
DEFAULT_TRANSFORMS = {
    "uniform": "raw",
    "beta": "raw",
    "pareto": "raw",
    "factor": "squared",
    "file-matrix": "raw",
    "file-timeseries": "squared",
}
DEFAULT_OBSERVATIONS = 1000
SYMMETRY_TOLERANCE = 1e-9
DOWNLOAD_TIMEOUT = 60

_CALL = re.compile(r"^\s*([a-z]+)\s*(?:\((.*)\))?\s*$")


class MatrixFormatError(ValueError):
    """Malformed matrix or time-series input, located by line and column (1-based)."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None) -> None:
        self.line = line
        self.column = column
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


@dataclass
class MatrixSpec:
    family: str
    p: int = 0
    seed: int = 0
    transform: Optional[str] = None
    alpha: float = 0.0
    beta: float = 0.0
    exponent: float = 0.0
    n_factors: int = 0
    q: int = DEFAULT_OBSERVATIONS
    path: Optional[str] = None

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {', '.join(FAMILIES)}")
        if self.transform is None:
            self.transform = DEFAULT_TRANSFORMS[self.family]
        if self.transform not in TRANSFORMS:
            raise ValueError(f"unknown transform {self.transform!r}")
        if self.family.startswith("file-"):
            if not self.path:
                raise ValueError(f"{self.family} needs a path")
            return
        if self.p < 4:
            raise ValueError(f"p must be >= 4, got {self.p}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.family == "beta" and (self.alpha <= 0 or self.beta <= 0):
            raise ValueError(f"beta shape parameters must be positive, got ({self.alpha}, {self.beta})")
        if self.family == "pareto" and self.exponent <= 0:
            raise ValueError(f"pareto exponent must be positive, got {self.exponent}")
        if self.family == "factor" and (self.n_factors < 1 or self.q < 2):
            raise ValueError(f"factor model needs k >= 1 and q >= 2, got k={self.n_factors}, q={self.q}")

    @classmethod
    def parse(cls, text: str, p: int = 0, seed: int = 0, transform: Optional[str] = None) -> "MatrixSpec":
        """Build a spec from strings such as ``beta(0.5,3)`` or ``file-matrix:data/w.csv``."""
        for family in ("file-matrix", "file-timeseries"):
            if text.startswith(family + ":"):
                return cls(family, p=p, seed=seed, transform=transform, path=text[len(family) + 1:])
        match = _CALL.match(text.lower())
        if not match:
            raise ValueError(f"cannot parse distribution {text!r}")
        name, raw_args = match.group(1), match.group(2)
        try:
            args = [float(a) for a in raw_args.split(",")] if raw_args and raw_args.strip() else []
        except ValueError as exc:
            raise ValueError(f"non-numeric parameter in {text!r}") from exc
        if name == "uniform" and not args:
            return cls("uniform", p=p, seed=seed, transform=transform)
        if name == "beta" and len(args) == 2:
            return cls("beta", p=p, seed=seed, transform=transform, alpha=args[0], beta=args[1])
        if name == "pareto" and len(args) == 1:
            return cls("pareto", p=p, seed=seed, transform=transform, exponent=args[0])
        if name == "factor" and len(args) in (1, 2):
            q = int(args[1]) if len(args) == 2 else DEFAULT_OBSERVATIONS
            return cls("factor", p=p, seed=seed, transform=transform, n_factors=int(args[0]), q=q)
        raise ValueError(f"cannot parse distribution {text!r}")

    @property
    def label(self) -> str:
        if self.family == "beta":
            return f"beta({self.alpha:g},{self.beta:g})"
        if self.family == "pareto":
            return f"pareto({self.exponent:g})"
        if self.family == "factor":
            return f"factor({self.n_factors})" if self.q == DEFAULT_OBSERVATIONS else f"factor({self.n_factors},{self.q})"
        if self.family.startswith("file-"):
            return f"{self.family}:{self.path}"
        return self.family

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["label"] = self.label
        return data


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def derive_seed(base: int, *keys: int) -> int:
    """Independent child seed for (base, keys...)."""
    return int(np.random.SeedSequence([int(base), *[int(k) for k in keys]]).generate_state(1, dtype=np.uint64)[0] >> 1)


def _symmetric_from_upper(p: int, values: np.ndarray) -> np.ndarray:
    matrix = np.zeros((p, p), dtype=np.float64)
    ii, jj = np.triu_indices(p, 1)
    matrix[ii, jj] = values
    matrix[jj, ii] = values
    return matrix


def factor_series(p: int, n_factors: int, q: int, rng: np.random.Generator) -> np.ndarray:
    """q observations of p series X = L F + eps (standard-normal L, F and eps), as a q x p table."""
    loadings = rng.standard_normal((p, n_factors))
    factors = rng.standard_normal((n_factors, q))
    noise = rng.standard_normal((p, q))
    return (loadings @ factors + noise).T


def generate(spec: MatrixSpec, *, lazy: bool = False) -> WeightOracle:
    metadata: Dict[str, Any] = {
        "family": spec.label,
        "p": spec.p,
        "seed": spec.seed,
        "rng": RNG_ALGORITHM,
        "transform": spec.transform,
    }
    if spec.family == "file-matrix":
        matrix, names = read_matrix(spec.path)  # type: ignore[arg-type]
        metadata.update(p=matrix.shape[0], names=names, rng=None, seed=None)
        return matrix_oracle(matrix, spec.transform, metadata=metadata)  # type: ignore[arg-type]
    if spec.family == "file-timeseries":
        names, data = read_timeseries(spec.path)  # type: ignore[arg-type]
        metadata.update(p=data.shape[1], names=names, observations=data.shape[0], rng=None, seed=None)
        return WeightOracle.from_series(data, spec.transform, lazy=lazy, metadata=metadata)  # type: ignore[arg-type]

    rng = make_rng(spec.seed)
    n_pairs = spec.p * (spec.p - 1) // 2
    if spec.family == "uniform":
        values = rng.random(n_pairs)
    elif spec.family == "beta":
        values = rng.beta(spec.alpha, spec.beta, n_pairs)
    elif spec.family == "pareto":
        values = rng.pareto(spec.exponent, n_pairs) + 1.0
    else:
        series = factor_series(spec.p, spec.n_factors, spec.q, rng)
        metadata["observations"] = spec.q
        if lazy:
            return WeightOracle.from_series(series, spec.transform, lazy=True, metadata=metadata)  # type: ignore[arg-type]
        return WeightOracle.from_matrix(correlation_matrix(series), spec.transform, metadata=metadata)  # type: ignore[arg-type]
    logger.debug("Generated %s sample, p=%d, seed=%d", spec.label, spec.p, spec.seed)
    return WeightOracle.from_matrix(_symmetric_from_upper(spec.p, values), spec.transform, metadata=metadata)  # type: ignore[arg-type]


def fetch_text(path: str) -> str:
    """Contents of a local file or an http(s) URL."""
    if is_remote(path):
        logger.info("Downloading %s", path)
        response = requests.get(path, timeout=DOWNLOAD_TIMEOUT)
        if response.status_code != 200:
            raise RuntimeError(f"Download failed: {response.status_code} {path}")
        return response.text
    source = Path(path).expanduser()
    if not source.is_file():
        raise FileNotFoundError(f"Input not found: {source}")
    return source.read_text(encoding="utf-8")


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except (TypeError, ValueError):
        return False
    return True


def _read_table(text: str) -> Tuple[pd.DataFrame, List[int]]:
    lines = [k + 1 for k, raw in enumerate(text.splitlines()) if raw.strip()]
    if not lines:
        raise MatrixFormatError("input is empty")
    try:
        frame = pd.read_csv(
            io.StringIO(text),
            header=None,
            dtype=str,
            skip_blank_lines=True,
            keep_default_na=False,
            skipinitialspace=True,
        )
    except pd.errors.ParserError as exc:
        found = re.search(r"line (\d+)", str(exc))
        raise MatrixFormatError(f"ragged row: {exc}", line=int(found.group(1)) if found else None) from exc
    return frame, lines


def _parse_cell(cell: Any) -> float:
    # float() is correctly rounded: %.17g text reads back bit-identical
    try:
        return float(cell)
    except (TypeError, ValueError):
        return math.nan


def _to_numbers(frame: pd.DataFrame, lines: Sequence[int], first_row: int, *, skip_diagonal: bool = False) -> np.ndarray:
    values = frame.apply(lambda column: column.map(_parse_cell)).to_numpy(dtype=np.float64, copy=True)
    bad = ~np.isfinite(values)
    if skip_diagonal:
        diagonal = np.diag_indices(min(values.shape))
        values[diagonal] = np.where(bad[diagonal], 0.0, values[diagonal])
        bad[diagonal] = False
    if bad.any():
        r, c = (int(k) for k in np.argwhere(bad)[0])
        cell = frame.iat[r, c]
        line = lines[first_row + r]
        if pd.isna(cell) or str(cell).strip() == "":
            raise MatrixFormatError("missing value", line=line, column=c + 1)
        if _is_number(cell):
            raise MatrixFormatError(f"non-finite value {cell!r}", line=line, column=c + 1)
        raise MatrixFormatError(f"not a number: {cell!r}", line=line, column=c + 1)
    return values


def read_matrix(path: str) -> Tuple[np.ndarray, Optional[List[str]]]:
    """Dense square matrix from CSV; a non-numeric first row is taken as a header.

    Diagonal cells are not weights: blank or non-finite ones read as 0.
    """
    frame, lines = _read_table(fetch_text(path))
    names: Optional[List[str]] = None
    first = 0
    if not all(_is_number(cell) for cell in frame.iloc[0] if not pd.isna(cell) and str(cell).strip()):
        names = [str(cell).strip() for cell in frame.iloc[0]]
        frame = frame.iloc[1:].reset_index(drop=True)
        first = 1
    rows, cols = frame.shape
    if rows != cols:
        raise MatrixFormatError(f"matrix is {rows}x{cols}, expected square")
    matrix = _to_numbers(frame, lines, first, skip_diagonal=True)
    asym = np.abs(matrix - matrix.T)
    np.fill_diagonal(asym, 0.0)
    if asym.max(initial=0.0) > SYMMETRY_TOLERANCE:
        i, j = (int(k) for k in np.argwhere(asym > SYMMETRY_TOLERANCE)[0])
        raise MatrixFormatError(
            f"matrix not symmetric: {matrix[i, j]!r} vs {matrix[j, i]!r} at ({i}, {j})",
            line=lines[first + i],
            column=j + 1,
        )
    logger.info("Read %dx%d matrix from %s", rows, cols, path)
    return matrix, names


def read_timeseries(path: str) -> Tuple[List[str], np.ndarray]:
    """Observations x variables table; the header row of names is required."""
    frame, lines = _read_table(fetch_text(path))
    header = [str(cell).strip() for cell in frame.iloc[0]]
    if all(_is_number(cell) for cell in header):
        raise MatrixFormatError("time-series input needs a header row of names", line=lines[0])
    data = _to_numbers(frame.iloc[1:].reset_index(drop=True), lines, 1)
    if data.shape[0] < 2:
        raise MatrixFormatError(f"need at least 2 observations, got {data.shape[0]}")
    flat = np.flatnonzero(data.std(axis=0) == 0.0)
    if flat.size:
        raise MatrixFormatError(f"column {header[int(flat[0])]!r} has zero variance", column=int(flat[0]) + 1)
    logger.info("Read %d observations of %d series from %s", data.shape[0], data.shape[1], path)
    return header, data


def matrix_oracle(matrix: np.ndarray, transform: str, metadata: Optional[Dict[str, Any]] = None) -> WeightOracle:
    """Oracle over a parsed matrix; negative weights are located before rejection."""
    transformed = apply_transform(matrix, transform)
    upper = np.triu(transformed, 1)
    if (upper < 0).any():
        i, j = (int(k) for k in np.argwhere(upper < 0)[0])
        header = 1 if metadata and metadata.get("names") else 0
        raise MatrixFormatError(
            f"negative weight {transformed[i, j]!r} after {transform} transform",
            line=header + i + 1,
            column=j + 1,
        )
    return WeightOracle.from_matrix(matrix, transform, metadata=metadata)


def sample_windows(q: int, n_windows: int, length: int, seed: int) -> List[int]:
    """Start rows of ``n_windows`` random windows of ``length`` observations."""
    if length < 2:
        raise ValueError("window length must be >= 2")
    if q < length:
        raise ValueError(f"series has {q} observations, shorter than window length {length}")
    rng = make_rng(seed)
    return [int(s) for s in rng.integers(0, q - length + 1, size=n_windows)]


def write_matrix_csv(matrix: np.ndarray, path: Path, names: Optional[Sequence[str]] = None) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    header = ",".join(names) if names else ""
    np.savetxt(path, matrix, fmt="%.17g", delimiter=",", header=header, comments="")
