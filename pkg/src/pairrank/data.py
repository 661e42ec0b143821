"""Item pools, comparison records, dataset I/O, and pool splits.

Dataset files are UTF-8 CSV. The items file has a header
``id,f0,...,f{d-1}[,score]`` with one row per item; ids must be exactly
0..n-1. The comparisons file has a header ``i,j,c`` where c=1 means item i
was preferred over item j.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError


@dataclass
class ItemPool:
    """n items with d-dimensional feature rows and optional hidden scores."""

    features: np.ndarray
    true_scores: np.ndarray | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        if self.features.ndim != 2:
            raise ValidationError("features must be a 2-d array")
        n, d = self.features.shape
        if n < 2:
            raise ValidationError(f"need at least 2 items, got {n}")
        if d < 1:
            raise ValidationError("feature dimension must be >= 1")
        if self.true_scores is not None:
            self.true_scores = np.asarray(self.true_scores, dtype=float)
            if self.true_scores.shape != (n,):
                raise ValidationError("true_scores length must match item count")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def items(self) -> np.ndarray:
        return np.arange(self.n)


@dataclass
class ComparisonRecord:
    """One observed comparison: c=1 means item i was preferred over item j."""

    i: int
    j: int
    c: int
    t: int

    def __post_init__(self):
        if self.i == self.j:
            raise ValidationError(f"comparison of item {self.i} with itself")
        if self.c not in (0, 1):
            raise ValidationError(f"label must be 0 or 1, got {self.c}")
        if self.t < 1:
            raise ValidationError(f"step index must be >= 1, got {self.t}")


@dataclass
class ComparisonHistory:
    """Ordered comparison records with strictly increasing step indices."""

    records: list[ComparisonRecord] = field(default_factory=list)

    def __post_init__(self):
        last = 0
        for rec in self.records:
            if rec.t <= last:
                raise ValidationError("step indices must be strictly increasing from 1")
            last = rec.t

    def add(self, i: int, j: int, c: int) -> ComparisonRecord:
        """Append a record at the next step index."""
        t = self.records[-1].t + 1 if self.records else 1
        rec = ComparisonRecord(i, j, c, t)
        self.records.append(rec)
        return rec

    def __len__(self) -> int:
        return len(self.records)

    def matrices(self, pool: ItemPool) -> tuple[np.ndarray, np.ndarray]:
        """Difference-vector design matrix and label vector for fitting."""
        if not self.records:
            return np.zeros((0, pool.d)), np.zeros(0)
        ii = np.array([r.i for r in self.records])
        jj = np.array([r.j for r in self.records])
        cc = np.array([r.c for r in self.records], dtype=float)
        return pool.features[ii] - pool.features[jj], cc


@dataclass
class ComparisonPool:
    """Pre-collected annotations split into a replay side and a holdout side.

    Raw (i, j, c) triples are kept as given; orientation is normalized only
    when labels are drawn for a query.
    """

    replay: list[tuple[int, int, int]]
    holdout: list[tuple[int, int, int]]
    holdout_fraction: float

    def replay_labels(self) -> dict[tuple[int, int], list[int]]:
        """Remaining annotations keyed by unordered pair, labels oriented low-id-first."""
        table: dict[tuple[int, int], list[int]] = {}
        for i, j, c in self.replay:
            key = (i, j) if i < j else (j, i)
            label = c if i < j else 1 - c
            table.setdefault(key, []).append(label)
        return table


def diff_vector(pool: ItemPool, i: int, j: int) -> np.ndarray:
    """Attribute difference x_i - x_j."""
    _check_pair(pool.n, i, j)
    return pool.features[i] - pool.features[j]


def _check_pair(n: int, i: int, j: int) -> None:
    if not (0 <= i < n and 0 <= j < n):
        raise ValidationError(f"pair ({i}, {j}) out of range for {n} items")
    if i == j:
        raise ValidationError(f"invalid pair: i == j == {i}")


def split_generalization(pool: ItemPool, scores: np.ndarray) -> tuple[ItemPool, ItemPool]:
    """Split a pool at the score median into (training, evaluation) pools.

    The lower-scoring half trains, the upper half evaluates. Ties at the
    median break by ascending item id; for odd n the training half gets the
    extra item. Both halves are re-indexed 0..m-1.
    """
    scores = np.asarray(scores, dtype=float)
    n = pool.n
    if scores.shape != (n,):
        raise ValidationError("scores length must match item count")
    if n < 4:
        raise ValidationError(f"need at least 4 items to split, got {n}")
    order = np.lexsort((np.arange(n), scores))
    cut = (n + 1) // 2
    low, high = np.sort(order[:cut]), np.sort(order[cut:])
    return (
        ItemPool(pool.features[low], scores[low]),
        ItemPool(pool.features[high], scores[high]),
    )


def load_items_csv(path: str | Path) -> ItemPool:
    """Read an items CSV (``id,f0,...,f{d-1}[,score]``)."""
    path = Path(path)
    with path.open(encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError("empty items file", 1)
    header = [h.strip() for h in rows[0]]
    if not header or header[0] != "id":
        raise ParseError("items header must start with 'id'", 1)
    has_score = header[-1] == "score"
    feat_cols = header[1 : len(header) - 1 if has_score else len(header)]
    d = len(feat_cols)
    if d < 1 or feat_cols != [f"f{k}" for k in range(d)]:
        raise ParseError("feature columns must be named f0..f{d-1}", 1)

    ids, feats, scores = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", lineno)
        try:
            ids.append(int(row[0]))
            feats.append([float(v) for v in row[1 : 1 + d]])
            if has_score:
                scores.append(float(row[1 + d]))
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from exc
    n = len(ids)
    if sorted(ids) != list(range(n)):
        raise ValidationError("item ids must be exactly 0..n-1")
    order = np.argsort(ids)
    features = np.asarray(feats, dtype=float)[order]
    true_scores = np.asarray(scores, dtype=float)[order] if has_score else None
    return ItemPool(features, true_scores)


def load_comparisons_csv(path: str | Path, n_items: int) -> list[tuple[int, int, int]]:
    """Read a comparisons CSV (``i,j,c``) and validate item references."""
    path = Path(path)
    with path.open(encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [h.strip() for h in rows[0]] != ["i", "j", "c"]:
        raise ParseError("comparisons header must be 'i,j,c'", 1)
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 3:
            raise ParseError(f"expected 3 fields, got {len(row)}", lineno)
        try:
            i, j, c = int(row[0]), int(row[1]), int(row[2])
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from exc
        if not (0 <= i < n_items and 0 <= j < n_items):
            raise ValidationError(f"line {lineno}: comparison references unknown item ({i}, {j})")
        if i == j:
            raise ValidationError(f"line {lineno}: comparison of item {i} with itself")
        if c not in (0, 1):
            raise ValidationError(f"line {lineno}: label must be 0 or 1")
        out.append((i, j, c))
    return out


def load_dataset(
    items_path: str | Path,
    comparisons_path: str | Path | None = None,
    *,
    holdout_fraction: float = 0.1,
    seed: int = 0,
) -> tuple[ItemPool, ComparisonPool | None]:
    """Load an item pool and, optionally, a comparison pool split for replay.

    The holdout split is seeded-random over individual annotations; the
    replay side and holdout side are disjoint and union to the input.
    """
    pool = load_items_csv(items_path)
    if comparisons_path is None:
        return pool, None
    if not 0.0 <= holdout_fraction < 1.0:
        raise ValidationError("holdout fraction must be in [0, 1)")
    annotations = load_comparisons_csv(comparisons_path, pool.n)
    rng = np.random.default_rng(seed)
    n_hold = int(round(holdout_fraction * len(annotations)))
    perm = rng.permutation(len(annotations))
    holdout = [annotations[k] for k in perm[:n_hold]]
    replay = [annotations[k] for k in perm[n_hold:]]
    return pool, ComparisonPool(replay, holdout, holdout_fraction)


def write_items_csv(pool: ItemPool, path: str | Path | None = None) -> str:
    """Serialize a pool to items CSV; returns the text, optionally writing it."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["id"] + [f"f{k}" for k in range(pool.d)]
    if pool.true_scores is not None:
        header.append("score")
    writer.writerow(header)
    for i in range(pool.n):
        row = [i] + [repr(float(v)) for v in pool.features[i]]
        if pool.true_scores is not None:
            row.append(repr(float(pool.true_scores[i])))
        writer.writerow(row)
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def write_comparisons_csv(
    records: list[tuple[int, int, int]], path: str | Path | None = None
) -> str:
    """Serialize (i, j, c) triples to comparisons CSV."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["i", "j", "c"])
    for i, j, c in records:
        writer.writerow([i, j, c])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def pool_to_json(pool: ItemPool) -> str:
    """JSON serialization used by the annotation service."""
    payload = {
        "features": pool.features.tolist(),
        "true_scores": None if pool.true_scores is None else pool.true_scores.tolist(),
    }
    return json.dumps(payload)


def pool_from_json(text: str) -> ItemPool:
    payload = json.loads(text)
    return ItemPool(np.asarray(payload["features"], dtype=float), payload.get("true_scores"))


def validate_pool_finite(pool: ItemPool) -> None:
    if not np.all(np.isfinite(pool.features)):
        raise ValidationError("feature matrix contains non-finite values")
