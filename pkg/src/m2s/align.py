"""Time alignment of embedding sequences.

``dtw_full`` is the exact dynamic-programming aligner over the step set
{(1,0), (0,1), (1,1)} with both endpoints pinned; ``fastdtw`` is the
multilevel coarsen-project-refine approximation whose cost is never below
the exact optimum and matches it once the refinement radius covers the
longer sequence. ``warp_to_target`` resamples a source sequence onto the
target timeline along an alignment path.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .encode import EmbeddingSequence
from .errors import ValidationError

STEPS = ((1, 0), (0, 1), (1, 1))

MetricFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass
class AlignmentPath:
    """Monotone index-pair path with its total and per-pair costs."""

    pairs: np.ndarray
    cost: float
    pair_costs: np.ndarray

    def __post_init__(self) -> None:
        self.pairs = np.asarray(self.pairs, dtype=np.int64)
        self.pair_costs = np.asarray(self.pair_costs, dtype=np.float64)
        if self.pairs.ndim != 2 or self.pairs.shape[1] != 2 or self.pairs.shape[0] < 1:
            raise ValidationError("path must be a nonempty list of (i, j) pairs")
        if self.pair_costs.shape[0] != self.pairs.shape[0]:
            raise ValidationError("pair_costs length must match the path length")
        if self.cost < 0:
            raise ValidationError("path cost must be nonnegative")

    def __len__(self) -> int:
        return self.pairs.shape[0]

    def validate(self, source_len: int, target_len: int) -> None:
        """Check boundary, step-set, and monotonicity invariants."""
        if tuple(self.pairs[0]) != (0, 0):
            raise ValidationError(f"path must start at (0, 0), got {tuple(self.pairs[0])}")
        if tuple(self.pairs[-1]) != (source_len - 1, target_len - 1):
            raise ValidationError(
                f"path must end at ({source_len - 1}, {target_len - 1}), got {tuple(self.pairs[-1])}"
            )
        deltas = np.diff(self.pairs, axis=0)
        for di, dj in deltas:
            if (di, dj) not in STEPS:
                raise ValidationError(f"illegal path step ({di}, {dj})")


def _as_matrix(seq: EmbeddingSequence | np.ndarray) -> np.ndarray:
    if isinstance(seq, EmbeddingSequence):
        return np.asarray(seq.frames, dtype=np.float64)
    arr = np.asarray(seq, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    return arr


def _euclidean_rows(a_frame: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = b - a_frame[None, :]
    return np.sqrt(np.sum(diff * diff, axis=1))


def _cosine_rows(a_frame: np.ndarray, b: np.ndarray) -> np.ndarray:
    na = np.sqrt(np.dot(a_frame, a_frame))
    nb = np.sqrt(np.sum(b * b, axis=1))
    dots = b @ a_frame
    out = np.ones(b.shape[0], dtype=np.float64)
    both = (na > 0) & (nb > 0)
    out[both] = 1.0 - dots[both] / (na * nb[both])
    if na == 0:
        out[nb == 0] = 0.0
    return out


_METRICS: dict[str, MetricFn] = {
    "euclidean": _euclidean_rows,
    "cosine": _cosine_rows,
}


def _resolve_metric(distance: str | MetricFn) -> MetricFn:
    if callable(distance):
        return distance
    try:
        return _METRICS[distance]
    except KeyError:
        raise ValidationError(
            f"unknown distance {distance!r}; expected one of {sorted(_METRICS)}"
        ) from None


def _check_inputs(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ValidationError("cannot align an empty sequence")
    if a.shape[1] != b.shape[1]:
        raise ValidationError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")


def _dtw_window(
    a: np.ndarray,
    b: np.ndarray,
    metric: MetricFn,
    lo: np.ndarray,
    hi: np.ndarray,
) -> AlignmentPath:
    """Exact DP restricted to per-row column windows [lo[i], hi[i]]."""
    n, m = a.shape[0], b.shape[0]
    local = np.full((n, m), np.inf)
    for i in range(n):
        local[i, lo[i] : hi[i] + 1] = metric(a[i], b[lo[i] : hi[i] + 1])
    acc = np.full((n, m), np.inf)
    acc[0, 0] = local[0, 0]
    for i in range(n):
        row = acc[i]
        prev = acc[i - 1] if i > 0 else None
        for j in range(lo[i], hi[i] + 1):
            if i == 0 and j == 0:
                continue
            best = np.inf
            if prev is not None:
                if j > 0 and prev[j - 1] < best:
                    best = prev[j - 1]
                if prev[j] < best:
                    best = prev[j]
            if j > 0 and row[j - 1] < best:
                best = row[j - 1]
            row[j] = local[i, j] + best
    if not np.isfinite(acc[n - 1, m - 1]):
        raise ValidationError("alignment window admits no path")

    # backtrack; on ties prefer the diagonal, then (i-1, j), then (i, j-1)
    pairs = [(n - 1, m - 1)]
    i, j = n - 1, m - 1
    while (i, j) != (0, 0):
        candidates = []
        if i > 0 and j > 0:
            candidates.append((acc[i - 1, j - 1], (i - 1, j - 1)))
        if i > 0:
            candidates.append((acc[i - 1, j], (i - 1, j)))
        if j > 0:
            candidates.append((acc[i, j - 1], (i, j - 1)))
        _, (i, j) = min(candidates, key=lambda c: c[0])
        pairs.append((i, j))
    pairs.reverse()
    pair_idx = np.asarray(pairs, dtype=np.int64)
    pair_costs = local[pair_idx[:, 0], pair_idx[:, 1]]
    return AlignmentPath(pairs=pair_idx, cost=float(acc[n - 1, m - 1]), pair_costs=pair_costs)


def dtw_full(
    a: EmbeddingSequence | np.ndarray,
    b: EmbeddingSequence | np.ndarray,
    distance: str | MetricFn = "euclidean",
) -> AlignmentPath:
    """Globally optimal alignment; cost is the sum of per-pair frame
    distances along the path, including the pinned (0, 0) pair."""
    am, bm = _as_matrix(a), _as_matrix(b)
    _check_inputs(am, bm)
    metric = _resolve_metric(distance)
    lo = np.zeros(am.shape[0], dtype=np.int64)
    hi = np.full(am.shape[0], bm.shape[0] - 1, dtype=np.int64)
    return _dtw_window(am, bm, metric, lo, hi)


def _halve(x: np.ndarray) -> np.ndarray:
    n = x.shape[0]
    even = x[: 2 * (n // 2)].reshape(n // 2, 2, -1).mean(axis=1)
    if n % 2:
        return np.concatenate([even, x[-1:]], axis=0)
    return even


def _project_window(
    low_path: np.ndarray, n: int, m: int, radius: int
) -> tuple[np.ndarray, np.ndarray]:
    lo = np.full(n, m, dtype=np.int64)
    hi = np.full(n, -1, dtype=np.int64)
    for pi, pj in low_path:
        row_lo = max(0, 2 * pi - radius)
        row_hi = min(n - 1, 2 * pi + 1 + radius)
        col_lo = max(0, 2 * pj - radius)
        col_hi = min(m - 1, 2 * pj + 1 + radius)
        lo[row_lo : row_hi + 1] = np.minimum(lo[row_lo : row_hi + 1], col_lo)
        hi[row_lo : row_hi + 1] = np.maximum(hi[row_lo : row_hi + 1], col_hi)
    lo[0] = 0
    hi[-1] = m - 1
    return lo, hi


def _fastdtw(a: np.ndarray, b: np.ndarray, radius: int, metric: MetricFn) -> AlignmentPath:
    n, m = a.shape[0], b.shape[0]
    if min(n, m) <= radius + 2:
        lo = np.zeros(n, dtype=np.int64)
        hi = np.full(n, m - 1, dtype=np.int64)
        return _dtw_window(a, b, metric, lo, hi)
    low_path = _fastdtw(_halve(a), _halve(b), radius, metric)
    lo, hi = _project_window(low_path.pairs, n, m, radius)
    return _dtw_window(a, b, metric, lo, hi)


def fastdtw(
    a: EmbeddingSequence | np.ndarray,
    b: EmbeddingSequence | np.ndarray,
    radius: int = 1,
    distance: str | MetricFn = "euclidean",
) -> AlignmentPath:
    """Multilevel approximate alignment.

    Coarsens both sequences by averaging adjacent frame pairs, aligns the
    half-resolution pair recursively, projects that path back up, and
    refines with exact DP inside a window ``radius`` cells wide around the
    projection. Sequences no longer than radius + 2 are aligned exactly.
    The returned cost is an upper bound on ``dtw_full``'s.
    """
    if radius < 0:
        raise ValidationError("radius must be nonnegative")
    am, bm = _as_matrix(a), _as_matrix(b)
    _check_inputs(am, bm)
    return _fastdtw(am, bm, radius, _resolve_metric(distance))


def warp_to_target(
    source: EmbeddingSequence,
    path: AlignmentPath,
    target_len: int,
) -> EmbeddingSequence:
    """Resample the source onto the target timeline along an alignment path.

    Output frame j copies the source frame i of the (i, j) path pair; when
    several source frames map to one target frame, the pair with the lowest
    per-pair cost wins, with ties resolved to the lowest source index.
    """
    path.validate(len(source), target_len)
    choice = np.full(target_len, -1, dtype=np.int64)
    best_cost = np.full(target_len, np.inf)
    for (i, j), cost in zip(path.pairs, path.pair_costs):
        if cost < best_cost[j]:
            best_cost[j] = cost
            choice[j] = i
    if np.any(choice < 0):
        raise ValidationError("path does not cover every target frame")
    return EmbeddingSequence(frames=source.frames[choice], frame_rate=source.frame_rate)


def save_path(path_obj: AlignmentPath, path: str | Path) -> None:
    """Debugging dump: one ``i<TAB>j<TAB>pairwise_cost`` line per pair."""
    lines = [
        f"{i}\t{j}\t{cost:.17g}"
        for (i, j), cost in zip(path_obj.pairs, path_obj.pair_costs)
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_path(path: str | Path) -> AlignmentPath:
    pairs = []
    costs = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        i, j, cost = line.split("\t")
        pairs.append((int(i), int(j)))
        costs.append(float(cost))
    costs_arr = np.asarray(costs, dtype=np.float64)
    return AlignmentPath(pairs=np.asarray(pairs), cost=float(costs_arr.sum()), pair_costs=costs_arr)
