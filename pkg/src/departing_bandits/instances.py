"""Random and ratings-based problem instances.

The ratings route turns a MovieLens-style dataset into an instance: a user
who rated a movie ``r`` (normalized to [0, 1]) is taken to click it with
probability ``1 - r``. Users are grouped into types by clustering their
per-category click vectors.
"""

from __future__ import annotations

import csv
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import EpisodeResult, Instance, Policy, Structure, classify_structure, validate_instance
from .environment import RngStream

log = logging.getLogger(__name__)

DEFAULT_MARGIN = 0.01
REJECTION_BUDGET = 10**5

_STRUCTURE_ALIASES = {
    "dr": Structure.DOMINANT_ROW,
    "dc": Structure.DOMINANT_COLUMN,
    "dd": Structure.DOMINANT_DIAGONAL,
}


def parse_structure(name: str | Structure) -> Structure:
    if isinstance(name, Structure):
        return name
    key = name.lower()
    if key in _STRUCTURE_ALIASES:
        return _STRUCTURE_ALIASES[key]
    for s in Structure:
        if s.value.lower() == key:
            return s
    raise ValueError(f"unknown structure {name!r}")


def random_instance(
    K: int,
    M: int,
    epsilon: float,
    rng: np.random.Generator | int | None = None,
    target_structure: Structure | str | None = None,
    margin: float = DEFAULT_MARGIN,
    departing: bool = False,
) -> Instance:
    """Draw P uniformly in (margin, 1 - eps], q uniformly on the simplex.

    L is all ones unless ``departing`` is set, in which case it is uniform
    in (margin, 1]. With ``target_structure`` (2x2 only) draws are rejected
    until the click matrix has that structure.
    """
    if K < 1 or M < 1:
        raise ValueError("K and M must be positive")
    if not margin < 1 - epsilon:
        raise ValueError("margin leaves no room below 1 - epsilon")
    rng = np.random.default_rng(rng)
    target = parse_structure(target_structure) if target_structure is not None else None
    if target is not None and (K, M) != (2, 2):
        raise ValueError("target_structure needs K = M = 2")

    for _ in range(REJECTION_BUDGET):
        # 1 - uniform[0, 1) lands in (0, 1], giving the half-open ranges above
        P = margin + (1 - epsilon - margin) * (1.0 - rng.random((K, M)))
        L = margin + (1 - margin) * (1.0 - rng.random((K, M))) if departing else np.ones((K, M))
        q = rng.dirichlet(np.ones(M)) if M > 1 else np.ones(1)
        q = q / q.sum()
        inst = validate_instance({"M": M, "K": K, "q": q.tolist(), "P": P.tolist(),
                                  "L": L.tolist(), "epsilon": epsilon})
        if target is None or classify_structure(inst) is target:
            return inst
    raise RuntimeError(f"no {target} instance within {REJECTION_BUDGET} draws")


# -- ratings data ---------------------------------------------------------------

@dataclass(frozen=True)
class RatingRecord:
    user: int
    item: int
    rating: float
    category: str


@dataclass
class RatingsTable:
    records: list[RatingRecord]
    scale_min: float = 0.5
    scale_max: float = 5.0
    skipped_items: int = 0
    malformed: list[tuple[str, int, str]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def categories(self) -> set[str]:
        return {r.category for r in self.records}


def _read_rows(path: Path, header: Sequence[str]):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None:
            return
        if [c.strip() for c in first[: len(header)]] != list(header):
            raise ValueError(f"{path}: expected header {','.join(header)}")
        for row in reader:
            yield reader.line_num, row


def load_ratings(
    ratings_path: str | Path,
    items_path: str | Path,
    categories: Sequence[str] | None = None,
    scale: tuple[float, float] = (0.5, 5.0),
    genre_sep: str = "|",
) -> RatingsTable:
    """Join ratings with item genres; one record per (rating, selected genre).

    Malformed rows are skipped and listed in ``table.malformed`` as
    ``(file, line, reason)``. Items without any selected genre are dropped
    and counted in ``skipped_items``.
    """
    ratings_path, items_path = Path(ratings_path), Path(items_path)
    table = RatingsTable([], scale_min=scale[0], scale_max=scale[1])
    selected = set(categories) if categories is not None else None

    genres: dict[int, list[str]] = {}
    for line, row in _read_rows(items_path, ("movieId", "title", "genres")):
        if len(row) < 3:
            table.malformed.append((str(items_path), line, "too few fields"))
            continue
        try:
            item = int(row[0])
        except ValueError as exc:
            table.malformed.append((str(items_path), line, str(exc)))
            continue
        labels = [g.strip() for g in row[-1].split(genre_sep) if g.strip()]
        genres[item] = [g for g in labels if selected is None or g in selected]

    skipped: set[int] = set()
    for line, row in _read_rows(ratings_path, ("userId", "movieId", "rating")):
        try:
            user, item, rating = int(row[0]), int(row[1]), float(row[2])
        except (ValueError, IndexError) as exc:
            table.malformed.append((str(ratings_path), line, str(exc)))
            continue
        if not scale[0] <= rating <= scale[1]:
            table.malformed.append((str(ratings_path), line, f"rating {rating} outside scale"))
            continue
        if item not in genres:
            table.malformed.append((str(ratings_path), line, f"unknown movieId {item}"))
            continue
        if not genres[item]:
            skipped.add(item)
            continue
        for g in genres[item]:
            table.records.append(RatingRecord(user, item, rating, g))
    table.skipped_items = len(skipped)
    if table.malformed:
        log.warning("skipped %d malformed rows", len(table.malformed))
    return table


def retained_users(table: RatingsTable, categories: Sequence[str]) -> list[int]:
    """Users with at least one rating in every selected category."""
    seen: dict[int, set[str]] = defaultdict(set)
    for r in table.records:
        seen[r.user].add(r.category)
    need = set(categories)
    return sorted(u for u, cats in seen.items() if need <= cats)


def click_vectors(
    table: RatingsTable, categories: Sequence[str], epsilon: float, margin: float = DEFAULT_MARGIN
) -> tuple[list[int], np.ndarray]:
    """Per retained user, the clamped click probability 1 - mean(r) per category."""
    users = retained_users(table, categories)
    index = {u: i for i, u in enumerate(users)}
    col = {c: k for k, c in enumerate(categories)}
    sums = np.zeros((len(users), len(categories)))
    counts = np.zeros_like(sums)
    for r in table.records:
        if r.user in index and r.category in col:
            sums[index[r.user], col[r.category]] += r.rating / table.scale_max
            counts[index[r.user], col[r.category]] += 1
    clicks = 1.0 - sums / np.maximum(counts, 1)
    return users, np.clip(clicks, margin, 1.0 - epsilon)


def kmeans(X: np.ndarray, k: int, rng: np.random.Generator, max_iter: int = 100, restarts: int = 10):
    """Lloyd's algorithm with random initial centres; reseeds on empty clusters."""
    for _ in range(restarts):
        centres = X[rng.choice(len(X), size=k, replace=False)]
        labels = np.full(len(X), -1)
        for _ in range(max_iter):
            d = ((X[:, None, :] - centres[None, :, :]) ** 2).sum(axis=2)
            new = d.argmin(axis=1)
            if np.array_equal(new, labels):
                break
            labels = new
            if np.bincount(labels, minlength=k).min() == 0:
                break
            centres = np.stack([X[labels == c].mean(axis=0) for c in range(k)])
        if np.bincount(labels, minlength=k).min() > 0:
            return labels, centres
    raise RuntimeError(f"k-means left an empty cluster after {restarts} restarts")


def build_semi_synthetic(
    table: RatingsTable,
    categories: Sequence[str],
    M: int,
    rng: np.random.Generator | int | None = None,
    epsilon: float = 0.1,
    margin: float = DEFAULT_MARGIN,
) -> Instance:
    """Instance whose types are clusters of users with similar click vectors.

    P[a, x] is the mean click probability of cluster x on category a and
    q[x] the cluster's share of users; every no-click ends the episode.
    """
    if len(categories) < 2 or M < 1:
        raise ValueError("need at least two categories and one type")
    rng = np.random.default_rng(rng)
    users, X = click_vectors(table, categories, epsilon, margin)
    if len(users) < 10 * M:
        raise ValueError(f"only {len(users)} retained users; need at least {10 * M}")
    if M == 1:
        labels, centres = np.zeros(len(users), dtype=int), X.mean(axis=0, keepdims=True)
    else:
        labels, centres = kmeans(X, M, rng)
    counts = np.bincount(labels, minlength=M)
    # order types by size (largest first) so output does not depend on init order
    order = np.argsort(-counts, kind="stable")
    q = counts[order] / counts.sum()
    P = np.clip(centres[order].T, margin, 1.0 - epsilon)
    K = len(categories)
    return validate_instance({"M": M, "K": K, "q": q.tolist(), "P": P.tolist(),
                              "L": np.ones((K, M)).tolist(), "epsilon": epsilon})


class RatingsSimulator:
    """Episodes driven by real users: each recommendation of category ``a``
    shows a random movie the user rated in ``a`` and clicks with prob. 1 - r.
    """

    def __init__(self, table: RatingsTable, categories: Sequence[str]) -> None:
        self.categories = list(categories)
        users = retained_users(table, categories)
        col = {c: k for k, c in enumerate(self.categories)}
        keep = set(users)
        per: dict[int, list[list[float]]] = {u: [[] for _ in categories] for u in users}
        for r in table.records:
            if r.user in keep and r.category in col:
                per[r.user][col[r.category]].append(r.rating / table.scale_max)
        self.users = users
        self.ratings = [[np.array(v) for v in per[u]] for u in users]

    def run_episode(self, policy: Policy, rng: RngStream, max_length: int = 10**7) -> EpisodeResult:
        """Draw order: user, then per iteration (movie, click)."""
        draw = rng.cursor()
        ratings = self.ratings[min(int(draw() * len(self.users)), len(self.users) - 1)]
        clicks = 0
        for j in range(1, max_length + 1):
            pool = ratings[policy.action(j) - 1]
            r = pool[min(int(draw() * pool.size), pool.size - 1)]
            if draw() < 1.0 - r:
                clicks += 1
            else:
                return EpisodeResult(clicks, j)
        raise RuntimeError(f"episode exceeded {max_length} iterations")
