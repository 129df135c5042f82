"""Domain types for departing bandits and the 2x2 normalization."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

# Prior must sum to one within this slack.
PRIOR_TOL = 1e-12
# Every comparison between exact policy values uses this tolerance.
VALUE_TOL = 1e-12


class InstanceError(ValueError):
    """Raised when an instance violates the model's constraints."""


def _as_tuple_matrix(rows: Sequence[Sequence[float]]) -> tuple[tuple[float, ...], ...]:
    return tuple(tuple(float(v) for v in row) for row in rows)


@dataclass(frozen=True)
class Instance:
    """A departing-bandits problem <M, K, q, P, L, epsilon>.

    ``click_probs[a][x]`` is the click probability of category ``a`` for
    user type ``x`` (both zero-based here; one-based in output labels).
    ``depart_probs`` has the same layout and gives the chance of leaving
    after a no-click.
    """

    num_types: int
    num_categories: int
    prior: tuple[float, ...]
    click_probs: tuple[tuple[float, ...], ...]
    depart_probs: tuple[tuple[float, ...], ...]
    epsilon: float

    @property
    def P(self) -> np.ndarray:
        return np.array(self.click_probs, dtype=float)

    @property
    def L(self) -> np.ndarray:
        return np.array(self.depart_probs, dtype=float)

    @property
    def q(self) -> np.ndarray:
        return np.array(self.prior, dtype=float)

    @property
    def always_departs(self) -> bool:
        """True when every no-click ends the episode (all L == 1)."""
        return all(v == 1.0 for row in self.depart_probs for v in row)

    def to_dict(self) -> dict[str, Any]:
        return {
            "M": self.num_types,
            "K": self.num_categories,
            "q": list(self.prior),
            "P": [list(r) for r in self.click_probs],
            "L": [list(r) for r in self.depart_probs],
            "epsilon": self.epsilon,
        }

    def with_prior(self, prior: Sequence[float]) -> Instance:
        return validate_instance({**self.to_dict(), "q": list(prior)})


def validate_instance(raw: dict[str, Any] | Instance) -> Instance:
    """Check an instance-shaped record and return a frozen :class:`Instance`.

    ``raw`` uses the file schema keys (``M``, ``K``, ``q``, ``P``, ``L``,
    ``epsilon``). ``L`` defaults to all ones and ``epsilon`` to ``1 - max P``.
    """
    if isinstance(raw, Instance):
        raw = raw.to_dict()
    try:
        P = np.asarray(raw["P"], dtype=float)
        q = np.asarray(raw["q"], dtype=float)
    except KeyError as exc:
        raise InstanceError(f"missing field {exc.args[0]!r}") from None
    if P.ndim != 2:
        raise InstanceError("P must be a K x M matrix")
    K = int(raw.get("K", P.shape[0]))
    M = int(raw.get("M", P.shape[1]))
    if K < 1 or M < 1:
        raise InstanceError("M and K must be positive")
    if P.shape != (K, M):
        raise InstanceError(f"P has shape {P.shape}, expected ({K}, {M})")
    L = np.asarray(raw["L"], dtype=float) if raw.get("L") is not None else np.ones((K, M))
    if L.shape != (K, M):
        raise InstanceError(f"L has shape {L.shape}, expected ({K}, {M})")
    if q.shape != (M,):
        raise InstanceError(f"q has length {q.size}, expected {M}")

    if np.any(q < 0) or abs(q.sum() - 1.0) > PRIOR_TOL:
        raise InstanceError(f"prior is not a probability vector: sums to {q.sum():.12g}")
    if np.any(~np.isfinite(P)) or np.any(P <= 0) or np.any(P >= 1):
        raise InstanceError("click probabilities must lie in (0, 1)")
    if np.any(~np.isfinite(L)) or np.any(L <= 0) or np.any(L > 1):
        raise InstanceError("departure probabilities must lie in (0, 1]")

    eps = raw.get("epsilon")
    eps = 1.0 - float(P.max()) if eps is None else float(eps)
    if not 0.0 < eps < 1.0:
        raise InstanceError(f"epsilon must lie in (0, 1), got {eps}")
    # 1 - eps is computed, so allow rounding slack
    if P.max() > 1.0 - eps + PRIOR_TOL:
        raise InstanceError(f"max click probability {P.max()} exceeds 1 - epsilon = {1.0 - eps}")

    return Instance(
        num_types=M,
        num_categories=K,
        prior=tuple(float(v) for v in q),
        click_probs=_as_tuple_matrix(P),
        depart_probs=_as_tuple_matrix(L),
        epsilon=eps,
    )


def load_instance(path: str | Path) -> Instance:
    with open(path, encoding="utf-8") as fh:
        return validate_instance(json.load(fh))


def save_instance(instance: Instance, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(instance.to_dict(), fh, indent=2)
        fh.write("\n")


TABLE1 = validate_instance(
    {"M": 2, "K": 2, "q": [0.4, 0.6], "P": [[0.5, 0.28], [0.4, 0.39]], "epsilon": 0.5}
)


@dataclass(frozen=True)
class Policy:
    """Open-loop recommendation schedule: ``prefix`` then ``tail`` forever.

    Categories are one-based, as in the model's notation.
    """

    prefix: tuple[int, ...]
    tail: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "prefix", tuple(int(a) for a in self.prefix))
        if self.tail < 1 or any(a < 1 for a in self.prefix):
            raise ValueError("categories are one-based and positive")

    @classmethod
    def fixed(cls, category: int) -> Policy:
        return cls((), category)

    @classmethod
    def threshold(cls, first: int, h: int) -> Policy:
        """(first, h)-threshold policy over two categories."""
        if first not in (1, 2) or h < 0:
            raise ValueError(f"bad threshold policy ({first},{h})")
        return cls((first,) * h, 3 - first)

    @classmethod
    def parse(cls, text: str) -> Policy:
        """Parse ``pi2``, ``(2,6)`` (threshold) or ``2221|1`` (prefix|tail)."""
        t = text.strip().replace(" ", "")
        try:
            if t.startswith("pi"):
                return cls.fixed(int(t[2:]))
            if t.startswith("("):
                a, h = t.strip("()").split(",")
                return cls.threshold(int(a), int(h))
            if "|" in t:
                head, tail = t.split("|")
                return cls(tuple(int(c) for c in head.replace(",", "") if c), int(tail))
            return cls.fixed(int(t))
        except ValueError:
            raise ValueError(f"cannot parse policy {text!r}") from None

    def action(self, j: int) -> int:
        """Category recommended at iteration ``j`` (one-based)."""
        return self.prefix[j - 1] if j <= len(self.prefix) else self.tail

    def actions(self, n: int) -> list[int]:
        return [self.action(j) for j in range(1, n + 1)]

    def normal_form(self) -> Policy:
        prefix = list(self.prefix)
        while prefix and prefix[-1] == self.tail:
            prefix.pop()
        return Policy(tuple(prefix), self.tail)

    def max_category(self) -> int:
        return max((self.tail, *self.prefix))

    def as_threshold(self) -> tuple[int, int] | None:
        """Return ``(a, h)`` if this is a two-category threshold policy."""
        nf = self.normal_form()
        if self.max_category() > 2:
            return None
        if not nf.prefix:
            return (3 - nf.tail, 0)
        first = nf.prefix[0]
        if first != 3 - nf.tail or any(a != first for a in nf.prefix):
            return None
        return (first, len(nf.prefix))

    @property
    def label(self) -> str:
        nf = self.normal_form()
        if not nf.prefix:
            return f"pi{nf.tail}"
        thr = nf.as_threshold()
        if thr is not None:
            return f"({thr[0]},{thr[1]})"
        return "".join(str(a) for a in nf.prefix) + f"|{nf.tail}"

    def relabel(self, mapping: dict[int, int]) -> Policy:
        return Policy(tuple(mapping[a] for a in self.prefix), mapping[self.tail])


class Structure(enum.Enum):
    DOMINANT_ROW = "DominantRow"
    DOMINANT_COLUMN = "DominantColumn"
    DOMINANT_DIAGONAL = "DominantDiagonal"


_STRUCTURE_ORDER = [Structure.DOMINANT_ROW, Structure.DOMINANT_COLUMN, Structure.DOMINANT_DIAGONAL]


@dataclass(frozen=True)
class StructureClass:
    """Classification of a normalized 2x2 click matrix plus the swaps used."""

    variant: Structure
    swap_rows: bool = False
    swap_cols: bool = False

    @property
    def category_map(self) -> dict[int, int]:
        """Normalized category -> original category."""
        return {1: 2, 2: 1} if self.swap_rows else {1: 1, 2: 2}

    @property
    def type_map(self) -> dict[int, int]:
        return {1: 2, 2: 1} if self.swap_cols else {1: 1, 2: 2}


def classify_normalized(P: Sequence[Sequence[float]]) -> Structure:
    """Classify a 2x2 matrix whose maximum sits at (category 1, type x).

    Exact comparisons; rows are categories, columns are types.
    """
    (p1x, p1y), (p2x, p2y) = P
    if p1y >= p2y:
        return Structure.DOMINANT_ROW
    if p2x >= p2y:
        return Structure.DOMINANT_COLUMN
    return Structure.DOMINANT_DIAGONAL


def permute_2x2(instance: Instance, swap_rows: bool, swap_cols: bool) -> Instance:
    """Swap categories and/or types of a 2x2 instance (an involution)."""
    P, L, q = instance.P, instance.L, instance.q
    if swap_rows:
        P, L = P[::-1], L[::-1]
    if swap_cols:
        P, L, q = P[:, ::-1], L[:, ::-1], q[::-1]
    return Instance(
        num_types=2,
        num_categories=2,
        prior=tuple(float(v) for v in q),
        click_probs=_as_tuple_matrix(P),
        depart_probs=_as_tuple_matrix(L),
        epsilon=instance.epsilon,
    )


def normalize_2x2(instance: Instance) -> tuple[Instance, StructureClass]:
    """Permute rows/columns so the largest click probability is at (1, x).

    When several permutations qualify (ties for the maximum), the one whose
    class comes first in DominantRow < DominantColumn < DominantDiagonal
    wins, then the one with fewer swaps.
    """
    if instance.num_types != 2 or instance.num_categories != 2:
        raise InstanceError("normalize_2x2 needs M = K = 2")
    pmax = max(max(r) for r in instance.click_probs)
    best: tuple[int, int, Instance, StructureClass] | None = None
    for swap_rows in (False, True):
        for swap_cols in (False, True):
            cand = permute_2x2(instance, swap_rows, swap_cols)
            if cand.click_probs[0][0] != pmax:
                continue
            variant = classify_normalized(cand.click_probs)
            key = (_STRUCTURE_ORDER.index(variant), swap_rows + swap_cols)
            if best is None or key < best[:2]:
                best = (*key, cand, StructureClass(variant, swap_rows, swap_cols))
    assert best is not None
    return best[2], best[3]


def classify_structure(instance: Instance) -> Structure:
    return normalize_2x2(instance)[1].variant


def denormalize_policy(policy: Policy, structure: StructureClass) -> Policy:
    """Map a policy over normalized categories back to the original labels."""
    return policy.relabel(structure.category_map)


@dataclass(frozen=True)
class EpisodeResult:
    """Outcome for one user: clicks collected and recommendations made."""

    return_clicks: int
    length: int

    def __post_init__(self) -> None:
        if self.length < 1 or not 0 <= self.return_clicks <= self.length:
            raise ValueError(f"inconsistent episode result {self}")


@dataclass(frozen=True)
class PlanResult:
    """A chosen policy, its exact value and the candidates compared."""

    policy: Policy
    value: float
    structure: StructureClass | None = None
    candidates: dict[str, float] = field(default_factory=dict)
