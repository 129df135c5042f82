"""Finite-horizon planning for two categories and any number of types.

With immediate departure on no-click, the truncated return of an action
sequence depends only on how many times each category has been played by
each step. ``best[h][c1]`` is the largest truncated return over sequences
of length h that played category 1 exactly c1 times; each step extends a
shorter sequence by one category and adds

    alpha(c1, c2) = sum_x q_x * P[1, x]**c1 * P[2, x]**c2.

The table has H (H + 3) / 2 cells.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Instance, InstanceError, Policy


@dataclass(frozen=True)
class DpPlan:
    actions: tuple[int, ...]
    value: float
    cells: int

    def as_policy(self) -> Policy:
        """Plan followed by its last action forever."""
        return Policy(self.actions[:-1], self.actions[-1])


def _alpha_table(instance: Instance, H: int, prior: np.ndarray) -> np.ndarray:
    """alpha[c1, c2] for 0 <= c1, c2 <= H."""
    P = instance.P
    c = np.arange(H + 1, dtype=float)
    # pow1[c1, x] = P[0, x]**c1, pow2[c2, x] = P[1, x]**c2
    pow1 = P[0][None, :] ** c[:, None]
    pow2 = P[1][None, :] ** c[:, None]
    return np.einsum("x,ix,jx->ij", prior, pow1, pow2)


def _check(instance: Instance, H: int) -> None:
    if instance.num_categories != 2:
        raise InstanceError("dp planner needs K = 2")
    if not instance.always_departs:
        raise InstanceError("dp planner needs all L = 1")
    if H < 1:
        raise ValueError("horizon must be at least 1")


def _forward(instance: Instance, H: int, prior):
    """Yield (h, row, took1) for h = 1..H; row[c1] is the best value."""
    q = instance.q if prior is None else np.asarray(prior, dtype=float)
    alpha = _alpha_table(instance, H, q)
    prev = np.zeros(1)
    for h in range(1, H + 1):
        c1 = np.arange(h + 1)
        from1 = np.full(h + 1, -np.inf)
        from2 = np.full(h + 1, -np.inf)
        from1[1:] = prev  # parent (c1 - 1, c2)
        from2[:-1] = prev  # parent (c1, c2 - 1)
        took1 = from1 >= from2
        prev = np.where(took1, from1, from2) + alpha[c1, h - c1]
        yield h, prev, took1


def dp_plan(instance: Instance, H: int, prior=None) -> DpPlan:
    """Best length-H action sequence for the truncated return.

    Ties prefer category 1, both inside a cell and in the final row.
    """
    _check(instance, H)
    back = [np.zeros(1, dtype=bool)]
    cells = 0
    for h, row, took1 in _forward(instance, H, prior):
        back.append(took1)
        cells += h + 1

    c1 = H - int(np.argmax(row[::-1]))
    value = float(row[c1])
    actions = []
    for h in range(H, 0, -1):
        if back[h][c1]:
            actions.append(1)
            c1 -= 1
        else:
            actions.append(2)
    return DpPlan(tuple(reversed(actions)), value, cells)


def dp_value_curve(instance: Instance, H_max: int, prior=None) -> list[tuple[int, float]]:
    """Optimal truncated value for every horizon 1..H_max, in one pass."""
    _check(instance, H_max)
    return [(h, float(row.max())) for h, row, _ in _forward(instance, H_max, prior)]
