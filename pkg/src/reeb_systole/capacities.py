"""Closed-form Hutchings capacities of balls and round disk cotangent bundles."""
from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class CapacityValue:
    k: int
    value: float
    domain_tag: str
    witness: int | tuple[int, int]

    def to_dict(self) -> dict:
        w = list(self.witness) if isinstance(self.witness, tuple) else self.witness
        return {"k": self.k, "value": self.value, "domain": self.domain_tag, "witness": w}


def ball_degree(k: int) -> int:
    """The unique d >= 0 with d^2 + d <= 2k <= d^2 + 3d."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    d = 0
    while not (d * d + d <= 2 * k <= d * d + 3 * d):
        d += 1
    return d


def ck_ball(k: int, a: float) -> CapacityValue:
    """c_k of the ball B(a) = {pi |x|^2 <= a} in R^4."""
    if a <= 0:
        raise ValueError("ball capacity a must be positive")
    d = ball_degree(k)
    return CapacityValue(k, d * a, "ball", d)


def disk_lattice_witness(k: int) -> tuple[int, int]:
    """Minimize m + n over (m+1)(n+1) >= k+1, m, n >= 0.

    Ties are broken towards the larger m; (k, 0) is always admissible, so the
    search never needs m or n beyond k.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    best = (k, 0)
    for m in range(k + 1):
        n = max(0, -(-(k + 1) // (m + 1)) - 1)
        if m + n < best[0] + best[1] or (m + n == sum(best) and m > best[0]):
            best = (m, n)
    return best


def ck_round_disk(k: int, R: float = 1.0) -> CapacityValue:
    """c_k of the radius-R disk cotangent bundle of the round 2-sphere."""
    if R <= 0:
        raise ValueError("radius must be positive")
    m, n = disk_lattice_witness(k)
    return CapacityValue(k, R * 2.0 * math.pi * (m + n), "round_disk_bundle", (m, n))


def c1_interval(balance) -> tuple[float, float]:
    """Bracket [2 pi r, 2 pi R] on c_1 of the domain bounded by the cosphere bundle.

    The upper end is the bound on the minimal Reeb action.
    """
    r, R = balance.inradius, balance.circumradius
    if r <= 0 or R <= 0:
        raise ValueError("radii must be positive")
    if r > R:
        raise ValueError("inradius exceeds circumradius")
    return 2.0 * math.pi * r, 2.0 * math.pi * R
