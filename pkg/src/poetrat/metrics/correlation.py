"""Pearson, Spearman and Kendall tau-b for judge/human agreement."""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..errors import DegenerateInput, LengthMismatch


def _check(xs, ys) -> tuple[list[float], list[float]]:
    xs, ys = [float(x) for x in xs], [float(y) for y in ys]
    if len(xs) != len(ys):
        raise LengthMismatch(f"{len(xs)} vs {len(ys)} values")
    if len(xs) < 2:
        raise DegenerateInput(f"need at least 2 paired values, got {len(xs)}")
    return xs, ys


def pearson(xs, ys) -> float:
    xs, ys = _check(xs, ys)
    n = len(xs)
    mx, my = math.fsum(xs) / n, math.fsum(ys) / n
    dx = [x - mx for x in xs]
    dy = [y - my for y in ys]
    sxx = math.fsum(d * d for d in dx)
    syy = math.fsum(d * d for d in dy)
    if sxx == 0 or syy == 0:
        raise DegenerateInput("zero variance")
    r = math.fsum(a * b for a, b in zip(dx, dy)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def average_ranks(values) -> list[float]:
    """1-based ranks; tied values share the mean of the ranks they span."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mean_rank = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = mean_rank
        i = j + 1
    return ranks


def spearman(xs, ys) -> float:
    xs, ys = _check(xs, ys)
    return pearson(average_ranks(xs), average_ranks(ys))


def kendall(xs, ys) -> float:
    """Tau-b by enumerating every pair. Fine for meta-evaluation sizes."""
    xs, ys = _check(xs, ys)
    n = len(xs)
    concordant = discordant = ties_x = ties_y = 0
    for i in range(n):
        for j in range(i + 1, n):
            sx = (xs[i] > xs[j]) - (xs[i] < xs[j])
            sy = (ys[i] > ys[j]) - (ys[i] < ys[j])
            if sx == 0 and sy == 0:
                continue
            if sx == 0:
                ties_x += 1
            elif sy == 0:
                ties_y += 1
            elif sx == sy:
                concordant += 1
            else:
                discordant += 1
    denom = math.sqrt((concordant + discordant + ties_x) * (concordant + discordant + ties_y))
    if denom == 0:
        raise DegenerateInput("all pairs tied")
    return (concordant - discordant) / denom


@dataclass(frozen=True)
class CorrelationReport:
    pearson_r: float | None
    spearman_rho: float | None
    kendall_tau: float | None
    n: int

    def to_dict(self) -> dict:
        return {"pearson_r": self.pearson_r, "spearman_rho": self.spearman_rho,
                "kendall_tau": self.kendall_tau, "n": self.n}


def correlate(xs, ys) -> CorrelationReport:
    """All three coefficients; a degenerate input gives ``None`` rather than 0."""
    xs, ys = _check(xs, ys)
    values = []
    for fn in (pearson, spearman, kendall):
        try:
            values.append(fn(xs, ys))
        except DegenerateInput:
            values.append(None)
    return CorrelationReport(*values, n=len(xs))
