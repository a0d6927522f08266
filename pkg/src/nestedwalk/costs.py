"""Closed-form walk-cost expressions and the set-size optimization.

The flat search costs S + (1/sqrt(eps))((1/sqrt(delta))U + C); nesting
replaces the update cost with a full inner search plus the
implementation cost T.  Substituting the collision-walk parameters
yields s1 + s2*sqrt(n/s1) + n/sqrt(s1) + n/sqrt(s2), minimized near
s1 = n^(5/7), s2 = n^(4/7) with total n^(5/7).
"""

from dataclasses import dataclass
from math import sqrt

import numpy as np

GRID_POINTS_PER_DECADE = 64


@dataclass
class CostParams:
    S: float = 0.0
    U: float = 0.0
    C: float = 0.0
    eps: float = 1.0
    delta: float = 1.0
    S_prime: float = 0.0
    U_prime: float = 0.0
    C_prime: float = 0.0
    eps_prime: float = 1.0
    delta_prime: float = 1.0
    T: float = 0.0

    def validate(self):
        for name in ("eps", "delta", "eps_prime", "delta_prime"):
            v = getattr(self, name)
            if not (0.0 < v <= 1.0):
                raise ValueError(f"{name} must lie in (0, 1]")
        return self


def mnrs_cost(p):
    """Flat search cost S + (1/sqrt(eps))((1/sqrt(delta))U + C)."""
    return p.S + (1.0 / sqrt(p.eps)) * ((1.0 / sqrt(p.delta)) * p.U + p.C)


def nested_cost(p):
    """Nested search cost with the inner walk paying for each update."""
    inner = (1.0 / sqrt(p.eps_prime)) * (
        (1.0 / sqrt(p.delta_prime)) * p.U_prime + p.C_prime)
    return p.S + p.S_prime + (1.0 / sqrt(p.eps)) * (
        (1.0 / sqrt(p.delta)) * (inner + p.T) + p.C)


def collision_walk_terms(n, s1, s2, time_mode=False):
    """The four cost terms of the collision-subset walk at sizes (s1, s2).

    setup s1 + s2*sqrt(n/s1); updates n/sqrt(s1); checking n/sqrt(s2);
    reorganization s2*sqrt(n/s1) is folded into the setup term.  Time
    mode adds the per-update structure cost m = s1^2/n inside the update
    budget, which is dominated and does not move the optimum.
    """
    setup = s1 + s2 * sqrt(n / s1)
    update = n / sqrt(s1)
    check = n / sqrt(s2)
    extra = 0.0
    if time_mode:
        m = max(1.0, s1 * s1 / n)
        extra = sqrt(n / s2) * sqrt(s2 / s1) * m  # (1/sqrt(eps*delta)) * T
    return setup, update, check, extra


def collision_walk_cost(n, s1, s2, time_mode=False):
    return sum(collision_walk_terms(n, s1, s2, time_mode))


def collision_walk_envelope(n, s1, s2, time_mode=False):
    """Largest cost term; the natural objective once constants are dropped.

    The sum and the envelope agree within a factor 4, but the envelope's
    minimizer balances setup, update, and checking exactly at
    s1 = n^(5/7), s2 = n^(4/7) for every n, not just asymptotically.
    """
    return max(collision_walk_terms(n, s1, s2, time_mode))


def _log_grid(lo, hi):
    count = max(2, int(round(np.log10(hi / lo) * GRID_POINTS_PER_DECADE)))
    return np.unique(np.round(np.geomspace(lo, hi, count)).astype(np.int64))


def optimize(n, time_mode=False):
    """Grid-minimize the collision-walk cost over (s1, s2); ties to small s1."""
    if n < 8:
        raise ValueError("need n >= 8")
    best = None
    for s1 in _log_grid(2, n):
        for s2 in _log_grid(1, max(2, s1)):
            if s2 > s1:
                continue
            cost = collision_walk_envelope(n, float(s1), float(s2), time_mode)
            key = (cost, s1, s2)
            if best is None or key < best:
                best = key
    cost, s1, s2 = best
    return int(s1), int(s2), cost


def exponent_fit(n_values, observed):
    """Least-squares slope of log(observed) against log(n)."""
    slope, _ = np.polyfit(np.log(np.asarray(n_values, dtype=float)),
                          np.log(np.asarray(observed, dtype=float)), 1)
    return float(slope)


def optimize_grid(n_values, time_mode=False):
    """Rows (n, s1*, s2*, cost*, term breakdown) for each n."""
    rows = []
    for n in n_values:
        s1, s2, cost = optimize(n, time_mode)
        setup, update, check, extra = collision_walk_terms(n, s1, s2, time_mode)
        rows.append({"n": n, "s1": s1, "s2": s2, "cost": cost,
                     "term_setup": setup, "term_update": update,
                     "term_check": check, "term_time_extra": extra})
    return rows


def grid_csv(rows):
    header = ["n", "s1", "s2", "cost", "term_setup", "term_update",
              "term_check", "term_time_extra"]
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(
            str(row[h]) if isinstance(row[h], int) else f"{row[h]:.6g}"
            for h in header))
    return "\n".join(lines) + "\n"
