"""Enumerated reversible Markov chains and the classical baseline search.

The central construction is the generalized Johnson graph J(n, r, m):
vertices are the r-subsets of {0, ..., n-1} in colex rank order, and two
subsets are adjacent when their intersection has size r - m (move to a
neighbour by swapping out m elements and swapping in m fresh ones).
Transitions are uniform over neighbours, so the stationary distribution
is exactly uniform.
"""

from dataclasses import dataclass, field
from itertools import combinations
from math import comb, ceil

import numpy as np
from scipy.linalg import eigh

from .ledger import CostLedger
from .subsets import rank_colex, unrank_colex

DEFAULT_VERTEX_CAP = 200_000
DENSE_EIGENSOLVE_CAP = 5_000


class SimulationCapError(ValueError):
    """Raised when a chain is too large for the requested dense operation."""


@dataclass
class MarkovChain:
    """Reversible ergodic chain on an enumerated vertex set.

    ``decode`` maps a vertex index to its canonical label (a sorted tuple
    for subset-valued vertices).  ``neighbors`` and ``transition`` are
    callables so large chains never materialize a dense matrix unless a
    dense operation is explicitly requested.
    """

    vertex_count: int
    decode: callable
    encode: callable
    neighbors: callable
    transition: callable
    meta: dict = field(default_factory=dict)

    def transition_matrix(self, cap=DENSE_EIGENSOLVE_CAP):
        if self.vertex_count > cap:
            raise SimulationCapError(
                f"chain with {self.vertex_count} vertices is too large for dense solve "
                f"(cap {cap})"
            )
        P = np.zeros((self.vertex_count, self.vertex_count))
        for x in range(self.vertex_count):
            for y in self.neighbors(x):
                P[x, y] = self.transition(x, y)
        return P

    def to_json_dict(self):
        if self.meta.get("kind") != "johnson":
            raise ValueError("only johnson chains have a JSON description")
        return {
            "kind": "johnson",
            "n": self.meta["n"],
            "r": self.meta["r"],
            "m": self.meta["m"],
        }


@dataclass
class SpectralReport:
    gap: float
    second_eigenvalue_magnitude: float
    eigenvalues: np.ndarray


def johnson_chain(n, r, m, vertex_cap=DEFAULT_VERTEX_CAP):
    """Generalized Johnson graph J(n, r, m) as a MarkovChain.

    Rejects parameter sets that would give isolated vertices, a
    perfect-matching (periodic) graph, or a vertex set above the cap.
    """
    if not (1 <= m <= min(r, n - r)):
        raise ValueError(f"need 1 <= m <= min(r, n-r); got n={n}, r={r}, m={m}")
    count = comb(n, r)
    if count > vertex_cap:
        raise SimulationCapError(
            f"J({n},{r},{m}) has {count} vertices, above the cap {vertex_cap}"
        )
    degree = comb(r, m) * comb(n - r, m)
    if degree == 0:
        raise ValueError(f"J({n},{r},{m}) has isolated vertices")
    if degree == 1 and count > 1:
        # r = m = n - r: every vertex swaps to its complement, period 2
        raise ValueError(f"J({n},{r},{m}) is a perfect matching, not ergodic")
    p = 1.0 / degree

    def decode(v):
        return unrank_colex(v, r)

    def encode(subset):
        return rank_colex(subset)

    def neighbors(v):
        s = set(decode(v))
        rest = [e for e in range(n) if e not in s]
        out = []
        for drop in combinations(sorted(s), m):
            kept = s.difference(drop)
            for add in combinations(rest, m):
                out.append(rank_colex(kept.union(add)))
        return out

    def transition(u, v):
        su, sv = set(decode(u)), set(decode(v))
        if len(su & sv) == r - m and u != v:
            return p
        return 0.0

    meta = {"kind": "johnson", "n": n, "r": r, "m": m, "degree": degree}
    if m == 1:
        # exact spectral gap of J(n, r) under the absolute-value convention:
        # eigenvalues are ((r-j)(n-r-j)-j)/(r(n-r)), decreasing in j, so the
        # dominant |lambda| != 1 is max(lambda_1, |lambda_min|) with
        # lambda_1 = 1 - n/(r(n-r)) and lambda_min = -1/max(r, n-r)
        meta["gap_hint"] = min(n / (r * (n - r)), 1.0 - 1.0 / max(r, n - r))
    else:
        meta["gap_hint"] = m / (2.0 * r)
    return MarkovChain(count, decode, encode, neighbors, transition, meta)


def stationary_distribution(chain, tol=1e-12):
    """Stationary distribution, exact for uniform-degree chains."""
    if chain.meta.get("kind") == "johnson":
        return np.full(chain.vertex_count, 1.0 / chain.vertex_count)
    P = chain.transition_matrix()
    w, vecs = np.linalg.eig(P.T)
    i = np.argmin(np.abs(w - 1.0))
    pi = np.real(vecs[:, i])
    pi = pi / pi.sum()
    if np.max(np.abs(pi @ P - pi)) > tol:
        raise ValueError("failed to compute stationary distribution to tolerance")
    return pi


def validate_chain(chain, tol=1e-12):
    """Dense checks: stochastic rows, reversibility, connectivity, aperiodicity."""
    P = chain.transition_matrix()
    if np.max(np.abs(P.sum(axis=1) - 1.0)) > tol:
        raise ValueError("transition rows do not sum to 1")
    pi = stationary_distribution(chain)
    flow = pi[:, None] * P
    if np.max(np.abs(flow - flow.T)) > tol:
        raise ValueError("chain is not reversible")
    # connectivity via BFS
    seen = {0}
    frontier = [0]
    while frontier:
        nxt = []
        for x in frontier:
            for y in chain.neighbors(x):
                if y not in seen:
                    seen.add(y)
                    nxt.append(y)
        frontier = nxt
    if len(seen) != chain.vertex_count:
        raise ValueError("chain is not connected")
    report = spectral_gap(chain)
    if report.gap <= tol:
        raise ValueError("chain is periodic or disconnected (zero spectral gap)")
    return True


def spectral_gap(chain, cap=DENSE_EIGENSOLVE_CAP):
    """Spectral gap 1 - max{|lambda| : lambda != 1} by dense eigensolve.

    The absolute-value convention penalizes periodicity (eigenvalues near
    -1) as well as slow mixing.
    """
    P = chain.transition_matrix(cap=cap)
    pi = stationary_distribution(chain)
    d = np.sqrt(pi)
    # similarity transform to a symmetric matrix; valid for reversible chains
    S = (d[:, None] * P) / d[None, :]
    vals = eigh(S, eigvals_only=True)
    vals = np.sort(vals)[::-1]
    rest = np.abs(np.delete(vals, np.argmax(vals)))
    second = float(rest.max()) if rest.size else 0.0
    return SpectralReport(gap=1.0 - second, second_eigenvalue_magnitude=second,
                          eigenvalues=vals)


def classical_walk_search(chain, marked, eps, rng_seed, delta=None):
    """Randomized search: sample from pi, alternate check and mixing runs.

    Runs ceil(3/eps) rounds; each round checks the current vertex and,
    if unmarked, simulates ceil(3/delta) steps of the chain.  Returns a
    marked vertex or None, with the ledger recording steps and checks.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    rng = np.random.default_rng(rng_seed)
    if delta is None:
        delta = spectral_gap(chain).gap
    rounds = ceil(3.0 / eps)
    steps = ceil(3.0 / delta)
    ledger = CostLedger()
    ledger.params.update({"eps": eps, "delta": delta})

    pi = stationary_distribution(chain)
    x = int(rng.choice(chain.vertex_count, p=pi))
    for _ in range(rounds):
        ledger.charge("checks")
        if marked(x):
            return x, ledger
        for _ in range(steps):
            nbrs = chain.neighbors(x)
            probs = np.array([chain.transition(x, y) for y in nbrs])
            x = int(nbrs[rng.choice(len(nbrs), p=probs / probs.sum())])
            ledger.charge("walk_ops")
    ledger.charge("checks")
    if marked(x):
        return x, ledger
    return None, ledger
