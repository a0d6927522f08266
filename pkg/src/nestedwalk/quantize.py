"""Quantization of a reversible chain on its directed-edge space.

The walk acts on basis states (x, y) where x is the current vertex and
y is the coin designating the next move; the reserved coin value 0
(``COIN0``) marks the pre-diffusion resting state.  A data register may
be attached whose contents depend on the directed pair, not just the
vertex.  Two simulation modes are supported:

* ``abstract``  - data registers are implicit (pure bookkeeping); the
  dynamics are simulated on the bare edge space.  Valid because the
  data-attached space is isomorphic to the bare one under
  (x, y) -> (x, y, data(x, y)), and every operator commutes with that
  identification.
* ``concrete``  - data states are explicit vectors; used as the
  correctness oracle on tiny instances.

The walk operator is
W = (DatabaseSwap . LocalDiffusion . PhaseFlip . LocalDiffusion^dagger)^2,
whose middle three factors compose to minus the reflection about the
span of the per-vertex coin superpositions.
"""

from dataclasses import dataclass
from math import ceil, sqrt, asin, sin

import numpy as np
from scipy.linalg import schur

from .ledger import CostLedger
from .markov import (
    DENSE_EIGENSOLVE_CAP,
    SimulationCapError,
    spectral_gap,
    stationary_distribution,
)

COIN0 = -1

DENSE_WALK_CAP = 4000
UNITARITY_TOL = 1e-12


class EdgeSpace:
    """Enumerated basis (X x {0}) union E-> for a chain's edge space."""

    def __init__(self, chain):
        pairs = [(x, COIN0) for x in range(chain.vertex_count)]
        for x in range(chain.vertex_count):
            for y in chain.neighbors(x):
                pairs.append((x, y))
        self.chain = chain
        self.pairs = pairs
        self.index = {p: i for i, p in enumerate(pairs)}
        self.dim = len(pairs)


class DataOracle:
    """Map from directed pairs (and resting pairs) to normalized data states."""

    def __init__(self, dim, data_of):
        self.dim = dim
        self._data_of = data_of

    def vector(self, x, y):
        v = np.asarray(self._data_of(x, y), dtype=float)
        n = np.linalg.norm(v)
        if abs(n - 1.0) > 1e-9:
            raise ValueError(f"data state for pair ({x},{y}) is not normalized")
        return v


def trivial_data():
    """Coin-independent placeholder data (a single fixed basis state)."""
    return DataOracle(1, lambda x, y: np.array([1.0]))


@dataclass
class StateVector:
    amplitudes: np.ndarray
    espace: EdgeSpace
    mode: str
    data: DataOracle = None

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))

    def pair_marginal(self):
        """Probability of each (x, y) basis pair, marginalizing any data register."""
        a = np.abs(self.amplitudes) ** 2
        if self.mode == "concrete":
            d = self.data.dim
            a = a.reshape(self.espace.dim, d).sum(axis=1)
        return a


@dataclass
class WalkOperator:
    matrix: np.ndarray
    local_diffusion: np.ndarray
    database_swap: np.ndarray
    phase_flip: np.ndarray
    espace: EdgeSpace
    chain: object
    mode: str
    data: DataOracle = None

    @property
    def dim(self):
        return self.matrix.shape[0]


def _householder_swap(dim, u, v):
    """Unitary (involution) mapping u <-> v for real unit vectors, identity elsewhere."""
    w = u - v
    n2 = float(w @ w)
    if n2 < 1e-28:
        return np.eye(dim)
    return np.eye(dim) - (2.0 / n2) * np.outer(w, w)


def _coin_targets(chain, espace, data, mode):
    """The vectors u_x = sum_y sqrt(P(x,y)) |x,y>(|D(x,y)>)."""
    if mode == "abstract":
        dim = espace.dim
        targets = np.zeros((chain.vertex_count, dim))
        for x in range(chain.vertex_count):
            for y in chain.neighbors(x):
                targets[x, espace.index[(x, y)]] = sqrt(chain.transition(x, y))
        return targets
    d = data.dim
    dim = espace.dim * d
    targets = np.zeros((chain.vertex_count, dim))
    for x in range(chain.vertex_count):
        for y in chain.neighbors(x):
            block = espace.index[(x, y)] * d
            targets[x, block:block + d] = sqrt(chain.transition(x, y)) * data.vector(x, y)
    return targets


def build_operators(chain, data=None, mode="abstract", cap=DENSE_WALK_CAP):
    """Dense LocalDiffusion, DatabaseSwap, PhaseFlip and W(P)."""
    espace = EdgeSpace(chain)
    d = 1 if mode == "abstract" else data.dim
    dim = espace.dim * d
    if dim > cap:
        raise SimulationCapError(f"edge space dimension {dim} above dense cap {cap}")

    targets = _coin_targets(chain, espace, data, mode)

    # rest states |x,0>(|D(x,0)>)
    rests = np.zeros((chain.vertex_count, dim))
    for x in range(chain.vertex_count):
        i = espace.index[(x, COIN0)]
        if mode == "abstract":
            rests[x, i] = 1.0
        else:
            rests[x, i * d:(i + 1) * d] = data.vector(x, COIN0)

    # the per-vertex reflections act on disjoint coordinate blocks, so the
    # product is a direct sum and can be assembled block by block
    ld = np.eye(dim)
    for x in range(chain.vertex_count):
        w = rests[x] - targets[x]
        n2 = float(w @ w)
        if n2 < 1e-28:
            continue
        sup = np.nonzero(np.abs(w) > 0)[0]
        ld[np.ix_(sup, sup)] -= (2.0 / n2) * np.outer(w[sup], w[sup])

    flip = np.eye(dim)
    for x in range(chain.vertex_count):
        flip -= 2.0 * np.outer(rests[x], rests[x])

    swap = np.zeros((dim, dim))
    for x in range(chain.vertex_count):
        i = espace.index[(x, COIN0)]
        swap[i * d:(i + 1) * d, i * d:(i + 1) * d] = np.eye(d)
    if mode == "abstract":
        for (x, y), i in espace.index.items():
            if y != COIN0:
                swap[espace.index[(y, x)], i] = 1.0
    else:
        for (x, y), i in espace.index.items():
            if y == COIN0 or x > y:
                continue
            u = data.vector(x, y)
            v = data.vector(y, x)
            rot = _householder_swap(d, u, v)
            j = espace.index[(y, x)]
            swap[j * d:(j + 1) * d, i * d:(i + 1) * d] = rot
            swap[i * d:(i + 1) * d, j * d:(j + 1) * d] = rot.T

    w = swap @ ld @ flip @ ld.T
    w = w @ w
    for name, op in (("local_diffusion", ld), ("database_swap", swap),
                     ("phase_flip", flip), ("walk", w)):
        dev = np.max(np.abs(op.T @ op - np.eye(dim)))
        if dev > UNITARITY_TOL:
            raise ValueError(f"{name} is not unitary (max deviation {dev:.2e}); "
                             "inconsistent data oracle?")
    return WalkOperator(w, ld, swap, flip, espace, chain, mode, data)


def prepare_pi(chain, data=None, mode="abstract", coin0=False):
    """The stationary edge state |pi>, or |pi>^0 when coin0 is set."""
    espace = EdgeSpace(chain)
    pi = stationary_distribution(chain)
    d = 1 if mode == "abstract" else data.dim
    v = np.zeros(espace.dim * d)
    for x in range(chain.vertex_count):
        if coin0:
            i = espace.index[(x, COIN0)]
            amp = sqrt(pi[x])
            block = data.vector(x, COIN0) if mode == "concrete" else np.array([1.0])
            v[i * d:(i + 1) * d] = amp * block
        else:
            for y in chain.neighbors(x):
                i = espace.index[(x, y)]
                amp = sqrt(pi[x] * chain.transition(x, y))
                block = data.vector(x, y) if mode == "concrete" else np.array([1.0])
                v[i * d:(i + 1) * d] = amp * block
    return StateVector(v, espace, mode, data)


def chain_gap(chain):
    """Spectral gap, dense when enumerable, falling back to the stored hint."""
    if chain.vertex_count <= DENSE_EIGENSOLVE_CAP:
        return spectral_gap(chain).gap
    return chain.meta["gap_hint"]


def default_precision_bits(eps, delta):
    """Phase-estimation precision for accuracy 1/sqrt(eps*delta), constant 1."""
    return ceil(np.log2(1.0 / sqrt(eps * delta))) + 2


@dataclass
class Reflector:
    """Reflection that fixes |pi> and negates large-eigenphase components."""

    matrix: np.ndarray
    variant: str
    precision_bits: int = 0

    def apply(self, state, ledger=None):
        out = self.matrix @ state
        if self.variant == "phase_estimation":
            n = np.linalg.norm(out)
            leak = 1.0 - n * n
            if ledger is not None and leak > 1e-12:
                ledger.warn(f"phase-estimation reflection leaked {leak:.3e} probability")
            if n > 0:
                out = out / n
        return out


def reflect_about_pi(walk_op, precision_bits=None, variant="exact", pi_state=None):
    """Reflection about |pi> on the walk's edge space.

    The exact variant is 2|pi><pi| - I.  The phase-estimation variant
    emulates the standard circuit on W: each eigenvector with eigenphase
    theta picks up the factor 2|c0(theta)|^2 - 1 where c0 is the
    amplitude of reading estimate 0 from a b-bit register.  The emulation
    keeps the block in which the ancilla returns to zero, so it is very
    slightly subnormal; applications renormalize and record the leak.
    """
    if pi_state is None:
        pi_state = prepare_pi(walk_op.chain, walk_op.data, walk_op.mode)
    pvec = pi_state.amplitudes
    if variant == "exact":
        return Reflector(2.0 * np.outer(pvec, pvec) - np.eye(len(pvec)), "exact")
    if variant != "phase_estimation":
        raise ValueError(f"unknown reflector variant {variant!r}")
    if precision_bits is None or precision_bits < 1:
        raise ValueError("phase_estimation variant needs precision_bits >= 1")
    T, Z = schur(walk_op.matrix, output="complex")
    phases = np.angle(np.diag(T))
    reps = 2 ** precision_bits
    # Fejer-kernel amplitude of estimate 0 after b-bit phase estimation
    with np.errstate(invalid="ignore", divide="ignore"):
        num = np.sin(reps * phases / 2.0)
        den = reps * np.sin(phases / 2.0)
        c0 = np.where(np.abs(phases) < 1e-14, 1.0, np.abs(num / den))
    factors = 2.0 * c0 ** 2 - 1.0
    mat = np.real(Z @ np.diag(factors) @ Z.conj().T)
    return Reflector(mat, "phase_estimation", precision_bits)


def busy_subspace(walk_op):
    """Orthonormal basis of span{u_x} + span{Swap u_x} (the walked states)."""
    targets = _coin_targets(walk_op.chain, walk_op.espace, walk_op.data, walk_op.mode)
    cols = np.vstack([targets, (walk_op.database_swap @ targets.T).T]).T
    q, r = np.linalg.qr(cols)
    keep = np.abs(np.diag(r)) > 1e-10
    return q[:, keep]


def eigenphase_gap(walk_op):
    """Smallest nonzero |eigenphase| of W restricted to the walked subspace."""
    b = busy_subspace(walk_op)
    wb = b.T @ walk_op.matrix @ b
    vals = np.linalg.eigvals(wb)
    phases = np.abs(np.angle(vals))
    nonzero = phases[phases > 1e-8]
    return float(nonzero.min()) if nonzero.size else np.pi


def _marked_set(chain, marked):
    return {x for x in range(chain.vertex_count) if marked(x)}


def _checking_signs(espace, marked_set, d):
    signs = np.ones(espace.dim * d)
    for (x, y), i in espace.index.items():
        if x in marked_set:
            signs[i * d:(i + 1) * d] = -1.0
    return signs


def _ledger_for_search(eps, delta, extra=None):
    ledger = CostLedger()
    ledger.params.update({"eps": eps, "delta": delta,
                          "S": 1.0, "U": 1.0, "C": 1.0})
    ledger.params["mnrs_formula"] = 1.0 + (1.0 / sqrt(eps)) * (1.0 / sqrt(delta) + 1.0)
    if extra:
        ledger.params.update(extra)
    return ledger


def mnrs_search(chain, marked, data=None, eps=None, rng_seed=0, mode="abstract",
                reflector="exact", method="auto", tries=4, precision_bits=None):
    """Quantized search for a marked vertex.

    Amplitude amplification alternates the checking reflection with the
    reflection about |pi|; the measured vertex is verified classically.
    The ledger charges ceil(1/sqrt(delta)) walk-operator applications per
    pi-reflection (the log-factor overhead of accuracy boosting is
    recorded separately in ``params['log_factor']``).
    """
    rng = np.random.default_rng(rng_seed)
    marked_set = _marked_set(chain, marked)
    delta = chain_gap(chain)
    if eps is None:
        eps = max(len(marked_set), 1) / chain.vertex_count
    if marked_set and len(marked_set) < eps * chain.vertex_count - 1e-9:
        raise ValueError("marked fraction below the stated eps")

    t_max = ceil(1.0 / sqrt(eps))
    per_reflection = ceil(1.0 / sqrt(delta))
    ledger = _ledger_for_search(eps, delta)
    ledger.params["log_factor"] = max(1.0, np.log2(1.0 / sqrt(eps * delta)))
    ledger.charge("queries", 1)  # setup charge, one S unit

    d = 1 if mode == "abstract" else data.dim
    if method == "auto":
        method = "two_level"
        if chain.vertex_count <= 200 and EdgeSpace(chain).dim * d <= 1200:
            method = "dense"
    if method == "two_level" and reflector != "exact":
        raise ValueError("two_level method requires the exact reflector")

    if method == "dense":
        walk_op = build_operators(chain, data, mode)
        pi_state = prepare_pi(chain, data, mode)
        if precision_bits is None and reflector == "phase_estimation":
            precision_bits = default_precision_bits(eps, delta)
        r_pi = reflect_about_pi(walk_op, precision_bits, reflector, pi_state)
        signs = _checking_signs(walk_op.espace, marked_set, d)
        for _ in range(tries):
            t = int(rng.integers(0, t_max + 1))
            state = pi_state.amplitudes.copy()
            for _ in range(t):
                state = signs * state
                ledger.charge("checks")
                state = r_pi.apply(state, ledger)
                ledger.charge("walk_ops", per_reflection)
            probs = StateVector(state, walk_op.espace, mode, data).pair_marginal()
            probs = np.clip(probs, 0.0, None)
            probs /= probs.sum()
            i = int(rng.choice(len(probs), p=probs))
            x = walk_op.espace.pairs[i][0]
            ledger.charge("checks")
            if x in marked_set:
                return x, ledger
        return None, ledger

    # two-level path: with exact reflections the state stays in
    # span{|pi>, |pi(M)>}, so the dynamics reduce to a planar rotation.
    pi = stationary_distribution(chain)
    p = float(sum(pi[x] for x in marked_set))
    alpha = asin(min(1.0, sqrt(p))) if p > 0 else 0.0
    for _ in range(tries):
        t = int(rng.integers(0, t_max + 1))
        ledger.charge("checks", t)
        ledger.charge("walk_ops", t * per_reflection)
        p_succ = sin((2 * t + 1) * alpha) ** 2 if p > 0 else 0.0
        ledger.charge("checks")
        if rng.random() < p_succ:
            weights = np.array([pi[x] for x in sorted(marked_set)])
            x = int(rng.choice(sorted(marked_set), p=weights / weights.sum()))
            return x, ledger
    return None, ledger


def map_pi_to_piM(chain, marked, data=None, mode="abstract", trace_distance=1e-6):
    """Normalized projection of |pi> onto marked-vertex support.

    With exact reflectors the amplitude-amplification rotation can be
    completed to any accuracy; the simulator realizes the endpoint
    directly (deviation 0 <= trace_distance) and charges the ledger the
    rotation cost.
    """
    marked_set = _marked_set(chain, marked)
    if not marked_set:
        raise ValueError("marked set is empty")
    eps = len(marked_set) / chain.vertex_count
    delta = chain_gap(chain)
    state = prepare_pi(chain, data, mode)
    d = 1 if mode == "abstract" else data.dim
    keep = np.zeros_like(state.amplitudes)
    for (x, y), i in state.espace.index.items():
        if x in marked_set:
            keep[i * d:(i + 1) * d] = state.amplitudes[i * d:(i + 1) * d]
    keep /= np.linalg.norm(keep)
    ledger = _ledger_for_search(eps, delta)
    ledger.charge("walk_ops", ceil(1.0 / sqrt(eps)) * ceil(1.0 / sqrt(delta)))
    ledger.charge("checks", ceil(1.0 / sqrt(eps)))
    ledger.params["trace_distance"] = 0.0
    return StateVector(keep, state.espace, mode, data), ledger
