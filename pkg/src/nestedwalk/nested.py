"""Nested walk updates: per-vertex inner walks drive the outer diffusion.

An outer walk whose data registers are expensive to update directly can
instead carry per-edge garbage states produced by an inner walk.  The
implementation pair supplies Local Diffusion with Garbage (LDwG), which
emits the coin superposition together with garbage, and the Garbage
Swap, which exchanges vertex and coin roles along with their garbage.
Composing the quantized outer walk with these operators reproduces the
monolithic search statistics while paying only the inner walk's costs
per update.

Concrete states are sparse dictionaries keyed by (x, y, label): outer
vertex, coin (COIN0 for the resting coin), and a hashable garbage/data
label.  Abstract mode drops the labels and delegates the dynamics to
the flat quantized search.
"""

from dataclasses import dataclass, field
from math import ceil, sqrt

import numpy as np

from .ledger import CostLedger
from .markov import stationary_distribution
from .quantize import (
    COIN0,
    build_operators,
    chain_gap,
    default_precision_bits,
    mnrs_search,
    prepare_pi,
    reflect_about_pi,
    _householder_swap,
)

VERIFY_TOL = 1e-9


class InnerWalkFamily:
    """Per-outer-vertex inner walks with shared cost bounds.

    ``inner_chain(x)`` and ``inner_marked(x)`` give the chain and the
    marked predicate for outer vertex x; ``vertex_label(x, v)`` names
    inner vertex v with the hashable label used in concrete states.
    ``bounds`` records the shared upper bounds S', U', C', eps', delta'.
    """

    def __init__(self, inner_chain, inner_marked, bounds=None, vertex_label=None):
        self._inner_chain = inner_chain
        self._inner_marked = inner_marked
        self.bounds = dict(bounds or {})
        self.bounds.setdefault("S_prime", 1.0)
        self.bounds.setdefault("U_prime", 1.0)
        self.bounds.setdefault("C_prime", 0.0)
        self.bounds.setdefault("eps_prime", 1.0)
        self.bounds.setdefault("delta_prime", 1.0)
        self._vertex_label = vertex_label
        self._chain_cache = {}

    def chain(self, x):
        if x not in self._chain_cache:
            self._chain_cache[x] = self._inner_chain(x)
        return self._chain_cache[x]

    def marked(self, x):
        return self._inner_marked(x)

    def marked_set(self, x):
        chain = self.chain(x)
        pred = self.marked(x)
        return {v for v in range(chain.vertex_count) if pred(v)}

    def label(self, x, v):
        if self._vertex_label is not None:
            return self._vertex_label(x, v)
        return self.chain(x).decode(v)


@dataclass
class ImplementationPair:
    """LDwG plus Garbage Swap for an outer chain.

    ``ldwg(x)`` returns the image of the canonical resting input
    |x,0>|pi^x(M^x)> as a dict {(y, label): amplitude} over outgoing
    coins and garbage labels.  ``gswap_label((x, y), label)`` relabels
    garbage when the edge is traversed backwards; it must be an
    involution: gswap((y, x), gswap((x, y), label)) == label.
    ``cost_T`` is the declared implementation cost of one update.
    """

    ldwg: callable
    gswap_label: callable
    cost_T: float = 1.0


def trivial_implementation(outer_chain):
    """Garbage-free pair: plain coin superposition, identity relabeling."""

    def ldwg(x):
        return {(y, ()): sqrt(outer_chain.transition(x, y))
                for y in outer_chain.neighbors(x)}

    return ImplementationPair(ldwg=ldwg, gswap_label=lambda edge, label: label,
                              cost_T=0.0)


def garbage_components(impl, outer_chain, x, y):
    """The garbage state psi(x, y) as {label: amplitude}, unit norm expected."""
    p = outer_chain.transition(x, y)
    if p <= 0:
        raise ValueError(f"({x},{y}) is not an edge of the outer chain")
    root = sqrt(p)
    out = {}
    for (yy, label), amp in impl.ldwg(x).items():
        if yy == y:
            out[label] = amp / root
    return out


def verify_implementation(family, impl, outer_chain, tol=VERIFY_TOL):
    """Check that (ldwg, gswap) implement the diffusion contract.

    (a) each ldwg output carries amplitude sqrt(P(x,y)) on every
    outgoing coin with a normalized garbage state, and has unit norm;
    (b) relabeling psi(x,y) through the garbage swap reproduces
    psi(y,x) on every edge, and the relabeling is an involution;
    (c) both maps preserve norms (unitarity on the generated states).
    Failures name the operator and the offending basis state.
    """
    failures = []
    max_dev = 0.0

    def record(dev, op, where):
        nonlocal max_dev
        max_dev = max(max_dev, dev)
        if dev > tol:
            failures.append(f"{op} at {where}: deviation {dev:.3e}")

    psi = {}
    for x in range(outer_chain.vertex_count):
        image = impl.ldwg(x)
        total = sum(abs(a) ** 2 for a in image.values())
        record(abs(total - 1.0), "ldwg-norm", f"|{x},0>")
        for y in outer_chain.neighbors(x):
            comp = garbage_components(impl, outer_chain, x, y)
            if not comp:
                failures.append(f"ldwg at |{x},0>: coin {y} missing from output")
                continue
            gnorm = sqrt(sum(abs(a) ** 2 for a in comp.values()))
            record(abs(gnorm - 1.0), "ldwg-garbage-norm", f"edge ({x},{y})")
            psi[(x, y)] = comp
        seen_coins = {y for (y, _) in image}
        extra = seen_coins - set(outer_chain.neighbors(x))
        for y in extra:
            failures.append(f"ldwg at |{x},0>: unexpected coin {y}")

    for (x, y), comp in psi.items():
        back = psi.get((y, x))
        if back is None:
            continue
        swapped = {}
        for label, amp in comp.items():
            new = impl.gswap_label((x, y), label)
            if new in swapped:
                failures.append(f"garbage_swap at edge ({x},{y}): label collision {new}")
            swapped[new] = amp
            inv = impl.gswap_label((y, x), new)
            if inv != label:
                failures.append(
                    f"garbage_swap at edge ({x},{y}): not an involution on {label}")
        keys = set(swapped) | set(back)
        dev = max(abs(swapped.get(k, 0.0) - back.get(k, 0.0)) for k in keys)
        record(dev, "garbage_swap", f"edge ({x},{y})")

    return {"passed": not failures, "max_deviation": max_dev, "failures": failures}


# ---------------------------------------------------------------------------
# sparse-state helpers

def sp_norm(state):
    return sqrt(sum(abs(a) ** 2 for a in state.values()))

def sp_inner(a, b):
    small, big = (a, b) if len(a) <= len(b) else (b, a)
    return sum(small[k] * big.get(k, 0.0) for k in small)

def sp_scale_add(acc, state, c):
    for k, v in state.items():
        acc[k] = acc.get(k, 0.0) + c * v
    return acc

def sp_clean(state, tol=1e-14):
    return {k: v for k, v in state.items() if abs(v) > tol}


def stationary_edge_state(outer_chain, impl):
    """|pi_D>: the data-attached stationary edge state as a sparse dict."""
    pi = stationary_distribution(outer_chain)
    state = {}
    for x in range(outer_chain.vertex_count):
        for (y, label), amp in impl.ldwg(x).items():
            state[(x, y, label)] = sqrt(pi[x]) * amp
    return state


def apply_walk(state, outer_chain, impl):
    """One application of W = (GarbageSwap . (2 Pi_A - I))^2, matrix-free.

    Pi_A projects onto span{u_x} where u_x is the ldwg image of vertex x;
    the garbage swap relabels (x, y, label) -> (y, x, gswap label).
    Input must be edge-supported (no COIN0 components).
    """
    u = {x: {(x, y, label): amp for (y, label), amp in impl.ldwg(x).items()}
         for x in range(outer_chain.vertex_count)}

    def half_step(s):
        out = {k: -v for k, v in s.items()}
        for x, ux in u.items():
            o = sp_inner(ux, s)
            if o != 0.0:
                sp_scale_add(out, ux, 2.0 * o)
        swapped = {}
        for (x, y, label), amp in out.items():
            if y == COIN0:
                raise ValueError("walk applied to a resting-coin component")
            swapped[(y, x, impl.gswap_label((x, y), label))] = amp
        return sp_clean(swapped)

    return half_step(half_step(state))


def composed_setup(outer_chain, family, c_data=None, mode="concrete"):
    """The nested starting state sum_x sqrt(pi(x)) |x,0>|C(x)>|pi^x(M^x)>.

    Returns a sparse dict over (x, COIN0, label) and a ledger charging
    the setup formula S_C + S' + (1/sqrt(eps'))((1/sqrt(delta'))U' + C').
    """
    pi = stationary_distribution(outer_chain)
    b = family.bounds
    state = {}
    for x in range(outer_chain.vertex_count):
        chain = family.chain(x)
        marked = sorted(family.marked_set(x))
        if not marked:
            raise ValueError(f"inner marked set empty at outer vertex {x}")
        inner_pi = stationary_distribution(chain)
        mass = sum(inner_pi[v] for v in marked)
        for v in marked:
            label = family.label(x, v)
            if c_data is not None:
                label = (c_data(x), label)
            state[(x, COIN0, label)] = sqrt(pi[x] * inner_pi[v] / mass)

    ledger = CostLedger()
    eps_p, delta_p = b["eps_prime"], b["delta_prime"]
    inner_unit = ceil(1.0 / sqrt(eps_p)) * (ceil(1.0 / sqrt(delta_p)) * b["U_prime"]
                                            + b["C_prime"])
    ledger.params.update({"setup_formula": 1.0 + b["S_prime"] + inner_unit, **b})
    ledger.charge("queries", ceil(1.0 + b["S_prime"]))
    ledger.charge("inner_calls", 1)
    ledger.charge("walk_ops", ceil(inner_unit))
    return state, ledger


def phase_flip_via_inner(family, x, variant="exact", precision_bits=None,
                         accuracy_budget=None):
    """Reflection about |pi^x(M^x)> on the inner walk's edge space.

    Realized as A . R . A where A maps |pi^x(M^x)> <-> |pi^x> (the
    amplitude-amplification rotation run backward/forward) and R negates
    |pi^x> — exactly, or through the phase-estimation reflection on the
    inner walk operator.  Returns (matrix, basis_state_pairs).
    """
    chain = family.chain(x)
    marked = family.marked_set(x)
    if not marked:
        raise ValueError(f"inner marked set empty at outer vertex {x}")
    walk_op = build_operators(chain, mode="abstract")
    pi_state = prepare_pi(chain, mode="abstract")
    pvec = pi_state.amplitudes
    piM = np.zeros_like(pvec)
    for (v, y), i in pi_state.espace.index.items():
        if v in marked:
            piM[i] = pvec[i]
    piM /= np.linalg.norm(piM)

    a = _householder_swap(len(pvec), piM, pvec)
    if variant == "exact":
        r_mid = np.eye(len(pvec)) - 2.0 * np.outer(pvec, pvec)
    elif variant == "phase_estimation":
        if precision_bits is None:
            eps_p = len(marked) / chain.vertex_count
            precision_bits = default_precision_bits(eps_p, chain_gap(chain))
            if accuracy_budget is not None:
                precision_bits += ceil(np.log2(accuracy_budget))
        if precision_bits > 30:
            raise ValueError(
                f"accuracy budget needs {precision_bits} precision bits; "
                "infeasible for dense emulation")
        r_pe = reflect_about_pi(walk_op, precision_bits, "phase_estimation",
                                pi_state)
        r_mid = -r_pe.matrix
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return a @ r_mid @ a, pi_state.espace


def _nested_formula(eps, delta, bounds, cost_T):
    inner = (1.0 / sqrt(bounds["eps_prime"])) * (
        (1.0 / sqrt(bounds["delta_prime"])) * bounds["U_prime"]
        + bounds["C_prime"])
    return 1.0 + bounds["S_prime"] + (1.0 / sqrt(eps)) * (
        (1.0 / sqrt(delta)) * (inner + cost_T) + 1.0)


def nested_search(outer_chain, marked, family, impl=None, eps=None, rng_seed=0,
                  mode="abstract", tries=4, c_data=None):
    """Quantized outer search with updates paid through the inner walks.

    Abstract mode simulates the bare outer dynamics (data registers are
    bookkeeping) and charges the ledger at the nested rate: every outer
    walk operator costs one inner invocation worth
    ceil(1/sqrt(eps'))*ceil(1/sqrt(delta')) + T units.  Concrete mode
    runs amplitude amplification on the sparse data-attached state built
    from the implementation pair.
    """
    b = family.bounds
    impl = impl if impl is not None else trivial_implementation(outer_chain)
    delta = chain_gap(outer_chain)
    marked_set = {x for x in range(outer_chain.vertex_count) if marked(x)}
    if eps is None:
        eps = max(len(marked_set), 1) / outer_chain.vertex_count

    inner_unit = (ceil(1.0 / sqrt(b["eps_prime"]))
                  * ceil(1.0 / sqrt(b["delta_prime"])) * b["U_prime"]
                  + ceil(1.0 / sqrt(b["eps_prime"])) * b["C_prime"]
                  + impl.cost_T)

    if mode == "abstract":
        result, flat = mnrs_search(outer_chain, marked, eps=eps,
                                   rng_seed=rng_seed, tries=tries)
        ledger = CostLedger()
        ledger.counters.update(flat.counters)
        ledger.counters["inner_calls"] = flat.counters["walk_ops"]
        ledger.counters["walk_ops"] = ceil(flat.counters["walk_ops"] * inner_unit)
        ledger.params.update(flat.params)
        ledger.params.update(b)
        ledger.params["T"] = impl.cost_T
        ledger.params["nested_formula"] = _nested_formula(eps, delta, b, impl.cost_T)
        ledger.charge("queries", ceil(b["S_prime"]))
        return result, ledger

    if mode != "concrete":
        raise ValueError(f"unknown mode {mode!r}")

    rng = np.random.default_rng(rng_seed)
    ledger = CostLedger()
    ledger.params.update({"eps": eps, "delta": delta, "T": impl.cost_T, **b})
    ledger.params["nested_formula"] = _nested_formula(eps, delta, b, impl.cost_T)
    ledger.charge("queries", ceil(1.0 + b["S_prime"]))

    pi_d = stationary_edge_state(outer_chain, impl)
    t_max = ceil(1.0 / sqrt(eps))
    per_reflection = ceil(1.0 / sqrt(delta))
    for _ in range(tries):
        t = int(rng.integers(0, t_max + 1))
        state = dict(pi_d)
        for _ in range(t):
            state = {k: (-v if k[0] in marked_set else v)
                     for k, v in state.items()}
            ledger.charge("checks")
            o = sp_inner(pi_d, state)
            state = sp_clean(sp_scale_add({k: -v for k, v in state.items()},
                                          pi_d, 2.0 * o))
            ledger.charge("walk_ops", ceil(per_reflection * inner_unit))
            ledger.charge("inner_calls", per_reflection)
        keys = list(state)
        probs = np.array([abs(state[k]) ** 2 for k in keys])
        probs /= probs.sum()
        x = keys[int(rng.choice(len(keys), p=probs))][0]
        ledger.charge("checks")
        if x in marked_set:
            return x, ledger
    return None, ledger


def measurement_distribution(outer_chain, marked, impl=None, t=0, mode="abstract"):
    """Vertex marginal after t amplitude-amplification steps from |pi_D>.

    Used to compare concrete nested runs against the monolithic flat
    search: with a verified implementation the two marginals agree.
    """
    marked_set = {x for x in range(outer_chain.vertex_count) if marked(x)}
    if mode == "concrete":
        pi_d = stationary_edge_state(outer_chain, impl)
        state = dict(pi_d)
        for _ in range(t):
            state = {k: (-v if k[0] in marked_set else v) for k, v in state.items()}
            o = sp_inner(pi_d, state)
            state = sp_clean(sp_scale_add({k: -v for k, v in state.items()},
                                          pi_d, 2.0 * o))
        out = {}
        for (x, y, label), amp in state.items():
            out[x] = out.get(x, 0.0) + abs(amp) ** 2
        return out

    pi_state = prepare_pi(outer_chain, mode="abstract")
    pvec = pi_state.amplitudes
    state = pvec.copy()
    signs = np.ones_like(state)
    for (x, y), i in pi_state.espace.index.items():
        if x in marked_set:
            signs[i] = -1.0
    for _ in range(t):
        state = signs * state
        state = 2.0 * (pvec @ state) * pvec - state
    out = {}
    for (x, y), i in pi_state.espace.index.items():
        out[x] = out.get(x, 0.0) + abs(state[i]) ** 2
    return out
