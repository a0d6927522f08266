"""History-independent set storage and the composite edge encodings.

The core container stores (index, value) items in a deterministic skip
list: each item's tower height is derived from a keyed hash of the item,
so the in-memory shape (and hence the canonical serialization) is a pure
function of the stored contents, independent of the insertion and
deletion history.  Items are ordered by (value, index) so that all items
sharing a value sit in one contiguous run.
"""

import hashlib
import struct

import numpy as np

SERIAL_VERSION = 1
MAX_LEVEL = 32


def _item_level(structure_key, z, chi):
    h = hashlib.blake2b(repr((z, chi)).encode(), key=structure_key,
                        digest_size=8).digest()
    bits = int.from_bytes(h, "big")
    level = 0
    while level < MAX_LEVEL - 1 and not (bits >> level) & 1:
        level += 1
    return level


class _Node:
    __slots__ = ("key", "forward")

    def __init__(self, key, level):
        self.key = key
        self.forward = [None] * (level + 1)


class HistoryFreeSet:
    """Unique-encoding set of (z, chi) records with value lookup.

    ``z`` may be an int or a tuple of ints (collision pairs are stored
    with z = (i, j)).  ``touched_nodes`` accumulates the number of node
    visits across operations, for empirical cost profiling.
    """

    _HEAD = (None,)  # sorts before every real key

    def __init__(self, structure_key=b"nestedwalk-histset"):
        self.structure_key = structure_key
        self.head = _Node(self._HEAD, MAX_LEVEL - 1)
        self.count = 0
        self.touched_nodes = 0

    @staticmethod
    def _key(z, chi):
        return (chi, z)

    def _find_predecessors(self, key):
        update = [self.head] * MAX_LEVEL
        node = self.head
        for lvl in range(MAX_LEVEL - 1, -1, -1):
            while node.forward[lvl] is not None and node.forward[lvl].key < key:
                node = node.forward[lvl]
                self.touched_nodes += 1
            update[lvl] = node
        self.touched_nodes += 1
        return update

    def contains(self, z, chi):
        key = self._key(z, chi)
        update = self._find_predecessors(key)
        nxt = update[0].forward[0]
        return nxt is not None and nxt.key == key

    def insert(self, z, chi):
        key = self._key(z, chi)
        update = self._find_predecessors(key)
        nxt = update[0].forward[0]
        if nxt is not None and nxt.key == key:
            raise KeyError(f"item {(z, chi)} already present")
        level = _item_level(self.structure_key, z, chi)
        node = _Node(key, level)
        for lvl in range(level + 1):
            node.forward[lvl] = update[lvl].forward[lvl]
            update[lvl].forward[lvl] = node
        self.count += 1
        return self

    def delete(self, z, chi):
        key = self._key(z, chi)
        update = self._find_predecessors(key)
        node = update[0].forward[0]
        if node is None or node.key != key:
            raise KeyError(f"item {(z, chi)} not present")
        for lvl in range(len(node.forward)):
            if update[lvl].forward[lvl] is node:
                update[lvl].forward[lvl] = node.forward[lvl]
        self.count -= 1
        return self

    def lookup_by_value(self, chi):
        """All (z, chi) items with the given value, ordered by z."""
        key = (chi, _MinKey)
        update = self._find_predecessors(key)
        node = update[0].forward[0]
        out = []
        while node is not None and node.key[0] == chi:
            out.append((node.key[1], chi))
            node = node.forward[0]
            self.touched_nodes += 1
        return out

    def items(self):
        node = self.head.forward[0]
        while node is not None:
            yield (node.key[1], node.key[0])
            node = node.forward[0]

    def enumerate_uniform(self, rng_seed_or_rng, ledger=None):
        """One item, exactly uniform over the contents.

        Emulates coherent superposition access; charges one
        data-structure op.
        """
        if self.count == 0:
            raise KeyError("cannot enumerate an empty set")
        rng = (rng_seed_or_rng if isinstance(rng_seed_or_rng, np.random.Generator)
               else np.random.default_rng(rng_seed_or_rng))
        j = int(rng.integers(self.count))
        if ledger is not None:
            ledger.charge("ds_ops")
        for i, item in enumerate(self.items()):
            if i == j:
                return item
        raise AssertionError("unreachable")

    def serialize(self):
        """Canonical bytes: version, count, then (z, chi, level) sorted by key."""
        parts = [struct.pack(">BI", SERIAL_VERSION, self.count)]
        for z, chi in self.items():
            zs = (z,) if isinstance(z, int) else tuple(z)
            level = _item_level(self.structure_key, z, chi)
            parts.append(struct.pack(">B", len(zs)))
            parts.append(struct.pack(f">{len(zs)}q", *zs))
            parts.append(struct.pack(">qB", chi, level))
        return b"".join(parts)

    def copy(self):
        out = HistoryFreeSet(self.structure_key)
        for z, chi in self.items():
            out.insert(z, chi)
        out.touched_nodes = 0
        return out


class _MinKeyType:
    """Sorts before every z value within one chi run."""

    def __lt__(self, other):
        return True

    def __gt__(self, other):
        return False


_MinKey = _MinKeyType()


class EdgeEncoding:
    """Composite encoding of a walk edge and its data.

    Holds the base tables Q(S2) and Q(S1) (or the residual set), the
    difference tables for the coin side, and the collision sub-table with
    its cardinality counter.  The partition classifier decides which
    (i, j) orderings count as cross-partition collision pairs.
    """

    def __init__(self, classify, structure_key=b"nestedwalk-edge"):
        self.classify = classify
        self.q_s2 = HistoryFreeSet(structure_key + b"-s2")
        self.q_s1 = HistoryFreeSet(structure_key + b"-s1")
        self.q_s2_minus = HistoryFreeSet(structure_key + b"-s2d")
        self.q_minus_s2 = HistoryFreeSet(structure_key + b"-ds2")
        self.q_pairs = HistoryFreeSet(structure_key + b"-pairs")
        self.pair_counter = 0

    def collision_aware_insert(self, i, chi, ledger=None):
        """Insert index i into S1, updating the collision sub-table.

        Looks up chi in Q(S1); if a cross-partition partner exists, the
        oriented pair joins Q(P(S1)) and the counter is incremented.
        """
        if self.q_s1.contains(i, chi):
            raise KeyError(f"index {i} already in S1")
        for j, _ in self.q_s1.lookup_by_value(chi):
            ci, cj = self.classify(i), self.classify(j)
            if {ci, cj} == {1, 2}:
                pair = (i, j) if ci == 1 else (j, i)
                self.q_pairs.insert(pair, chi)
                self.pair_counter += 1
                if ledger is not None:
                    ledger.charge("ds_ops")
        self.q_s1.insert(i, chi)
        if ledger is not None:
            ledger.charge("ds_ops")
        return self

    def collision_aware_delete(self, i, chi, ledger=None):
        """Exact inverse of :meth:`collision_aware_insert`."""
        self.q_s1.delete(i, chi)
        for j, _ in self.q_s1.lookup_by_value(chi):
            ci, cj = self.classify(i), self.classify(j)
            if {ci, cj} == {1, 2}:
                pair = (i, j) if ci == 1 else (j, i)
                self.q_pairs.delete(pair, chi)
                self.pair_counter -= 1
                if ledger is not None:
                    ledger.charge("ds_ops")
        if ledger is not None:
            ledger.charge("ds_ops")
        return self

    def serialize(self):
        return b"".join([
            self.q_s2.serialize(),
            self.q_s1.serialize(),
            self.q_s2_minus.serialize(),
            self.q_minus_s2.serialize(),
            self.q_pairs.serialize(),
            struct.pack(">I", self.pair_counter),
        ])

    def decoded_s1(self):
        return {z for z, _ in self.q_s1.items()}

    def decoded_pairs(self):
        return {z for z, _ in self.q_pairs.items()}
