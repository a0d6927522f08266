"""Colexicographic ranking and unranking of fixed-size subsets.

Subsets of {0, ..., n-1} are represented either as sorted tuples or as
bitmasks (for n <= 64).  Colex order sorts subsets by their largest
element first, which makes the rank of a subset independent of the
ground-set size.
"""

from math import comb


def rank_colex(elements):
    """Colex rank of a sorted iterable of distinct nonnegative ints."""
    rank = 0
    for pos, e in enumerate(sorted(elements), start=1):
        rank += comb(e, pos)
    return rank


def unrank_colex(rank, r):
    """Inverse of :func:`rank_colex` for subsets of size ``r``."""
    if r == 0:
        if rank != 0:
            raise ValueError("rank out of range for empty subset")
        return ()
    out = []
    for pos in range(r, 0, -1):
        # largest e with comb(e, pos) <= rank
        e = pos - 1
        while comb(e + 1, pos) <= rank:
            e += 1
        out.append(e)
        rank -= comb(e, pos)
    if rank != 0:
        raise ValueError("rank out of range")
    return tuple(reversed(out))


def mask_from_tuple(elements):
    mask = 0
    for e in elements:
        mask |= 1 << e
    return mask


def tuple_from_mask(mask):
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


def all_subsets(n, r):
    """All r-subsets of range(n) in colex order."""
    return [unrank_colex(k, r) for k in range(comb(n, r))]
