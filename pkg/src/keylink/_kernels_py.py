"""Pure-Python versions of the bitmask kernels.

Masks are plain ints, so there is no size limit. ``keylink.kernels`` picks
between this module and the compiled one.
"""

from __future__ import annotations

from itertools import combinations
from typing import Sequence

BACKEND = "python"
MAX_BITS = None


def closure_mask(held: int, order: Sequence[int], children: Sequence[int]) -> int:
    """Close ``held`` under the child masks.

    ``order`` must list resource indices parents-first so a single pass
    suffices.
    """
    out = held
    for r in order:
        if out >> r & 1:
            out |= children[r]
    return out


def _check(stored, entitled, order, children, coalition, violations):
    held = 0
    want = 0
    u = 0
    c = coalition
    while c:
        if c & 1:
            held |= stored[u]
            want |= entitled[u]
        c >>= 1
        u += 1
    got = closure_mask(held, order, children)
    if got != want:
        violations.append((coalition, got & ~want, want & ~got))


def check_coalitions(
    stored: Sequence[int],
    entitled: Sequence[int],
    order: Sequence[int],
    children: Sequence[int],
    coalitions: Sequence[int],
) -> list[tuple[int, int, int]]:
    violations: list[tuple[int, int, int]] = []
    for c in coalitions:
        _check(stored, entitled, order, children, c, violations)
    return violations


def scan_coalitions(
    stored: Sequence[int],
    entitled: Sequence[int],
    order: Sequence[int],
    children: Sequence[int],
    max_size: int,
) -> tuple[int, list[tuple[int, int, int]]]:
    """Check every non-empty coalition of at most ``max_size`` users.

    Returns ``(coalitions_checked, violations)`` where each violation is
    ``(coalition_mask, excess_mask, missing_mask)``.
    """
    n = len(stored)
    violations: list[tuple[int, int, int]] = []
    checked = 0
    for size in range(1, min(max_size, n) + 1):
        for combo in combinations(range(n), size):
            c = 0
            for u in combo:
                c |= 1 << u
            _check(stored, entitled, order, children, c, violations)
            checked += 1
    return checked, violations


def feasible(options: Sequence[Sequence[int]], loads: Sequence[int], limit: int) -> bool:
    """Can one option per resource be picked so no user load exceeds ``limit``?

    ``options[i]`` lists user masks; picking mask ``s`` adds one to the load
    of every user in ``s``. ``loads`` is the starting load per user.
    """
    n = len(loads)
    k = len(options)
    forced = [0] * k
    cheapest = [0] * k
    for i, opts in enumerate(options):
        if not opts:
            return False
        f = opts[0]
        for s in opts[1:]:
            f &= s
        forced[i] = f
        cheapest[i] = min(bin(s).count("1") for s in opts)
    # suffix sums of unavoidable load per user and of minimal total load
    suffix = [[0] * n for _ in range(k + 1)]
    total = [0] * (k + 1)
    for i in range(k - 1, -1, -1):
        row = suffix[i]
        row[:] = suffix[i + 1]
        f = forced[i]
        for u in range(n):
            if f >> u & 1:
                row[u] += 1
        total[i] = total[i + 1] + cheapest[i]

    cur = list(loads)
    capacity = n * limit

    def dfs(i: int, used: int) -> bool:
        if used + total[i] > capacity:
            return False
        row = suffix[i]
        for u in range(n):
            if cur[u] + row[u] > limit:
                return False
        if i == k:
            return True
        for s in options[i]:
            bits = []
            u = 0
            t = s
            ok = True
            while t:
                if t & 1:
                    cur[u] += 1
                    bits.append(u)
                    if cur[u] > limit:
                        ok = False
                t >>= 1
                u += 1
            if ok and dfs(i + 1, used + len(bits)):
                for u in bits:
                    cur[u] -= 1
                return True
            for u in bits:
                cur[u] -= 1
        return False

    return dfs(0, sum(loads))
