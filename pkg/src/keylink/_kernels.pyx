# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled bitmask kernels. Same contract as ``_kernels_py`` for masks that
fit in 64 bits; ``keylink.kernels`` routes larger inputs to the fallback."""

from libc.stdint cimport uint64_t
from libc.stdlib cimport malloc, free, calloc

BACKEND = "cython"
MAX_BITS = 64


cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil


cdef inline int popcount(uint64_t x) nogil:
    return __builtin_popcountll(x)


cdef inline uint64_t _closure(uint64_t held, const int* order, int m,
                              const uint64_t* children) nogil:
    cdef int i, r
    for i in range(m):
        r = order[i]
        if (held >> r) & 1:
            held |= children[r]
    return held


cdef uint64_t* _to_u64(seq, Py_ssize_t* size) except NULL:
    cdef Py_ssize_t k = len(seq), i
    cdef uint64_t* out = <uint64_t*> malloc((k if k > 0 else 1) * sizeof(uint64_t))
    if out == NULL:
        raise MemoryError()
    for i in range(k):
        out[i] = <uint64_t> seq[i]
    size[0] = k
    return out


cdef int* _to_int(seq, Py_ssize_t* size) except NULL:
    cdef Py_ssize_t k = len(seq), i
    cdef int* out = <int*> malloc((k if k > 0 else 1) * sizeof(int))
    if out == NULL:
        raise MemoryError()
    for i in range(k):
        out[i] = <int> seq[i]
    size[0] = k
    return out


def closure_mask(held, order, children):
    cdef Py_ssize_t m, mc
    cdef int* c_order = _to_int(order, &m)
    cdef uint64_t* c_children
    try:
        c_children = _to_u64(children, &mc)
    except BaseException:
        free(c_order)
        raise
    cdef uint64_t out = _closure(<uint64_t> held, c_order, <int> m, c_children)
    free(c_order)
    free(c_children)
    return out


cdef inline void _check_one(uint64_t coalition, const uint64_t* stored,
                            const uint64_t* entitled, int n, const int* order, int m,
                            const uint64_t* children, uint64_t* got_out,
                            uint64_t* want_out) nogil:
    cdef uint64_t held = 0, want = 0
    cdef int u
    for u in range(n):
        if (coalition >> u) & 1:
            held |= stored[u]
            want |= entitled[u]
    got_out[0] = _closure(held, order, m, children)
    want_out[0] = want


def check_coalitions(stored, entitled, order, children, coalitions):
    cdef Py_ssize_t n, n2, m, mc
    cdef uint64_t got, want, c
    cdef uint64_t* c_stored = _to_u64(stored, &n)
    cdef uint64_t* c_entitled = _to_u64(entitled, &n2)
    cdef int* c_order = _to_int(order, &m)
    cdef uint64_t* c_children = _to_u64(children, &mc)
    violations = []
    try:
        for coalition in coalitions:
            c = <uint64_t> coalition
            _check_one(c, c_stored, c_entitled, <int> n, c_order, <int> m,
                       c_children, &got, &want)
            if got != want:
                violations.append((int(c), int(got & ~want), int(want & ~got)))
    finally:
        free(c_stored)
        free(c_entitled)
        free(c_order)
        free(c_children)
    return violations


def scan_coalitions(stored, entitled, order, children, int max_size):
    cdef Py_ssize_t n, n2, m, mc
    cdef uint64_t got, want, c, limit
    cdef long long checked = 0
    cdef uint64_t* c_stored = _to_u64(stored, &n)
    cdef uint64_t* c_entitled = _to_u64(entitled, &n2)
    cdef int* c_order = _to_int(order, &m)
    cdef uint64_t* c_children = _to_u64(children, &mc)
    violations = []
    try:
        if n > 30:
            raise ValueError("exhaustive coalition scan limited to 30 users")
        limit = (<uint64_t> 1) << n
        c = 1
        while c < limit:
            if popcount(c) <= max_size:
                checked += 1
                _check_one(c, c_stored, c_entitled, <int> n, c_order, <int> m,
                           c_children, &got, &want)
                if got != want:
                    violations.append((int(c), int(got & ~want), int(want & ~got)))
            c += 1
    finally:
        free(c_stored)
        free(c_entitled)
        free(c_order)
        free(c_children)
    # same (size, lexicographic) order as the Python fallback
    violations.sort(key=_coalition_rank)
    return checked, violations


def _coalition_rank(v):
    c = v[0]
    members = [i for i in range(c.bit_length()) if c >> i & 1]
    return (len(members), members)


cdef struct Search:
    int n
    int k
    int limit
    int capacity
    int* n_opts
    uint64_t** opts
    int* suffix       # (k + 1) * n unavoidable load per user
    int* total        # k + 1 minimal remaining total load
    int* cur


cdef bint _dfs(Search* s, int i, int used) nogil:
    cdef int u, j, added
    cdef uint64_t m
    cdef bint ok
    if used + s.total[i] > s.capacity:
        return False
    for u in range(s.n):
        if s.cur[u] + s.suffix[i * s.n + u] > s.limit:
            return False
    if i == s.k:
        return True
    for j in range(s.n_opts[i]):
        m = s.opts[i][j]
        ok = True
        added = 0
        for u in range(s.n):
            if (m >> u) & 1:
                s.cur[u] += 1
                added += 1
                if s.cur[u] > s.limit:
                    ok = False
        if ok and _dfs(s, i + 1, used + added):
            for u in range(s.n):
                if (m >> u) & 1:
                    s.cur[u] -= 1
            return True
        for u in range(s.n):
            if (m >> u) & 1:
                s.cur[u] -= 1
    return False


def feasible(options, loads, int limit):
    cdef Search s
    cdef int i, j, u, cheapest, c
    cdef uint64_t f
    s.n = len(loads)
    s.k = len(options)
    s.limit = limit
    s.capacity = s.n * limit
    for opts in options:
        if len(opts) == 0:
            return False
    s.n_opts = <int*> calloc(s.k + 1, sizeof(int))
    s.opts = <uint64_t**> calloc(s.k + 1, sizeof(uint64_t*))
    s.suffix = <int*> calloc((s.k + 1) * (s.n if s.n > 0 else 1), sizeof(int))
    s.total = <int*> calloc(s.k + 1, sizeof(int))
    s.cur = <int*> calloc(s.n if s.n > 0 else 1, sizeof(int))
    if s.n_opts == NULL or s.opts == NULL or s.suffix == NULL or s.total == NULL or s.cur == NULL:
        raise MemoryError()
    cdef int used = 0
    cdef bint result
    try:
        for i in range(s.k):
            opts = options[i]
            s.n_opts[i] = len(opts)
            s.opts[i] = <uint64_t*> malloc(len(opts) * sizeof(uint64_t))
            if s.opts[i] == NULL:
                raise MemoryError()
            for j in range(len(opts)):
                s.opts[i][j] = <uint64_t> opts[j]
        for u in range(s.n):
            s.cur[u] = loads[u]
            used += s.cur[u]
        for i in range(s.k - 1, -1, -1):
            f = s.opts[i][0]
            cheapest = popcount(f)
            for j in range(1, s.n_opts[i]):
                f &= s.opts[i][j]
                c = popcount(s.opts[i][j])
                if c < cheapest:
                    cheapest = c
            s.total[i] = s.total[i + 1] + cheapest
            for u in range(s.n):
                s.suffix[i * s.n + u] = s.suffix[(i + 1) * s.n + u] + <int> ((f >> u) & 1)
        with nogil:
            result = _dfs(&s, 0, used)
        return bool(result)
    finally:
        for i in range(s.k):
            if s.opts[i] != NULL:
                free(s.opts[i])
        free(s.opts)
        free(s.n_opts)
        free(s.suffix)
        free(s.total)
        free(s.cur)
