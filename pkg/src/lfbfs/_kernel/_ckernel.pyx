# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled state-space kernel.

Same interface and encoding as ``_pykernel``; the guards and actions are
re-stated over packed integer states instead of going through the protocol
module, which is what makes the n = 4 sweeps affordable.
"""

from libc.stdlib cimport malloc, realloc, free, calloc
from libc.stdint cimport uint8_t, uint32_t, uint64_t, int64_t

KIND = "compiled"

cdef enum:
    MAXN = 6
    MAXD = 5
    MAXMOVES = 40
    BIG = 1 << 30

# rule codes, in the declaration order of protocol.Rule
cdef enum:
    R_INIT = 0
    R_SCP = 1
    R_LPP = 2
    R_EP = 3
    R_LC = 4
    R_DYN = 5

cdef enum:
    F_PATH = 1      # on the current depth-first path
    F_STACK = 2     # on Tarjan's component stack
    F_DONE = 4      # finished


cdef struct Lay:
    int k
    int root
    int fixed
    int cap
    int project
    int priority_only
    int deg[MAXN]
    int nbr[MAXN][MAXD]
    int back[MAXN][MAXD]
    int dist[MAXN]
    uint64_t radix[MAXN]
    int rank[6]
    uint64_t size


cdef struct St:
    int p[MAXN]
    int s[MAXN]
    int l[MAXN]
    int nl[MAXN]


cdef struct Move:
    int v
    int rule
    int64_t code   # -1 when the successor leaves the capped space


cdef int make_layout(Lay* L, dict layout, int cap, int priority_only, int project) except -1:
    cdef int v, i
    deg = layout["deg"]
    L.k = len(deg)
    if L.k > MAXN:
        raise ValueError("too many nodes for the compiled kernel")
    L.root = layout["root"]
    L.fixed = 1 if layout["fixed"] else 0
    L.cap = cap
    L.project = project
    L.priority_only = priority_only
    for v in range(L.k):
        L.deg[v] = deg[v]
        if deg[v] > MAXD:
            raise ValueError("degree too large for the compiled kernel")
        L.dist[v] = layout["dist"][v]
        for i in range(deg[v]):
            L.nbr[v][i] = layout["nbr"][v][i]
            L.back[v][i] = layout["back"][v][i]
    ranks = layout["rank"]
    for i in range(6):
        L.rank[i] = ranks[i]
    L.size = 1
    cdef uint64_t c1 = cap + 1
    for v in range(L.k):
        if v == L.root and L.fixed:
            L.radix[v] = 1
        elif project:
            L.radix[v] = (L.deg[v] + 1) * 2 * c1
        else:
            L.radix[v] = (L.deg[v] + 1) * 2 * c1 * c1
        L.size *= L.radix[v]
    return 0


cdef inline void decode(const Lay* L, uint64_t code, St* st) noexcept nogil:
    cdef int v
    cdef uint64_t d, r
    cdef uint64_t c1 = L.cap + 1
    for v in range(L.k):
        r = L.radix[v]
        d = code % r
        code = code // r
        if r == 1:
            st.p[v] = 0
            st.s[v] = 0
            st.l[v] = 0
            st.nl[v] = 0
            continue
        if L.project:
            st.l[v] = <int>(d % c1)
            st.nl[v] = st.l[v]
            d = d // c1
        else:
            st.nl[v] = <int>(d % c1)
            d = d // c1
            st.l[v] = <int>(d % c1)
            d = d // c1
        st.s[v] = <int>(d % 2)
        st.p[v] = <int>(d // 2)


cdef inline int64_t encode(const Lay* L, const St* st) noexcept nogil:
    cdef int v
    cdef uint64_t code = 0, mult = 1, d
    cdef uint64_t c1 = L.cap + 1
    for v in range(L.k):
        if L.radix[v] == 1:
            if st.p[v] != 0 or st.s[v] != 0 or st.l[v] != 0 or st.nl[v] != 0:
                return -1
            continue
        if st.l[v] > L.cap or st.nl[v] > L.cap:
            return -1
        d = st.p[v] * 2 + st.s[v]
        if L.project:
            d = d * c1 + st.l[v]
        else:
            d = (d * c1 + st.l[v]) * c1 + st.nl[v]
        code += d * mult
        mult *= L.radix[v]
    return <int64_t>code


cdef inline int level_hat(const Lay* L, const St* st, int v) noexcept nogil:
    cdef int i, best = BIG
    if v == L.root:
        return 0
    for i in range(L.deg[v]):
        if st.l[L.nbr[v][i]] < best:
            best = st.l[L.nbr[v][i]]
    return best + 1


cdef inline int parent_hat(const Lay* L, const St* st, int v, int lh) noexcept nogil:
    cdef int i, u
    for i in range(L.deg[v]):
        u = L.nbr[v][i]
        if st.l[u] == lh - 1 and st.s[u] == 0:
            return i + 1
    return 0


cdef inline int enabled_mask(const Lay* L, const St* st, int v) noexcept nogil:
    """Bit r set iff rule r is enabled at v."""
    cdef int mask = 0, i, u, lh, ph, ubl, ends, par
    if v == L.root:
        if st.p[v] != 0 or st.l[v] != 0 or st.nl[v] != 0 or st.s[v] != 0:
            return 1 << R_INIT
        return 0
    if st.nl[v] < st.l[v]:
        mask |= 1 << R_LC
    if st.s[v] == 1:
        ubl = BIG
        ends = 1
        for i in range(L.deg[v]):
            u = L.nbr[v][i]
            if st.p[u] == L.back[v][i] and st.l[u] > st.l[v]:
                if st.s[u] != 0:
                    ends = 0
                if st.l[u] - 1 < ubl:
                    ubl = st.l[u] - 1
        if ends and ubl >= st.nl[v]:
            mask |= 1 << R_EP
    elif L.deg[v] > 0:
        lh = level_hat(L, st, v)
        ph = parent_hat(L, st, v, lh)
        if ph != 0 and (lh < st.l[v] or (st.l[v] == lh and st.p[v] != ph)):
            mask |= 1 << R_SCP
        elif st.p[v] != 0:
            par = L.nbr[v][st.p[v] - 1]
            if st.l[v] != st.l[par] + 1 or (st.s[par] == 1 and st.l[v] != st.nl[par] + 1):
                mask |= 1 << R_LPP
        else:
            mask |= 1 << R_DYN
    return mask


cdef inline void act(const Lay* L, const St* src, int v, int rule, St* dst) noexcept nogil:
    dst[0] = src[0]
    cdef int lh
    if rule == R_INIT:
        dst.p[v] = 0
        dst.l[v] = 0
        dst.nl[v] = 0
        dst.s[v] = 0
    elif rule == R_SCP:
        lh = level_hat(L, src, v)
        dst.l[v] = lh
        dst.nl[v] = lh
        dst.p[v] = parent_hat(L, src, v, lh)
    elif rule == R_LPP:
        dst.s[v] = 1
        dst.nl[v] = src.nl[L.nbr[v][src.p[v] - 1]] + 1
    elif rule == R_EP:
        dst.s[v] = 0
        dst.l[v] = src.nl[v]
    elif rule == R_LC:
        dst.nl[v] = src.l[v]
    elif rule == R_DYN:
        dst.s[v] = 1
        dst.nl[v] = level_hat(L, src, v)


cdef inline int moves(const Lay* L, const St* st, Move* out) noexcept nogil:
    cdef int v, r, mask, best, n = 0
    cdef St nxt
    for v in range(L.k):
        if v == L.root and L.fixed:
            continue
        mask = enabled_mask(L, st, v)
        if mask == 0:
            continue
        if L.priority_only:
            best = -1
            for r in range(6):
                if mask & (1 << r) and (best < 0 or L.rank[r] < L.rank[best]):
                    best = r
            mask = 1 << best
        for r in range(6):
            if mask & (1 << r):
                act(L, st, v, r, &nxt)
                out[n].v = v
                out[n].rule = r
                out[n].code = encode(L, &nxt)
                n += 1
    return n


cdef inline int legit(const Lay* L, const St* st) noexcept nogil:
    cdef int v
    for v in range(L.k):
        if v == L.root:
            if st.p[v] != 0 or st.s[v] != 0 or st.l[v] != 0 or st.nl[v] != 0:
                return 0
            continue
        if st.s[v] != 0 or st.l[v] != L.dist[v] or st.p[v] == 0:
            return 0
        if st.l[v] != st.l[L.nbr[v][st.p[v] - 1]] + 1:
            return 0
    return 1


cdef inline int loop_free(const Lay* L, const St* st) noexcept nogil:
    cdef int start, v, steps
    for start in range(L.k):
        v = start
        steps = 0
        while v != L.root and st.p[v] != 0:
            v = L.nbr[v][st.p[v] - 1]
            steps += 1
            if steps > L.k:
                return 0
    return 1


cdef inline int coherent(const Lay* L, const St* st) noexcept nogil:
    cdef int v, u
    for v in range(L.k):
        if v == L.root:
            if st.l[v] != 0 or st.s[v] != 0:
                return 0
            continue
        if st.p[v] != 0:
            u = L.nbr[v][st.p[v] - 1]
            if not (st.l[u] + 1 <= st.l[v] and st.nl[v] >= st.l[v]):
                return 0
    return 1


def successors(dict layout, int cap, uint64_t code, bint priority_only=True):
    cdef Lay L
    cdef St st
    cdef Move buf[MAXMOVES]
    make_layout(&L, layout, cap, priority_only, 0)
    decode(&L, code, &st)
    cdef int n = moves(&L, &st, buf), i
    out = []
    escapes = 0
    for i in range(n):
        if buf[i].code < 0:
            escapes += 1
        else:
            out.append((buf[i].v, buf[i].rule, buf[i].code))
    return out, escapes


# --- growable depth-first stack ---------------------------------------------

cdef struct Frame:
    uint64_t code
    int next


cdef struct Stack:
    Frame* data
    size_t n
    size_t cap


cdef int push(Stack* s, uint64_t code) except -1 nogil:
    cdef Frame* grown
    if s.n == s.cap:
        s.cap = s.cap * 2 if s.cap else 1024
        grown = <Frame*>realloc(s.data, s.cap * sizeof(Frame))
        if grown == NULL:
            with gil:
                raise MemoryError()
        s.data = grown
    s.data[s.n].code = code
    s.data[s.n].next = 0
    s.n += 1
    return 0


cdef inline int expand(const Lay* L, uint64_t code, Move* buf) noexcept nogil:
    """In-cap successors of a non-legitimate state; legitimate states are sinks."""
    cdef St st
    decode(L, code, &st)
    if legit(L, &st):
        return 0
    cdef int n = moves(L, &st, buf), i, m = 0
    for i in range(n):
        if buf[i].code >= 0:
            buf[m] = buf[i]
            m += 1
    return m


cdef list path_cycle(Stack* s, uint64_t w):
    cdef size_t i = s.n
    while i > 0:
        i -= 1
        if s.data[i].code == w:
            break
    return [s.data[j].code for j in range(i, s.n)]


def scan_convergence(dict layout, int cap, bint priority_only=True, uint64_t fair_limit=0):
    """See ``_pykernel.scan_convergence``; identical result dictionary."""
    cdef Lay L
    make_layout(&L, layout, cap, priority_only, 0)
    cdef uint64_t n = L.size, code
    cdef St st
    cdef Move buf[MAXMOVES]
    cdef int m, i, esc, any_in
    cdef uint64_t legit_count = 0, esc_states = 0, esc_moves = 0
    cdef int64_t deadlock = -1

    with nogil:
        for code in range(n):
            decode(&L, code, &st)
            if legit(&L, &st):
                legit_count += 1
                continue
            m = moves(&L, &st, buf)
            esc = 0
            any_in = 0
            for i in range(m):
                if buf[i].code < 0:
                    esc += 1
                else:
                    any_in = 1
            if esc:
                esc_states += 1
                esc_moves += esc
            if m == 0 and deadlock < 0:
                deadlock = code

    res = {
        "states": n,
        "legitimate": legit_count,
        "escaping_states": esc_states,
        "escaping_moves": esc_moves,
        "deadlock": None if deadlock < 0 else deadlock,
        "cycle": None,
        "fair_computed": n <= fair_limit,
        "fair_scc": None,
        "fair_scc_size": 0,
    }
    if n <= fair_limit:
        _tarjan(&L, res)
    else:
        res["cycle"] = _color_dfs(&L)
    return res


cdef object _color_dfs(const Lay* L):
    cdef uint64_t n = L.size, start, v, w
    cdef uint8_t* color = <uint8_t*>calloc(n, 1)
    if color == NULL:
        raise MemoryError()
    cdef Stack s
    s.data = NULL
    s.n = 0
    s.cap = 0
    cdef Move buf[MAXMOVES]
    cdef int m
    cdef object found = None
    try:
        for start in range(n):
            if color[start]:
                continue
            color[start] = 1
            push(&s, start)
            while s.n:
                v = s.data[s.n - 1].code
                m = expand(L, v, buf)
                if s.data[s.n - 1].next < m:
                    w = <uint64_t>buf[s.data[s.n - 1].next].code
                    s.data[s.n - 1].next += 1
                    if color[w] == 1:
                        found = path_cycle(&s, w)
                        return found
                    if color[w] == 0:
                        color[w] = 1
                        push(&s, w)
                    continue
                color[v] = 2
                s.n -= 1
        return None
    finally:
        free(color)
        free(s.data)


cdef int _tarjan(const Lay* L, dict res) except -1:
    cdef uint64_t n = L.size, start, v, w, u, x
    cdef uint32_t* index = <uint32_t*>calloc(n, sizeof(uint32_t))
    cdef uint32_t* low = <uint32_t*>calloc(n, sizeof(uint32_t))
    cdef uint8_t* flags = <uint8_t*>calloc(n, 1)
    cdef uint64_t* comp = <uint64_t*>malloc(n * sizeof(uint64_t))
    cdef uint64_t* members
    cdef uint64_t best
    cdef size_t top = 0, size, j
    cdef uint32_t counter = 1, cid
    cdef Stack s
    s.data = NULL
    s.n = 0
    s.cap = 0
    cdef Move buf[MAXMOVES]
    cdef int m, i, k
    cdef int disabled[MAXN]
    cdef int moved[MAXN]
    cdef St st
    cdef bint fair
    if index == NULL or low == NULL or flags == NULL or comp == NULL:
        free(index); free(low); free(flags); free(comp)
        raise MemoryError()
    try:
        for start in range(n):
            if index[start]:
                continue
            index[start] = counter
            low[start] = counter
            counter += 1
            comp[top] = start
            top += 1
            flags[start] |= F_STACK | F_PATH
            push(&s, start)
            while s.n:
                v = s.data[s.n - 1].code
                m = expand(L, v, buf)
                if s.data[s.n - 1].next < m:
                    w = <uint64_t>buf[s.data[s.n - 1].next].code
                    s.data[s.n - 1].next += 1
                    if not index[w]:
                        index[w] = counter
                        low[w] = counter
                        counter += 1
                        comp[top] = w
                        top += 1
                        flags[w] |= F_STACK | F_PATH
                        push(&s, w)
                    elif flags[w] & F_STACK:
                        if index[w] < low[v]:
                            low[v] = index[w]
                        if res["cycle"] is None and flags[w] & F_PATH:
                            res["cycle"] = path_cycle(&s, w)
                    continue
                s.n -= 1
                flags[v] &= ~F_PATH
                if s.n:
                    u = s.data[s.n - 1].code
                    if low[v] < low[u]:
                        low[u] = low[v]
                if low[v] != index[v]:
                    continue
                cid = index[v]
                size = 0
                while True:
                    top -= 1
                    x = comp[top]
                    flags[x] &= ~F_STACK
                    flags[x] |= F_DONE
                    low[x] = cid
                    size += 1
                    if x == v:
                        break
                # the component just popped still sits in comp[top:top + size]
                members = comp + top
                if size < 2 or res["fair_scc"] is not None:
                    continue
                for k in range(L.k):
                    disabled[k] = 1 if (k == L.root and L.fixed) else 0
                    moved[k] = 0
                for j in range(size):
                    x = members[j]
                    decode(L, x, &st)
                    for k in range(L.k):
                        if not (k == L.root and L.fixed) and enabled_mask(L, &st, k) == 0:
                            disabled[k] = 1
                    m = expand(L, x, buf)
                    for i in range(m):
                        w = <uint64_t>buf[i].code
                        if (flags[w] & F_DONE) and low[w] == cid:
                            moved[buf[i].v] = 1
                fair = True
                for k in range(L.k):
                    if not (disabled[k] or moved[k]):
                        fair = False
                if fair:
                    best = members[0]
                    for j in range(size):
                        if members[j] < best:
                            best = members[j]
                    res["fair_scc"] = best
                    res["fair_scc_size"] = size
    finally:
        free(index); free(low); free(flags); free(comp)
        free(s.data)
    return 0


def scan_loop_free(dict layout, int cap, bint coherent_only=False, bint priority_only=True):
    """See ``_pykernel.scan_loop_free``."""
    cdef Lay L
    make_layout(&L, layout, cap, priority_only, 1)
    cdef uint64_t code, checked = 0
    cdef St st, nxt
    cdef Move buf[MAXMOVES]
    cdef int m, i
    cdef int64_t wit = -1
    cdef int mover = -1
    with nogil:
        for code in range(L.size):
            decode(&L, code, &st)
            if not loop_free(&L, &st):
                continue
            if coherent_only and not coherent(&L, &st):
                continue
            checked += 1
            m = moves(&L, &st, buf)
            for i in range(m):
                act(&L, &st, buf[i].v, buf[i].rule, &nxt)
                if not loop_free(&L, &nxt):
                    wit = code
                    mover = buf[i].v
                    break
            if wit >= 0:
                break
    return checked, (None if wit < 0 else wit), mover
