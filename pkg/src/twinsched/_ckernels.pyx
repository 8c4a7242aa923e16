# distutils: language = c++
# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; mirror of ``_pykernels`` operation for operation.

Do not build with -ffast-math: results must match the Python reference
bit for bit.
"""

from libc.stdint cimport uint64_t, int64_t
from libcpp.unordered_map cimport unordered_map
from libcpp.vector cimport vector
from cython.operator cimport dereference as deref

BACKEND = "compiled"
MAX_TASKS = 15


cdef class QStore:
    cdef unordered_map[uint64_t, size_t] index
    cdef vector[uint64_t] order
    cdef vector[double] vals
    cdef readonly int n_actions

    def __cinit__(self, int n_actions):
        if n_actions < 1 or n_actions > MAX_TASKS:
            raise ValueError(f"n_actions must be in [1, {MAX_TASKS}], got {n_actions}")
        self.n_actions = n_actions

    def __len__(self):
        return self.order.size()

    def __contains__(self, key):
        return self.index.count(<uint64_t>key) > 0

    cdef inline double* find(self, uint64_t key) noexcept nogil:
        cdef unordered_map[uint64_t, size_t].iterator it = self.index.find(key)
        if it == self.index.end():
            return NULL
        return &self.vals[deref(it).second]

    cdef inline double* ensure(self, uint64_t key) noexcept nogil:
        cdef unordered_map[uint64_t, size_t].iterator it = self.index.find(key)
        cdef size_t off
        cdef int a
        if it != self.index.end():
            return &self.vals[deref(it).second]
        off = self.vals.size()
        for a in range(self.n_actions):
            self.vals.push_back(0.0)
        self.index[key] = off
        self.order.push_back(key)
        return &self.vals[off]

    def get(self, key, int action):
        cdef double* row = self.find(<uint64_t>key)
        return 0.0 if row == NULL else row[action]

    def set(self, key, int action, double value):
        self.ensure(<uint64_t>key)[action] = value

    def row(self, key):
        cdef double* row = self.find(<uint64_t>key)
        if row == NULL:
            return None
        return [row[a] for a in range(self.n_actions)]

    def set_row(self, key, values):
        values = [float(v) for v in values]
        if len(values) != self.n_actions:
            raise ValueError(f"row length {len(values)} != {self.n_actions}")
        cdef double* row = self.ensure(<uint64_t>key)
        for a in range(self.n_actions):
            row[a] = values[a]

    def keys(self):
        return [k for k in self.order]

    def copy(self):
        cdef QStore out = QStore(self.n_actions)
        out.index = self.index
        out.order = self.order
        out.vals = self.vals
        return out


cdef inline int best_of(double* row, int* valid, int m) noexcept nogil:
    cdef int best = valid[0]
    cdef double best_v
    cdef int i
    if row == NULL:
        return best
    best_v = row[best]
    for i in range(1, m):
        if row[valid[i]] > best_v:
            best = valid[i]
            best_v = row[best]
    return best


cdef inline double max_next(QStore store, uint64_t key, int* valid, int m) noexcept nogil:
    cdef double* row
    cdef double v
    cdef int i
    if m == 0:
        return 0.0
    row = store.find(key)
    if row == NULL:
        return 0.0
    v = row[valid[0]]
    for i in range(1, m):
        if row[valid[i]] > v:
            v = row[valid[i]]
    return v


cdef inline void td(QStore store, uint64_t key, int a, double reward, uint64_t next_key,
                    int* next_valid, int m, double lr, double gamma) noexcept nogil:
    # next-state lookup first: ensure() may reallocate the value buffer
    cdef double target = reward + gamma * max_next(store, next_key, next_valid, m)
    cdef double* row = store.ensure(key)
    cdef double q = row[a]
    row[a] = q + lr * (target - q)


cdef inline int drop(int* src, int m, int a, int* dst) noexcept nogil:
    cdef int i, k = 0
    for i in range(m):
        if src[i] != a:
            dst[k] = src[i]
            k += 1
    return k


cdef void episodes_nogil(QStore store, const double[::1] data_time, const double[::1] exec_time,
                         const double[::1] deadline, double penalty, double lr, double gamma,
                         const double[::1] eps, const double[:, :, ::1] uniforms, int phi,
                         int64_t[:, ::1] orders, double[::1] returns,
                         int64_t* real_steps, int64_t* twin_steps) noexcept nogil:
    cdef int n = data_time.shape[0]
    cdef int n_ep = eps.shape[0]
    cdef int e, j, i, t, s, m, k, a, b, tmp
    cdef int valid[16]
    cdef int next_valid[16]
    cdef int pool[16]
    cdef int t_valid[16]
    cdef int nm
    cdef uint64_t key, next_key
    cdef double ready, comp, total, epsilon, r_ready, r_comp, miss, reward
    cdef double t_ready, t_comp, t_miss, t_reward
    for e in range(n_ep):
        epsilon = eps[e]
        for i in range(n):
            valid[i] = i
        key = 0
        ready = 0.0
        comp = 0.0
        total = 0.0
        for j in range(n):
            m = n - j
            if uniforms[e, j, 0] < epsilon:
                i = <int>(uniforms[e, j, 1] * m)
                if i > m - 1:
                    i = m - 1
                a = valid[i]
            else:
                a = best_of(store.find(key), valid, m)

            r_ready = ready + data_time[a]
            r_comp = (r_ready if r_ready > comp else comp) + exec_time[a]
            miss = 1.0 if r_comp > deadline[a] else 0.0
            reward = -(r_comp + penalty * miss)
            next_key = key | ((<uint64_t>(a + 1)) << (4 * j))
            nm = drop(valid, m, a, next_valid)
            td(store, key, a, reward, next_key, next_valid, nm, lr, gamma)
            real_steps[0] += 1

            if phi > 0:
                k = phi if phi < m else m
                for i in range(m):
                    pool[i] = valid[i]
                for t in range(k):
                    s = <int>(uniforms[e, j, 2 + t] * (m - t))
                    if s > m - t - 1:
                        s = m - t - 1
                    s = t + s
                    tmp = pool[t]
                    pool[t] = pool[s]
                    pool[s] = tmp
                    b = pool[t]
                    t_ready = ready + data_time[b]
                    t_comp = (t_ready if t_ready > comp else comp) + exec_time[b]
                    t_miss = 1.0 if t_comp > deadline[b] else 0.0
                    t_reward = -(t_comp + penalty * t_miss)
                    drop(valid, m, b, t_valid)
                    td(store, key, b, t_reward, key | ((<uint64_t>(b + 1)) << (4 * j)),
                       t_valid, m - 1, lr, gamma)
                    twin_steps[0] += 1

            total += reward
            orders[e, j] = a
            ready = r_ready
            comp = r_comp
            key = next_key
            for i in range(nm):
                valid[i] = next_valid[i]
        returns[e] = total


def run_episodes(QStore store, data_time, exec_time, deadline, double penalty, double lr,
                 double gamma, eps, uniforms, int phi, int64_t[:, ::1] orders,
                 double[::1] returns):
    """Play ``len(eps)`` training episodes in place on ``store``; see ``_pykernels``."""
    cdef const double[::1] dt = data_time
    cdef const double[::1] et = exec_time
    cdef const double[::1] dl = deadline
    cdef const double[::1] ep = eps
    cdef const double[:, :, ::1] u = uniforms
    cdef int64_t real_steps = 0
    cdef int64_t twin_steps = 0
    n = dt.shape[0]
    if n > store.n_actions or et.shape[0] != n or dl.shape[0] != n:
        raise ValueError("task arrays disagree with table size")
    if u.shape[0] != ep.shape[0] or u.shape[1] != n or u.shape[2] != n + 2:
        raise ValueError("uniform block must have shape (episodes, n, n + 2)")
    if orders.shape[0] != ep.shape[0] or orders.shape[1] != n or returns.shape[0] != ep.shape[0]:
        raise ValueError("output buffers have the wrong shape")
    with nogil:
        episodes_nogil(store, dt, et, dl, penalty, lr, gamma, ep, u, phi, orders, returns,
                       &real_steps, &twin_steps)
    return real_steps, twin_steps


def greedy_order(QStore store, int n):
    cdef int valid[16]
    cdef int tmp[16]
    cdef int j, i, a, m
    cdef uint64_t key = 0
    out = []
    for i in range(n):
        valid[i] = i
    for j in range(n):
        m = n - j
        a = best_of(store.find(key), valid, m)
        out.append(a)
        drop(valid, m, a, tmp)
        for i in range(m - 1):
            valid[i] = tmp[i]
        key |= (<uint64_t>(a + 1)) << (4 * j)
    return out


def average_stores(stores):
    """Entrywise mean with absent rows as zero, summed in list order."""
    cdef QStore first = stores[0]
    cdef QStore s, out
    cdef int n = first.n_actions
    cdef int a
    cdef size_t i
    cdef uint64_t key
    cdef double* acc
    cdef double* row
    cdef double denom = len(stores)
    for s in stores:
        if s.n_actions != n:
            raise ValueError("cannot average tables with different action counts")
    out = QStore(n)
    for s in stores:
        for i in range(s.order.size()):
            out.ensure(s.order[i])
    for i in range(out.order.size()):
        key = out.order[i]
        acc = &out.vals[i * n]
        row = first.find(key)
        for a in range(n):
            acc[a] = 0.0 if row == NULL else row[a]
        for s in stores[1:]:
            row = s.find(key)
            for a in range(n):
                acc[a] = acc[a] + (0.0 if row == NULL else row[a])
        for a in range(n):
            acc[a] = acc[a] / denom
    return out


cdef struct Search:
    int n
    const double* dt
    const double* et
    const double* dl
    double penalty
    double best_cost
    int used[16]
    int prefix[16]
    int best[16]


cdef void dfs(Search* st, int depth, double ready, double comp, double cost) noexcept nogil:
    cdef int a, i
    cdef double r, c, step
    if cost >= st.best_cost:
        return
    if depth == st.n:
        st.best_cost = cost
        for i in range(st.n):
            st.best[i] = st.prefix[i]
        return
    for a in range(st.n):
        if st.used[a]:
            continue
        r = ready + st.dt[a]
        c = (r if r > comp else comp) + st.et[a]
        step = c + st.penalty * (1.0 if c > st.dl[a] else 0.0)
        st.used[a] = 1
        st.prefix[depth] = a
        dfs(st, depth + 1, r, c, cost + step)
        st.used[a] = 0


def brute_force(data_time, exec_time, deadline, double penalty):
    """Exact lexicographic-first minimiser over all permutations."""
    cdef const double[::1] dt = data_time
    cdef const double[::1] et = exec_time
    cdef const double[::1] dl = deadline
    cdef Search st
    cdef int i
    st.n = dt.shape[0]
    if st.n < 1 or st.n > MAX_TASKS:
        raise ValueError("task count out of range")
    st.dt = &dt[0]
    st.et = &et[0]
    st.dl = &dl[0]
    st.penalty = penalty
    st.best_cost = float("inf")
    for i in range(16):
        st.used[i] = 0
    with nogil:
        dfs(&st, 0, 0.0, 0.0, 0.0)
    return [st.best[i] for i in range(st.n)], st.best_cost
