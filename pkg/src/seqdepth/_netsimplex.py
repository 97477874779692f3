"""Primal network simplex on a strongly feasible spanning tree.

Array-based transportation solver: sources 0..n_a-1, sinks n_a..n_a+n_b-1,
one arc per (source, sink) pair, plus one artificial arc per node to a root
node appended at index n_a+n_b.  Supplies and costs are integers so pivoting
terminates exactly; callers re-derive float flows and potentials on the
optimal tree.

The pivoting rules (block entering search, leaving arc by minimum residual
scanning the cycle in reverse, thread-index tree updates) follow the classic
strongly-feasible-tree formulation; every basis on the way is strongly
feasible, which rules out cycling under degeneracy.
"""

import numpy as np
from numba import njit

NONE = -1

STATUS_OK = 0
STATUS_INFEASIBLE = 1
STATUS_PIVOT_LIMIT = 2


@njit(cache=True)
def _solve_kernel(S, T, C, U, D, n_nodes, n_real, faux_inf):
    """Run the pivot loop; returns (x, parent, edge, status).

    S, T: int64 arc tails/heads, real arcs first then n_nodes artificial arcs.
    C: int64 arc costs.  U: int64 arc capacities.  D: int64 node demands
    (negative = supply), sum exactly zero.  root = n_nodes.
    """
    n_arcs = S.size
    root = n_nodes

    # Initial strongly feasible tree: every node hangs off the root by its
    # artificial arc carrying |demand|.
    x = np.zeros(n_arcs, dtype=np.int64)
    pi = np.empty(n_nodes + 1, dtype=np.int64)
    parent = np.empty(n_nodes + 1, dtype=np.int64)
    edge = np.empty(n_nodes + 1, dtype=np.int64)
    size = np.empty(n_nodes + 1, dtype=np.int64)
    nxt = np.empty(n_nodes + 1, dtype=np.int64)
    prv = np.empty(n_nodes + 1, dtype=np.int64)
    last = np.empty(n_nodes + 1, dtype=np.int64)
    for v in range(n_nodes):
        x[n_real + v] = D[v] if D[v] > 0 else -D[v]
        pi[v] = faux_inf if D[v] <= 0 else -faux_inf
        parent[v] = root
        edge[v] = n_real + v
        size[v] = 1
        nxt[v] = v + 1 if v < n_nodes - 1 else root
        prv[v] = v - 1 if v > 0 else root
        last[v] = v
    pi[root] = 0
    parent[root] = NONE
    edge[root] = NONE
    size[root] = n_nodes + 1
    nxt[root] = 0
    prv[root] = n_nodes - 1
    last[root] = n_nodes - 1

    # cycle buffers (worst case: two root paths plus the entering arc)
    cap = 2 * (n_nodes + 1) + 1
    Wn = np.empty(cap, dtype=np.int64)
    We = np.empty(cap, dtype=np.int64)

    if n_real == 0:
        return x, parent, edge, STATUS_OK

    B = int(np.ceil(np.sqrt(n_real)))  # pivot block size
    M_blocks = (n_real + B - 1) // B
    m_empty = 0
    f = 0
    pivot_limit = 200 * (n_arcs + n_nodes) + 100000
    pivots = 0

    while m_empty < M_blocks:
        # entering arc: best reduced cost within the next block of real arcs
        l = f + B
        best = NONE
        best_rc = np.int64(0)
        if l <= n_real:
            for i in range(f, l):
                rc = C[i] - pi[S[i]] + pi[T[i]]
                if x[i] != 0:
                    rc = -rc
                if rc < best_rc:
                    best_rc = rc
                    best = i
        else:
            l -= n_real
            for i in range(f, n_real):
                rc = C[i] - pi[S[i]] + pi[T[i]]
                if x[i] != 0:
                    rc = -rc
                if rc < best_rc:
                    best_rc = rc
                    best = i
            for i in range(l):
                rc = C[i] - pi[S[i]] + pi[T[i]]
                if x[i] != 0:
                    rc = -rc
                if rc < best_rc:
                    best_rc = rc
                    best = i
        f = l
        if best == NONE:
            m_empty += 1
            continue
        m_empty = 0
        pivots += 1
        if pivots > pivot_limit:
            return x, parent, edge, STATUS_PIVOT_LIMIT

        i = best
        if x[i] == 0:
            p, q = S[i], T[i]
        else:
            p, q = T[i], S[i]

        # find_apex: lowest common ancestor of p and q by size climbing
        pp, qq = p, q
        size_p = size[pp]
        size_q = size[qq]
        while True:
            while size_p < size_q:
                pp = parent[pp]
                size_p = size[pp]
            while size_p > size_q:
                qq = parent[qq]
                size_q = size[qq]
            if size_p == size_q:
                if pp != qq:
                    pp = parent[pp]
                    size_p = size[pp]
                    qq = parent[qq]
                    size_q = size[qq]
                else:
                    break
        w = pp

        # cycle containing arc i, oriented p -> q: path w..p reversed, then
        # arc i, then path q..w
        n_cycle = 0
        v = p
        while v != w:
            Wn[n_cycle] = v
            We[n_cycle] = edge[v]
            n_cycle += 1
            v = parent[v]
        Wn[n_cycle] = w
        n_cycle += 1
        # reverse nodes [0, n_cycle) and edges [0, n_cycle-1)
        lo, hi = 0, n_cycle - 1
        while lo < hi:
            tmp = Wn[lo]
            Wn[lo] = Wn[hi]
            Wn[hi] = tmp
            lo += 1
            hi -= 1
        lo, hi = 0, n_cycle - 2
        while lo < hi:
            tmp = We[lo]
            We[lo] = We[hi]
            We[hi] = tmp
            lo += 1
            hi -= 1
        We[n_cycle - 1] = i
        v = q
        while v != w:
            Wn[n_cycle] = v
            We[n_cycle] = edge[v]
            n_cycle += 1
            v = parent[v]
        # nodes: w..p then q..(w excluded); We[k] pairs with Wn[k] so that the
        # paired node is the tail of the traversal across that arc
        n_edges = n_cycle

        # leaving arc: minimum residual, scanning the cycle reversed; ties
        # keep the first seen in reversed order
        j = NONE
        s = NONE
        min_res = np.int64(0)
        for k in range(n_edges - 1, -1, -1):
            e = We[k]
            nn = Wn[k]
            if S[e] == nn:
                res = U[e] - x[e]
            else:
                res = x[e]
            if j == NONE or res < min_res:
                min_res = res
                j = e
                s = nn
        t = T[j] if S[j] == s else S[j]

        # augment along the cycle
        if min_res > 0:
            for k in range(n_edges):
                e = We[k]
                if S[e] == Wn[k]:
                    x[e] += min_res
                else:
                    x[e] -= min_res

        if i == j:
            continue

        if parent[t] != s:
            ss = s
            s = t
            t = ss
        # ensure q lands in the subtree rooted at t: compare cycle positions
        idx_i = -1
        idx_j = -1
        for k in range(n_edges):
            if We[k] == i and idx_i < 0:
                idx_i = k
            if We[k] == j and idx_j < 0:
                idx_j = k
        if idx_i > idx_j:
            qq2 = q
            q = p
            p = qq2

        # remove_edge(s, t)
        size_t = size[t]
        prev_t = prv[t]
        last_t = last[t]
        next_last_t = nxt[last_t]
        parent[t] = NONE
        edge[t] = NONE
        nxt[prev_t] = next_last_t
        prv[next_last_t] = prev_t
        nxt[last_t] = t
        prv[t] = last_t
        ss = s
        while ss != NONE:
            size[ss] -= size_t
            if last[ss] == last_t:
                last[ss] = prev_t
            ss = parent[ss]

        # make_root(q): reverse the parent pointers on the path q..subtree root
        n_anc = 0
        v = q
        while v != NONE:
            Wn[n_anc] = v  # reuse buffer for the ancestor list
            n_anc += 1
            v = parent[v]
        lo, hi = 0, n_anc - 1
        while lo < hi:
            tmp = Wn[lo]
            Wn[lo] = Wn[hi]
            Wn[hi] = tmp
            lo += 1
            hi -= 1
        for a in range(n_anc - 1):
            pp2 = Wn[a]
            qq2 = Wn[a + 1]
            size_p = size[pp2]
            last_p = last[pp2]
            prev_q = prv[qq2]
            last_q = last[qq2]
            next_last_q = nxt[last_q]
            parent[pp2] = qq2
            parent[qq2] = NONE
            edge[pp2] = edge[qq2]
            edge[qq2] = NONE
            size[pp2] = size_p - size[qq2]
            size[qq2] = size_p
            nxt[prev_q] = next_last_q
            prv[next_last_q] = prev_q
            nxt[last_q] = qq2
            prv[qq2] = last_q
            if last_p == last_q:
                last[pp2] = prev_q
                last_p = prev_q
            prv[pp2] = last_q
            nxt[last_q] = pp2
            nxt[last_p] = qq2
            prv[qq2] = last_p
            last[qq2] = last_p

        # add_edge(i, p, q): attach subtree rooted at q under p
        last_p = last[p]
        next_last_p = nxt[last_p]
        size_q = size[q]
        last_q = last[q]
        parent[q] = p
        edge[q] = i
        nxt[last_p] = q
        prv[q] = last_p
        prv[next_last_p] = last_q
        nxt[last_q] = next_last_p
        pp2 = p
        while pp2 != NONE:
            size[pp2] += size_q
            if last[pp2] == last_p:
                last[pp2] = last_q
            pp2 = parent[pp2]

        # update_potentials for the reattached subtree
        if q == T[i]:
            dpi = pi[p] - C[i] - pi[q]
        else:
            dpi = pi[p] + C[i] - pi[q]
        v = q
        l_q = last[q]
        pi[v] += dpi
        while v != l_q:
            v = nxt[v]
            pi[v] += dpi

    for v in range(n_nodes):
        if x[n_real + v] != 0:
            return x, parent, edge, STATUS_INFEASIBLE
    return x, parent, edge, STATUS_OK


@njit(cache=True)
def _tree_flows(parent, edge, S, T, n_nodes, n_real, demand):
    """Flows on the basis tree for float node demands.

    Peels leaves toward the root; each node's subtree imbalance rides on the
    arc to its parent.  Artificial arcs (to the root) receive the component
    imbalance; wherever that is not ~0 the float refit is invalid and the
    caller falls back to the integer plan.  Returns (flow, art_imbalance).
    """
    flow = np.zeros(S.size, dtype=np.float64)
    acc = demand.astype(np.float64).copy()
    child_count = np.zeros(n_nodes + 1, dtype=np.int64)
    for v in range(n_nodes):
        child_count[parent[v]] += 1
    stack = np.empty(n_nodes, dtype=np.int64)
    n_stack = 0
    for v in range(n_nodes):
        if child_count[v] == 0:
            stack[n_stack] = v
            n_stack += 1
    art_imbalance = 0.0
    while n_stack > 0:
        n_stack -= 1
        v = stack[n_stack]
        e = edge[v]
        p = parent[v]
        s_v = acc[v]
        if T[e] == v:
            flow[e] = s_v
        else:
            flow[e] = -s_v
        if e >= n_real and abs(s_v) > abs(art_imbalance):
            art_imbalance = s_v
        acc[p] += s_v
        child_count[p] -= 1
        if child_count[p] == 0 and p != n_nodes:
            stack[n_stack] = p
            n_stack += 1
    return flow, art_imbalance


@njit(cache=True)
def _tree_potentials(parent, edge, S, T, n_nodes, arc_cost):
    """Dual potentials y (float) from the basis tree: y_root = 0 and every
    tree arc tail->head satisfies c - y_head + y_tail = 0 exactly."""
    root = n_nodes
    # children adjacency in CSR form
    counts = np.zeros(n_nodes + 2, dtype=np.int64)
    for v in range(n_nodes):
        counts[parent[v] + 1] += 1
    offsets = np.zeros(n_nodes + 2, dtype=np.int64)
    for v in range(1, n_nodes + 2):
        offsets[v] = offsets[v - 1] + counts[v]
    fill = offsets.copy()
    children = np.empty(n_nodes, dtype=np.int64)
    for v in range(n_nodes):
        p = parent[v]
        children[fill[p]] = v
        fill[p] += 1
    y = np.zeros(n_nodes + 1, dtype=np.float64)
    stack = np.empty(n_nodes + 1, dtype=np.int64)
    stack[0] = root
    n_stack = 1
    while n_stack > 0:
        n_stack -= 1
        u = stack[n_stack]
        for k in range(offsets[u], offsets[u + 1]):
            v = children[k]
            e = edge[v]
            if T[e] == v:
                y[v] = y[u] + arc_cost[e]
            else:
                y[v] = y[u] - arc_cost[e]
            stack[n_stack] = v
            n_stack += 1
    return y


def solve_transport(cost_int, sup_int, dem_int):
    """Solve the balanced integer transportation problem.

    cost_int: (n_a, n_b) int64 costs on the integer grid.
    sup_int, dem_int: int64 supplies/demands, equal totals.

    Returns dict with the raw arrays a caller needs for refits.
    """
    n_a = sup_int.size
    n_b = dem_int.size
    n_nodes = n_a + n_b
    n_real = n_a * n_b
    S = np.repeat(np.arange(n_a, dtype=np.int64), n_b)
    T = np.tile(np.arange(n_a, n_nodes, dtype=np.int64), n_a)
    D = np.concatenate([-sup_int, dem_int])
    max_c = int(cost_int.max()) if cost_int.size else 0
    faux_inf = 3 * max(n_nodes * max_c, int(np.abs(D).max(initial=0))) + 1
    nodes = np.arange(n_nodes, dtype=np.int64)
    # artificial arcs: root -> node for positive demand, node -> root otherwise
    S_all = np.concatenate([S, np.where(D > 0, n_nodes, nodes)])
    T_all = np.concatenate([T, np.where(D > 0, nodes, n_nodes)])
    C_all = np.concatenate(
        [cost_int.ravel(), np.full(n_nodes, faux_inf, dtype=np.int64)]
    )
    U_all = np.full(S_all.size, faux_inf, dtype=np.int64)
    x, parent, edge, status = _solve_kernel(
        S_all, T_all, C_all, U_all, D, n_nodes, n_real, faux_inf
    )
    if status == STATUS_INFEASIBLE:
        raise RuntimeError("transport solver: artificial flow at optimum")
    if status == STATUS_PIVOT_LIMIT:
        raise RuntimeError("transport solver: pivot limit exceeded")
    return {
        "x": x,
        "parent": parent,
        "edge": edge,
        "S": S_all,
        "T": T_all,
        "n_nodes": n_nodes,
        "n_real": n_real,
        "faux_inf": faux_inf,
        "n_a": n_a,
        "n_b": n_b,
    }
