"""Compiled kernels for tree growth and prediction.

Layout conventions shared by both growers:
  * ``Xt`` is the training matrix transposed to (d, n) so each feature's
    values are contiguous.
  * ``order`` buffers are (d, n): row f holds the node's sample indices
    sorted by feature f. Splits partition every row of the buffer stably,
    so nothing is re-sorted below the root.
Trees are grown level by level with ping-pong order buffers; leaves simply
stop contributing segments to the next level.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def grow_boosted_tree(Xt, order0, g, h, max_depth, lam, gamma, lr, feat, thr, val, contrib):
    """One boosting round: fit a depth-capped tree to (g, h).

    Nodes live in a complete-binary layout: node s has children 2s+1 and
    2s+2; feat[s] == -1 marks a leaf. Leaf weights (-G/(H+lam), scaled by
    the learning rate) are written to ``val`` and accumulated per sample
    into ``contrib``.
    """
    d, n = Xt.shape
    cur = order0.copy()
    nxt = np.empty_like(cur)
    max_segs = 1 << max_depth
    s_start = np.empty(max_segs, np.int64)
    s_end = np.empty(max_segs, np.int64)
    s_slot = np.empty(max_segs, np.int64)
    t_start = np.empty(max_segs, np.int64)
    t_end = np.empty(max_segs, np.int64)
    t_slot = np.empty(max_segs, np.int64)
    n_seg = 1
    s_start[0] = 0
    s_end[0] = n
    s_slot[0] = 0
    goes_left = np.zeros(n, np.bool_)

    for depth in range(max_depth + 1):
        if n_seg == 0:
            break
        n_next = 0
        for s in range(n_seg):
            start, end, slot = s_start[s], s_end[s], s_slot[s]
            m = end - start
            G = 0.0
            H = 0.0
            for i in range(start, end):
                r = cur[0, i]
                G += g[r]
                H += h[r]

            best_gain = 0.0
            best_f = -1
            best_thr = 0.0
            if depth < max_depth and m >= 2:
                den_p = H + lam
                parent_term = G * G / den_p if den_p > 0.0 else 0.0
                for f in range(d):
                    GL = 0.0
                    HL = 0.0
                    for i in range(start, end - 1):
                        r = cur[f, i]
                        GL += g[r]
                        HL += h[r]
                        v = Xt[f, r]
                        vn = Xt[f, cur[f, i + 1]]
                        if vn > v:
                            dl = HL + lam
                            dr = (H - HL) + lam
                            if dl > 0.0 and dr > 0.0:
                                GR = G - GL
                                gain = 0.5 * (GL * GL / dl + GR * GR / dr - parent_term) - gamma
                                if gain > best_gain:
                                    best_gain = gain
                                    best_f = f
                                    t = 0.5 * (v + vn)
                                    if t >= vn:  # adjacent floats
                                        t = v
                                    best_thr = t

            if best_f < 0 or not (best_gain > 0.0):
                den = H + lam
                w = (-G / den) * lr if den > 0.0 else 0.0
                val[slot] = w
                for i in range(start, end):
                    contrib[cur[0, i]] = w
                continue

            feat[slot] = best_f
            thr[slot] = best_thr
            nL = 0
            for i in range(start, end):
                r = cur[0, i]
                gl = Xt[best_f, r] <= best_thr
                goes_left[r] = gl
                if gl:
                    nL += 1
            for f in range(d):
                li = start
                ri = start + nL
                for i in range(start, end):
                    r = cur[f, i]
                    if goes_left[r]:
                        nxt[f, li] = r
                        li += 1
                    else:
                        nxt[f, ri] = r
                        ri += 1
            t_start[n_next] = start
            t_end[n_next] = start + nL
            t_slot[n_next] = 2 * slot + 1
            n_next += 1
            t_start[n_next] = start + nL
            t_end[n_next] = end
            t_slot[n_next] = 2 * slot + 2
            n_next += 1

        tmp = cur
        cur = nxt
        nxt = tmp
        for s in range(n_next):
            s_start[s] = t_start[s]
            s_end[s] = t_end[s]
            s_slot[s] = t_slot[s]
        n_seg = n_next


@njit(cache=True)
def grow_gini_tree_impl(
    Xt,
    order0,
    y,
    max_depth,
    min_samples_split,
    use_pool,
    pool,
    feat,
    thr,
    left,
    right,
    value,
):
    """CART growth on Gini impurity with dynamically allocated nodes.

    ``pool`` holds a pre-drawn ascending feature subset per node id (random
    forests); with use_pool == False every feature is a candidate. Returns
    the number of nodes written.
    """
    d, n = Xt.shape
    cur = order0.copy()
    nxt = np.empty_like(cur)
    max_segs = n
    s_start = np.empty(max_segs, np.int64)
    s_end = np.empty(max_segs, np.int64)
    s_node = np.empty(max_segs, np.int64)
    t_start = np.empty(max_segs, np.int64)
    t_end = np.empty(max_segs, np.int64)
    t_node = np.empty(max_segs, np.int64)
    goes_left = np.zeros(n, np.bool_)
    cap = feat.shape[0]

    n_nodes = 1
    n_seg = 1
    s_start[0] = 0
    s_end[0] = n
    s_node[0] = 0
    depth = 0

    while n_seg > 0:
        n_next = 0
        for s in range(n_seg):
            start, end, node = s_start[s], s_end[s], s_node[s]
            m = end - start
            P = 0.0
            for i in range(start, end):
                P += y[cur[0, i]]
            value[node] = P / m
            if depth >= max_depth or m < min_samples_split or P == 0.0 or P == m:
                continue

            best_gain = 0.0
            best_f = -1
            best_thr = 0.0
            parent = 2.0 * P * (m - P) / (m * m)
            k = pool.shape[1] if use_pool else d
            for fi in range(k):
                f = pool[node, fi] if use_pool else fi
                posL = 0.0
                for i in range(start, end - 1):
                    r = cur[f, i]
                    posL += y[r]
                    v = Xt[f, r]
                    vn = Xt[f, cur[f, i + 1]]
                    if vn > v:
                        cntL = float(i - start + 1)
                        cntR = float(m) - cntL
                        posR = P - posL
                        child = (
                            2.0
                            * (posL * (cntL - posL) / cntL + posR * (cntR - posR) / cntR)
                            / m
                        )
                        gain = parent - child
                        if gain > best_gain:
                            best_gain = gain
                            best_f = f
                            t = 0.5 * (v + vn)
                            if t >= vn:
                                t = v
                            best_thr = t

            if best_f < 0 or not (best_gain > 0.0) or n_nodes + 2 > cap:
                continue

            feat[node] = best_f
            thr[node] = best_thr
            lid = n_nodes
            rid = n_nodes + 1
            n_nodes += 2
            left[node] = lid
            right[node] = rid

            nL = 0
            for i in range(start, end):
                r = cur[0, i]
                gl = Xt[best_f, r] <= best_thr
                goes_left[r] = gl
                if gl:
                    nL += 1
            for f in range(d):
                li = start
                ri = start + nL
                for i in range(start, end):
                    r = cur[f, i]
                    if goes_left[r]:
                        nxt[f, li] = r
                        li += 1
                    else:
                        nxt[f, ri] = r
                        ri += 1
            t_start[n_next] = start
            t_end[n_next] = start + nL
            t_node[n_next] = lid
            n_next += 1
            t_start[n_next] = start + nL
            t_end[n_next] = end
            t_node[n_next] = rid
            n_next += 1

        tmp = cur
        cur = nxt
        nxt = tmp
        for s in range(n_next):
            s_start[s] = t_start[s]
            s_end[s] = t_end[s]
            s_node[s] = t_node[s]
        n_seg = n_next
        depth += 1

    return n_nodes


@njit(cache=True)
def predict_flat_tree(X, feature, threshold, left, right, value, out):
    n = X.shape[0]
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
