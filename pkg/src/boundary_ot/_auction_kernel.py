"""Numba kernels for the Gauss-Seidel transport auction.

Each sink keeps a binary min-heap (keyed by bid, then source id) of the mass
shares it holds.  Sources wait in a FIFO queue seeded in ascending id order.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _less(bid, src, i, j):
    if bid[i] < bid[j]:
        return True
    if bid[i] > bid[j]:
        return False
    return src[i] > src[j]


@njit(cache=True)
def _sift_up(bid, src, amt, k):
    while k > 0:
        parent = (k - 1) >> 1
        if _less(bid, src, k, parent):
            bid[k], bid[parent] = bid[parent], bid[k]
            src[k], src[parent] = src[parent], src[k]
            amt[k], amt[parent] = amt[parent], amt[k]
            k = parent
        else:
            break


@njit(cache=True)
def _sift_down(bid, src, amt, k, size):
    while True:
        left = 2 * k + 1
        if left >= size:
            break
        small = left
        right = left + 1
        if right < size and _less(bid, src, right, left):
            small = right
        if _less(bid, src, small, k):
            bid[k], bid[small] = bid[small], bid[k]
            src[k], src[small] = src[small], src[k]
            amt[k], amt[small] = amt[small], amt[k]
            k = small
        else:
            break


@njit(cache=True)
def _grow(hb, hs, ha):
    n, cap = hb.shape
    nb = np.empty((n, 2 * cap))
    ns = np.empty((n, 2 * cap), dtype=np.int64)
    na = np.empty((n, 2 * cap))
    nb[:, :cap] = hb
    ns[:, :cap] = hs
    na[:, :cap] = ha
    return nb, ns, na


@njit(cache=True)
def run_phase(C, cap, p, hb, hs, ha, size, held, rem, eps, dust, tol, max_bids, bids_done):
    """Bid until every source's remaining mass is below its ``dust`` entry.

    ``tol`` is the absolute slack used for free-capacity and fullness tests.

    Returns ``(hb, hs, ha, bids_done, ok)``; heaps may have been reallocated.
    """
    S, n = C.shape
    queue = np.empty(S, dtype=np.int64)
    inq = np.zeros(S, dtype=np.bool_)
    head = 0
    count = 0
    for s in range(S):
        if rem[s] > dust[s]:
            queue[(head + count) % S] = s
            count += 1
            inq[s] = True
    while count > 0:
        s = queue[head]
        head = (head + 1) % S
        count -= 1
        inq[s] = False
        if rem[s] <= dust[s]:
            continue
        bids_done += 1
        if bids_done > max_bids:
            return hb, hs, ha, bids_done, False
        # best and second best value -C - p
        t1 = 0
        v1 = -np.inf
        v2 = -np.inf
        for t in range(n):
            v = -C[s, t] - p[t]
            if v > v1:
                v2 = v1
                v1 = v
                t1 = t
            elif v > v2:
                v2 = v
        b = p[t1] + (v1 - v2) + eps
        a = rem[s]
        rem[s] = 0.0
        t = t1
        got = 0.0
        free = cap[t] - held[t]
        if free > tol:
            take = a if a < free else free
            got += take
            a -= take
        # displace cheaper holders
        while a > dust[s] and size[t] > 0 and hb[t, 0] < b:
            om = ha[t, 0]
            os = hs[t, 0]
            if os == s:
                # own cheaper share: re-key it at the new bid
                size[t] -= 1
                last = size[t]
                hb[t, 0] = hb[t, last]
                hs[t, 0] = hs[t, last]
                ha[t, 0] = ha[t, last]
                _sift_down(hb[t], hs[t], ha[t], 0, size[t])
                held[t] -= om
                got += om
                continue
            if om <= a:
                a -= om
                got += om
                # pop root
                size[t] -= 1
                last = size[t]
                hb[t, 0] = hb[t, last]
                hs[t, 0] = hs[t, last]
                ha[t, 0] = ha[t, last]
                _sift_down(hb[t], hs[t], ha[t], 0, size[t])
                rem[os] += om
                held[t] -= om
            else:
                ha[t, 0] = om - a
                got += a
                rem[os] += a
                held[t] -= a
                a = 0.0
            if not inq[os] and rem[os] > dust[os]:
                queue[(head + count) % S] = os
                count += 1
                inq[os] = True
        if got > 0.0:
            if size[t] == hb.shape[1]:
                hb, hs, ha = _grow(hb, hs, ha)
            k = size[t]
            hb[t, k] = b
            hs[t, k] = s
            ha[t, k] = got
            size[t] += 1
            _sift_up(hb[t], hs[t], ha[t], k)
            held[t] += got
        if a > 0.0:
            rem[s] += a
            if not inq[s] and rem[s] > dust[s]:
                queue[(head + count) % S] = s
                count += 1
                inq[s] = True
        if held[t] >= cap[t] - tol and size[t] > 0:
            if hb[t, 0] > p[t]:
                p[t] = hb[t, 0]
    return hb, hs, ha, bids_done, True


@njit(cache=True)
def release(C, p, hb, hs, ha, size, held, rem, eps):
    """Drop shares violating eps-CS; cap surviving bids at their eps-CS ceiling."""
    S, n = C.shape
    best = np.empty(S)
    second = np.empty(S)
    arg = np.empty(S, dtype=np.int64)
    for s in range(S):
        b1 = np.inf
        b2 = np.inf
        a1 = 0
        for t in range(n):
            v = C[s, t] + p[t]
            if v < b1:
                b2 = b1
                b1 = v
                a1 = t
            elif v < b2:
                b2 = v
        best[s] = b1
        second[s] = b2
        arg[s] = a1
    for t in range(n):
        k = 0
        m = size[t]
        out = 0
        while k < m:
            s = hs[t, k]
            red = C[s, t] + p[t]
            if red > best[s] + eps:
                rem[s] += ha[t, k]
                held[t] -= ha[t, k]
            else:
                other = second[s] if arg[s] == t else best[s]
                ceil = other - C[s, t] + eps
                hb[t, out] = hb[t, k] if hb[t, k] < ceil else ceil
                hs[t, out] = s
                ha[t, out] = ha[t, k]
                out += 1
            k += 1
        size[t] = out
        # heapify
        for k in range(out // 2 - 1, -1, -1):
            _sift_down(hb[t], hs[t], ha[t], k, out)
