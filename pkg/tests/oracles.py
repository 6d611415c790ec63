"""Reference computations kept independent of the package's code paths."""

from __future__ import annotations

import math
from fractions import Fraction
from itertools import product

import numpy as np


def phase_grid_latencies(T_ms, W_ms, A_ms, channels=3, pdu_us=376, gap_us=400,
                         horizon_ms=300_000, grid_ms=1):
    """Exhaustive latency histogram for a deterministic advertiser.

    Advertising events sit at k*A for every integer k; the scanner's window j
    opens at psi + j*T on channel j mod channels.  Both the scanner phase psi
    (over one channel cycle) and the entry time t (over one advertising
    interval) run over a ``grid_ms`` grid, which makes the pair uniform over
    every relative alignment.  Works window by window rather than event by
    event.

    Returns (latencies in µs for every (psi, t) cell with timeouts as -1).
    """
    T, W, A = T_ms * 1000, W_ms * 1000, A_ms * 1000
    hop = pdu_us + gap_us
    H = horizon_ms * 1000
    step = grid_ms * 1000
    entries = np.arange(0, A, step, dtype=np.int64)
    out = []
    for psi in range(0, channels * T, step):
        starts = []
        j0 = math.floor((0 - psi - T) / T)
        j1 = math.ceil((A + H - psi) / T)
        for j in range(j0, j1 + 1):
            w = psi + j * T
            ch = j % channels
            off = ch * hop
            # PDU on channel ch of event k starts at k*A + off; must fit in [w, w+W]
            k_lo = -((off - w) // A)          # ceil((w - off) / A)
            k_hi = (w + W - pdu_us - off) // A
            for k in range(k_lo, k_hi + 1):
                starts.append(k * A + off)
        starts = np.array(sorted(starts), dtype=np.int64)
        i = np.searchsorted(starts, entries, side="left")
        lat = np.full(entries.size, -1, dtype=np.int64)
        if starts.size == 0:
            out.append(lat)
            continue
        valid = i < starts.size
        cand = starts[np.minimum(i, starts.size - 1)] + pdu_us - entries
        ok = valid & (cand <= H)
        lat[ok] = cand[ok]
        out.append(lat)
    return np.concatenate(out)


def lower_quantile(values_us, p, total=None):
    """Smallest value v with #(x <= v) / total >= p; timeouts (-1) count in total only."""
    values_us = np.asarray(values_us)
    vals = np.sort(values_us[values_us >= 0])
    total = values_us.size if total is None else total
    rank = math.ceil(Fraction(repr(p)) * total)
    return int(vals[rank - 1]) if rank <= vals.size else None


def grid_cdf(values_us, x_us):
    """Fraction of all cells discovered within x_us."""
    values_us = np.asarray(values_us)
    return np.count_nonzero((values_us >= 0) & (values_us <= x_us)) / values_us.size


def brute_force_pair(b_left, b_right, a_min):
    """Exact minimum over all straddling pairs of the line value at a_min.

    Uses the proportion form directly: delta = (A_R - a_min) / (A_R - A_L),
    latency = delta * L_L + (1 - delta) * L_R.  Returns (value, list of argmin pairs).
    """
    best, arg = None, []
    for (al, ll), (ar, lr) in product(b_left, b_right):
        al_, ll_, ar_, lr_ = map(Fraction, (al, ll, ar, lr))
        d = (ar_ - Fraction(a_min)) / (ar_ - al_)
        v = d * ll_ + (1 - d) * lr_
        if best is None or v < best:
            best, arg = v, [((al, ll), (ar, lr))]
        elif v == best:
            arg.append(((al, ll), (ar, lr)))
    return best, arg


def brute_force_troughs(lat):
    """Indices of interior local minima; plateaus report their rightmost index."""
    n = len(lat)
    res = []
    i = 1
    while i < n - 1:
        j = i
        while j + 1 < n and lat[j + 1] == lat[i]:
            j += 1
        if j < n - 1 and lat[i - 1] > lat[i] and lat[j + 1] > lat[i]:
            res.append(j)
        i = j + 1
    return res


def fixpoint_prune(points):
    """Delete any element slower than its successor until nothing changes."""
    pts = list(points)
    changed = True
    while changed:
        changed = False
        for i in range(len(pts) - 1):
            if pts[i][1] > pts[i + 1][1]:
                del pts[i]
                changed = True
                break
    return pts
