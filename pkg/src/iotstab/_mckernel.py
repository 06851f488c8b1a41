"""Numba kernel for one Monte Carlo realization.

Per slot: pick transmitters and codes, decide every reception, advance the
protocol state machines, then add arrivals. Receptions that are alone on
their (BS, code) pair are marginalised over the Rayleigh fades exactly and
decided with one uniform; pairs with several receivers share the fade of
each intra-cell link, so those fades are drawn explicitly.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

# scheme codes
BASELINE, RAMPING, BACKOFF = 0, 1, 2

# layout of the per-realization counter vector
(C_ATTEMPTS, C_SUCCESS, C_BUSY, C_IDLE, C_QSUM, C_DELIV, C_BACKOFF, C_FAIL,
 C_WSUM, C_WCOUNT, C_TSUM, C_TCOUNT, C_BOUNDARIES, C_OVERFLOW, C_RING_OVERFLOW,
 C_MEASURED) = range(16)
N_COUNTERS = 16
TRACE_COLS = 4  # active, successes, total queue, sum of phases


@njit(cache=True, nogil=True)
def run_realization(seed, bs_xy, dev_xy, serve, r_eta, measured_idx, n_meas,
                    window, n_codes, arrival, rho, kind, n_det, q_back,
                    noise, theta, eta, radius, warmup, slots,
                    frozen, frozen_probs, ring_cap, queue_cap, trace_len):
    """Simulate ``warmup + slots`` slots.

    Returns ``(counters, per_phase, trace, final_queue)`` where ``per_phase``
    has rows (attempts, successes) per transmit phase.
    """
    np.random.seed(seed)
    n_dev = dev_xy.shape[0]
    n_bs = bs_xy.shape[0]
    M = rho.shape[0]
    n_phase = M if kind == RAMPING else (n_det + 2 if kind == BACKOFF else 1)
    last = n_phase - 1

    counters = np.zeros(N_COUNTERS)
    per_phase = np.zeros((2, M))
    trace = np.zeros((trace_len, TRACE_COLS))
    counters[C_MEASURED] = n_meas

    q = np.zeros(n_dev, np.int64)
    phase = np.zeros(n_dev, np.int64)

    ring = np.zeros((max(n_meas, 1), ring_cap), np.int64)
    ring_head = np.zeros(max(n_meas, 1), np.int64)
    ring_len = np.zeros(max(n_meas, 1), np.int64)
    ring_ok = True

    # spatial grid for transmitters, cell side >= radius
    half = 0.5 * window
    ncx = max(1, int(window // radius))
    cell = window / ncx
    ncell = ncx * ncx
    nkey = n_codes * ncell
    starts = np.zeros(nkey + 1, np.int64)

    active = np.empty(n_dev, np.int64)
    code = np.empty(n_dev, np.int64)
    tx_phase = np.empty(n_dev, np.int64)
    success = np.zeros(n_dev, np.bool_)
    key = np.empty(n_dev, np.int64)
    order = np.empty(n_dev, np.int64)
    gkey = np.empty(n_dev, np.int64)
    gorder = np.empty(n_dev, np.int64)
    gstart = np.zeros(n_codes * n_bs + 1, np.int64)
    busy_start = np.zeros(n_dev, np.bool_)
    hfade = np.empty(n_dev)
    r2 = radius * radius
    total = warmup + slots
    log_miss = math.log1p(-arrival) if 0.0 < arrival < 1.0 else -1.0
    eta4 = eta == 4.0

    for t in range(total):
        meas_on = t >= warmup
        # 1. transmitters
        n_act = 0
        for i in range(n_dev):
            busy_start[i] = q[i] > 0
            if frozen:
                u = np.random.random()
                acc = 0.0
                ph = -1
                for m in range(M):
                    acc += frozen_probs[m]
                    if u < acc:
                        ph = m
                        break
                if ph < 0:
                    continue
                tx_phase[i] = ph
            else:
                if q[i] == 0:
                    continue
                if kind == BACKOFF and phase[i] != 0:
                    continue
                tx_phase[i] = phase[i] if kind == RAMPING else 0
            active[n_act] = i
            code[i] = min(n_codes - 1, int(np.random.random() * n_codes))
            n_act += 1

        # 2. bucket transmitters by (code, grid cell) and by (code, BS)
        starts[:] = 0
        for a_i in range(n_act):
            i = active[a_i]
            cx = min(ncx - 1, max(0, int((dev_xy[i, 0] + half) / cell)))
            cy = min(ncx - 1, max(0, int((dev_xy[i, 1] + half) / cell)))
            key[i] = code[i] * ncell + cx * ncx + cy
            starts[key[i] + 1] += 1
        for k in range(nkey):
            starts[k + 1] += starts[k]
        fill = starts[:-1].copy()
        for a_i in range(n_act):
            i = active[a_i]
            order[fill[key[i]]] = i
            fill[key[i]] += 1

        gstart[:] = 0
        for a_i in range(n_act):
            i = active[a_i]
            gkey[i] = code[i] * n_bs + serve[i]
            gstart[gkey[i] + 1] += 1
        for k in range(n_codes * n_bs):
            gstart[k + 1] += gstart[k]
        gfill = gstart[:-1].copy()
        for a_i in range(n_act):
            i = active[a_i]
            gorder[gfill[gkey[i]]] = i
            gfill[gkey[i]] += 1

        # 3. receptions, one (code, BS) group at a time in group order
        for a_i in range(n_act):
            i0 = gorder[a_i]
            g = gkey[i0]
            if gstart[g] != a_i:
                continue
            g_n = gstart[g + 1] - gstart[g]
            b = serve[i0]
            k_code = code[i0]
            bx = bs_xy[b, 0]
            by = bs_xy[b, 1]
            if frozen and n_meas > 0:
                # only receptions at measured devices matter without queues
                need = False
                for gi in range(g_n):
                    if measured_idx[gorder[a_i + gi]] >= 0:
                        need = True
                if not need:
                    continue
            cx0 = int((bx + half) / cell)
            cy0 = int((by + half) / cell)
            if g_n == 1:
                rx = rho[tx_phase[i0]]
                prod = 1.0
                for cx in range(max(0, cx0 - 1), min(ncx, cx0 + 2)):
                    for cy in range(max(0, cy0 - 1), min(ncx, cy0 + 2)):
                        kk = k_code * ncell + cx * ncx + cy
                        for o in range(starts[kk], starts[kk + 1]):
                            j = order[o]
                            if j == i0:
                                continue
                            dx = dev_xy[j, 0] - bx
                            dy = dev_xy[j, 1] - by
                            d2 = dx * dx + dy * dy
                            if d2 > r2:
                                continue
                            pj = rho[tx_phase[j]] * r_eta[j]
                            g = 1.0 / (d2 * d2) if eta4 else d2 ** (-0.5 * eta)
                            prod *= 1.0 + theta * pj * g / rx
                p_ok = math.exp(-theta * noise / rx) / prod
                success[i0] = np.random.random() < p_ok
            else:
                i_out = 0.0
                for cx in range(max(0, cx0 - 1), min(ncx, cx0 + 2)):
                    for cy in range(max(0, cy0 - 1), min(ncx, cy0 + 2)):
                        kk = k_code * ncell + cx * ncx + cy
                        for o in range(starts[kk], starts[kk + 1]):
                            j = order[o]
                            if serve[j] == b:
                                continue
                            dx = dev_xy[j, 0] - bx
                            dy = dev_xy[j, 1] - by
                            d2 = dx * dx + dy * dy
                            if d2 > r2:
                                continue
                            pj = rho[tx_phase[j]] * r_eta[j]
                            g = 1.0 / (d2 * d2) if eta4 else d2 ** (-0.5 * eta)
                            i_out += pj * np.random.exponential() * g
                own = 0.0
                for gi in range(g_n):
                    j = gorder[a_i + gi]
                    hfade[j] = rho[tx_phase[j]] * np.random.exponential()
                    own += hfade[j]
                for gi in range(g_n):
                    j = gorder[a_i + gi]
                    success[j] = hfade[j] > theta * (noise + i_out + own - hfade[j])

        # 4. per-phase statistics for measured transmitters
        n_succ = 0
        for a_i in range(n_act):
            i = active[a_i]
            n_succ += success[i]
            if meas_on and measured_idx[i] >= 0:
                per_phase[0, tx_phase[i]] += 1.0
                per_phase[1, tx_phase[i]] += success[i]

        if frozen:
            for a_i in range(n_act):
                success[active[a_i]] = False
            if t < trace_len:
                trace[t, 0] = n_act
                trace[t, 1] = n_succ
            continue

        # 5. protocol transitions of busy devices
        for i in range(n_dev):
            if q[i] == 0:
                continue
            mi = measured_idx[i]
            rec = meas_on and mi >= 0
            ph = phase[i]
            transmitting = kind != BACKOFF or ph == 0
            if rec:
                counters[C_BUSY] += 1.0
                if not transmitting:
                    counters[C_BACKOFF] += 1.0
            if transmitting:
                if rec:
                    counters[C_ATTEMPTS] += 1.0
                if success[i]:
                    success[i] = False
                    q[i] -= 1
                    phase[i] = 0
                    if rec:
                        counters[C_SUCCESS] += 1.0
                        counters[C_DELIV] += 1.0
                    if mi >= 0 and ring_ok:
                        t_a = ring[mi, ring_head[mi]]
                        ring_head[mi] = (ring_head[mi] + 1) % ring_cap
                        ring_len[mi] -= 1
                        if meas_on and t_a >= warmup:
                            counters[C_TSUM] += t - t_a
                            counters[C_TCOUNT] += 1.0
                        if q[i] > 0:
                            t_b = ring[mi, ring_head[mi]]
                            if meas_on and t_b >= warmup:
                                counters[C_WSUM] += t + 1 - t_b
                                counters[C_WCOUNT] += 1.0
                else:
                    if rec:
                        counters[C_FAIL] += 1.0
                    if kind == RAMPING:
                        phase[i] = (ph + 1) % M
                    elif kind == BACKOFF:
                        if n_det > 0:
                            phase[i] = 1
                        elif q_back >= 1.0 or np.random.random() < q_back:
                            phase[i] = 0
                        else:
                            phase[i] = last
            else:
                if ph < n_det:
                    phase[i] = ph + 1
                elif q_back >= 1.0 or np.random.random() < q_back:
                    phase[i] = 0
                else:
                    phase[i] = last

        # 6. arrivals
        # geometric gaps between arriving devices instead of one draw each
        i = -1
        while arrival > 0.0:
            if arrival >= 1.0:
                i += 1
            else:
                i += 1 + int(math.log(1.0 - np.random.random()) / log_miss)
            if i >= n_dev:
                break
            if q[i] >= queue_cap:
                counters[C_OVERFLOW] = 1.0
                continue
            mi = measured_idx[i]
            if mi >= 0:
                if q[i] == 0 and meas_on:
                    counters[C_WSUM] += 1.0 if busy_start[i] else 0.0
                    counters[C_WCOUNT] += 1.0
                if ring_len[mi] >= ring_cap:
                    ring_ok = False
                elif ring_ok:
                    ring[mi, (ring_head[mi] + ring_len[mi]) % ring_cap] = t
                    ring_len[mi] += 1
            if q[i] == 0:
                phase[i] = 0
            q[i] += 1

        if meas_on:
            counters[C_BOUNDARIES] += 1.0
            for i in range(n_meas):  # measured devices come first
                counters[C_QSUM] += q[i]
                if q[i] == 0:
                    counters[C_IDLE] += 1.0
        if t < trace_len:
            qs = 0.0
            ps = 0.0
            for i in range(n_dev):
                qs += q[i]
                ps += phase[i]
            trace[t, 0] = n_act
            trace[t, 1] = n_succ
            trace[t, 2] = qs
            trace[t, 3] = ps

    if not ring_ok:
        counters[C_RING_OVERFLOW] = 1.0
    return counters, per_phase, trace, q
