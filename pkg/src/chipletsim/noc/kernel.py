"""Cycle kernel of the tile/die NoC, compiled with numba.

Switching is virtual cut-through at message granularity: a router buffer
slot holds one whole message, an output link is busy for one cycle per flit,
and the head may leave a router as soon as it has arrived there.  Per input
buffer class there is one unidirectional ring per row/column, and the bubble
rule (entering a cyclic ring needs two free slots, continuing needs one)
keeps every ring from filling up.

Input buffers of a router, indexed ``(dir * 2 + cls) * NT + vt`` for the
local ports (dir = the output direction the message travelled, cls 0 before
an express hop in that dimension and 1 after it, vt the message class) and
``16 + dir * NT + vt`` for the express ports.  Injection queues follow at
index NB.  The two message classes keep requests that wait on an input queue
from blocking the messages that drain it.

The same kernel runs in two modes: "exec" (the execution engine owns message
slots and input queues, the kernel stops when the engine asked to be woken)
and "sink" (synthetic traffic generated and consumed inside the kernel).
"""

import numpy as np
from numba import njit

EJECT = 8
NPORTS = 9
NT = 2
NB = 24

# message fields
F_DST, F_TASK, F_VT, F_FLITS, F_READY, F_CLS, F_FLAGS, F_HOPS, F_SRC, F_INJ, F_ID, F_GEN, F_OUT = range(13)
NF = 13

FLAG_EXP_X = 1
FLAG_EXP_Y = 2

# integer parameters
(P_GX, P_GY, P_DW, P_DH, P_TX, P_TY, P_DIEMODE, P_THR, P_B, P_NDX, P_NDY, P_NQ, P_MODE,
 P_TRACE, P_CHECK, P_LOG, P_INJ_UNTIL, P_WATCHDOG, P_MEAS0, P_MEAS1, P_PATTERN, P_HOT,
 P_FLITS, P_QCAP, P_WIDTH, P_SCAN) = range(26)
NPARAMS = 26

MODE_EXEC = 0
MODE_SINK = 1

# float parameters
FP_RATE, FP_HOT = range(2)

# stats
(S_INJ_MSG, S_INJ_FLITS, S_DEL_MSG, S_DEL_FLITS, S_INFLIGHT, S_HOPS, S_LAT, S_LASTPROG,
 S_EJN, S_WAKE, S_CONS_ERR, S_CONS_ERR_CYCLE, S_STATUS, S_GEN, S_REFUSED, S_NEXTID,
 S_FREEN, S_TRN, S_SCAN_ERR, S_MAXLAT, S_OQ_MSGS, S_EXP_HOPS, S_MEAS_FLITS, S_GENLAT,
 S_CHECKS, S_SCANS, S_INFLIGHT_MSG) = range(27)
NSTATS = 27

STATUS_RUNNING = 0
STATUS_DEADLOCK = 1
STATUS_DRAINED = 2

PAT_UNIFORM, PAT_HOTSPOT, PAT_CROSSDIE, PAT_ALL2ALL = range(4)

_DEBRUIJN = np.array([0, 1, 28, 2, 29, 14, 24, 3, 30, 22, 20, 15, 25, 17, 4, 8,
                      31, 27, 13, 23, 21, 19, 16, 7, 26, 12, 18, 6, 11, 5, 10, 9], dtype=np.int64)


@njit(cache=True)
def _ctz(low):
    return _DEBRUIJN[((low * 0x077CB531) & 0xFFFFFFFF) >> 27]


@njit(cache=True)
def _dir(a, b, n, torus):
    d = b - a
    if torus:
        f = d % n
        return 1 if f <= n - f else -1
    return 1 if d > 0 else -1


@njit(cache=True)
def _rem_dies(a, b, d, dw, nd, torus):
    ca = a // dw
    cb = b // dw
    if torus:
        if d > 0:
            return (cb - ca) % nd
        return (ca - cb) % nd
    return cb - ca if d > 0 else ca - cb


@njit(cache=True)
def express_flags(src, dst, params):
    """Die-NoC eligibility per dimension, decided once at injection."""
    if params[P_DIEMODE] == 0:
        return 0
    gx = params[P_GX]
    x, y = src % gx, src // gx
    tx, ty = dst % gx, dst // gx
    thr = params[P_THR]
    flags = 0
    if x != tx and params[P_NDX] >= 3:
        d = _dir(x, tx, gx, params[P_TX])
        if _rem_dies(x, tx, d, params[P_DW], params[P_NDX], params[P_TX]) >= thr:
            flags |= FLAG_EXP_X
    if y != ty and params[P_NDY] >= 3:
        d = _dir(y, ty, params[P_GY], params[P_TY])
        if _rem_dies(y, ty, d, params[P_DH], params[P_NDY], params[P_TY]) >= thr:
            flags |= FLAG_EXP_Y
    return flags


@njit(cache=True)
def route_kernel(r, dst, flags, params, nbr):
    """Dimension-ordered output port for a head flit at router r."""
    gx = params[P_GX]
    x, y = r % gx, r // gx
    tx, ty = dst % gx, dst // gx
    if x != tx:
        d = _dir(x, tx, gx, params[P_TX])
        if flags & FLAG_EXP_X:
            dw = params[P_DW]
            lx = x % dw
            if (d > 0 and lx == dw - 1) or (d < 0 and lx == 0):
                port = 4 if d > 0 else 5
                if nbr[r, port] >= 0 and _rem_dies(x, tx, d, dw, params[P_NDX], params[P_TX]) >= 2:
                    return port
        return 0 if d > 0 else 1
    if y != ty:
        gy = params[P_GY]
        d = _dir(y, ty, gy, params[P_TY])
        if flags & FLAG_EXP_Y:
            dh = params[P_DH]
            ly = y % dh
            if (d > 0 and ly == dh - 1) or (d < 0 and ly == 0):
                port = 6 if d > 0 else 7
                if nbr[r, port] >= 0 and _rem_dies(y, ty, d, dh, params[P_NDY], params[P_TY]) >= 2:
                    return port
        return 2 if d > 0 else 3
    return EJECT


@njit(cache=True)
def _target(in_i, out, vt):
    """(buffer index at the next router, new class, is-continuation)."""
    if out < 4:
        dim = out // 2
        if in_i < 16:
            in_dir = in_i // (2 * NT)
            in_cls = (in_i // NT) % 2
            if in_dir == out:
                return (out * 2 + in_cls) * NT + vt, in_cls, True
            if in_dir // 2 == dim:
                return (out * 2 + in_cls) * NT + vt, in_cls, False
            return out * 2 * NT + vt, 0, False
        if in_i < NB:
            ex_dir = (in_i - 16) // NT
            cls = 1 if ex_dir // 2 == dim else 0
            return (out * 2 + cls) * NT + vt, cls, False
        return out * 2 * NT + vt, 0, False
    cont = in_i >= 16 and in_i < NB and (in_i - 16) // NT == out - 4
    return 16 + (out - 4) * NT + vt, 0, cont


@njit(cache=True)
def can_accept(free_slots, cyclic, continuation):
    """Bubble condition on whole-message slots."""
    if continuation or not cyclic:
        return free_slots >= 1
    return free_slots >= 2


@njit(cache=True)
def _rand(rng):
    x = rng[0]
    x ^= x >> np.uint64(12)
    x ^= x << np.uint64(25)
    x ^= x >> np.uint64(27)
    rng[0] = x
    return (x * np.uint64(2685821657736338717)) >> np.uint64(11)


@njit(cache=True)
def _rand01(rng):
    return np.float64(_rand(rng)) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def _randint(rng, n):
    return np.int64(_rand(rng) % np.uint64(n))


@njit(cache=True)
def _pick_dst(r, R, params, fparams, rng, aux):
    pat = params[P_PATTERN]
    if R == 1:
        return r
    if pat == PAT_HOTSPOT:
        hot = params[P_HOT]
        if r != hot and _rand01(rng) < fparams[FP_HOT]:
            return hot
    elif pat == PAT_CROSSDIE:
        gx = params[P_GX]
        dw, dh = params[P_DW], params[P_DH]
        ndx, ndy = params[P_NDX], params[P_NDY]
        nd = ndx * ndy
        if nd > 1:
            x, y = r % gx, r // gx
            mine = (y // dh) * ndx + x // dw
            k = _randint(rng, nd - 1)
            if k >= mine:
                k += 1
            dx, dy = k % ndx, k // ndx
            while True:
                tx = dx * dw + _randint(rng, dw)
                ty = dy * dh + _randint(rng, dh)
                if tx < gx and ty < params[P_GY]:
                    return ty * gx + tx
    elif pat == PAT_ALL2ALL:
        k = aux[r] % (R - 1)
        aux[r] += 1
        return (r + 1 + k) % R
    d = _randint(rng, R - 1)
    if d >= r:
        d += 1
    return d


@njit(cache=True)
def _scan(R, NI, params, buf, bh, bc, bfl, oqc, msg, stats):
    """Full recount of buffered flits against the running counter."""
    B = params[P_B]
    total = 0
    nmsg = 0
    bad = 0
    for r in range(R):
        for i in range(NB):
            n = bc[r, i]
            if n < 0 or n > B:
                bad += 1
            f = 0
            for k in range(n):
                f += msg[buf[r, i, (bh[r, i] + k) % B], F_FLITS]
            if f != bfl[r, i]:
                bad += 1
            total += f
            nmsg += n
    if total != stats[S_INFLIGHT] or nmsg != stats[S_INFLIGHT_MSG]:
        bad += 1
    return bad


@njit(cache=True)
def run_cycles(c0, c1, params, fparams, nbr, lat,
               buf, bh, bc, bfl, inbusy, obusy, mask,
               oq, oqh, oqc, iqc, iqcap, msg, ej, stats, rbits, want,
               trace, freelist, rng, aux, hready, hout):
    """Advance cycles [c0, c1); returns the next cycle to run.

    Returns early at the end of a cycle in which the engine asked to be woken
    (exec mode), when the ejection log is nearly full, or when the synthetic
    traffic has drained or deadlocked (sink mode).
    """
    R = params[P_GX] * params[P_GY]
    NQ = params[P_NQ]
    NI = NB + NQ
    B = params[P_B]
    QC = oq.shape[2]
    full = (np.int64(1) << NI) - 1
    mode = params[P_MODE]
    width = params[P_WIDTH]
    tlim = params[P_TRACE]
    K = ej.shape[0]
    scan_every = params[P_SCAN]
    stats[S_WAKE] = 0
    for c in range(c0, c1):
        if mode == MODE_SINK and c < params[P_INJ_UNTIL]:
            rate = fparams[FP_RATE]
            qcap = params[P_QCAP]
            for r in range(R):
                if _rand01(rng) >= rate:
                    continue
                if oqc[r, 0] >= qcap or stats[S_FREEN] == 0:
                    stats[S_REFUSED] += 1
                    continue
                dst = _pick_dst(r, R, params, fparams, rng, aux)
                stats[S_FREEN] -= 1
                s = freelist[stats[S_FREEN]]
                msg[s, F_DST] = dst
                msg[s, F_TASK] = 0
                msg[s, F_VT] = 0
                msg[s, F_FLITS] = params[P_FLITS]
                msg[s, F_READY] = c
                msg[s, F_CLS] = 0
                msg[s, F_FLAGS] = 0
                msg[s, F_HOPS] = 0
                msg[s, F_SRC] = r
                msg[s, F_INJ] = -1
                msg[s, F_ID] = stats[S_NEXTID]
                msg[s, F_GEN] = c
                msg[s, F_OUT] = -1
                stats[S_NEXTID] += 1
                stats[S_GEN] += 1
                oq[r, 0, (oqh[r, 0] + oqc[r, 0]) % QC] = s
                if oqc[r, 0] == 0:
                    hready[r, NB] = c
                    hout[r, NB] = -1
                oqc[r, 0] += 1
                stats[S_OQ_MSGS] += 1
                mask[r] |= np.int64(1) << NB
        for r in range(R):
            m = mask[r]
            if m == 0:
                continue
            start = c % NI
            if start == 0:
                rot = m
            else:
                rot = ((m >> start) | (m << (NI - start))) & full
            while rot != 0:
                low = rot & (-rot)
                rot ^= low
                i = _ctz(low) + start
                if i >= NI:
                    i -= NI
                if inbusy[r, i] > c or hready[r, i] > c:
                    continue
                out = hout[r, i]
                if out >= 0 and obusy[r, out] > c:
                    continue
                injecting = i >= NB
                if injecting:
                    q = i - NB
                    s = oq[r, q, oqh[r, q]]
                else:
                    s = buf[r, i, bh[r, i]]
                if out < 0:
                    # first look at a queued message: fix its die-NoC flags and route
                    flags = express_flags(r, msg[s, F_DST], params)
                    msg[s, F_FLAGS] = flags
                    out = route_kernel(r, msg[s, F_DST], flags, params, nbr)
                    msg[s, F_OUT] = out
                    hout[r, i] = out
                    if obusy[r, out] > c:
                        continue
                flits = msg[s, F_FLITS]
                vt = msg[s, F_VT]
                if out == EJECT:
                    if mode == MODE_EXEC:
                        t = msg[s, F_TASK]
                        if iqc[r, t] >= iqcap[t]:
                            continue
                        if stats[S_EJN] >= K:
                            continue
                        iqc[r, t] += 1
                    nr = -1
                    bi = -1
                    ncls = 0
                else:
                    nr = nbr[r, out]
                    bi, ncls, cont = _target(i, out, vt)
                    cyclic = 0
                    if out < 4:
                        cyclic = params[P_TX] if out < 2 else params[P_TY]
                    elif params[P_DIEMODE] == 2:
                        cyclic = params[P_TX] if out < 6 else params[P_TY]
                    if not can_accept(B - bc[nr, bi], cyclic != 0, cont):
                        continue
                # commit the move: pop the input
                if injecting:
                    q = i - NB
                    oqh[r, q] = (oqh[r, q] + 1) % QC
                    oqc[r, q] -= 1
                    if oqc[r, q] == 0:
                        mask[r] &= ~(np.int64(1) << i)
                    else:
                        s2 = oq[r, q, oqh[r, q]]
                        hready[r, i] = msg[s2, F_READY]
                        hout[r, i] = msg[s2, F_OUT]
                    msg[s, F_INJ] = c
                    stats[S_INJ_MSG] += 1
                    stats[S_INJ_FLITS] += flits
                    if mode == MODE_SINK:
                        stats[S_OQ_MSGS] -= 1
                    elif want[r] & 2:
                        stats[S_WAKE] = 1
                        want[r] |= 4
                else:
                    bh[r, i] = (bh[r, i] + 1) % B
                    bc[r, i] -= 1
                    bfl[r, i] -= flits
                    stats[S_INFLIGHT] -= flits
                    stats[S_INFLIGHT_MSG] -= 1
                    if bc[r, i] == 0:
                        mask[r] &= ~(np.int64(1) << i)
                    else:
                        s2 = buf[r, i, bh[r, i]]
                        hready[r, i] = msg[s2, F_READY]
                        hout[r, i] = msg[s2, F_OUT]
                inbusy[r, i] = c + flits
                obusy[r, out] = c + flits
                bits = flits * width
                rbits[r, 0] += bits
                if tlim > 0 and stats[S_TRN] < tlim:
                    k = stats[S_TRN]
                    trace[k, 0] = msg[s, F_ID]
                    trace[k, 1] = r
                    trace[k, 2] = c
                    trace[k, 3] = out
                    stats[S_TRN] += 1
                stats[S_LASTPROG] = c
                if out == EJECT:
                    tail = c + flits - 1
                    stats[S_DEL_MSG] += 1
                    stats[S_DEL_FLITS] += flits
                    stats[S_HOPS] += msg[s, F_HOPS]
                    lt = tail - msg[s, F_INJ]
                    stats[S_LAT] += lt
                    if lt > stats[S_MAXLAT]:
                        stats[S_MAXLAT] = lt
                    if params[P_MEAS0] <= c and c < params[P_MEAS1]:
                        stats[S_MEAS_FLITS] += flits
                    if mode == MODE_EXEC:
                        k = stats[S_EJN]
                        ej[k, 0] = s
                        ej[k, 1] = r
                        ej[k, 2] = tail
                        ej[k, 3] = msg[s, F_HOPS]
                        ej[k, 4] = msg[s, F_SRC]
                        stats[S_EJN] += 1
                        if want[r] & 1:
                            stats[S_WAKE] = 1
                    else:
                        stats[S_GENLAT] += tail - msg[s, F_GEN]
                        if params[P_LOG] and stats[S_EJN] < K:
                            k = stats[S_EJN]
                            ej[k, 0] = msg[s, F_ID]
                            ej[k, 1] = r
                            ej[k, 2] = tail
                            ej[k, 3] = msg[s, F_HOPS]
                            ej[k, 4] = msg[s, F_SRC]
                            stats[S_EJN] += 1
                        freelist[stats[S_FREEN]] = s
                        stats[S_FREEN] += 1
                else:
                    rbits[r, 1 + out] += bits
                    if out >= 4:
                        stats[S_EXP_HOPS] += 1
                    msg[s, F_HOPS] += 1
                    msg[s, F_CLS] = ncls
                    msg[s, F_READY] = c + lat[r, out]
                    msg[s, F_OUT] = route_kernel(nr, msg[s, F_DST], msg[s, F_FLAGS], params, nbr)
                    pos = (bh[nr, bi] + bc[nr, bi]) % B
                    buf[nr, bi, pos] = s
                    if bc[nr, bi] == 0:
                        hready[nr, bi] = msg[s, F_READY]
                        hout[nr, bi] = msg[s, F_OUT]
                    bc[nr, bi] += 1
                    bfl[nr, bi] += flits
                    stats[S_INFLIGHT] += flits
                    stats[S_INFLIGHT_MSG] += 1
                    mask[nr] |= np.int64(1) << bi
        if params[P_CHECK]:
            stats[S_CHECKS] += 1
            if stats[S_INJ_FLITS] != stats[S_DEL_FLITS] + stats[S_INFLIGHT]:
                if stats[S_CONS_ERR] == 0:
                    stats[S_CONS_ERR_CYCLE] = c
                stats[S_CONS_ERR] += 1
            if scan_every > 0 and c % scan_every == 0:
                stats[S_SCANS] += 1
                stats[S_SCAN_ERR] += _scan(R, NI, params, buf, bh, bc, bfl, oqc, msg, stats)
        if mode == MODE_SINK:
            busy = stats[S_INFLIGHT_MSG] > 0 or stats[S_OQ_MSGS] > 0
            if c + 1 >= params[P_INJ_UNTIL] and not busy:
                stats[S_STATUS] = STATUS_DRAINED
                return c + 1
            if busy and c - stats[S_LASTPROG] > params[P_WATCHDOG]:
                stats[S_STATUS] = STATUS_DEADLOCK
                return c + 1
            if params[P_LOG] and stats[S_EJN] >= K - R:
                return c + 1
        else:
            if stats[S_WAKE] != 0 or stats[S_EJN] >= K - R:
                return c + 1
    return c1
