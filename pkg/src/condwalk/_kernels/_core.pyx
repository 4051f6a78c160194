# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twins of the pure-NumPy kernels in ``pyref``.

Each function matches its Python reference name-for-name and draw-for-
draw: the same Philox4x32-10 block is evaluated at the same
(seed, stream, step, slot) keys, the categorical rule is the same
"first index with cum > u, clamped", and float expressions keep the
same shape and order (the build disables fused multiply-add), so walk
and martingale outputs are bit-identical across backends. The one
documented difference is the scalar exit-mass reduction of
dp_step_float, whose summation order differs (tolerance 1e-12).

Hot loops run without the GIL so thread pools scale across cores.
"""

import numpy as np

cimport numpy as cnp
from libc.stdint cimport int64_t, uint32_t, uint64_t

cnp.import_array()

cdef double INV53 = 1.0 / 9007199254740992.0  # 2^-53


cdef inline void philox_pair(uint64_t seed, uint64_t stream, uint64_t step,
                             uint64_t slot, double* d0, double* d1) nogil:
    cdef uint32_t c0 = <uint32_t> step
    cdef uint32_t c1 = <uint32_t> slot
    cdef uint32_t c2 = <uint32_t> (stream & <uint64_t> 0xFFFFFFFFu)
    cdef uint32_t c3 = <uint32_t> (stream >> 32)
    cdef uint32_t k0 = <uint32_t> (seed & <uint64_t> 0xFFFFFFFFu)
    cdef uint32_t k1 = <uint32_t> (seed >> 32)
    cdef uint64_t p0, p1
    cdef uint32_t n0, n1, n2, n3
    cdef int r
    for r in range(10):
        p0 = (<uint64_t> c0) * <uint64_t> 0xD2511F53u
        p1 = (<uint64_t> c2) * <uint64_t> 0xCD9E8D57u
        n0 = (<uint32_t> (p1 >> 32)) ^ c1 ^ k0
        n1 = <uint32_t> p1
        n2 = (<uint32_t> (p0 >> 32)) ^ c3 ^ k1
        n3 = <uint32_t> p0
        c0 = n0
        c1 = n1
        c2 = n2
        c3 = n3
        k0 = k0 + <uint32_t> 0x9E3779B9u
        k1 = k1 + <uint32_t> 0xBB67AE85u
    d0[0] = <double> ((((<uint64_t> c0) << 32) | c1) >> 11) * INV53
    d1[0] = <double> ((((<uint64_t> c2) << 32) | c3) >> 11) * INV53


cdef inline int pick_row(const double* cum, int m, double u) nogil:
    """First index with cum > u, clamped to the last (matches _pick)."""
    cdef int j = 0
    while j < m - 1 and u >= cum[j]:
        j += 1
    return j


def finite_walk(seed, stream0, n_paths, x0, k0, shifts, p_cum, record_at,
                kill):
    """Simulate finite-chain walk paths on the integer sum lattice.

    Returns (counts, state, ksum, streams): alive-path counts at each
    horizon in ``record_at`` (sorted ascending), and the terminal state
    index / lattice sum / stream id of paths alive at the last horizon.
    With kill=False nothing dies and counts equal n_paths.
    """
    cdef uint64_t c_seed = <uint64_t> (int(seed) & ((1 << 64) - 1))
    cdef uint64_t c_stream0 = <uint64_t> (int(stream0) & ((1 << 64) - 1))
    cdef int64_t c_n = <int64_t> n_paths
    cdef int c_x0 = <int> x0
    cdef int64_t c_k0 = <int64_t> k0
    cdef bint c_kill = 1 if kill else 0
    cdef cnp.ndarray[cnp.int64_t, ndim=1] shifts_arr = \
        np.ascontiguousarray(shifts, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] cum_arr = \
        np.ascontiguousarray(p_cum, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] rec_arr = \
        np.ascontiguousarray(list(record_at), dtype=np.int64)
    cdef int n_rec = rec_arr.shape[0]
    cdef int64_t n_last = rec_arr[n_rec - 1]
    cdef int m = cum_arr.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] counts = np.zeros(n_rec, np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out_state = np.empty(c_n, np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out_ksum = np.empty(c_n, np.int64)
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] out_stream = np.empty(c_n, np.uint64)

    cdef int64_t* sft = <int64_t*> shifts_arr.data
    cdef double* cum = <double*> cum_arr.data
    cdef int64_t* rec = <int64_t*> rec_arr.data
    cdef int64_t* cnts = <int64_t*> counts.data
    cdef int64_t* o_state = <int64_t*> out_state.data
    cdef int64_t* o_ksum = <int64_t*> out_ksum.data
    cdef uint64_t* o_stream = <uint64_t*> out_stream.data

    cdef int64_t p, k, ksum, death, n_alive = 0
    cdef uint64_t stream
    cdef int state, j
    cdef double u0, u1
    with nogil:
        for p in range(c_n):
            stream = c_stream0 + <uint64_t> p
            state = c_x0
            ksum = c_k0
            death = n_last + 1
            for k in range(1, n_last + 1):
                philox_pair(c_seed, stream, <uint64_t> k, 0, &u0, &u1)
                state = pick_row(cum + state * m, m, u0)
                ksum = ksum + sft[state]
                if c_kill and ksum <= 0:
                    death = k
                    break
            for j in range(n_rec):
                if death > rec[j]:
                    cnts[j] += 1
            if death > n_last:
                o_state[n_alive] = state
                o_ksum[n_alive] = ksum
                o_stream[n_alive] = stream
                n_alive += 1
    return (counts, out_state[:n_alive].copy(), out_ksum[:n_alive].copy(),
            out_stream[:n_alive].copy())


def affine1d_walk(seed, stream0, n_paths, x0, y, a_support, a_cum,
                  b_mode, b_lo, b_hi, b_support, b_cum, record_at, kill):
    """Simulate 1-D affine recursion paths x' = a x + b, s' = s + x'.

    b_mode 0: b = b_lo + (b_hi - b_lo) * u; b_mode 1: categorical over
    b_support. Returns (counts, x, s, streams) analogous to finite_walk.
    """
    cdef uint64_t c_seed = <uint64_t> (int(seed) & ((1 << 64) - 1))
    cdef uint64_t c_stream0 = <uint64_t> (int(stream0) & ((1 << 64) - 1))
    cdef int64_t c_n = <int64_t> n_paths
    cdef double c_x0 = <double> x0
    cdef double c_y = <double> y
    cdef int c_bmode = <int> b_mode
    cdef double c_blo = <double> b_lo
    cdef double c_bhi = <double> b_hi
    cdef bint c_kill = 1 if kill else 0
    cdef cnp.ndarray[cnp.float64_t, ndim=1] asupp_arr = \
        np.ascontiguousarray(a_support, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] acum_arr = \
        np.ascontiguousarray(a_cum, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] bsupp_arr = \
        np.ascontiguousarray(b_support, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] bcum_arr = \
        np.ascontiguousarray(b_cum, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] rec_arr = \
        np.ascontiguousarray(list(record_at), dtype=np.int64)
    cdef int n_rec = rec_arr.shape[0]
    cdef int64_t n_last = rec_arr[n_rec - 1]
    cdef int na = acum_arr.shape[0]
    cdef int nb = bcum_arr.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] counts = np.zeros(n_rec, np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_x = np.empty(c_n, np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_s = np.empty(c_n, np.float64)
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] out_stream = np.empty(c_n, np.uint64)

    cdef double* asupp = <double*> asupp_arr.data
    cdef double* acum = <double*> acum_arr.data
    cdef double* bsupp = <double*> bsupp_arr.data
    cdef double* bcum = <double*> bcum_arr.data
    cdef int64_t* rec = <int64_t*> rec_arr.data
    cdef int64_t* cnts = <int64_t*> counts.data
    cdef double* o_x = <double*> out_x.data
    cdef double* o_s = <double*> out_s.data
    cdef uint64_t* o_stream = <uint64_t*> out_stream.data

    cdef int64_t p, k, death, n_alive = 0
    cdef uint64_t stream
    cdef int j
    cdef double ua, ub, a, b, x, s
    with nogil:
        for p in range(c_n):
            stream = c_stream0 + <uint64_t> p
            x = c_x0
            s = 0.0
            death = n_last + 1
            for k in range(1, n_last + 1):
                philox_pair(c_seed, stream, <uint64_t> k, 0, &ua, &ub)
                a = asupp[pick_row(acum, na, ua)]
                if c_bmode == 0:
                    b = c_blo + (c_bhi - c_blo) * ub
                else:
                    b = bsupp[pick_row(bcum, nb, ub)]
                x = a * x + b
                s = s + x
                if c_kill and not ((c_y + s) > 0.0):
                    death = k
                    break
            for j in range(n_rec):
                if death > rec[j]:
                    cnts[j] += 1
            if death > n_last:
                o_x[n_alive] = x
                o_s[n_alive] = s
                o_stream[n_alive] = stream
                n_alive += 1
    return (counts, out_x[:n_alive].copy(), out_s[:n_alive].copy(),
            out_stream[:n_alive].copy())


def finite_martingale(seed, stream0, n_paths, x0, k0L, shifts_L, theta_L, r_L,
                      p_cum, n_max, stop_rule):
    """Walk + martingale on one integer lattice (LC units).

    Tracks ks = y+S_k and zm = z+M_k exactly in int64; the coupling
    identity zm == ks + r(X_k) is checked after every step (viol counts
    failures). Stopping times: tau (first ks <= 0), T (first zm <= 0),
    T_hat (first zm <= 0 at a step >= tau). A path retires once the time
    selected by stop_rule (0: tau, 1: T, 2: T_hat) is found, or at n_max.

    Returns (tau, t, t_hat, m_tau, m_t, m_t_hat, checks, viol); times are
    -1 when censored, m_* are martingale values at the times in LC units.
    """
    cdef uint64_t c_seed = <uint64_t> (int(seed) & ((1 << 64) - 1))
    cdef uint64_t c_stream0 = <uint64_t> (int(stream0) & ((1 << 64) - 1))
    cdef int64_t c_n = <int64_t> n_paths
    cdef int c_x0 = <int> x0
    cdef int64_t c_k0 = <int64_t> k0L
    cdef int64_t c_nmax = <int64_t> n_max
    cdef int c_rule = <int> stop_rule
    cdef cnp.ndarray[cnp.int64_t, ndim=1] sft_arr = \
        np.ascontiguousarray(shifts_L, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] th_arr = \
        np.ascontiguousarray(theta_L, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] r_arr = \
        np.ascontiguousarray(r_L, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] cum_arr = \
        np.ascontiguousarray(p_cum, dtype=np.float64)
    cdef int m = cum_arr.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] tau = np.full(c_n, -1, np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] t = np.full(c_n, -1, np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] t_hat = np.full(c_n, -1, np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] m_tau = np.zeros(c_n, np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] m_t = np.zeros(c_n, np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] m_t_hat = np.zeros(c_n, np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] checks = np.zeros(c_n, np.int64)

    cdef int64_t* sft = <int64_t*> sft_arr.data
    cdef int64_t* th = <int64_t*> th_arr.data
    cdef int64_t* rr = <int64_t*> r_arr.data
    cdef double* cum = <double*> cum_arr.data
    cdef int64_t* p_tau = <int64_t*> tau.data
    cdef int64_t* p_t = <int64_t*> t.data
    cdef int64_t* p_hat = <int64_t*> t_hat.data
    cdef int64_t* p_mtau = <int64_t*> m_tau.data
    cdef int64_t* p_mt = <int64_t*> m_t.data
    cdef int64_t* p_mhat = <int64_t*> m_t_hat.data
    cdef int64_t* p_checks = <int64_t*> checks.data

    cdef int64_t p, k, ks, zm, z0, viol = 0
    cdef uint64_t stream
    cdef int state, nxt
    cdef double u0, u1
    cdef bint done
    z0 = c_k0 + rr[c_x0]
    with nogil:
        for p in range(c_n):
            stream = c_stream0 + <uint64_t> p
            state = c_x0
            ks = c_k0
            zm = z0
            for k in range(1, c_nmax + 1):
                philox_pair(c_seed, stream, <uint64_t> k, 0, &u0, &u1)
                nxt = pick_row(cum + state * m, m, u0)
                zm = zm + (th[nxt] - rr[state])
                ks = ks + sft[nxt]
                if zm != ks + rr[nxt]:
                    viol += 1
                p_checks[p] += 1
                state = nxt
                if p_tau[p] < 0 and ks <= 0:
                    p_tau[p] = k
                    p_mtau[p] = zm - z0
                if zm <= 0:
                    if p_t[p] < 0:
                        p_t[p] = k
                        p_mt[p] = zm - z0
                    if p_hat[p] < 0 and p_tau[p] >= 0:
                        p_hat[p] = k
                        p_mhat[p] = zm - z0
                if c_rule == 0:
                    done = p_tau[p] >= 0
                elif c_rule == 1:
                    done = p_t[p] >= 0
                else:
                    done = p_hat[p] >= 0
                if done:
                    break
    return tau, t, t_hat, m_tau, m_t, m_t_hat, checks, int(viol)


def affine1d_martingale(seed, stream0, n_paths, x0, y, a_support, a_cum,
                        b_mode, b_lo, b_hi, b_support, b_cum,
                        theta_coef, r_coef, n_max, stop_rule):
    """Float twin of finite_martingale for the 1-D affine recursion.

    theta(x) = theta_coef * x, r(x) = r_coef * x; the coupling identity
    |zm - (y + s + r(x))| <= 1e-10 is checked every step.
    """
    cdef uint64_t c_seed = <uint64_t> (int(seed) & ((1 << 64) - 1))
    cdef uint64_t c_stream0 = <uint64_t> (int(stream0) & ((1 << 64) - 1))
    cdef int64_t c_n = <int64_t> n_paths
    cdef double c_x0 = <double> x0
    cdef double c_y = <double> y
    cdef int c_bmode = <int> b_mode
    cdef double c_blo = <double> b_lo
    cdef double c_bhi = <double> b_hi
    cdef double c_tc = <double> theta_coef
    cdef double c_rc = <double> r_coef
    cdef int64_t c_nmax = <int64_t> n_max
    cdef int c_rule = <int> stop_rule
    cdef cnp.ndarray[cnp.float64_t, ndim=1] asupp_arr = \
        np.ascontiguousarray(a_support, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] acum_arr = \
        np.ascontiguousarray(a_cum, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] bsupp_arr = \
        np.ascontiguousarray(b_support, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] bcum_arr = \
        np.ascontiguousarray(b_cum, dtype=np.float64)
    cdef int na = acum_arr.shape[0]
    cdef int nb = bcum_arr.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] tau = np.full(c_n, -1, np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] t = np.full(c_n, -1, np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] t_hat = np.full(c_n, -1, np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] m_tau = np.zeros(c_n, np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] m_t = np.zeros(c_n, np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] m_t_hat = np.zeros(c_n, np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] checks = np.zeros(c_n, np.int64)

    cdef double* asupp = <double*> asupp_arr.data
    cdef double* acum = <double*> acum_arr.data
    cdef double* bsupp = <double*> bsupp_arr.data
    cdef double* bcum = <double*> bcum_arr.data
    cdef int64_t* p_tau = <int64_t*> tau.data
    cdef int64_t* p_t = <int64_t*> t.data
    cdef int64_t* p_hat = <int64_t*> t_hat.data
    cdef double* p_mtau = <double*> m_tau.data
    cdef double* p_mt = <double*> m_t.data
    cdef double* p_mhat = <double*> m_t_hat.data
    cdef int64_t* p_checks = <int64_t*> checks.data

    cdef int64_t p, k, viol = 0
    cdef uint64_t stream
    cdef double ua, ub, a, b, x, xn, s, zm, z0, delta
    cdef bint done
    z0 = c_y + c_rc * c_x0
    with nogil:
        for p in range(c_n):
            stream = c_stream0 + <uint64_t> p
            x = c_x0
            s = 0.0
            zm = z0
            for k in range(1, c_nmax + 1):
                philox_pair(c_seed, stream, <uint64_t> k, 0, &ua, &ub)
                a = asupp[pick_row(acum, na, ua)]
                if c_bmode == 0:
                    b = c_blo + (c_bhi - c_blo) * ub
                else:
                    b = bsupp[pick_row(bcum, nb, ub)]
                xn = a * x + b
                zm = zm + (c_tc * xn - c_rc * x)
                s = s + xn
                x = xn
                delta = zm - (c_y + s + c_rc * x)
                if delta > 1e-10 or delta < -1e-10:
                    viol += 1
                p_checks[p] += 1
                if p_tau[p] < 0 and (c_y + s) <= 0.0:
                    p_tau[p] = k
                    p_mtau[p] = zm - z0
                if zm <= 0.0:
                    if p_t[p] < 0:
                        p_t[p] = k
                        p_mt[p] = zm - z0
                    if p_hat[p] < 0 and p_tau[p] >= 0:
                        p_hat[p] = k
                        p_mhat[p] = zm - z0
                if c_rule == 0:
                    done = p_tau[p] >= 0
                elif c_rule == 1:
                    done = p_t[p] >= 0
                else:
                    done = p_hat[p] >= 0
                if done:
                    break
    return tau, t, t_hat, m_tau, m_t, m_t_hat, checks, int(viol)


def dp_step_float(mass, p, shifts, kill_at, out):
    """One survival-DP step on the dense (state, lattice-index) frontier.

    out[i, k + shifts[i]] accumulates p[j, i] * mass[j, k] over j in
    ascending order for destinations >= kill_at; mass sent below kill_at
    is returned as the scalar exit mass. ``out`` must be zeroed by the
    caller's buffer swap.
    """
    cdef double[:, :] mv = mass
    cdef double[:, :] ov = out
    cdef cnp.ndarray[cnp.float64_t, ndim=2] p_arr = \
        np.ascontiguousarray(p, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] sft_arr = \
        np.ascontiguousarray(shifts, dtype=np.int64)
    cdef double* pp = <double*> p_arr.data
    cdef int64_t* sft = <int64_t*> sft_arr.data
    cdef int m = mv.shape[0]
    cdef int64_t width = mv.shape[1]
    cdef int64_t c_kill = <int64_t> kill_at
    cdef int i, j
    cdef int64_t k, lo, hi, ex_hi, s
    cdef double pji, exit_mass = 0.0
    with nogil:
        for i in range(m):
            for k in range(width):
                ov[i, k] = 0.0
        for j in range(m):
            for i in range(m):
                pji = pp[j * m + i]
                if pji == 0.0:
                    continue
                s = sft[i]
                lo = c_kill - s
                if lo < 0:
                    lo = 0
                hi = width - s
                if hi > width:
                    hi = width
                for k in range(lo, hi):
                    ov[i, k + s] += pji * mv[j, k]
                ex_hi = c_kill - s
                if ex_hi > width:
                    ex_hi = width
                for k in range(ex_hi):
                    exit_mass += pji * mv[j, k]
    return exit_mass
