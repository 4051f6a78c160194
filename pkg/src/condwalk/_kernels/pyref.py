"""Pure-NumPy simulation and DP kernels (reference backend).

The compiled backend in ``_core`` mirrors every function here with the
same name, argument list, and per-path arithmetic, consuming the same
counter-based draws: outputs of the walk and martingale kernels are
bit-identical between backends. The DP step differs only in float
summation order of the scalar exit mass (tolerance 1e-12).

Conventions shared by both backends:
  - categorical draw: first index i with cum[i] > u, clamped to the last;
  - walk step k consumes the uniform pair keyed (seed, stream, k, slot 0);
  - finite-chain sums live on an integer lattice (exact kill test k <= 0);
  - dead paths are removed from the working set and consume no draws;
  - the start cell is exempt from the kill test (exit counts from step 1).
"""

from __future__ import annotations

import numpy as np

from ..rng import step_uniforms

BACKEND = "python"


def _pick(p_cum_rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Vectorized categorical draw; p_cum_rows is (n, m) of row cumsums."""
    idx = (u[:, None] >= p_cum_rows).sum(axis=1)
    return np.minimum(idx, p_cum_rows.shape[1] - 1)


def _pick_shared(cum: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Same draw rule against a single shared cumulative vector."""
    return np.minimum(np.searchsorted(cum, u, side="right"), len(cum) - 1)


def finite_walk(seed, stream0, n_paths, x0, k0, shifts, p_cum, record_at, kill):
    """Simulate finite-chain walk paths on the integer sum lattice.

    Returns (counts, state, ksum, streams): alive-path counts at each
    horizon in ``record_at`` (sorted ascending), and the terminal state
    index / lattice sum / stream id of paths alive at the last horizon.
    With kill=False nothing dies and counts equal n_paths.
    """
    record_at = list(record_at)
    n_last = record_at[-1]
    streams = (np.uint64(stream0) + np.arange(n_paths, dtype=np.uint64))
    state = np.full(n_paths, x0, dtype=np.int64)
    ksum = np.full(n_paths, k0, dtype=np.int64)
    shifts = np.asarray(shifts, dtype=np.int64)
    counts = np.zeros(len(record_at), dtype=np.int64)
    pos = 0
    while pos < len(record_at) and record_at[pos] == 0:
        counts[pos] = n_paths
        pos += 1
    for k in range(1, n_last + 1):
        if streams.size:
            u, _ = step_uniforms(seed, streams, k)
            nxt = _pick(p_cum[state], u)
            ksum = ksum + shifts[nxt]
            state = nxt
            if kill:
                keep = ksum > 0
                if not keep.all():
                    streams = streams[keep]
                    state = state[keep]
                    ksum = ksum[keep]
        while pos < len(record_at) and record_at[pos] == k:
            counts[pos] = streams.size
            pos += 1
    return counts, state, ksum, streams


def affine1d_walk(seed, stream0, n_paths, x0, y, a_support, a_cum,
                  b_mode, b_lo, b_hi, b_support, b_cum, record_at, kill):
    """Simulate 1-D affine recursion paths x' = a x + b, s' = s + x'.

    b_mode 0: b = b_lo + (b_hi - b_lo) * u; b_mode 1: categorical over
    b_support. Returns (counts, x, s, streams) analogous to finite_walk.
    """
    record_at = list(record_at)
    n_last = record_at[-1]
    streams = (np.uint64(stream0) + np.arange(n_paths, dtype=np.uint64))
    x = np.full(n_paths, float(x0), dtype=np.float64)
    s = np.zeros(n_paths, dtype=np.float64)
    a_support = np.asarray(a_support, dtype=np.float64)
    counts = np.zeros(len(record_at), dtype=np.int64)
    pos = 0
    while pos < len(record_at) and record_at[pos] == 0:
        counts[pos] = n_paths
        pos += 1
    for k in range(1, n_last + 1):
        if streams.size:
            ua, ub = step_uniforms(seed, streams, k)
            a = a_support[_pick_shared(a_cum, ua)]
            if b_mode == 0:
                b = b_lo + (b_hi - b_lo) * ub
            else:
                b = np.asarray(b_support, dtype=np.float64)[_pick_shared(b_cum, ub)]
            x = a * x + b
            s = s + x
            if kill:
                keep = (y + s) > 0.0
                if not keep.all():
                    streams = streams[keep]
                    x = x[keep]
                    s = s[keep]
        while pos < len(record_at) and record_at[pos] == k:
            counts[pos] = streams.size
            pos += 1
    return counts, x, s, streams


def affine_rd_walk(seed, stream0, n_paths, x0, y, a_stack, b_stack, cum, u_vec,
                   record_at, kill):
    """Simulate R^d affine recursion paths; f(x) = <u, x>.

    One categorical draw picks the (A, B) pair per step. Returns
    (counts, s, streams). This kernel has no compiled twin.
    """
    record_at = list(record_at)
    n_last = record_at[-1]
    streams = (np.uint64(stream0) + np.arange(n_paths, dtype=np.uint64))
    x = np.broadcast_to(np.asarray(x0, dtype=np.float64),
                        (n_paths, len(u_vec))).copy()
    s = np.zeros(n_paths, dtype=np.float64)
    counts = np.zeros(len(record_at), dtype=np.int64)
    pos = 0
    while pos < len(record_at) and record_at[pos] == 0:
        counts[pos] = n_paths
        pos += 1
    for k in range(1, n_last + 1):
        if streams.size:
            ua, _ = step_uniforms(seed, streams, k)
            g = _pick_shared(cum, ua)
            x = np.einsum("pij,pj->pi", a_stack[g], x) + b_stack[g]
            s = s + x @ u_vec
            if kill:
                keep = (y + s) > 0.0
                if not keep.all():
                    streams = streams[keep]
                    x = x[keep]
                    s = s[keep]
        while pos < len(record_at) and record_at[pos] == k:
            counts[pos] = streams.size
            pos += 1
    return counts, s, streams


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
    streams_all = (np.uint64(stream0) + np.arange(n_paths, dtype=np.uint64))
    idx = np.arange(n_paths)
    streams = streams_all
    state = np.full(n_paths, x0, dtype=np.int64)
    shifts_L = np.asarray(shifts_L, dtype=np.int64)
    theta_L = np.asarray(theta_L, dtype=np.int64)
    r_L = np.asarray(r_L, dtype=np.int64)
    z0 = np.int64(k0L) + r_L[x0]
    ks = np.full(n_paths, k0L, dtype=np.int64)
    zm = np.full(n_paths, z0, dtype=np.int64)
    tau = np.full(n_paths, -1, dtype=np.int64)
    t = np.full(n_paths, -1, dtype=np.int64)
    t_hat = np.full(n_paths, -1, dtype=np.int64)
    m_tau = np.zeros(n_paths, dtype=np.int64)
    m_t = np.zeros(n_paths, dtype=np.int64)
    m_t_hat = np.zeros(n_paths, dtype=np.int64)
    checks = np.zeros(n_paths, dtype=np.int64)
    viol = 0
    for k in range(1, n_max + 1):
        if not idx.size:
            break
        u, _ = step_uniforms(seed, streams, k)
        nxt = _pick(p_cum[state], u)
        zm = zm + (theta_L[nxt] - r_L[state])
        ks = ks + shifts_L[nxt]
        viol += int(np.count_nonzero(zm != ks + r_L[nxt]))
        checks[idx] += 1
        state = nxt
        hit_tau = (tau[idx] < 0) & (ks <= 0)
        if hit_tau.any():
            sel = idx[hit_tau]
            tau[sel] = k
            m_tau[sel] = zm[hit_tau] - z0
        dip = zm <= 0
        hit_t = (t[idx] < 0) & dip
        if hit_t.any():
            sel = idx[hit_t]
            t[sel] = k
            m_t[sel] = zm[hit_t] - z0
        hit_hat = (t_hat[idx] < 0) & dip & (tau[idx] >= 0)
        if hit_hat.any():
            sel = idx[hit_hat]
            t_hat[sel] = k
            m_t_hat[sel] = zm[hit_hat] - z0
        if stop_rule == 0:
            done = tau[idx] >= 0
        elif stop_rule == 1:
            done = t[idx] >= 0
        else:
            done = t_hat[idx] >= 0
        if done.any():
            keep = ~done
            idx = idx[keep]
            streams = streams[keep]
            state = state[keep]
            ks = ks[keep]
            zm = zm[keep]
    return tau, t, t_hat, m_tau, m_t, m_t_hat, checks, viol


def affine1d_martingale(seed, stream0, n_paths, x0, y, a_support, a_cum,
                        b_mode, b_lo, b_hi, b_support, b_cum,
                        theta_coef, r_coef, n_max, stop_rule):
    """Float twin of finite_martingale for the 1-D affine recursion.

    theta(x) = theta_coef * x, r(x) = r_coef * x; the coupling identity
    |zm - (y + s + r(x))| <= 1e-10 is checked every step.
    """
    streams_all = (np.uint64(stream0) + np.arange(n_paths, dtype=np.uint64))
    idx = np.arange(n_paths)
    streams = streams_all
    x = np.full(n_paths, float(x0), dtype=np.float64)
    s = np.zeros(n_paths, dtype=np.float64)
    a_support = np.asarray(a_support, dtype=np.float64)
    z0 = y + r_coef * float(x0)
    zm = np.full(n_paths, z0, dtype=np.float64)
    tau = np.full(n_paths, -1, dtype=np.int64)
    t = np.full(n_paths, -1, dtype=np.int64)
    t_hat = np.full(n_paths, -1, dtype=np.int64)
    m_tau = np.zeros(n_paths, dtype=np.float64)
    m_t = np.zeros(n_paths, dtype=np.float64)
    m_t_hat = np.zeros(n_paths, dtype=np.float64)
    checks = np.zeros(n_paths, dtype=np.int64)
    viol = 0
    for k in range(1, n_max + 1):
        if not idx.size:
            break
        ua, ub = step_uniforms(seed, streams, k)
        a = a_support[_pick_shared(a_cum, ua)]
        if b_mode == 0:
            b = b_lo + (b_hi - b_lo) * ub
        else:
            b = np.asarray(b_support, dtype=np.float64)[_pick_shared(b_cum, ub)]
        xn = a * x + b
        zm = zm + (theta_coef * xn - r_coef * x)
        s = s + xn
        x = xn
        viol += int(np.count_nonzero(np.abs(zm - (y + s + r_coef * x)) > 1e-10))
        checks[idx] += 1
        hit_tau = (tau[idx] < 0) & ((y + s) <= 0.0)
        if hit_tau.any():
            sel = idx[hit_tau]
            tau[sel] = k
            m_tau[sel] = zm[hit_tau] - z0
        dip = zm <= 0.0
        hit_t = (t[idx] < 0) & dip
        if hit_t.any():
            sel = idx[hit_t]
            t[sel] = k
            m_t[sel] = zm[hit_t] - z0
        hit_hat = (t_hat[idx] < 0) & dip & (tau[idx] >= 0)
        if hit_hat.any():
            sel = idx[hit_hat]
            t_hat[sel] = k
            m_t_hat[sel] = zm[hit_hat] - z0
        if stop_rule == 0:
            done = tau[idx] >= 0
        elif stop_rule == 1:
            done = t[idx] >= 0
        else:
            done = t_hat[idx] >= 0
        if done.any():
            keep = ~done
            idx = idx[keep]
            streams = streams[keep]
            x = x[keep]
            s = s[keep]
            zm = zm[keep]
    return tau, t, t_hat, m_tau, m_t, m_t_hat, checks, viol


def dp_step_float(mass, p, shifts, kill_at, out):
    """One survival-DP step on the dense (state, lattice-index) frontier.

    out[i, k + shifts[i]] accumulates p[j, i] * mass[j, k] over j in
    ascending order for destinations >= kill_at; mass sent below kill_at
    is returned as the scalar exit mass. ``out`` must be zeroed by the
    caller's buffer swap.
    """
    m, width = mass.shape
    out[:, :] = 0.0
    exit_mass = 0.0
    for j in range(m):
        row = mass[j]
        for i in range(m):
            pji = p[j, i]
            if pji == 0.0:
                continue
            sft = int(shifts[i])
            lo = max(0, kill_at - sft)
            hi = min(width, width - sft)
            if lo < hi:
                out[i, lo + sft:hi + sft] += pji * row[lo:hi]
            ex_hi = min(width, kill_at - sft)
            if ex_hi > 0:
                exit_mass += pji * float(row[:ex_hi].sum())
    return exit_mass
