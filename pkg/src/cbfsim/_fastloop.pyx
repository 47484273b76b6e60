# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled double-integrator simulation kernel.

Specializes the reference loop for the two built-in measurement variants:
two states, one input, margin -2 x1 - x2^2.  Every floating-point expression
mirrors the operation order of the pure path so the two backends track each
other to roundoff; keep the two in sync when touching either.  The one known
divergence is summation order inside the moving-average trapezoid (numpy
sums pairwise, this loop sequentially).
"""

import numpy as np

from libc.math cimport INFINITY, fabs, isfinite, nextafter, sqrt


cdef struct Constraint:
    double a
    double b


cdef struct Interval:
    double lo
    double hi
    int empty


cdef inline double _pymax(double a, double b):
    # Python max(a, b): second argument wins only when strictly larger.
    return b if b > a else a


cdef inline double _pymin(double a, double b):
    return b if b < a else a


cdef inline double _sign(double v):
    if v > 0.0:
        return 1.0
    if v < 0.0:
        return -1.0
    return 0.0


cdef inline double _margin(double x0, double x1):
    return (-2.0 * x0) - (x1 * x1)


cdef inline Constraint _constraint(double x0, double x1):
    # a = grad . f0 + alpha(margin), b = grad . G for the double integrator.
    cdef Constraint c
    cdef double g0 = -2.0
    cdef double g1 = -2.0 * x1
    c.a = (g0 * x1 + g1 * 0.0) + 2.0 * _margin(x0, x1)
    c.b = g0 * 0.0 + g1 * 1.0
    return c


cdef inline double _repaired_cut(double a, double b):
    # -a / b nudged until a + b * cut >= 0 actually evaluates true, matching
    # the pure path's one-ulp endpoint repair.
    cdef double cut = -a / b
    cdef double toward = INFINITY if b > 0.0 else -INFINITY
    cdef int i
    for i in range(8):
        if a + b * cut >= 0.0:
            break
        cut = nextafter(cut, toward)
    return cut


cdef inline Interval _interval(double x0, double x1, double u_lo, double u_hi):
    cdef Constraint c = _constraint(x0, x1)
    cdef Interval iv
    iv.empty = 0
    if c.b > 0.0:
        iv.lo = _pymax(u_lo, _repaired_cut(c.a, c.b))
        iv.hi = u_hi
    elif c.b < 0.0:
        iv.lo = u_lo
        iv.hi = _pymin(u_hi, _repaired_cut(c.a, c.b))
    else:
        if c.a >= 0.0:
            iv.lo = u_lo
            iv.hi = u_hi
        else:
            iv.empty = 1
            return iv
    if iv.lo > iv.hi:
        iv.empty = 1
    return iv


def run_double_integrator(
    double[::1] x0,
    double[::1] xhat0,
    double[:, ::1] K,
    int position_only,
    double dt,
    Py_ssize_t n_rows,
    double[:, ::1] u_profile,
    double u_lo,
    double u_hi,
    int attack_mode,       # 0 none, 1 random, 2 gradient
    int attack_norm,       # 0 L2, 1 Linf
    double delta,
    double gamma,
    object rng,            # numpy Generator for the random policy, else None
    int det_norm,          # 0 L2, 1 Linf
    double det_delta,
    double det_nu,
    double det_horizon,
    int has_noise,
    double[:, ::1] noise,
    double[:, ::1] out,
):
    """Fill ``out`` row by row; returns the number of rows completed.

    A return value below ``n_rows`` means the state left the finite range
    while advancing past the last completed row.
    """
    cdef Py_ssize_t ny = 1 if position_only else 2
    cdef Py_ssize_t k, i, head
    cdef double x_0 = x0[0], x_1 = x0[1]
    cdef double xh0 = xhat0[0], xh1 = xhat0[1]
    cdef double t, u_des, u_act, m_hat, m_true
    cdef double y0, y1, h0_0, h0_1, yi0, yi1
    cdef double g1, c0, c1, cn, r0, r1, rn, den, rho, ma
    cdef double cutoff, window, lo_t, frac, v0, t0, prev_t, prev_v, total
    cdef double slack, iv_lo, iv_hi
    cdef double k1_0, k1_1, k2_0, k2_1, k3_0, k3_1, k4_0, k4_1
    cdef double z0, z1, half_dt, s6, corr0, corr1, nx0, nx1, nh0, nh1
    cdef int armed, att_active, mag, corr_alarm, cbf_active, infeasible, deact
    cdef Constraint con
    cdef Interval ihat, itrue
    cdef object e_obj
    cdef double[::1] e_mv

    # Trailing window of the alignment statistic.  Appends are indexed by the
    # step counter; eviction advances head, so one allocation serves the run.
    wt_arr = np.empty(n_rows)
    wv_arr = np.empty(n_rows)
    cdef double[::1] wt = wt_arr
    cdef double[::1] wv = wv_arr
    head = 0

    half_dt = 0.5 * dt
    s6 = dt / 6.0

    for k in range(n_rows):
        t = k * dt

        # (1) measure the true state
        y0 = x_0
        y1 = x_1
        if has_noise:
            y0 = y0 + noise[k, 0]
            if ny == 2:
                y1 = y1 + noise[k, 1]

        # (2) adversary
        h0_0 = xh0
        h0_1 = xh1
        m_hat = _margin(xh0, xh1)
        g1 = -2.0 * xh1
        c0 = K[0, 0] * -2.0 + K[1, 0] * g1
        c1 = K[0, 1] * -2.0 + K[1, 1] * g1 if ny == 2 else 0.0
        yi0 = y0
        yi1 = y1
        att_active = 0
        armed = 1 if (attack_mode != 0 and m_hat < gamma) else 0
        if armed:
            if attack_mode == 2 and attack_norm == 0:
                cn = sqrt(c0 * c0 + c1 * c1) if ny == 2 else sqrt(c0 * c0)
                if cn > 1e-12:
                    yi0 = h0_0 + delta * (c0 / cn)
                    if ny == 2:
                        yi1 = h0_1 + delta * (c1 / cn)
                    att_active = 1
            elif attack_mode == 2:
                yi0 = h0_0 + delta * _sign(c0)
                if ny == 2:
                    yi1 = h0_1 + delta * _sign(c1)
                att_active = 1
            elif attack_mode == 1:
                while True:
                    e_obj = rng.standard_normal(ny)
                    e_mv = e_obj
                    cn = (
                        sqrt(e_mv[0] * e_mv[0] + e_mv[1] * e_mv[1])
                        if ny == 2
                        else sqrt(e_mv[0] * e_mv[0])
                    )
                    if cn > 1e-12:
                        break
                yi0 = h0_0 + delta * (e_mv[0] / cn)
                if ny == 2:
                    yi1 = h0_1 + delta * (e_mv[1] / cn)
                att_active = 1

        # (3) detector: magnitude layer, then alignment plus moving average
        r0 = yi0 - h0_0
        r1 = yi1 - h0_1 if ny == 2 else 0.0
        if det_norm == 0:
            rn = sqrt(r0 * r0 + r1 * r1) if ny == 2 else sqrt(r0 * r0)
        else:
            rn = _pymax(fabs(r0), fabs(r1)) if ny == 2 else fabs(r0)
        mag = 1 if rn > det_delta + 1e-12 else 0

        if det_norm == 0:
            den = sqrt(c0 * c0 + c1 * c1) if ny == 2 else sqrt(c0 * c0)
        else:
            den = _pymax(fabs(c0), fabs(c1)) if ny == 2 else fabs(c0)
        if den <= 1e-12:
            rho = 0.0
        elif ny == 2:
            rho = (c0 * r0 + c1 * r1) / (det_delta * den)
        else:
            rho = (c0 * r0) / (det_delta * den)

        wt[k] = t
        wv[k] = rho
        cutoff = t - det_horizon
        while (k - head + 1) >= 2 and wt[head + 1] <= cutoff + 1e-12:
            head = head + 1
        window = _pymin(det_horizon, t)
        if (k - head + 1) == 1 or window <= 0.0:
            ma = rho
        else:
            lo_t = t - window
            t0 = wt[head]
            v0 = wv[head]
            if t0 < lo_t:
                frac = (lo_t - t0) / (wt[head + 1] - t0)
                v0 = wv[head] + frac * (wv[head + 1] - wv[head])
                t0 = lo_t
            total = 0.0
            prev_t = t0
            prev_v = v0
            for i in range(head + 1, k + 1):
                total = total + (0.5 * (wt[i] - prev_t)) * (wv[i] + prev_v)
                prev_t = wt[i]
                prev_v = wv[i]
            ma = total / window
        corr_alarm = 1 if (ma > det_nu and t >= det_horizon - 1e-12) else 0

        # (4) safety filter at the estimate
        u_des = u_profile[k, 0]
        con = _constraint(xh0, xh1)
        if con.b > 0.0:
            slack = con.a + con.b * u_hi
        elif con.b < 0.0:
            slack = con.a + con.b * u_lo
        else:
            slack = con.a + con.b * 0.0
        if slack < 0.0:
            if con.b > 0.0:
                u_act = u_hi
            elif con.b < 0.0:
                u_act = u_lo
            else:
                u_act = _pymin(_pymax(u_des, u_lo), u_hi)
            infeasible = 1
        else:
            ihat = _interval(xh0, xh1, u_lo, u_hi)
            if ihat.empty:
                # Degenerate corner: slack rounded to zero but the repaired
                # cut left the box; take the certified box edge.
                if con.b > 0.0:
                    u_act = u_hi
                elif con.b < 0.0:
                    u_act = u_lo
                else:
                    u_act = _pymin(_pymax(u_des, u_lo), u_hi)
            else:
                u_act = _pymin(_pymax(u_des, ihat.lo), ihat.hi)
            infeasible = 0
        cbf_active = 1 if fabs(con.a + con.b * u_act) <= 1e-10 else 0

        # (5) does the estimate admit controls the true state forbids?
        ihat = _interval(xh0, xh1, u_lo, u_hi)
        if ihat.empty:
            deact = 0
        else:
            itrue = _interval(x_0, x_1, u_lo, u_hi)
            if itrue.empty:
                deact = 1
            elif ihat.lo < itrue.lo:
                deact = 1
            elif ihat.hi > itrue.hi:
                deact = 1
            else:
                deact = 0

        # (6) record
        m_true = _margin(x_0, x_1)
        out[k, 0] = t
        out[k, 1] = x_0
        out[k, 2] = x_1
        out[k, 3] = xh0
        out[k, 4] = xh1
        out[k, 5] = y0
        if ny == 2:
            out[k, 6] = y1
            out[k, 7] = yi0
            out[k, 8] = yi1
        else:
            out[k, 6] = yi0
        out[k, 5 + 2 * ny] = u_des
        out[k, 6 + 2 * ny] = u_act
        out[k, 7 + 2 * ny] = m_true
        out[k, 8 + 2 * ny] = m_hat
        out[k, 9 + 2 * ny] = rho
        out[k, 10 + 2 * ny] = ma
        out[k, 11 + 2 * ny] = 1.0 if mag else 0.0
        out[k, 12 + 2 * ny] = 1.0 if corr_alarm else 0.0
        out[k, 13 + 2 * ny] = 1.0 if att_active else 0.0
        out[k, 14 + 2 * ny] = 1.0 if cbf_active else 0.0
        out[k, 15 + 2 * ny] = 1.0 if infeasible else 0.0
        out[k, 16 + 2 * ny] = 1.0 if deact else 0.0

        if k + 1 < n_rows:
            # plant: zdot = (z2, u_act)
            k1_0 = x_1
            k1_1 = u_act
            z1 = x_1 + half_dt * k1_1
            k2_0 = z1
            k2_1 = u_act
            z1 = x_1 + half_dt * k2_1
            k3_0 = z1
            k3_1 = u_act
            z1 = x_1 + dt * k3_1
            k4_0 = z1
            k4_1 = u_act
            nx0 = x_0 + s6 * (((k1_0 + 2.0 * k2_0) + 2.0 * k3_0) + k4_0)
            nx1 = x_1 + s6 * (((k1_1 + 2.0 * k2_1) + 2.0 * k3_1) + k4_1)

            # observer: zdot = (z2 + corr0, u_act + corr1), innovation held
            r0 = yi0 - xh0
            r1 = yi1 - xh1 if ny == 2 else 0.0
            if ny == 2:
                corr0 = K[0, 0] * r0 + K[0, 1] * r1
                corr1 = K[1, 0] * r0 + K[1, 1] * r1
            else:
                corr0 = K[0, 0] * r0
                corr1 = K[1, 0] * r0
            k1_0 = xh1 + corr0
            k1_1 = u_act + corr1
            z1 = xh1 + half_dt * k1_1
            k2_0 = z1 + corr0
            k2_1 = u_act + corr1
            z1 = xh1 + half_dt * k2_1
            k3_0 = z1 + corr0
            k3_1 = u_act + corr1
            z1 = xh1 + dt * k3_1
            k4_0 = z1 + corr0
            k4_1 = u_act + corr1
            nh0 = xh0 + s6 * (((k1_0 + 2.0 * k2_0) + 2.0 * k3_0) + k4_0)
            nh1 = xh1 + s6 * (((k1_1 + 2.0 * k2_1) + 2.0 * k3_1) + k4_1)

            if not (
                isfinite(nx0)
                and isfinite(nx1)
                and isfinite(nh0)
                and isfinite(nh1)
            ):
                return k + 1
            x_0 = nx0
            x_1 = nx1
            xh0 = nh0
            xh1 = nh1
    return n_rows
