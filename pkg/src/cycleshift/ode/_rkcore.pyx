# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Dormand-Prince 5(4) stepper with dense output.

Integrates y' = rhs(t, y) from t = 0 to t = t_end > 0 with adaptive step
control (RMS error norm, scale = atol + rtol*max(|y|, |y_new|)) and the
Shampine quartic interpolant on every accepted step.  The algorithm and
all control constants match the pure-Python backend, so the two backends
differ only in wall time and round-off-level step placement.

Returns (ts, ys, qs, status, nfev) where status is 0 on success, 1 on
step-size underflow / step-budget exhaustion and 2 on a non-finite
right-hand side.
"""

import numpy as np

cdef double SAFETY = 0.9
cdef double MIN_FACTOR = 0.2
cdef double MAX_FACTOR = 10.0
cdef double ERR_EXPONENT = -0.2  # -1/(order+1) for the embedded order-4 estimate

cdef double[6] C_NODES
C_NODES[0] = 0.0
C_NODES[1] = 1.0 / 5.0
C_NODES[2] = 3.0 / 10.0
C_NODES[3] = 4.0 / 5.0
C_NODES[4] = 8.0 / 9.0
C_NODES[5] = 1.0

cdef double[6][5] A_COEF
A_COEF[1][0] = 1.0 / 5.0
A_COEF[2][0] = 3.0 / 40.0
A_COEF[2][1] = 9.0 / 40.0
A_COEF[3][0] = 44.0 / 45.0
A_COEF[3][1] = -56.0 / 15.0
A_COEF[3][2] = 32.0 / 9.0
A_COEF[4][0] = 19372.0 / 6561.0
A_COEF[4][1] = -25360.0 / 2187.0
A_COEF[4][2] = 64448.0 / 6561.0
A_COEF[4][3] = -212.0 / 729.0
A_COEF[5][0] = 9017.0 / 3168.0
A_COEF[5][1] = -355.0 / 33.0
A_COEF[5][2] = 46732.0 / 5247.0
A_COEF[5][3] = 49.0 / 176.0
A_COEF[5][4] = -5103.0 / 18656.0

cdef double[6] B_COEF
B_COEF[0] = 35.0 / 384.0
B_COEF[1] = 0.0
B_COEF[2] = 500.0 / 1113.0
B_COEF[3] = 125.0 / 192.0
B_COEF[4] = -2187.0 / 6784.0
B_COEF[5] = 11.0 / 84.0

cdef double[7] E_COEF
E_COEF[0] = 71.0 / 57600.0
E_COEF[1] = 0.0
E_COEF[2] = -71.0 / 16695.0
E_COEF[3] = 71.0 / 1920.0
E_COEF[4] = -17253.0 / 339200.0
E_COEF[5] = 22.0 / 525.0
E_COEF[6] = -1.0 / 40.0

# Shampine dense-output matrix (7 stages x theta^1..theta^4).
cdef double[7][4] P_COEF
P_COEF[0][0] = 1.0
P_COEF[0][1] = -8048581381.0 / 2820520608.0
P_COEF[0][2] = 8663915743.0 / 2820520608.0
P_COEF[0][3] = -12715105075.0 / 11282082432.0
P_COEF[1][0] = 0.0
P_COEF[1][1] = 0.0
P_COEF[1][2] = 0.0
P_COEF[1][3] = 0.0
P_COEF[2][0] = 0.0
P_COEF[2][1] = 131558114200.0 / 32700410799.0
P_COEF[2][2] = -68118460800.0 / 10900136933.0
P_COEF[2][3] = 87487479700.0 / 32700410799.0
P_COEF[3][0] = 0.0
P_COEF[3][1] = -1754552775.0 / 470086768.0
P_COEF[3][2] = 14199869525.0 / 1410260304.0
P_COEF[3][3] = -10690763975.0 / 1880347072.0
P_COEF[4][0] = 0.0
P_COEF[4][1] = 127303824393.0 / 49829197408.0
P_COEF[4][2] = -318862633887.0 / 49829197408.0
P_COEF[4][3] = 701980252875.0 / 199316789632.0
P_COEF[5][0] = 0.0
P_COEF[5][1] = -282668133.0 / 205662961.0
P_COEF[5][2] = 2019193451.0 / 616988883.0
P_COEF[5][3] = -1453857185.0 / 822651844.0
P_COEF[6][0] = 0.0
P_COEF[6][1] = 40617522.0 / 29380423.0
P_COEF[6][2] = -110615467.0 / 29380423.0
P_COEF[6][3] = 69997945.0 / 29380423.0

STATUS_OK = 0
STATUS_STEP_FAILURE = 1
STATUS_NONFINITE = 2

cdef double _EPS = np.finfo(np.float64).eps


cdef int _eval_rhs(object rhs, double t, double[::1] y, double[::1] out, Py_ssize_t n) except -1:
    """Call the Python rhs; copy the result into out; 1 if finite, 0 if not."""
    cdef Py_ssize_t j
    y_arr = np.empty(n)
    cdef double[::1] yv = y_arr
    for j in range(n):
        yv[j] = y[j]
    res = np.asarray(rhs(t, y_arr), dtype=np.float64).reshape(-1)
    if res.shape[0] != n:
        raise ValueError(
            f"rhs returned {res.shape[0]} components, expected {n}"
        )
    cdef double[::1] rv = res
    cdef double v
    cdef int finite = 1
    for j in range(n):
        v = rv[j]
        out[j] = v
        if not (v == v and -1e308 < v < 1e308):
            finite = 0
    return finite


def integrate_dopri5(object rhs, double t_end, object y0, double rtol,
                     double atol, double max_step, long max_steps):
    """Adaptive DOPRI5(4) run over [0, t_end]; see module docstring."""
    cdef Py_ssize_t n = len(y0)
    cdef Py_ssize_t i, j, s, stage
    cdef long nfev = 0
    cdef long nsteps = 0
    cdef int status = STATUS_OK
    cdef int finite

    y0_arr = np.ascontiguousarray(y0, dtype=np.float64)

    # growable step storage
    cdef Py_ssize_t cap = 512
    ts_buf = np.empty(cap)
    ys_buf = np.empty((cap, n))
    qs_buf = np.empty((cap, n, 4))
    cdef double[::1] ts = ts_buf
    cdef double[:, ::1] ys = ys_buf
    cdef double[:, :, ::1] qs = qs_buf

    work = np.empty((10, n))
    cdef double[:, ::1] K = work            # rows 0..6: stage derivatives
    cdef double[::1] y = work[7]
    cdef double[::1] y_new = work[8]
    cdef double[::1] y_stage = work[9]

    for j in range(n):
        y[j] = y0_arr[j]
    ts[0] = 0.0
    for j in range(n):
        ys[0, j] = y[j]

    finite = _eval_rhs(rhs, 0.0, y, K[0], n)
    nfev += 1
    if not finite:
        return _finish(ts_buf, ys_buf, qs_buf, 1, STATUS_NONFINITE, nfev)

    cdef double h = _initial_step(rhs, y, K[0], t_end, rtol, atol, max_step, n, &nfev)
    cdef double t = 0.0
    cdef double t_new, err_norm, scale, e, factor, h_min
    cdef int step_rejected
    cdef Py_ssize_t m = 0  # accepted steps

    while t < t_end:
        h_min = 10.0 * _EPS * max(t, 1.0)
        if h > t_end - t:
            h = t_end - t
        step_rejected = 0
        while True:
            if h < h_min:
                status = STATUS_STEP_FAILURE
                break
            # stages 1..5
            finite = 1
            for stage in range(1, 6):
                for j in range(n):
                    e = 0.0
                    for s in range(stage):
                        e += A_COEF[stage][s] * K[s, j]
                    y_stage[j] = y[j] + h * e
                finite = _eval_rhs(rhs, t + C_NODES[stage] * h, y_stage, K[stage], n)
                nfev += 1
                if not finite:
                    break
            if finite:
                for j in range(n):
                    e = 0.0
                    for s in range(6):
                        e += B_COEF[s] * K[s, j]
                    y_new[j] = y[j] + h * e
                finite = _eval_rhs(rhs, t + h, y_new, K[6], n)
                nfev += 1
            if not finite:
                status = STATUS_NONFINITE
                break

            # embedded error estimate, RMS-normalized
            err_norm = 0.0
            for j in range(n):
                e = 0.0
                for s in range(7):
                    e += E_COEF[s] * K[s, j]
                e *= h
                scale = atol + rtol * max(fabs_c(y[j]), fabs_c(y_new[j]))
                e /= scale
                err_norm += e * e
            err_norm = (err_norm / n) ** 0.5

            if err_norm < 1.0:
                if err_norm == 0.0:
                    factor = MAX_FACTOR
                else:
                    factor = SAFETY * err_norm ** ERR_EXPONENT
                    if factor > MAX_FACTOR:
                        factor = MAX_FACTOR
                if step_rejected and factor > 1.0:
                    factor = 1.0
                break
            step_rejected = 1
            factor = SAFETY * err_norm ** ERR_EXPONENT
            if factor < MIN_FACTOR:
                factor = MIN_FACTOR
            h *= factor

        if status != STATUS_OK:
            break

        # dense coefficients Q = K^T P for the accepted segment
        if m + 2 > cap:
            cap *= 2
            ts_buf, ys_buf, qs_buf = _grow(ts_buf, ys_buf, qs_buf, cap)
            ts = ts_buf
            ys = ys_buf
            qs = qs_buf
        for j in range(n):
            for i in range(4):
                e = 0.0
                for s in range(7):
                    e += K[s, j] * P_COEF[s][i]
                qs[m, j, i] = e

        t_new = t + h
        m += 1
        ts[m] = t_new
        for j in range(n):
            ys[m, j] = y_new[j]
            y[j] = y_new[j]
            K[0, j] = K[6, j]  # FSAL
        t = t_new

        h *= factor
        if h > max_step:
            h = max_step

        nsteps += 1
        if nsteps >= max_steps:
            if t < t_end:
                status = STATUS_STEP_FAILURE
            break

    return _finish(ts_buf, ys_buf, qs_buf, m + 1, status, nfev)


cdef inline double fabs_c(double x):
    return -x if x < 0.0 else x


cdef double _initial_step(object rhs, double[::1] y0, double[::1] f0,
                          double t_end, double rtol, double atol,
                          double max_step, Py_ssize_t n, long* nfev) except -1.0:
    """Hairer-style starting step estimate (matches the Python backend)."""
    cdef Py_ssize_t j
    cdef double d0 = 0.0, d1 = 0.0, d2 = 0.0, scale, h0, h1, h
    for j in range(n):
        scale = atol + rtol * fabs_c(y0[j])
        d0 += (y0[j] / scale) ** 2
        d1 += (f0[j] / scale) ** 2
    d0 = (d0 / n) ** 0.5
    d1 = (d1 / n) ** 0.5
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    if h0 > t_end:
        h0 = t_end

    y1 = np.empty(n)
    f1 = np.empty(n)
    cdef double[::1] y1v = y1
    cdef double[::1] f1v = f1
    for j in range(n):
        y1v[j] = y0[j] + h0 * f0[j]
    _eval_rhs(rhs, h0, y1v, f1v, n)
    nfev[0] += 1
    for j in range(n):
        scale = atol + rtol * fabs_c(y0[j])
        d2 += ((f1v[j] - f0[j]) / scale) ** 2
    d2 = (d2 / n) ** 0.5 / h0

    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    h = min(100.0 * h0, h1)
    if h > t_end:
        h = t_end
    if h > max_step:
        h = max_step
    return h


def _grow(ts, ys, qs, Py_ssize_t cap):
    ts2 = np.empty(cap)
    ys2 = np.empty((cap, ys.shape[1]))
    qs2 = np.empty((cap, qs.shape[1], 4))
    m = ts.shape[0]
    ts2[:m] = ts
    ys2[:m] = ys
    qs2[:m] = qs
    return ts2, ys2, qs2


def _finish(ts, ys, qs, Py_ssize_t count, int status, long nfev):
    nseg = count - 1 if count > 1 else 0
    return (np.array(ts[:count]), np.array(ys[:count]),
            np.array(qs[:nseg]), status, nfev)
