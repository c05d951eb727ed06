"""Compiled inner loops: vector field, DOP853 stepping, event handling.

Everything in here works on raw float64 arrays ``y = [X, Z, b, B]`` and two
scalars: ``c`` (the coupling amplitude, delta * coupling_scale / sqrt(2 Omega))
and ``om`` (the oscillator frequency). The public wrappers live in
:mod:`kinklab.integrator`.
"""

import math

import numpy as np
from numba import njit
from scipy.integrate._ivp import dop853_coefficients as _dop

N_STAGES = 12
A = np.ascontiguousarray(_dop.A[:N_STAGES, :N_STAGES], dtype=np.float64)
B = np.ascontiguousarray(_dop.B, dtype=np.float64)
C = np.ascontiguousarray(_dop.C[:N_STAGES], dtype=np.float64)
E3 = np.ascontiguousarray(_dop.E3, dtype=np.float64)
E5 = np.ascontiguousarray(_dop.E5, dtype=np.float64)

ORDER = 8
SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
# PI controller exponents (Hairer & Wanner, II.4)
BETA = 0.04
ALPHA = 1.0 / ORDER - 0.75 * BETA

# status codes returned by run()
SECTION = 0
ESCAPED = 1
TURNED_BACK = 2
TIMEOUT = 3
FAILED = 4
TIME_REACHED = 5

# independent-variable modes for the stage loop
TIME_MODE = 0
X_MODE = 1

MAX_CROSSINGS = 256


@njit(cache=True)
def sech_tanh(x):
    ax = abs(x)
    e = math.exp(-2.0 * ax)
    sech = 2.0 * math.exp(-ax) / (1.0 + e)
    tanh = (1.0 - e) / (1.0 + e)
    if x < 0.0:
        tanh = -tanh
    return sech, tanh


@njit(cache=True)
def field(y, c, om, out):
    sech, tanh = sech_tanh(y[0])
    s2 = sech * sech
    dU = 4.0 * s2 * tanh
    F = -2.0 * tanh * sech
    dF = -2.0 * sech * (s2 - tanh * tanh)
    out[0] = y[1] / 8.0
    out[1] = -dU - c * dF * y[2]
    out[2] = om * y[3]
    out[3] = -om * y[2] - c * F


@njit(cache=True)
def energy(y, c, om):
    sech, tanh = sech_tanh(y[0])
    return (y[1] * y[1] / 16.0 - 2.0 * sech * sech
            + 0.5 * om * (y[2] * y[2] + y[3] * y[3])
            - 2.0 * c * tanh * sech * y[2])


@njit(cache=True)
def _x_field(w, x, c, om, out, tmp_y, tmp_f):
    # w = [t, Z, b, B] as functions of X; dw/dX = f / X'
    tmp_y[0] = x
    tmp_y[1] = w[1]
    tmp_y[2] = w[2]
    tmp_y[3] = w[3]
    field(tmp_y, c, om, tmp_f)
    inv = 1.0 / tmp_f[0]
    out[0] = inv
    out[1] = tmp_f[1] * inv
    out[2] = tmp_f[2] * inv
    out[3] = tmp_f[3] * inv


@njit(cache=True)
def _eval(mode, y, s, c, om, out, tmp_y, tmp_f):
    if mode == TIME_MODE:
        field(y, c, om, out)
    else:
        _x_field(y, s, c, om, out, tmp_y, tmp_f)


@njit(cache=True)
def dop853_step(mode, y, s, f0, h, c, om, rtol, atol, K, y_new, f_new,
                tmp_y, tmp_f, stage):
    """One DOP853 step of size h from (s, y) with f0 = f(s, y).

    Fills y_new, f_new and returns the scaled error norm (accept if <= 1).
    """
    n = 4
    for i in range(n):
        K[0, i] = f0[i]
    for s_i in range(1, N_STAGES):
        for i in range(n):
            acc = 0.0
            for j in range(s_i):
                acc += A[s_i, j] * K[j, i]
            stage[i] = y[i] + h * acc
        _eval(mode, stage, s + C[s_i] * h, c, om, K[s_i], tmp_y, tmp_f)
    for i in range(n):
        acc = 0.0
        for j in range(N_STAGES):
            acc += B[j] * K[j, i]
        y_new[i] = y[i] + h * acc
    _eval(mode, y_new, s + h, c, om, f_new, tmp_y, tmp_f)
    for i in range(n):
        K[N_STAGES, i] = f_new[i]

    err5 = 0.0
    err3 = 0.0
    for i in range(n):
        sc = atol + rtol * max(abs(y[i]), abs(y_new[i]))
        e5 = 0.0
        e3 = 0.0
        for j in range(N_STAGES + 1):
            e5 += E5[j] * K[j, i]
            e3 += E3[j] * K[j, i]
        e5 /= sc
        e3 /= sc
        err5 += e5 * e5
        err3 += e3 * e3
    if err5 == 0.0 and err3 == 0.0:
        return 0.0
    return abs(h) * err5 / math.sqrt((err5 + 0.01 * err3) * n)


@njit(cache=True)
def land_on_section(y, x_target, c, om, n_sub):
    """Carry y exactly onto X = x_target, using X as the time variable.

    Returns [dt, X, Z, b, B] where dt is the elapsed time along the flow.
    """
    K = np.empty((N_STAGES + 1, 4))
    w = np.empty(4)
    w_new = np.empty(4)
    f0 = np.empty(4)
    f_new = np.empty(4)
    tmp_y = np.empty(4)
    tmp_f = np.empty(4)
    stage = np.empty(4)
    w[0] = 0.0
    w[1] = y[1]
    w[2] = y[2]
    w[3] = y[3]
    x = y[0]
    dx = (x_target - x) / n_sub
    for k in range(n_sub):
        _x_field(w, x, c, om, f0, tmp_y, tmp_f)
        dop853_step(X_MODE, w, x, f0, dx, c, om, 1.0, 1.0, K, w_new, f_new,
                    tmp_y, tmp_f, stage)
        for i in range(4):
            w[i] = w_new[i]
        x = x + dx
    out = np.empty(5)
    out[0] = w[0]
    out[1] = x_target
    out[2] = w[1]
    out[3] = w[2]
    out[4] = w[3]
    return out


@njit(cache=True)
def run(y0, direction, c, om, rtol, atol, max_step, max_time, x_max,
        x_section, stop_at_section, stop_on_turn, t_end, record_stride,
        record_cap):
    """Adaptive integration of the reduced system with event handling.

    direction: +1 forward, -1 backward in time.
    stop_at_section: stop at the first crossing of X = x_section.
    stop_on_turn: stop when Z changes sign (turning point of the kink).
    t_end: stop exactly at |t| = t_end if > 0.
    Escape (|X| >= x_max while moving outward) always stops the run.

    Returns (status, y, t, crossings, n_cross, n_acc, n_rej, drift, h_last,
    record, n_record).
    """
    n = 4
    y = y0.copy()
    y_new = np.empty(n)
    f0 = np.empty(n)
    f_new = np.empty(n)
    K = np.empty((N_STAGES + 1, n))
    tmp_y = np.empty(n)
    tmp_f = np.empty(n)
    stage = np.empty(n)
    crossings = np.zeros((MAX_CROSSINGS, 5))
    record = np.zeros((record_cap, 5))
    n_record = 0
    n_cross = 0

    H0 = energy(y, c, om)
    drift = 0.0
    t = 0.0
    field(y, c, om, f0)
    h = direction * min(max_step, 1e-2)
    err_prev = 1e-4
    n_acc = 0
    n_rej = 0
    status = TIMEOUT
    rejected = False
    if record_stride > 0 and record_cap > 0:
        record[0, 0] = 0.0
        for i in range(n):
            record[0, i + 1] = y[i]
        n_record = 1

    while True:
        if abs(t) >= max_time:
            status = TIMEOUT
            break
        if t_end > 0.0 and abs(t) >= t_end:
            status = TIME_REACHED
            break
        if t_end > 0.0 and abs(t + h) > t_end:
            h = direction * (t_end - abs(t))
        if abs(h) < 1e-14 * max(1.0, abs(t)):
            status = FAILED
            break
        err = dop853_step(TIME_MODE, y, t, f0, h, c, om, rtol, atol, K,
                          y_new, f_new, tmp_y, tmp_f, stage)
        if not (err <= 1.0):
            n_rej += 1
            if err != err:
                fac = MIN_FACTOR
            else:
                fac = max(MIN_FACTOR, SAFETY * err ** (-1.0 / ORDER))
            h = h * fac
            rejected = True
            continue

        n_acc += 1
        xs_old = y[0] - x_section
        xs_new = y_new[0] - x_section
        crossed = xs_old != 0.0 and xs_old * xs_new <= 0.0
        if crossed and n_cross < MAX_CROSSINGS:
            pt = land_on_section(y, x_section, c, om, 2)
            crossings[n_cross, 0] = t + pt[0]
            for i in range(n):
                crossings[n_cross, i + 1] = pt[i + 1]
            n_cross += 1
        turned = y[1] * y_new[1] <= 0.0 and y[1] != 0.0

        t = t + h
        for i in range(n):
            y[i] = y_new[i]
            f0[i] = f_new[i]
        e = abs(energy(y, c, om) - H0)
        if e > drift:
            drift = e
        if record_stride > 0 and n_acc % record_stride == 0 \
                and n_record < record_cap:
            record[n_record, 0] = t
            for i in range(n):
                record[n_record, i + 1] = y[i]
            n_record += 1

        if crossed and stop_at_section:
            status = SECTION
            break
        if stop_on_turn and turned:
            status = TURNED_BACK
            break
        if abs(y[0]) >= x_max and y[0] * y[1] * direction > 0.0:
            status = ESCAPED
            break

        if err == 0.0:
            fac = MAX_FACTOR
        else:
            fac = SAFETY * err ** (-ALPHA) * err_prev ** BETA
            fac = min(MAX_FACTOR, max(MIN_FACTOR, fac))
        if rejected:
            fac = min(1.0, fac)
            rejected = False
        err_prev = max(err, 1e-4)
        h = h * fac
        if abs(h) > max_step:
            h = direction * max_step

    return (status, y, t, crossings, n_cross, n_acc, n_rej, drift, h,
            record, n_record)
