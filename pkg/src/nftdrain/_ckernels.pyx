# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: segment reductions for graph aggregation and the SMO solver.

Every routine here has a numpy twin in ``_pykernels`` with the same
signature and the same reduction order.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, INFINITY

cnp.import_array()

cdef double TAU = 1e-12


def segment_sum(const double[:, ::1] values, const cnp.intp_t[::1] seg, Py_ssize_t n_segments):
    cdef Py_ssize_t n_rows = values.shape[0], d = values.shape[1]
    cdef Py_ssize_t e, k, s
    out_arr = np.zeros((n_segments, d), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    for e in range(n_rows):
        s = seg[e]
        for k in range(d):
            out[s, k] += values[e, k]
    return out_arr


def segment_softmax(const double[:, ::1] scores, const cnp.intp_t[::1] seg, Py_ssize_t n_segments):
    cdef Py_ssize_t n_rows = scores.shape[0], d = scores.shape[1]
    cdef Py_ssize_t e, k, s
    mx_arr = np.full((n_segments, d), -INFINITY, dtype=np.float64)
    tot_arr = np.zeros((n_segments, d), dtype=np.float64)
    out_arr = np.empty((n_rows, d), dtype=np.float64)
    cdef double[:, ::1] mx = mx_arr
    cdef double[:, ::1] tot = tot_arr
    cdef double[:, ::1] out = out_arr
    for e in range(n_rows):
        s = seg[e]
        for k in range(d):
            if scores[e, k] > mx[s, k]:
                mx[s, k] = scores[e, k]
    for e in range(n_rows):
        s = seg[e]
        for k in range(d):
            out[e, k] = exp(scores[e, k] - mx[s, k])
            tot[s, k] += out[e, k]
    for e in range(n_rows):
        s = seg[e]
        for k in range(d):
            out[e, k] = out[e, k] / tot[s, k]
    return out_arr


def gather_rowdot(const double[:, ::1] A, const cnp.intp_t[::1] ia,
                  const double[:, ::1] B, const cnp.intp_t[::1] ib):
    """out[e] = A[ia[e]] . B[ib[e]] without materialising the gathered rows."""
    cdef Py_ssize_t n = ia.shape[0], d = A.shape[1]
    cdef Py_ssize_t e, k, a, b
    cdef double acc
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    for e in range(n):
        a = ia[e]
        b = ib[e]
        acc = 0.0
        for k in range(d):
            acc += A[a, k] * B[b, k]
        out[e] = acc
    return out_arr


def smo_solve(const double[:, ::1] K, const double[::1] y, double C, double tol, long max_iter):
    """Dual C-SVC by SMO with second-order working-set selection.

    Returns ``(alpha, rho, n_iter, converged)``; the decision function is
    ``sum(alpha * y * K[:, x]) - rho``.
    """
    cdef Py_ssize_t n = K.shape[0]
    cdef Py_ssize_t t, i, j, k
    cdef long it = 0
    cdef bint converged = False
    cdef double Gmax, Gmax2, obj_min, grad_diff, quad, obj, yi, yj
    cdef double old_ai, old_aj, delta, diff, total, dai, daj
    alpha_arr = np.zeros(n, dtype=np.float64)
    G_arr = np.full(n, -1.0, dtype=np.float64)
    cdef double[::1] alpha = alpha_arr
    cdef double[::1] G = G_arr

    while it < max_iter:
        Gmax = -INFINITY
        Gmax2 = -INFINITY
        i = -1
        j = -1
        obj_min = INFINITY
        for t in range(n):
            if y[t] > 0:
                if alpha[t] < C and -G[t] >= Gmax:
                    Gmax = -G[t]
                    i = t
            else:
                if alpha[t] > 0 and G[t] >= Gmax:
                    Gmax = G[t]
                    i = t
        if i >= 0:
            for t in range(n):
                if y[t] > 0:
                    if alpha[t] > 0:
                        grad_diff = Gmax + G[t]
                        if G[t] >= Gmax2:
                            Gmax2 = G[t]
                        if grad_diff > 0:
                            quad = K[i, i] + K[t, t] - 2.0 * K[i, t]
                            if quad <= 0:
                                quad = TAU
                            obj = -(grad_diff * grad_diff) / quad
                            if obj <= obj_min:
                                obj_min = obj
                                j = t
                else:
                    if alpha[t] < C:
                        grad_diff = Gmax - G[t]
                        if -G[t] >= Gmax2:
                            Gmax2 = -G[t]
                        if grad_diff > 0:
                            quad = K[i, i] + K[t, t] - 2.0 * K[i, t]
                            if quad <= 0:
                                quad = TAU
                            obj = -(grad_diff * grad_diff) / quad
                            if obj <= obj_min:
                                obj_min = obj
                                j = t
        if i < 0 or j < 0 or Gmax + Gmax2 < tol:
            converged = True
            break
        it += 1

        yi = y[i]
        yj = y[j]
        old_ai = alpha[i]
        old_aj = alpha[j]
        quad = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if quad <= 0:
            quad = TAU
        if yi != yj:
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0
                    alpha[i] = diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0
                    alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            else:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = C + diff
        else:
            delta = (G[i] - G[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = total - C
            else:
                if alpha[j] < 0:
                    alpha[j] = 0
                    alpha[i] = total
            if total > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = total - C
            else:
                if alpha[i] < 0:
                    alpha[i] = 0
                    alpha[j] = total

        dai = alpha[i] - old_ai
        daj = alpha[j] - old_aj
        for k in range(n):
            G[k] += y[k] * (yi * K[i, k] * dai + yj * K[j, k] * daj)

    return alpha_arr, _rho(alpha, G, y, C), it, converged


cdef double _rho(double[::1] alpha, double[::1] G, const double[::1] y, double C):
    cdef Py_ssize_t i, n = alpha.shape[0]
    cdef double ub = INFINITY, lb = -INFINITY, sum_free = 0.0, yG
    cdef Py_ssize_t n_free = 0
    for i in range(n):
        yG = y[i] * G[i]
        if alpha[i] >= C:
            if y[i] < 0:
                ub = min(ub, yG)
            else:
                lb = max(lb, yG)
        elif alpha[i] <= 0:
            if y[i] > 0:
                ub = min(ub, yG)
            else:
                lb = max(lb, yG)
        else:
            n_free += 1
            sum_free += yG
    if n_free > 0:
        return sum_free / n_free
    return (ub + lb) / 2.0
