"""Pure numpy twins of the routines in ``_ckernels.pyx``.

Reductions run in the same (row) order as the compiled loops, so segment
sums agree bit-for-bit; softmax may differ in the last ulp because numpy's
vectorised ``exp`` is not libm's.
"""
import numpy as np

TAU = 1e-12


def segment_sum(values, seg, n_segments):
    out = np.zeros((n_segments, values.shape[1]), dtype=np.float64)
    np.add.at(out, seg, values)
    return out


def segment_softmax(scores, seg, n_segments):
    mx = np.full((n_segments, scores.shape[1]), -np.inf)
    np.maximum.at(mx, seg, scores)
    out = np.exp(scores - mx[seg])
    tot = np.zeros_like(mx)
    np.add.at(tot, seg, out)
    return out / tot[seg]


def gather_rowdot(A, ia, B, ib, chunk=65536):
    out = np.empty(len(ia))
    for lo in range(0, len(ia), chunk):
        hi = lo + chunk
        out[lo:hi] = np.einsum("ij,ij->i", A[ia[lo:hi]], B[ib[lo:hi]])
    return out


def _last_argmax(values):
    # ties resolve to the highest index, as in the compiled ``>=`` scan
    return len(values) - 1 - int(np.argmax(values[::-1]))


def _last_argmin(values):
    return len(values) - 1 - int(np.argmin(values[::-1]))


def smo_solve(K, y, C, tol, max_iter):
    n = K.shape[0]
    alpha = np.zeros(n)
    G = np.full(n, -1.0)
    diagK = np.diag(K).copy()
    pos = y > 0
    it = 0
    converged = False
    while it < max_iter:
        up = np.where(pos, alpha < C, alpha > 0)
        low = np.where(pos, alpha > 0, alpha < C)
        score_up = np.where(up, -y * G, -np.inf)
        if not up.any():
            converged = True
            break
        i = _last_argmax(score_up)
        gmax = score_up[i]
        yG_low = np.where(low, y * G, -np.inf)
        gmax2 = yG_low.max() if low.any() else -np.inf
        grad_diff = gmax + yG_low
        cand = low & (grad_diff > 0)
        j = -1
        if cand.any():
            quad = diagK[i] + diagK - 2.0 * K[i]
            quad = np.where(quad <= 0, TAU, quad)
            obj = np.where(cand, -(grad_diff * grad_diff) / quad, np.inf)
            j = _last_argmin(obj)
        if j < 0 or gmax + gmax2 < tol:
            converged = True
            break
        it += 1

        yi, yj = y[i], y[j]
        old_ai, old_aj = alpha[i], alpha[j]
        quad = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if quad <= 0:
            quad = TAU
        ai, aj = old_ai, old_aj
        if yi != yj:
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            ai += delta
            aj += delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            elif ai < 0:
                ai, aj = 0.0, -diff
            if diff > 0:
                if ai > C:
                    ai, aj = C, C - diff
            elif aj > C:
                aj, ai = C, C + diff
        else:
            delta = (G[i] - G[j]) / quad
            total = ai + aj
            ai -= delta
            aj += delta
            if total > C:
                if ai > C:
                    ai, aj = C, total - C
            elif aj < 0:
                aj, ai = 0.0, total
            if total > C:
                if aj > C:
                    aj, ai = C, total - C
            elif ai < 0:
                ai, aj = 0.0, total
        alpha[i], alpha[j] = ai, aj
        dai = ai - old_ai
        daj = aj - old_aj
        G += y * (yi * K[i] * dai + yj * K[j] * daj)

    return alpha, _rho(alpha, G, y, C), it, converged


def _rho(alpha, G, y, C):
    yG = y * G
    upper = alpha >= C
    lower = alpha <= 0
    free = ~upper & ~lower
    if free.any():
        return float(yG[free].sum() / free.sum())
    ub_mask = (upper & (y < 0)) | (lower & (y > 0))
    lb_mask = (upper & (y > 0)) | (lower & (y < 0))
    ub = yG[ub_mask].min() if ub_mask.any() else np.inf
    lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
    return float((ub + lb) / 2.0)
