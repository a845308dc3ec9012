# Compiled twin of torusspec._kernels_py: order-n star-product bidifferential
# of two sparse Fourier-Taylor symbols, accumulated into a dense scratch over
# the natural degree bounds and re-sparsified against the caps.  Per
# splitting, the second factor's term magnitudes are sorted descending so the
# pair loop can break as soon as products fall below the skip threshold; the
# pure-Python twin performs the identical arithmetic in the identical order.

import numpy as np


cdef double _FACT[32]
cdef int _fi
for _fi in range(32):
    _FACT[_fi] = 1.0
for _fi in range(2, 32):
    _FACT[_fi] = _FACT[_fi - 1] * _fi


cdef inline double _ff(int a, int b) noexcept:
    # falling factorial a!/(a-b)!; caller guarantees b <= a
    cdef double r = 1.0
    cdef int t
    for t in range(a, a - b, -1):
        r *= t
    return r


cdef inline double complex _ipow(int m, int g) noexcept:
    # (i*m)^g
    cdef double complex r = 1.0
    cdef double complex base = 1j * m
    cdef int t
    for t in range(g):
        r *= base
    return r


def star_term(ma, aa, va, mb, ab, vb, int n, int kcap, int dcap, double drop):
    """See torusspec._kernels_py.star_term for the contract."""
    cdef int[:, :] ma_v = np.ascontiguousarray(ma, dtype=np.int32)
    cdef int[:, :] aa_v = np.ascontiguousarray(aa, dtype=np.int32)
    cdef double complex[:] va_v = np.ascontiguousarray(va, dtype=np.complex128)
    cdef int[:, :] mb_v = np.ascontiguousarray(mb, dtype=np.int32)
    cdef int[:, :] ab_v = np.ascontiguousarray(ab, dtype=np.int32)
    cdef double complex[:] vb_v = np.ascontiguousarray(vb, dtype=np.complex128)

    cdef Py_ssize_t na = va_v.shape[0], nb = vb_v.shape[0]
    if na == 0 or nb == 0:
        return (np.zeros((0, 4), dtype=np.int32),
                np.zeros(0, dtype=np.complex128), False, False)

    # natural output bounds from the actual inputs
    cdef int M1 = 0, M2 = 0, D1 = 0, D2 = 0, t1, t2
    cdef Py_ssize_t i, j, jj
    for i in range(na):
        t1 = ma_v[i, 0]
        if t1 < 0: t1 = -t1
        if t1 > M1: M1 = t1
        t2 = ma_v[i, 1]
        if t2 < 0: t2 = -t2
        if t2 > M2: M2 = t2
        if aa_v[i, 0] > D1: D1 = aa_v[i, 0]
        if aa_v[i, 1] > D2: D2 = aa_v[i, 1]
    cdef int N1 = 0, N2 = 0, E1 = 0, E2 = 0
    for j in range(nb):
        t1 = mb_v[j, 0]
        if t1 < 0: t1 = -t1
        if t1 > N1: N1 = t1
        t2 = mb_v[j, 1]
        if t2 < 0: t2 = -t2
        if t2 > N2: N2 = t2
        if ab_v[j, 0] > E1: E1 = ab_v[j, 0]
        if ab_v[j, 1] > E2: E2 = ab_v[j, 1]
    M1 += N1; M2 += N2; D1 += E1; D2 += E2

    cdef int W1 = 2 * M1 + 1, W2 = 2 * M2 + 1, A1 = D1 + 1, A2 = D2 + 1
    scratch = np.zeros(W1 * W2 * A1 * A2, dtype=np.complex128)
    cdef double complex[:] acc = scratch

    cdef double complex base = 1.0
    cdef int _bi
    for _bi in range(n):
        base *= -0.5j
    cdef double skip = drop * 1e-3
    cdef int b1, b2, g1, g2, m1, m2, p1, p2
    cdef double complex w, ca, c, cb
    cdef double amag
    cdef Py_ssize_t idx

    bfac_arr = np.zeros(nb, dtype=np.complex128)
    bmag_arr = np.zeros(nb, dtype=np.float64)
    cdef double complex[:] bfac = bfac_arr
    cdef double[:] bmag = bmag_arr
    cdef long[:] order

    for b1 in range(n + 1):
        for b2 in range(n + 1 - b1):
            for g1 in range(n + 1 - b1 - b2):
                g2 = n - b1 - b2 - g1
                w = base / (_FACT[b1] * _FACT[b2] * _FACT[g1] * _FACT[g2])
                if (g1 + g2) % 2 == 1:
                    w = -w
                for j in range(nb):
                    if ab_v[j, 0] < g1 or ab_v[j, 1] < g2:
                        bfac[j] = 0.0
                        bmag[j] = 0.0
                        continue
                    cb = vb_v[j]
                    cb = cb * _ff(ab_v[j, 0], g1)
                    cb = cb * _ff(ab_v[j, 1], g2)
                    cb = cb * _ipow(mb_v[j, 0], b1)
                    cb = cb * _ipow(mb_v[j, 1], b2)
                    bfac[j] = cb
                    bmag[j] = abs(cb)
                order = np.argsort(-bmag_arr, kind="stable")
                for i in range(na):
                    if aa_v[i, 0] < b1 or aa_v[i, 1] < b2:
                        continue
                    ca = w * va_v[i]
                    ca = ca * _ff(aa_v[i, 0], b1)
                    ca = ca * _ff(aa_v[i, 1], b2)
                    ca = ca * _ipow(ma_v[i, 0], g1)
                    ca = ca * _ipow(ma_v[i, 1], g2)
                    if ca == 0:
                        continue
                    amag = abs(ca)
                    for jj in range(nb):
                        j = order[jj]
                        if amag * bmag[j] <= skip:
                            break
                        c = ca * bfac[j]
                        m1 = ma_v[i, 0] + mb_v[j, 0]
                        m2 = ma_v[i, 1] + mb_v[j, 1]
                        p1 = aa_v[i, 0] - b1 + ab_v[j, 0] - g1
                        p2 = aa_v[i, 1] - b2 + ab_v[j, 1] - g2
                        idx = (((m1 + M1) * W2 + (m2 + M2)) * A1 + p1) * A2 + p2
                        acc[idx] += c

    keys_arr = np.empty((W1 * W2 * A1 * A2, 4), dtype=np.int32)
    vals_arr = np.empty(W1 * W2 * A1 * A2, dtype=np.complex128)
    cdef int[:, :] keys_v = keys_arr
    cdef double complex[:] vals_v = vals_arr
    cdef Py_ssize_t nout = 0
    cdef bint dropped_modes = False, dropped_xi = False
    cdef double complex v
    for m1 in range(-M1, M1 + 1):
        for m2 in range(-M2, M2 + 1):
            for p1 in range(A1):
                for p2 in range(A2):
                    idx = (((m1 + M1) * W2 + (m2 + M2)) * A1 + p1) * A2 + p2
                    v = acc[idx]
                    if abs(v) <= drop:
                        continue
                    if abs(m1) > kcap or abs(m2) > kcap:
                        dropped_modes = True
                    elif p1 + p2 > dcap:
                        dropped_xi = True
                    else:
                        keys_v[nout, 0] = m1
                        keys_v[nout, 1] = m2
                        keys_v[nout, 2] = p1
                        keys_v[nout, 3] = p2
                        vals_v[nout] = v
                        nout += 1
    return (keys_arr[:nout].copy(), vals_arr[:nout].copy(),
            bool(dropped_modes), bool(dropped_xi))
