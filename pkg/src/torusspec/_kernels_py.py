"""Pure-Python coefficient-convolution kernels.

Reference implementation of the hot inner loops of the truncated symbol
algebra.  The compiled twin (torusspec._kernels) implements the identical
contract; torusspec._backend picks one at import time.

A symbol term is keyed by (m1, m2, a1, a2): Fourier mode m and xi-exponent
alpha of a monomial  c * exp(i m.x) * xi^alpha.  The order-n bidifferential
term of the star product is

    (1/(2i))^n  sum_{|beta|+|gamma|=n}  (-1)^{|gamma|} / (beta! gamma!)
        (d_xi^beta d_x^gamma a) (d_x^beta d_xi^gamma b)

so that n = 0 is the pointwise product and n = 1 equals (1/2i){a, b}.
"""

import math

import numpy as np

_FACT = [float(math.factorial(k)) for k in range(32)]


def _base_pow(n):
    """(1/(2i))^n by repeated multiplication (bit-identical to the C twin)."""
    r = complex(1.0)
    for _ in range(n):
        r *= -0.5j
    return r


def _ipow(m, g):
    """(i*m)^g by repeated multiplication."""
    r = complex(1.0)
    base = 1j * m
    for _ in range(g):
        r *= base
    return r


def _splittings(n):
    """All (b1, b2, g1, g2) with b1+b2+g1+g2 == n, with their scalar weight."""
    base = _base_pow(n)
    out = []
    for b1 in range(n + 1):
        for b2 in range(n + 1 - b1):
            for g1 in range(n + 1 - b1 - b2):
                g2 = n - b1 - b2 - g1
                w = base / (_FACT[b1] * _FACT[b2] * _FACT[g1] * _FACT[g2])
                if (g1 + g2) % 2 == 1:
                    w = -w
                out.append((b1, b2, g1, g2, w))
    return out


def _ff(a, b):
    """Falling factorial a!/(a-b)! (0 if b > a)."""
    if b > a:
        return 0.0
    r = 1.0
    for t in range(a, a - b, -1):
        r *= t
    return r


def star_term(ma, aa, va, mb, ab, vb, n, kcap, dcap, drop):
    """Order-n star-product bidifferential of two sparse symbols.

    Parameters
    ----------
    ma, aa : (na, 2) int arrays
        Fourier modes and xi-exponents of the first factor.
    va : (na,) complex array
        Coefficients of the first factor.
    mb, ab, vb :
        Same for the second factor.
    n : int
        Bidifferential order (0 = plain product, 1 = (1/2i) Poisson bracket).
    kcap, dcap : int
        Retained bounds: |m_i| <= kcap and alpha1+alpha2 <= dcap.
    drop : float
        Coefficients with magnitude <= drop are not stored.

    Returns
    -------
    keys : (nout, 4) int32 array, vals : (nout,) complex array,
    dropped_modes : bool, dropped_xi : bool
        The flags report nonzero coefficients discarded because they fell
        outside the mode caps resp. the xi-degree cap.
    """
    acc = {}
    ma_l = ma.tolist()
    aa_l = aa.tolist()
    va_l = va.tolist()
    mb_l = mb.tolist()
    ab_l = ab.tolist()
    vb_l = vb.tolist()
    # contributions below this threshold are skipped via a per-splitting
    # magnitude sort with early break (identical in the compiled twin)
    skip = drop * 1e-3
    for b1, b2, g1, g2, w in _splittings(n):
        bmag = np.zeros(len(vb_l))
        bfac = [0j] * len(vb_l)
        for j, ((bm1, bm2), (ba1, ba2), bv) in enumerate(
                zip(mb_l, ab_l, vb_l)):
            if ba1 < g1 or ba2 < g2:
                continue
            c = complex(bv)
            c = c * _ff(ba1, g1)
            c = c * _ff(ba2, g2)
            c = c * _ipow(bm1, b1)
            c = c * _ipow(bm2, b2)
            bfac[j] = c
            bmag[j] = abs(c)
        order = np.argsort(-bmag, kind="stable")
        for (am1, am2), (aa1, aa2), av in zip(ma_l, aa_l, va_l):
            if aa1 < b1 or aa2 < b2:
                continue
            # multiplication order mirrors the compiled kernel bit for bit
            ca = w * av
            ca = ca * _ff(aa1, b1)
            ca = ca * _ff(aa2, b2)
            ca = ca * _ipow(am1, g1)
            ca = ca * _ipow(am2, g2)
            if ca == 0:
                continue
            amag = abs(ca)
            for j in order:
                if amag * bmag[j] <= skip:
                    break
                c = ca * bfac[j]
                bm1, bm2 = mb_l[j]
                ba1, ba2 = ab_l[j]
                key = (am1 + bm1, am2 + bm2,
                       aa1 - b1 + ba1 - g1, aa2 - b2 + ba2 - g2)
                acc[key] = acc.get(key, 0j) + c

    keys = []
    vals = []
    dropped_modes = False
    dropped_xi = False
    for key, v in acc.items():
        if abs(v) <= drop:
            continue
        m1, m2, a1, a2 = key
        if abs(m1) > kcap or abs(m2) > kcap:
            dropped_modes = True
        elif a1 + a2 > dcap:
            dropped_xi = True
        else:
            keys.append(key)
            vals.append(v)
    if keys:
        order = sorted(range(len(keys)), key=keys.__getitem__)
        keys_arr = np.array([keys[i] for i in order], dtype=np.int32)
        vals_arr = np.array([vals[i] for i in order], dtype=np.complex128)
    else:
        keys_arr = np.zeros((0, 4), dtype=np.int32)
        vals_arr = np.zeros(0, dtype=np.complex128)
    return keys_arr, vals_arr, dropped_modes, dropped_xi
