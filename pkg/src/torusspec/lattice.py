"""Quasi-eigenvalue lattice from a normal form with Floquet data.

Each index k in Z^2 carries the lattice point

    z_k = sum_n h^n p_tilde_n( h (k - S/(2 pi h) - alpha0/4), eps ),

and the module returns exactly the k whose z_k fall in a closed spectral
rectangle, in lexicographic k order.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass
class FloquetData:
    """Cycle actions S and Maslov indices alpha0 of the quantization."""

    S: tuple = (0.0, 0.0)
    alpha0: tuple = (0, 0)


@dataclass
class SpectralRectangle:
    """|Re z| <= re_half_width, |Im z / eps - F0| <= im_half_width_over_eps."""

    re_half_width: float
    im_center_over_eps: float = 0.0
    im_half_width_over_eps: float = 0.15

    def __post_init__(self):
        if self.re_half_width <= 0 or self.im_half_width_over_eps <= 0:
            raise ValidationError("rectangle half-widths must be positive")

    def contains(self, z, epsilon):
        """Closed-boundary membership (ties kept)."""
        z = np.asarray(z)
        return ((np.abs(z.real) <= self.re_half_width)
                & (np.abs(z.imag / epsilon - self.im_center_over_eps)
                   <= self.im_half_width_over_eps))

    def shrink(self, factor):
        return SpectralRectangle(
            re_half_width=factor * self.re_half_width,
            im_center_over_eps=self.im_center_over_eps,
            im_half_width_over_eps=factor * self.im_half_width_over_eps)


def floquet_theta(floquet, h):
    """Lattice offset theta = -S/(2 pi h) - alpha0/4 (not reduced)."""
    return (-np.asarray(floquet.S, dtype=float) / (2 * np.pi * h)
            - np.asarray(floquet.alpha0, dtype=float) / 4.0)


def _auto_k_box(nf, h, theta, rect, margin=1.5):
    """Box covering 1.5x the rectangle preimage under p_tilde_0."""
    xi = np.linspace(-0.9, 0.9, 721)
    X1, X2 = np.meshgrid(xi, xi, indexing="ij")
    z = nf.p_tilde[0].evaluate(0.0, 0.0, X1, X2)
    eps = nf.epsilon
    inside = ((np.abs(z.real) <= margin * rect.re_half_width)
              & (np.abs(z.imag / eps - rect.im_center_over_eps)
                 <= margin * rect.im_half_width_over_eps))
    if not np.any(inside):
        return 4
    xi1_max = float(np.max(np.abs(X1[inside])))
    xi2_max = float(np.max(np.abs(X2[inside])))
    return int(np.ceil(max(xi1_max, xi2_max) / h
                       + np.max(np.abs(theta)))) + 2


def quasi_eigenvalues(nf, h, floquet, rect, k_box=None):
    """Lattice points (k, z_k) inside the rectangle, lex-ordered in k.

    With an explicit k_box, a retained point on the box boundary raises
    ValidationError (the box demonstrably clips the rectangle); in auto
    mode the box grows until clean.
    """
    eps = nf.epsilon
    theta = floquet_theta(floquet, h)
    explicit = k_box is not None
    B = int(k_box) if explicit else _auto_k_box(nf, h, theta, rect)
    for _ in range(40):
        ks = np.arange(-B, B + 1)
        K1, K2 = np.meshgrid(ks, ks, indexing="ij")
        xi1 = h * (K1 + theta[0])
        xi2 = h * (K2 + theta[1])
        z = nf.lattice_values(h, xi1, xi2)
        keep = rect.contains(z, eps)
        if np.any(keep & (np.maximum(np.abs(K1), np.abs(K2)) == B)):
            if explicit:
                raise ValidationError(
                    f"k_box={B} too small: lattice touches the box boundary "
                    "inside the rectangle; enlarge the box")
            B = int(np.ceil(B * 1.5)) + 1
            continue
        break
    else:
        raise ValidationError("lattice box failed to stabilize")

    radii = getattr(nf, "divisor_radius", {}) or {}
    if radii and np.any(keep):
        r_min = min(radii.values())
        xi_max = max(float(np.max(np.abs(xi1[keep]))),
                     float(np.max(np.abs(xi2[keep]))))
        if xi_max > r_min:
            warnings.warn(
                f"lattice evaluates outside the smallest divisor validity "
                f"radius ({xi_max:.3f} > {r_min:.3f})", RuntimeWarning)

    out = []
    idx = np.argwhere(keep)
    for i, j in idx:
        out.append(((int(K1[i, j]), int(K2[i, j])), complex(z[i, j])))
    out.sort(key=lambda kz: kz[0])
    return out


def rectangle_filter(z_list, rect, epsilon):
    """Keep z with closed-rectangle membership."""
    z_arr = np.asarray(list(z_list), dtype=complex)
    if z_arr.size == 0:
        return []
    keep = rect.contains(z_arr, epsilon)
    return [complex(z) for z, k in zip(z_arr, keep) if k]
