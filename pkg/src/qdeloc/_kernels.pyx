# cython: boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled hot kernels for the statevector engine."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def apply_two_site(cnp.complex128_t[::1] psi, cnp.complex128_t[::1] out,
                   cnp.complex128_t[:, ::1] gate,
                   Py_ssize_t left, Py_ssize_t dd, Py_ssize_t right):
    """out[l, a, r] = sum_b gate[a, b] * psi[l, b, r] over a (left, dd, right) view.

    psi and out are flat views of the same length left*dd*right; out must not
    alias psi.
    """
    cdef Py_ssize_t l, a, b, r, base_out, base_in, block
    cdef cnp.complex128_t g
    block = dd * right
    for l in range(left):
        for a in range(dd):
            base_out = l * block + a * right
            for r in range(right):
                out[base_out + r] = 0
            for b in range(dd):
                g = gate[a, b]
                if g.real != 0 or g.imag != 0:
                    base_in = l * block + b * right
                    for r in range(right):
                        out[base_out + r] = out[base_out + r] + g * psi[base_in + r]


def abs2(cnp.complex128_t[::1] psi, cnp.float64_t[::1] out):
    """out[n] = |psi[n]|^2."""
    cdef Py_ssize_t n
    for n in range(psi.shape[0]):
        out[n] = psi[n].real * psi[n].real + psi[n].imag * psi[n].imag
