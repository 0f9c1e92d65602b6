# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled convolution kernels for the training hot path.

Same contract as fedhar.kernels.reference; arrays must be C-contiguous
float64. Accumulation order differs from the NumPy backend, so results
agree to rounding error, not bit-for-bit. Loops keep the output time
axis innermost: writes stay unit-stride and each weight is loaded once
per pass, which is what lets the C compiler vectorize.
"""

import numpy as np

BACKEND_NAME = "native"


def conv1d_forward(double[:, :, :, ::1] x, double[:, :, ::1] w,
                   double[::1] b, Py_ssize_t stride):
    cdef Py_ssize_t nb = x.shape[0], nc = x.shape[1]
    cdef Py_ssize_t m_in = x.shape[2], t_in = x.shape[3]
    cdef Py_ssize_t m_out = w.shape[0], kernel = w.shape[2]
    cdef Py_ssize_t t_out = (t_in - kernel) // stride + 1
    out_arr = np.empty((nb, nc, m_out, t_out), dtype=np.float64)
    cdef double[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t ib, ic, f, t, m, k
    cdef double wv, bias
    with nogil:
        for ib in range(nb):
            for ic in range(nc):
                for f in range(m_out):
                    bias = b[f]
                    for t in range(t_out):
                        out[ib, ic, f, t] = bias
                    for m in range(m_in):
                        for k in range(kernel):
                            wv = w[f, m, k]
                            for t in range(t_out):
                                out[ib, ic, f, t] += wv * x[ib, ic, m, t * stride + k]
    return out_arr


def conv1d_backward(double[:, :, :, ::1] x, double[:, :, ::1] w,
                    Py_ssize_t stride, double[:, :, :, ::1] dz):
    cdef Py_ssize_t nb = x.shape[0], nc = x.shape[1]
    cdef Py_ssize_t m_in = x.shape[2], t_in = x.shape[3]
    cdef Py_ssize_t m_out = w.shape[0], kernel = w.shape[2]
    cdef Py_ssize_t t_out = dz.shape[3]
    dx_arr = np.zeros((nb, nc, m_in, t_in), dtype=np.float64)
    dw_arr = np.zeros((m_out, m_in, kernel), dtype=np.float64)
    db_arr = np.zeros(m_out, dtype=np.float64)
    cdef double[:, :, :, ::1] dx = dx_arr
    cdef double[:, :, ::1] dw = dw_arr
    cdef double[::1] db = db_arr
    cdef Py_ssize_t ib, ic, f, t, m, k
    cdef double wv, accw, accb
    with nogil:
        for ib in range(nb):
            for ic in range(nc):
                for f in range(m_out):
                    accb = 0.0
                    for t in range(t_out):
                        accb += dz[ib, ic, f, t]
                    db[f] += accb
                    for m in range(m_in):
                        for k in range(kernel):
                            wv = w[f, m, k]
                            accw = 0.0
                            for t in range(t_out):
                                accw += dz[ib, ic, f, t] * x[ib, ic, m, t * stride + k]
                                dx[ib, ic, m, t * stride + k] += dz[ib, ic, f, t] * wv
                            dw[f, m, k] += accw
    return dx_arr, dw_arr, db_arr
