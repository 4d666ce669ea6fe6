# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops for PSF assembly; see kernels.py for the contract."""

from libc.math cimport cos, sin

import numpy as np


def pupil_block(const double[:, ::1] amp, const double[:, ::1] w_static,
                const double[:, ::1] z20, const double[:, ::1] z40,
                double c20, double c40, double wavenumber,
                double complex[:, ::1] out):
    cdef Py_ssize_t i, j
    cdef Py_ssize_t ni = amp.shape[0], nj = amp.shape[1]
    cdef double a, phase
    for i in range(ni):
        for j in range(nj):
            a = amp[i, j]
            if a == 0.0:
                out[i, j] = 0
            else:
                phase = wavenumber * (w_static[i, j] + c20 * z20[i, j] + c40 * z40[i, j])
                out[i, j] = a * cos(phase) + 1j * (a * sin(phase))


def accumulate_intensity(double[:, ::1] acc, const double complex[:, ::1] field,
                         double weight):
    cdef Py_ssize_t i, j
    cdef double re, im
    for i in range(acc.shape[0]):
        for j in range(acc.shape[1]):
            re = field[i, j].real
            im = field[i, j].imag
            acc[i, j] += weight * (re * re + im * im)


def radial_bin(const double[:, ::1] values, const long[:, ::1] index, Py_ssize_t nbins):
    sums = np.zeros(nbins)
    counts = np.zeros(nbins)
    cdef double[::1] s = sums
    cdef double[::1] c = counts
    cdef Py_ssize_t i, j
    cdef long b
    for i in range(values.shape[0]):
        for j in range(values.shape[1]):
            b = index[i, j]
            if 0 <= b < nbins:
                s[b] += values[i, j]
                c[b] += 1.0
    return sums, counts


def shifted_sum(double complex[:, ::1] out, const double complex[:, ::1] otf,
                const double complex[::1] ramp_y, const double complex[::1] ramp_x):
    cdef Py_ssize_t i, j
    cdef double complex ry
    for i in range(out.shape[0]):
        ry = ramp_y[i]
        for j in range(out.shape[1]):
            out[i, j] += otf[i, j] * ry * ramp_x[j]
