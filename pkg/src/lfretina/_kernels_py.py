"""Pure-numpy versions of the compiled kernels (same signatures, in-place)."""

import numpy as np


def pupil_block(amp, w_static, z20, z40, c20, c40, wavenumber, out):
    phase = wavenumber * (w_static + c20 * z20 + c40 * z40)
    np.multiply(amp, np.exp(1j * phase), out=out)


def accumulate_intensity(acc, field, weight):
    acc += weight * (field.real**2 + field.imag**2)


def radial_bin(values, index, nbins):
    idx = index.ravel()
    keep = (idx >= 0) & (idx < nbins)
    sums = np.bincount(idx[keep], values.ravel()[keep], minlength=nbins)[:nbins]
    counts = np.bincount(idx[keep], minlength=nbins)[:nbins].astype(float)
    return sums, counts


def shifted_sum(out, otf, ramp_y, ramp_x):
    out += otf * ramp_y[:, None] * ramp_x[None, :]
