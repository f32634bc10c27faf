"""FFT backend: scipy.fft when available (multithreaded), numpy otherwise."""

from __future__ import annotations

import os

try:
    import scipy.fft as _backend

    _WORKERS = min(4, os.cpu_count() or 1)

    def fftn(a, axes):
        return _backend.fftn(a, axes=axes, workers=_WORKERS)

    def ifftn(a, axes):
        return _backend.ifftn(a, axes=axes, workers=_WORKERS)

    def rfftn(a, axes):
        return _backend.rfftn(a, axes=axes, workers=_WORKERS)

    def irfftn(a, shape, axes):
        return _backend.irfftn(a, s=shape, axes=axes, workers=_WORKERS)

except ImportError:  # pragma: no cover
    import numpy.fft as _backend

    def fftn(a, axes):
        return _backend.fftn(a, axes=axes)

    def ifftn(a, axes):
        return _backend.ifftn(a, axes=axes)

    def rfftn(a, axes):
        return _backend.rfftn(a, axes=axes)

    def irfftn(a, shape, axes):
        return _backend.irfftn(a, s=shape, axes=axes)
