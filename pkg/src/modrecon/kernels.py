"""Backend selection for the matched-filter search.

``mf_search(phi_re, phi_im, times, lo, step, G, start, scale, sine)`` scans, for
each row ``l``, the grid values ``lo + step*(start[l] + g)``, ``g < G``, and
returns ``(index, score)`` of the first maximum.  Complex rows score the squared
modulus of ``sum_r phi_r * exp(-i*scale*t_r*v)``; sine rows score
``2*|sum_r phi_r*sin(scale*t_r*v)| - sum_r sin(scale*t_r*v)**2``.

The compiled extension is used when importable; ``MODRECON_BACKEND=python``
forces the numpy path.  Both agree except at near-ties (last-ulp differences).
"""
import os

from . import _mf_python

try:
    from . import _mfkernel
except ImportError:  # extension not built
    _mfkernel = None

BACKENDS = {"python": _mf_python.mf_search}
if _mfkernel is not None:
    BACKENDS["compiled"] = _mfkernel.mf_search


def _default():
    want = os.environ.get("MODRECON_BACKEND", "").strip().lower()
    if want:
        if want not in BACKENDS:
            raise ImportError(f"MODRECON_BACKEND={want!r} is not available; have {sorted(BACKENDS)}")
        return want
    return "compiled" if "compiled" in BACKENDS else "python"


BACKEND = _default()


def get(name=None):
    return BACKENDS[name or BACKEND]
