"""Hot population kernels with a compiled core and a numpy fallback.

The compiled extension is used when it was built; otherwise the numpy
implementations are selected at import. Both backends return identical
arrays for identical inputs, so the choice never changes results.
"""

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["cython"] = _ckernels

_active = _BACKENDS.get("cython", _pykernels)


def available_backends():
    return sorted(_BACKENDS)


def backend():
    """Name of the backend currently in use."""
    return "cython" if _active is _ckernels and _ckernels is not None else "python"


def set_backend(name):
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"unknown or unavailable kernel backend {name!r}; have {available_backends()}")
    _active = _BACKENDS[name]


def competition_psi(own, other, opponents, maximize):
    return _active.competition_psi(own, other, opponents, maximize)


def biased_mutate(bits, mask_u, value_u, m, beta):
    return _active.biased_mutate(bits, mask_u, value_u, m, beta)


def phi_components(food_ids, grams, ex_ids, minutes, food_pg, food_cat,
                   food_like, ex_like, targets, session_minutes, n_categories):
    return _active.phi_components(food_ids, grams, ex_ids, minutes, food_pg, food_cat,
                                  food_like, ex_like, targets, session_minutes, n_categories)
