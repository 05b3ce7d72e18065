"""Numpy implementations of the population kernels.

Every reduction is written as an explicit left-to-right sum so that the
results are bit-identical to the compiled kernels in ``_ckernels.pyx``.
"""

import numpy as np

# hf term kinds, in nutrient column order
# kcal, protein, carbs, fat: two-sided; satfat, sugar, sodium: caps; fibre: floor
TWO_SIDED = (0, 1, 2, 3)
CAPS = (4, 5, 7)
FLOORS = (6,)

MIN_SERVING_G = 10.0
MAX_SERVING_G = 500.0


def competition_psi(own, other, opponents, maximize):
    """Mean pairwise score of each ``own`` value against its sampled opponents.

    ``opponents`` is an ``(n, S)`` index array into ``other``. A win scores 1,
    a draw 0.5. ``maximize`` says whether the larger objective wins.
    """
    own = np.asarray(own, dtype=np.float64)
    other = np.asarray(other, dtype=np.float64)
    opponents = np.asarray(opponents, dtype=np.int64)
    n_samples = opponents.shape[1]
    opp = other[opponents]
    mine = own[:, None]
    if maximize:
        win = mine > opp
    else:
        win = mine < opp
    scores = win * 1.0 + (mine == opp) * 0.5
    total = scores[:, 0].copy()
    for j in range(1, n_samples):
        total += scores[:, j]
    return total / n_samples


def biased_mutate(bits, mask_u, value_u, m, beta):
    """Reassign each bit with probability ``m``; new value is 1 with probability ``beta``."""
    out = np.array(bits, dtype=np.uint8, copy=True)
    hit = mask_u < m
    out[hit] = (value_u[hit] < beta).astype(np.uint8)
    return out


def _count_unique(rows):
    s = np.sort(rows, axis=1)
    return 1 + (s[:, 1:] != s[:, :-1]).sum(axis=1)


def _seq_sum(cols):
    total = cols[0]
    for c in cols[1:]:
        total = total + c
    return total


def hf_terms(meal, targets):
    """The eight clipped nutrient deviations of a meal; ``meal[..., k]`` holds nutrient ``k``."""
    terms = []
    for k in range(8):
        actual = meal[..., k]
        t = targets[k]
        if k in TWO_SIDED:
            dev = np.abs(actual - t) / t
        elif k in CAPS:
            dev = np.maximum(actual - t, 0.0) / t
        else:
            dev = np.maximum(t - actual, 0.0) / t
        terms.append(np.minimum(dev, 1.0))
    return terms


def phi_components(food_ids, grams, ex_ids, minutes, food_pg, food_cat,
                   food_like, ex_like, targets, session_minutes, n_categories):
    """Error components for a batch of plans.

    Returns an ``(n, 5)`` array with columns hf, ea, cd, psi, phi.
    ``food_ids``/``grams`` are ``(n, 3, 4)`` (main first), ``ex_ids``/``minutes``
    are ``(n, 3)``. ``food_pg`` holds nutrients per gram in hf term order.
    """
    food_ids = np.asarray(food_ids, dtype=np.int64)
    grams = np.asarray(grams, dtype=np.float64)
    ex_ids = np.asarray(ex_ids, dtype=np.int64)
    minutes = np.asarray(minutes, dtype=np.float64)
    n = food_ids.shape[0]

    pg = food_pg[food_ids]  # (n, 3, 4, 8)
    meal = _seq_sum([grams[:, :, j, None] * pg[:, :, j, :] for j in range(4)])  # (n, 3, 8)

    terms = hf_terms(meal, targets)
    hf_b = _seq_sum(terms) / 8.0  # (n, 3)
    hf = (hf_b[:, 0] + hf_b[:, 1] + hf_b[:, 2]) / 3.0

    ea_b = np.minimum(np.abs(minutes - session_minutes) / session_minutes, 1.0)
    ea = (ea_b[:, 0] + ea_b[:, 1] + ea_b[:, 2]) / 3.0

    flat_ids = food_ids.reshape(n, 12)
    item_term = 1.0 - _count_unique(flat_ids) / 12.0
    cat_term = 1.0 - _count_unique(food_cat[flat_ids]) / float(min(12, n_categories))
    mean_g = (grams[:, :, 0] + grams[:, :, 1] + grams[:, :, 2] + grams[:, :, 3]) / 4.0
    sq = [(grams[:, :, j] - mean_g) * (grams[:, :, j] - mean_g) for j in range(4)]
    cv = np.sqrt(_seq_sum(sq) / 4.0) / mean_g
    outside = ((grams < MIN_SERVING_G) | (grams > MAX_SERVING_G)).any(axis=2)
    prop_b = np.where(outside, 1.0, np.minimum(cv, 1.0))
    prop_term = (prop_b[:, 0] + prop_b[:, 1] + prop_b[:, 2]) / 3.0
    ex_term = 1.0 - _count_unique(ex_ids) / 3.0
    cd = (item_term + cat_term + prop_term + ex_term) / 4.0

    flike = food_like[food_ids]
    elike = ex_like[ex_ids]
    cols = []
    for b in range(3):
        cols.extend([flike[:, b, 0], flike[:, b, 1], flike[:, b, 2], flike[:, b, 3], elike[:, b]])
    psi = 1.0 - _seq_sum(cols) / 15.0

    out = np.empty((n, 5), dtype=np.float64)
    out[:, 0] = hf
    out[:, 1] = ea
    out[:, 2] = cd
    out[:, 3] = psi
    out[:, 4] = (hf + ea + cd + psi) / 4.0
    return out
