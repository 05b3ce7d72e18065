"""Plain-Python reference computations used to check the vectorized code.

Nothing here touches numpy arrays or the kernels: every quantity is rebuilt
from the catalog records and the written-out targets.
"""

import itertools
import math
import statistics

GOAL = {"lose_weight": 0.85, "maintain": 1.0, "gain_muscle": 1.10}


def meal_target(user):
    return GOAL[user.goal] * user.daily_kcal / 3


def targets(user):
    c = meal_target(user)
    return {
        "kcal": ("both", c), "protein": ("both", 0.15 * c / 4), "carbs": ("both", 0.5 * c / 4),
        "fat": ("both", 0.35 * c / 9), "satfat": ("cap", 0.11 * c / 9), "sugar": ("cap", 0.05 * c / 4),
        "fibre": ("floor", 10.0), "sodium": ("cap", 0.8),
    }


FIELD = {"kcal": "kcal_per_serving", "protein": "protein_g", "carbs": "carbs_g", "fat": "fat_g",
         "satfat": "satfat_g", "sugar": "sugar_g", "fibre": "fibre_g", "sodium": "sodium_g"}


def meal_totals(foods, items):
    """``foods`` is a list of (id, grams); ``items`` maps id -> FoodItem."""
    out = {}
    for key, fld in FIELD.items():
        out[key] = sum(getattr(items[fid], fld) / items[fid].serving_g * g for fid, g in foods)
    return out


def hf(foods, user, items):
    totals = meal_totals(foods, items)
    terms = []
    for key, (kind, t) in targets(user).items():
        a = totals[key]
        if kind == "both":
            d = abs(a - t) / t
        elif kind == "cap":
            d = max(0.0, a - t) / t
        else:
            d = max(0.0, t - a) / t
        terms.append(min(1.0, d))
    return sum(terms) / len(terms)


def ea(minutes, user):
    return min(1.0, abs(minutes - user.session_minutes) / user.session_minutes)


def proportion(grams):
    if any(g < 10 or g > 500 for g in grams):
        return 1.0
    mean = statistics.fmean(grams)
    return min(1.0, statistics.pstdev(grams) / mean)


def cd(plan, items, n_categories):
    foods = [f for b in plan.bundles for f in b.foods()]
    ids = [f for f, _ in foods]
    cats = {items[f].category for f in ids}
    item_term = 1 - len(set(ids)) / 12
    cat_term = 1 - len(cats) / min(12, n_categories)
    prop = sum(proportion([g for _, g in b.foods()]) for b in plan.bundles) / 3
    ex_term = 1 - len({b.exercise[0] for b in plan.bundles}) / 3
    return (item_term + cat_term + prop + ex_term) / 4


def food_like(item, user):
    if user.vegan and not item.vegan:
        return 0.0
    if user.vegetarian and not item.vegetarian:
        return 0.0
    return user.food_prefs.get(item.category, 0.0)


def ex_like(ex_id, user):
    if ex_id in user.disallowed_exercises:
        return 0.0
    return user.exercise_prefs.get(ex_id, 0.0)


def psi(plan, user, items):
    likes = []
    for b in plan.bundles:
        likes += [food_like(items[f], user) for f, _ in b.foods()]
        likes.append(ex_like(b.exercise[0], user))
    return 1 - sum(likes) / 15


def phi(plan, user, catalog):
    items = {f.id: f for f in catalog.foods}
    n_cat = len({f.category for f in catalog.foods})
    h = sum(hf(list(b.foods()), user, items) for b in plan.bundles) / 3
    e = sum(ea(b.exercise[1], user) for b in plan.bundles) / 3
    c = cd(plan, items, n_cat)
    p = psi(plan, user, items)
    return h, e, c, p, (h + e + c + p) / 4


def brute_force_min_phi(catalog, user, grams_grid, minutes_grid):
    """Exact minimum of phi over every plan whose servings/durations lie on the grids.

    phi splits into per-bundle parts plus two set-size terms (food items and
    categories over the plan, exercise ids over the plan). For each bundle we
    keep the cheapest food configuration per set of items used, then combine
    three bundles over all set triples; exercises are handled the same way.
    """
    items = {f.id: f for f in catalog.foods}
    n_cat = len({f.category for f in catalog.foods})
    mains = [f.id for f in catalog.foods if f.slot == "main"]
    sides = [f.id for f in catalog.foods if f.slot == "side"]
    exes = [e.id for e in catalog.exercises]

    # per-bundle food part: hf_b/12 + prop_b/48 - likes/60
    best_food = {}
    for m in mains:
        for s in itertools.product(sides, repeat=3):
            ids = (m,) + s
            like = sum(food_like(items[i], user) for i in ids)
            for grams in itertools.product(grams_grid, repeat=4):
                foods = list(zip(ids, grams))
                v = hf(foods, user, items) / 12 + proportion(grams) / 48 - like / 60
                key = frozenset(ids)
                if v < best_food.get(key, math.inf):
                    best_food[key] = v
    food_min = math.inf
    for a, b, c in itertools.product(best_food.items(), repeat=3):
        used = a[0] | b[0] | c[0]
        cats = {items[i].category for i in used}
        glob = ((1 - len(used) / 12) + (1 - len(cats) / min(12, n_cat))) / 16
        food_min = min(food_min, a[1] + b[1] + c[1] + glob)

    # per-bundle exercise part: ea_b/12 - like/60, plus exercise repetition/16
    best_ex = {e: min(ea(t, user) for t in minutes_grid) / 12 - ex_like(e, user) / 60 for e in exes}
    ex_min = min(sum(best_ex[e] for e in trio) + (1 - len(set(trio)) / 3) / 16
                 for trio in itertools.product(exes, repeat=3))
    return 0.25 + food_min + ex_min
