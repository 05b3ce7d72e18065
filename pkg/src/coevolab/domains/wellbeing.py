"""Meal + exercise plan recommendation domain.

A plan is three bundles; each bundle is one main food, three side foods
(with gram servings) and one exercise (with a duration in minutes).
Populations are stored as a :class:`PlanBatch` of index arrays so that the
error kernels can score a whole population at once.

Slot numbering, used by mutation, is bundle-major: slot ``5*b + k`` is the
main (k=0), a side (k=1..3) or the exercise (k=4) of bundle ``b``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .. import kernels
from ..errors import CatalogError, ConfigError
from ..kernels._pykernels import MAX_SERVING_G, MIN_SERVING_G, _seq_sum, hf_terms
from .catalog import CATEGORIES, Catalog, UserProfile, meal_kcal_target

N_BUNDLES = 3
FOODS_PER_BUNDLE = 4
N_SLOTS = N_BUNDLES * (FOODS_PER_BUNDLE + 1)
FITNESS_THRESHOLD = 0.33
MONTH_DAYS = 28

HOST_GRAMS = (10.0, 500.0)
HOST_MINUTES = (10.0, 180.0)
SPREAD = 0.2  # +-20% around the kcal / session targets


@dataclass(frozen=True)
class Bundle:
    main: tuple  # (food id, grams)
    sides: tuple  # three (food id, grams)
    exercise: tuple  # (exercise id, minutes)

    def __post_init__(self):
        if len(self.sides) != 3:
            raise ConfigError("a bundle holds exactly three side foods")
        if any(g <= 0 for _, g in self.foods()):
            raise ConfigError("servings must be > 0 g")
        if self.exercise[1] <= 0:
            raise ConfigError("exercise duration must be > 0 min")

    def foods(self):
        return (self.main,) + tuple(self.sides)


@dataclass(frozen=True)
class WellbeingPlan:
    bundles: tuple

    def __post_init__(self):
        if len(self.bundles) != N_BUNDLES:
            raise ConfigError("a plan holds exactly three bundles")


@dataclass(frozen=True)
class WellbeingFitness:
    hf: float
    ea: float
    cd: float
    psi_pref: float
    phi: float

    @classmethod
    def from_components(cls, hf, ea, cd, psi_pref):
        return cls(hf, ea, cd, psi_pref, (hf + ea + cd + psi_pref) / 4.0)


@dataclass(frozen=True)
class OperatorConfig:
    p_c: float = 0.8
    p_m: float = 0.1
    p_b: float = 0.9
    p_main: float = 0.2
    p_side: float = 0.6
    p_exercise: float = 0.2

    def __post_init__(self):
        for label in ("p_c", "p_m", "p_b", "p_main", "p_side", "p_exercise"):
            v = getattr(self, label)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{label} must lie in [0, 1], got {v}")
        if abs(self.p_main + self.p_side + self.p_exercise - 1.0) > 1e-12:
            raise ConfigError("injection split main/side/exercise must sum to 1")


@dataclass(frozen=True)
class ServingGrid:
    """Restricts servings and durations to fixed value sets (used for exhaustive checks)."""
    grams: tuple
    minutes: tuple


@dataclass
class PlanBatch:
    food_ids: np.ndarray  # (n, 3, 4) int64, main first
    grams: np.ndarray  # (n, 3, 4)
    ex_ids: np.ndarray  # (n, 3) int64
    minutes: np.ndarray  # (n, 3)

    def __len__(self):
        return self.food_ids.shape[0]

    def __getitem__(self, idx):
        idx = np.atleast_1d(idx)
        return PlanBatch(self.food_ids[idx], self.grams[idx], self.ex_ids[idx], self.minutes[idx])

    def copy(self):
        return PlanBatch(self.food_ids.copy(), self.grams.copy(), self.ex_ids.copy(), self.minutes.copy())

    @classmethod
    def empty(cls, n):
        return cls(np.zeros((n, 3, 4), np.int64), np.zeros((n, 3, 4)), np.zeros((n, 3), np.int64), np.zeros((n, 3)))

    @classmethod
    def concat(cls, batches):
        return cls(*(np.concatenate([getattr(b, f) for b in batches])
                     for f in ("food_ids", "grams", "ex_ids", "minutes")))

    @classmethod
    def from_plans(cls, plans, catalog: Catalog):
        plans = list(plans)
        out = cls.empty(len(plans))
        for i, plan in enumerate(plans):
            for b, bundle in enumerate(plan.bundles):
                for j, (fid, g) in enumerate(bundle.foods()):
                    out.food_ids[i, b, j] = _resolve(catalog.food_index, fid, "food")
                    out.grams[i, b, j] = g
                eid, minutes = bundle.exercise
                out.ex_ids[i, b] = _resolve(catalog.exercise_index, eid, "exercise")
                out.minutes[i, b] = minutes
        return out

    def plan(self, i, catalog: Catalog) -> WellbeingPlan:
        bundles = []
        for b in range(N_BUNDLES):
            foods = [(catalog.foods[self.food_ids[i, b, j]].id, float(self.grams[i, b, j])) for j in range(4)]
            ex = (catalog.exercises[self.ex_ids[i, b]].id, float(self.minutes[i, b]))
            bundles.append(Bundle(foods[0], tuple(foods[1:]), ex))
        return WellbeingPlan(tuple(bundles))

    def plans(self, catalog):
        return [self.plan(i, catalog) for i in range(len(self))]


def _resolve(index, item_id, kind):
    try:
        return index[item_id]
    except KeyError:
        raise CatalogError(f"plan references unknown {kind} id {item_id!r}") from None


def _as_batch(plans, catalog):
    if isinstance(plans, PlanBatch):
        return plans
    if isinstance(plans, WellbeingPlan):
        return PlanBatch.from_plans([plans], catalog)
    return PlanBatch.from_plans(plans, catalog)


# -- user-specific scoring context -------------------------------------------

def nutrient_targets(meal_kcal):
    """Per-meal targets in hf term order (kcal, protein, carbs, fat, satfat, sugar, fibre, sodium)."""
    return np.array([
        meal_kcal,
        0.15 * meal_kcal / 4.0,
        0.50 * meal_kcal / 4.0,
        0.35 * meal_kcal / 9.0,
        0.11 * meal_kcal / 9.0,
        0.05 * meal_kcal / 4.0,
        10.0,
        0.8,
    ])


def food_likeability(user: UserProfile, catalog: Catalog):
    """Per-food rating of the item's category; 0 for items the user's diet excludes."""
    rating = np.array([user.food_prefs.get(c, 0.0) for c in CATEGORIES])[catalog.food_cat]
    if user.vegan:
        rating = np.where(catalog.vegan, rating, 0.0)
    elif user.vegetarian:
        rating = np.where(catalog.vegetarian, rating, 0.0)
    return rating


def exercise_likeability(user: UserProfile, catalog: Catalog):
    return np.array([0.0 if e.id in user.disallowed_exercises else user.exercise_prefs.get(e.id, 0.0)
                     for e in catalog.exercises])


class UserContext:
    """Precomputed targets, likeabilities and sampling tables for one user."""

    def __init__(self, user: UserProfile, catalog: Catalog, goal_factors=None):
        self.user = user
        self.catalog = catalog
        self.meal_kcal = meal_kcal_target(user, goal_factors)
        self.targets = nutrient_targets(self.meal_kcal)
        self.food_like = food_likeability(user, catalog)
        self.ex_like = exercise_likeability(user, catalog)

    # sampling tables are built on first use so scoring works for any user
    @cached_property
    def main_cdf(self):
        return self._cdf(np.where(self.catalog.is_main, self.food_like, 0.0), "main")

    @cached_property
    def side_cdf(self):
        return self._cdf(np.where(~self.catalog.is_main, self.food_like, 0.0), "side")

    @cached_property
    def ex_cdf(self):
        return self._cdf(self.ex_like, "exercise")

    def _cdf(self, weights, slot):
        total = weights.sum()
        if total <= 0.0:
            raise CatalogError(f"user {self.user.id!r}: no admissible {slot} item to sample")
        cdf = np.cumsum(weights)
        return cdf / cdf[-1]

    def components(self, batch: PlanBatch):
        c = self.catalog
        return kernels.phi_components(batch.food_ids, batch.grams, batch.ex_ids, batch.minutes,
                                      c.food_pg, c.food_cat, self.food_like, self.ex_like,
                                      self.targets, float(self.user.session_minutes), c.n_categories)


def _draw(cdf, u):
    return np.minimum(np.searchsorted(cdf, u, side="right"), len(cdf) - 1)


# -- errors --------------------------------------------------------------------

def hf_error(bundle: Bundle, user: UserProfile, catalog: Catalog, goal_factors=None) -> float:
    """Mean of the kcal term and seven nutrient terms for one bundle's meal."""
    targets = nutrient_targets(meal_kcal_target(user, goal_factors))
    meal = _seq_sum([g * catalog.food_pg[_resolve(catalog.food_index, fid, "food")]
                     for fid, g in bundle.foods()])
    return float(_seq_sum(hf_terms(meal, targets)) / 8.0)


def ea_error(bundle: Bundle, user: UserProfile) -> float:
    s = user.session_minutes
    return min(1.0, abs(bundle.exercise[1] - s) / s)


def phi_error(plan, user: UserProfile, catalog: Catalog, goal_factors=None) -> WellbeingFitness:
    row = UserContext(user, catalog, goal_factors).components(_as_batch(plan, catalog))[0]
    return WellbeingFitness(*(float(v) for v in row))


def cd_error(plan, catalog: Catalog) -> float:
    batch = _as_batch(plan, catalog)
    ones = np.ones(catalog.n_foods)
    cols = kernels.phi_components(batch.food_ids, batch.grams, batch.ex_ids, batch.minutes,
                                  catalog.food_pg, catalog.food_cat, ones, np.ones(catalog.n_exercises),
                                  nutrient_targets(1.0), 1.0, catalog.n_categories)
    return float(cols[0, 2])


def psi_error(plan, user: UserProfile, catalog: Catalog) -> float:
    return phi_error(plan, user, catalog).psi_pref


def compare_error(phi_h: float, phi_p: float) -> float:
    """Score of a host against a parasite; the lower error wins."""
    if phi_h < phi_p:
        return 1.0
    if phi_h == phi_p:
        return 0.5
    return 0.0


def diversity_error(plans, catalog: Catalog) -> float:
    """Item and category repetition across a month (28 plans) of recommendations.

    Exercises are not counted.
    """
    batch = _as_batch(plans, catalog)
    if len(batch) != MONTH_DAYS:
        raise ConfigError(f"diversity is defined over exactly {MONTH_DAYS} plans, got {len(batch)}")
    ids = batch.food_ids.reshape(-1)
    slots = ids.size
    items = len(np.unique(ids))
    cats = len(np.unique(catalog.food_cat[ids]))
    value = 0.5 * (1.0 - items / slots) + 0.5 * (1.0 - cats / min(slots, catalog.n_categories))
    return float(min(1.0, max(0.0, value)))


# -- initialisation ------------------------------------------------------------

def _kcal_servings(ctx: UserContext, food_ids, u):
    """Grams so each food slot supplies a quarter of the meal target, +-20%."""
    share = ctx.meal_kcal / FOODS_PER_BUNDLE * (1.0 - SPREAD + 2.0 * SPREAD * u)
    return share / ctx.catalog.kcal_pg[food_ids]


def _grid_pick(values, u):
    values = np.asarray(values, dtype=np.float64)
    return values[np.minimum((u * len(values)).astype(np.int64), len(values) - 1)]


def init_parasite_batch(ctx: UserContext, n, rng, grid: ServingGrid | None = None) -> PlanBatch:
    """Preference-aware plans: diet-safe items drawn in proportion to the user's ratings."""
    u_main = rng.random((n, 3, 1))
    u_side = rng.random((n, 3, 3))
    u_ex = rng.random((n, 3))
    u_grams = rng.random((n, 3, 4))
    u_min = rng.random((n, 3))
    food_ids = np.concatenate([_draw(ctx.main_cdf, u_main), _draw(ctx.side_cdf, u_side)], axis=2)
    ex_ids = _draw(ctx.ex_cdf, u_ex)
    if grid is None:
        grams = _kcal_servings(ctx, food_ids, u_grams)
        minutes = ctx.user.session_minutes * (1.0 - SPREAD + 2.0 * SPREAD * u_min)
    else:
        grams = _grid_pick(grid.grams, u_grams)
        minutes = _grid_pick(grid.minutes, u_min)
    return PlanBatch(food_ids.astype(np.int64), grams, ex_ids.astype(np.int64), minutes)


def init_host_batch(catalog: Catalog, n, rng, grid: ServingGrid | None = None) -> PlanBatch:
    """Plans drawn uniformly over the catalog, ignoring every user attribute.

    A slot type with no catalog items draws from all foods instead.
    """
    everything = np.arange(catalog.n_foods)
    mains = np.flatnonzero(catalog.is_main)
    sides = np.flatnonzero(~catalog.is_main)
    mains = mains if len(mains) else everything
    sides = sides if len(sides) else everything
    u_main = rng.random((n, 3, 1))
    u_side = rng.random((n, 3, 3))
    u_ex = rng.random((n, 3))
    u_grams = rng.random((n, 3, 4))
    u_min = rng.random((n, 3))
    food_ids = np.concatenate([_grid_pick(mains, u_main), _grid_pick(sides, u_side)], axis=2).astype(np.int64)
    ex_ids = np.minimum((u_ex * catalog.n_exercises).astype(np.int64), catalog.n_exercises - 1)
    if grid is None:
        grams = HOST_GRAMS[0] + (HOST_GRAMS[1] - HOST_GRAMS[0]) * u_grams
        minutes = HOST_MINUTES[0] + (HOST_MINUTES[1] - HOST_MINUTES[0]) * u_min
    else:
        grams = _grid_pick(grid.grams, u_grams)
        minutes = _grid_pick(grid.minutes, u_min)
    return PlanBatch(food_ids, grams, ex_ids, minutes)


def init_parasite(user: UserProfile, catalog: Catalog, rng) -> WellbeingPlan:
    return init_parasite_batch(UserContext(user, catalog), 1, rng).plan(0, catalog)


def init_host(catalog: Catalog, rng) -> WellbeingPlan:
    return init_host_batch(catalog, 1, rng).plan(0, catalog)


# -- variation -----------------------------------------------------------------

def crossover_batch(children: PlanBatch, partners: PlanBatch, cfg: OperatorConfig, rng) -> PlanBatch:
    """Inject single slots from same-position bundles of ``partners``.

    Each child crosses with probability ``p_c``; then each bundle, with
    probability ``p_b``, takes its main, one uniformly chosen side, or its
    exercise from the partner according to the main/side/exercise split.
    """
    n = len(children)
    out = children.copy()
    fire = (rng.random(n) < cfg.p_c)[:, None] & (rng.random((n, 3)) < cfg.p_b)
    u_slot = rng.random((n, 3))
    side = 1 + rng.integers(0, 3, size=(n, 3))
    is_main = fire & (u_slot < cfg.p_main)
    is_side = fire & (u_slot >= cfg.p_main) & (u_slot < cfg.p_main + cfg.p_side)
    is_ex = fire & (u_slot >= cfg.p_main + cfg.p_side)

    r, b = np.nonzero(is_main)
    out.food_ids[r, b, 0] = partners.food_ids[r, b, 0]
    out.grams[r, b, 0] = partners.grams[r, b, 0]
    r, b = np.nonzero(is_side)
    j = side[r, b]
    out.food_ids[r, b, j] = partners.food_ids[r, b, j]
    out.grams[r, b, j] = partners.grams[r, b, j]
    r, b = np.nonzero(is_ex)
    out.ex_ids[r, b] = partners.ex_ids[r, b]
    out.minutes[r, b] = partners.minutes[r, b]
    return out


def crossover(child: WellbeingPlan, other: WellbeingPlan, cfg: OperatorConfig, rng, catalog: Catalog):
    batch = crossover_batch(PlanBatch.from_plans([child], catalog), PlanBatch.from_plans([other], catalog), cfg, rng)
    return batch.plan(0, catalog)


def preference_vector(user: UserProfile, exercise_keys):
    return np.array([user.food_prefs.get(c, 0.0) for c in CATEGORIES]
                    + [user.exercise_prefs.get(e, 0.0) for e in exercise_keys])


def nearest_neighbour(user: UserProfile, pool) -> UserProfile:
    """Most cosine-similar other user by concatenated food and exercise ratings.

    Ties go to the lowest id.
    """
    others = sorted((u for u in pool if u.id != user.id), key=lambda u: u.id)
    if not others:
        raise ConfigError("nearest-neighbour search needs at least one other user in the pool")
    keys = sorted(set(user.exercise_prefs).union(*(u.exercise_prefs for u in others)))
    ref = preference_vector(user, keys)
    ref_norm = np.linalg.norm(ref)
    best, best_sim = None, -np.inf
    for cand in others:
        vec = preference_vector(cand, keys)
        denom = ref_norm * np.linalg.norm(vec)
        sim = float(ref @ vec / denom) if denom > 0 else 0.0
        if sim > best_sim:
            best, best_sim = cand, sim
    return best


def cf_mutate_batch(children: PlanBatch, neighbour: UserContext, cfg: OperatorConfig, rng,
                    grid: ServingGrid | None = None) -> PlanBatch:
    """Replace one uniformly chosen slot with an item the neighbour would pick.

    Fires with probability ``p_m`` per child. Items are drawn in proportion to
    the neighbour's ratings (their diet and exclusions apply) and the amount is
    re-drawn as parasite initialisation would under the neighbour's profile.
    """
    n = len(children)
    out = children.copy()
    fire = rng.random(n) < cfg.p_m
    slot = rng.integers(0, N_SLOTS, size=n)
    u_item = rng.random(n)
    u_amount = rng.random(n)
    b, k = slot // 5, slot % 5

    rows = np.flatnonzero(fire & (k == 4))
    if rows.size:
        out.ex_ids[rows, b[rows]] = _draw(neighbour.ex_cdf, u_item[rows])
        out.minutes[rows, b[rows]] = (_grid_pick(grid.minutes, u_amount[rows]) if grid is not None else
                                      neighbour.user.session_minutes * (1.0 - SPREAD + 2.0 * SPREAD * u_amount[rows]))
    rows = np.flatnonzero(fire & (k < 4))
    if rows.size:
        kk = k[rows]
        items = np.where(kk == 0, _draw(neighbour.main_cdf, u_item[rows]), _draw(neighbour.side_cdf, u_item[rows]))
        out.food_ids[rows, b[rows], kk] = items
        out.grams[rows, b[rows], kk] = (_grid_pick(grid.grams, u_amount[rows]) if grid is not None else
                                        _kcal_servings(neighbour, items, u_amount[rows]))
    return out


def cf_mutate(child: WellbeingPlan, user: UserProfile, pool, catalog: Catalog, cfg: OperatorConfig, rng):
    neighbour = UserContext(nearest_neighbour(user, pool), catalog)
    return cf_mutate_batch(PlanBatch.from_plans([child], catalog), neighbour, cfg, rng).plan(0, catalog)


# -- domain --------------------------------------------------------------------

class WellbeingDomain:
    """Plans for one user; the objective is the phi error (lower is better)."""

    maximize = False

    def __init__(self, catalog: Catalog, user: UserProfile, pool, ops: OperatorConfig | None = None,
                 grid: ServingGrid | None = None, goal_factors=None):
        self.catalog = catalog
        self.ops = ops or OperatorConfig()
        self.grid = grid
        self.ctx = UserContext(user, catalog, goal_factors)
        self.neighbour = UserContext(nearest_neighbour(user, pool), catalog, goal_factors)

    @property
    def user(self):
        return self.ctx.user

    def init_population(self, role, n, rng):
        if role == "host":
            return init_host_batch(self.catalog, n, rng, self.grid)
        return init_parasite_batch(self.ctx, n, rng, self.grid)

    def components(self, genomes):
        return self.ctx.components(genomes)

    def objective(self, genomes):
        return self.ctx.components(genomes)[:, 4]

    def take(self, genomes, idx):
        return genomes[idx]

    def breed(self, genomes, parents, role, rng):
        children = genomes[parents]
        partners = genomes[rng.integers(0, len(genomes), size=len(parents))]
        children = crossover_batch(children, partners, self.ops, rng)
        return cf_mutate_batch(children, self.neighbour, self.ops, rng, self.grid)

    def is_optimal(self, value):
        return value <= FITNESS_THRESHOLD

    def month_plans(self, population, k=MONTH_DAYS):
        """The ``k`` lowest-error members of an evaluated population (ties by index)."""
        order = np.lexsort((np.arange(len(population.objective)), population.objective))
        return population.genomes[order[:k]]
