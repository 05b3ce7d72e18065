"""Food/exercise catalogs and user profiles for the well-being domain.

Catalog files are JSON with ``schema: 1`` and top-level ``foods`` and
``exercises`` lists; user pools use the key ``users``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from ..errors import CatalogError

SCHEMA_VERSION = 1
CATEGORIES = ("vegetable", "fruit", "grain", "meat", "fish", "dairy", "legume", "nut", "egg", "other")
SLOTS = ("main", "side")
INTENSITIES = ("low", "moderate", "high")
GOALS = ("lose_weight", "maintain", "gain_muscle")

# nutrient columns in the order the hf terms use them
NUTRIENT_FIELDS = ("kcal_per_serving", "protein_g", "carbs_g", "fat_g",
                   "satfat_g", "sugar_g", "fibre_g", "sodium_g")
FOOD_FIELDS = ("id", "name", "slot", "category", "vegetarian", "vegan", "serving_g",
               "kcal_per_serving", "protein_g", "carbs_g", "sugar_g", "fibre_g",
               "fat_g", "satfat_g", "sodium_g")
EXERCISE_FIELDS = ("id", "name", "intensity", "met")


@dataclass(frozen=True)
class FoodItem:
    id: str
    name: str
    slot: str
    category: str
    vegetarian: bool
    vegan: bool
    serving_g: float
    kcal_per_serving: float
    protein_g: float
    carbs_g: float
    sugar_g: float
    fibre_g: float
    fat_g: float
    satfat_g: float
    sodium_g: float

    def validate(self):
        if self.slot not in SLOTS:
            raise CatalogError(f"food {self.id!r}: slot must be one of {SLOTS}")
        if self.category not in CATEGORIES:
            raise CatalogError(f"food {self.id!r}: unknown category {self.category!r}")
        if self.serving_g <= 0:
            raise CatalogError(f"food {self.id!r}: serving_g must be > 0")
        if self.kcal_per_serving <= 0:
            raise CatalogError(f"food {self.id!r}: kcal_per_serving must be > 0")
        for name in NUTRIENT_FIELDS[1:]:
            if getattr(self, name) < 0:
                raise CatalogError(f"food {self.id!r}: {name} must be >= 0")
        if self.satfat_g > self.fat_g:
            raise CatalogError(f"food {self.id!r}: satfat_g exceeds fat_g")
        if self.sugar_g > self.carbs_g:
            raise CatalogError(f"food {self.id!r}: sugar_g exceeds carbs_g")
        if self.vegan and not self.vegetarian:
            raise CatalogError(f"food {self.id!r}: vegan items must also be vegetarian")


@dataclass(frozen=True)
class ExerciseItem:
    id: str
    name: str
    intensity: str
    met: float

    def validate(self):
        if self.intensity not in INTENSITIES:
            raise CatalogError(f"exercise {self.id!r}: intensity must be one of {INTENSITIES}")
        if not 0.9 < self.met <= 20:
            raise CatalogError(f"exercise {self.id!r}: met must lie in (0.9, 20]")


class Catalog:
    """Immutable catalog plus the array views the kernels consume."""

    def __init__(self, foods, exercises, source_sha256=None):
        self.foods = tuple(foods)
        self.exercises = tuple(exercises)
        if not self.foods or not self.exercises:
            raise CatalogError("catalog needs at least one food and one exercise")
        for item in self.foods + self.exercises:
            item.validate()
        self.food_index = _index(self.foods, "food")
        self.exercise_index = _index(self.exercises, "exercise")
        self.sha256 = source_sha256

        per_serving = np.array([[getattr(f, k) for k in NUTRIENT_FIELDS] for f in self.foods], dtype=np.float64)
        serving = np.array([f.serving_g for f in self.foods], dtype=np.float64)
        self.food_pg = per_serving / serving[:, None]
        self.kcal_pg = self.food_pg[:, 0].copy()
        self.food_cat = np.array([CATEGORIES.index(f.category) for f in self.foods], dtype=np.int64)
        self.is_main = np.array([f.slot == "main" for f in self.foods])
        self.vegetarian = np.array([f.vegetarian for f in self.foods])
        self.vegan = np.array([f.vegan for f in self.foods])
        self.n_categories = len(set(self.food_cat.tolist()))

    @property
    def n_foods(self):
        return len(self.foods)

    @property
    def n_exercises(self):
        return len(self.exercises)

    def food(self, food_id):
        try:
            return self.foods[self.food_index[food_id]]
        except KeyError:
            raise CatalogError(f"unknown food id {food_id!r}") from None

    def exercise(self, exercise_id):
        try:
            return self.exercises[self.exercise_index[exercise_id]]
        except KeyError:
            raise CatalogError(f"unknown exercise id {exercise_id!r}") from None

    def to_dict(self):
        return {"schema": SCHEMA_VERSION,
                "counts": {"foods": self.n_foods, "exercises": self.n_exercises},
                "foods": [asdict(f) for f in self.foods],
                "exercises": [asdict(e) for e in self.exercises]}


def _index(items, kind):
    index = {}
    for i, item in enumerate(items):
        if item.id in index:
            raise CatalogError(f"duplicate {kind} id {item.id!r}")
        index[item.id] = i
    return index


def _read_json(path):
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise CatalogError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise CatalogError(f"{path}: parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise CatalogError(f"{path}: top level must be an object")
    if data.get("schema") != SCHEMA_VERSION:
        raise CatalogError(f"{path}: unsupported schema {data.get('schema')!r}, expected {SCHEMA_VERSION}")
    return data, hashlib.sha256(raw).hexdigest()


def _record(rec, fields, kind, pos, path):
    if not isinstance(rec, dict):
        raise CatalogError(f"{path}: {kind} record {pos} is not an object")
    label = rec.get("id", f"#{pos}")
    missing = [f for f in fields if f not in rec]
    if missing:
        raise CatalogError(f"{path}: {kind} {label!r} missing field {missing[0]!r}")
    extra = sorted(set(rec) - set(fields))
    if extra:
        raise CatalogError(f"{path}: {kind} {label!r} has unknown field {extra[0]!r}")
    return {f: rec[f] for f in fields}


def load_catalog(path=None) -> Catalog:
    """Load and validate a catalog file; ``None`` loads the bundled demo catalog."""
    if path is None:
        path = demo_catalog_path()
    data, digest = _read_json(path)
    foods_raw = data.get("foods")
    ex_raw = data.get("exercises")
    if not foods_raw or not ex_raw:
        raise CatalogError(f"{path}: empty catalog (needs non-empty 'foods' and 'exercises')")
    try:
        foods = []
        for i, rec in enumerate(foods_raw):
            r = _record(rec, FOOD_FIELDS, "food", i, path)
            for k in FOOD_FIELDS[6:]:
                r[k] = float(r[k])
            r["vegetarian"] = bool(r["vegetarian"])
            r["vegan"] = bool(r["vegan"])
            foods.append(FoodItem(**r))
        exercises = []
        for i, rec in enumerate(ex_raw):
            r = _record(rec, EXERCISE_FIELDS, "exercise", i, path)
            r["met"] = float(r["met"])
            exercises.append(ExerciseItem(**r))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, CatalogError):
            raise
        raise CatalogError(f"{path}: bad field value: {exc}") from exc
    catalog = Catalog(foods, exercises, digest)
    counts = data.get("counts")
    if counts is not None:
        if counts.get("foods") != catalog.n_foods or counts.get("exercises") != catalog.n_exercises:
            raise CatalogError(f"{path}: counts {counts} do not match {catalog.n_foods} foods, "
                               f"{catalog.n_exercises} exercises")
    return catalog


def demo_catalog_path():
    return Path(str(resources.files("coevolab") / "data" / "demo_catalog.json"))


def micro_catalog_path():
    return Path(str(resources.files("coevolab") / "data" / "micro_catalog.json"))


# -- users ---------------------------------------------------------------------

GOAL_FACTORS = {"lose_weight": 0.85, "maintain": 1.0, "gain_muscle": 1.10}
USER_FIELDS = ("id", "daily_kcal", "goal", "vegetarian", "vegan", "session_minutes",
               "food_prefs", "exercise_prefs", "disallowed_exercises")


@dataclass(frozen=True)
class UserProfile:
    id: str
    daily_kcal: float
    goal: str
    vegetarian: bool
    vegan: bool
    session_minutes: float
    food_prefs: dict = field(default_factory=dict)
    exercise_prefs: dict = field(default_factory=dict)
    disallowed_exercises: frozenset = frozenset()

    def __post_init__(self):
        if self.daily_kcal <= 0:
            raise CatalogError(f"user {self.id!r}: daily_kcal must be > 0")
        if self.session_minutes <= 0:
            raise CatalogError(f"user {self.id!r}: session_minutes must be > 0")
        if self.goal not in GOALS:
            raise CatalogError(f"user {self.id!r}: goal must be one of {GOALS}")
        for k, v in list(self.food_prefs.items()) + list(self.exercise_prefs.items()):
            if not 0.0 <= v <= 1.0:
                raise CatalogError(f"user {self.id!r}: rating for {k!r} outside [0, 1]")
        for k in self.food_prefs:
            if k not in CATEGORIES:
                raise CatalogError(f"user {self.id!r}: unknown food category {k!r}")
        object.__setattr__(self, "disallowed_exercises", frozenset(self.disallowed_exercises))

    def to_dict(self):
        d = asdict(self)
        d["disallowed_exercises"] = sorted(self.disallowed_exercises)
        d["food_prefs"] = dict(sorted(self.food_prefs.items()))
        d["exercise_prefs"] = dict(sorted(self.exercise_prefs.items()))
        return d


def meal_kcal_target(user: UserProfile, goal_factors=None) -> float:
    """Per-meal energy target: the goal-adjusted daily intake split over three meals."""
    factors = GOAL_FACTORS if goal_factors is None else goal_factors
    return factors[user.goal] * user.daily_kcal / 3.0


def load_users(path):
    data, digest = _read_json(path)
    raw = data.get("users")
    if not raw:
        raise CatalogError(f"{path}: empty user pool")
    users = []
    try:
        for i, rec in enumerate(raw):
            r = _record(rec, USER_FIELDS, "user", i, path)
            r["daily_kcal"] = float(r["daily_kcal"])
            r["session_minutes"] = float(r["session_minutes"])
            r["food_prefs"] = {k: float(v) for k, v in r["food_prefs"].items()}
            r["exercise_prefs"] = {k: float(v) for k, v in r["exercise_prefs"].items()}
            r["disallowed_exercises"] = frozenset(r["disallowed_exercises"])
            users.append(UserProfile(**r))
    except (TypeError, ValueError, AttributeError) as exc:
        if isinstance(exc, CatalogError):
            raise
        raise CatalogError(f"{path}: bad user record: {exc}") from exc
    ids = [u.id for u in users]
    if len(set(ids)) != len(ids):
        raise CatalogError(f"{path}: duplicate user ids")
    return users, digest


def save_users(users, path):
    data = {"schema": SCHEMA_VERSION, "users": [u.to_dict() for u in users]}
    Path(path).write_text(json.dumps(data, indent=1) + "\n", encoding="utf-8")


def generate_synthetic_users(k: int, seed: int, catalog: Catalog | None = None):
    """Deterministic pool of ``k`` plausible user profiles.

    Stands in for participant data. Ratings are Beta(2, 2) draws, one per
    food category and per catalog exercise.
    """
    if k < 1:
        raise CatalogError("need at least one synthetic user")
    catalog = load_catalog() if catalog is None else catalog
    ex_ids = [e.id for e in catalog.exercises]
    rng = np.random.default_rng(seed)
    users = []
    for i in range(k):
        daily = round(float(rng.uniform(1600.0, 2800.0)), 1)
        session = float(rng.choice(np.arange(30, 121, 15)))
        goal = GOALS[int(rng.integers(len(GOALS)))]
        vegetarian = bool(rng.random() < 0.15)
        vegan = vegetarian and bool(rng.random() < 1.0 / 3.0)
        food_prefs = {c: round(float(v), 4) for c, v in zip(CATEGORIES, rng.beta(2.0, 2.0, len(CATEGORIES)))}
        ex_prefs = {e: round(float(v), 4) for e, v in zip(ex_ids, rng.beta(2.0, 2.0, len(ex_ids)))}
        n_dis = int(rng.integers(0, 3))
        disallowed = frozenset(rng.choice(ex_ids, size=n_dis, replace=False).tolist()) if n_dis else frozenset()
        users.append(UserProfile(f"u{i:04d}", daily, goal, vegetarian, vegan, session,
                                 food_prefs, ex_prefs, disallowed))
    return users
