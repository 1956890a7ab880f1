"""Stated-preference designs and synthetic respondents.

A design assigns a level index to every attribute of both EV alternatives in
every task. Prices are stored as an index into the respondent's budget band,
so the same design row yields different dollar prices for different bands.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.special import expit

from .errors import ConfigurationError
from .model import (
    BODY_TYPES, DEFAULT_INDICATORS, DEFAULT_INTERACTIONS, LATENTS, NUMERIC_ATTRIBUTES, UTILITY_ATTRIBUTES,
    AlternativeAttributes, ChoiceDataset, CovariateVector, Individual, Interaction, MeasurementParams, ModelSpec,
    ParameterSet, Task, structural_mean,
)


class DesignWarning(UserWarning):
    """The design carries no information about some attribute combination."""


DESIGN_ATTRIBUTES = ("body_type",) + NUMERIC_ATTRIBUTES

# natural units; absent support schemes ("NA") are encoded as 0
ATTRIBUTE_LEVELS: dict[str, tuple] = {
    "body_type": BODY_TYPES,
    "price": ((25_000, 35_000, 45_000, 55_000), (55_000, 70_000, 85_000, 100_000),
              (100_000, 120_000, 140_000, 160_000)),
    "setup_cost": (1_000, 1_750, 2_500, 3_250),
    "operating_cost": (3, 6, 9, 12),
    "recharge_time": (0.5, 1.5, 2.5, 3.5, 4.5, 5.5, 6.5, 7.5),
    "range_km": (120, 180, 240, 300, 360, 420, 480, 540),
    "rebate_upfront": (0, 3_000, 6_500, 10_000),
    "energy_discount": (0.0, 0.25, 0.75, 1.0),
    "market_uptake": (0.01, 0.30, 0.60, 0.90),
    "fast_charge_km": (5, 10, 15, 20),
    "bus_lane": (0, 1),
    "parking_rebate": (0, 100, 250, 400),
    "stamp_duty": (0.0, 0.05, 0.15, 0.25),
}

# coefficients scored by the D-error: body dummies (minivan is the reference) + numerics
DESIGN_FEATURES = tuple(b for b in BODY_TYPES if b != "minivan") + NUMERIC_ATTRIBUTES


@dataclass(frozen=True)
class DesignSpec:
    levels: Mapping[str, tuple] = field(default_factory=lambda: dict(ATTRIBUTE_LEVELS))
    n_tasks: int = 144
    n_blocks: int = 18
    tasks_per_respondent: int = 8
    scoring_band: int = 1  # budget band whose prices enter the D-error

    def __post_init__(self):
        object.__setattr__(self, "levels", {k: tuple(tuple(b) for b in v) if k == "price" else tuple(v)
                                            for k, v in self.levels.items()})
        missing = [a for a in DESIGN_ATTRIBUTES if a not in self.levels]
        if missing:
            raise ConfigurationError(f"design spec lacks levels for {missing[0]!r}")
        unknown = [a for a in self.levels if a not in DESIGN_ATTRIBUTES]
        if unknown:
            raise ConfigurationError(f"unknown design attribute {unknown[0]!r}")
        if self.n_tasks != self.n_blocks * self.tasks_per_respondent:
            raise ConfigurationError("n_tasks must equal n_blocks * tasks_per_respondent")
        bands = self.levels["price"]
        if len({len(b) for b in bands}) != 1:
            raise ConfigurationError("every price band needs the same number of levels")
        if not 0 <= self.scoring_band < len(bands):
            raise ConfigurationError("scoring_band out of range")
        for a in DESIGN_ATTRIBUTES:
            if self.n_levels(a) < 1:
                raise ConfigurationError(f"attribute {a!r} has no levels")
        for b in self.levels["body_type"]:
            if b not in BODY_TYPES:
                raise ConfigurationError(f"unknown body type {b!r}")

    def n_levels(self, attribute: str) -> int:
        lv = self.levels[attribute]
        return len(lv[0]) if attribute == "price" else len(lv)

    @property
    def n_bands(self) -> int:
        return len(self.levels["price"])

    def value(self, attribute: str, index: int, band: int | None = None):
        if attribute == "price":
            return self.levels["price"][self.scoring_band if band is None else band][index]
        return self.levels[attribute][index]

    def to_dict(self) -> dict:
        return {"levels": {k: [list(b) for b in v] if k == "price" else list(v)
                           for k, v in self.levels.items()},
                "n_tasks": self.n_tasks, "n_blocks": self.n_blocks,
                "tasks_per_respondent": self.tasks_per_respondent, "scoring_band": self.scoring_band}

    @classmethod
    def from_dict(cls, data) -> "DesignSpec":
        levels = dict(ATTRIBUTE_LEVELS)
        levels.update(data.get("levels", {}))
        return cls(levels=levels, n_tasks=int(data["n_tasks"]), n_blocks=int(data["n_blocks"]),
                   tasks_per_respondent=int(data["tasks_per_respondent"]),
                   scoring_band=int(data.get("scoring_band", 1)))


def benchmark_spec() -> DesignSpec:
    """Small benchmark: 24 tasks in 3 blocks of 8."""
    return DesignSpec(n_tasks=24, n_blocks=3)


@dataclass
class Design:
    spec: DesignSpec
    levels: np.ndarray  # (n_tasks, 2, len(DESIGN_ATTRIBUTES)) level indices
    blocks: np.ndarray  # (n_tasks,)

    def __post_init__(self):
        self.levels = np.asarray(self.levels, dtype=np.int64)
        self.blocks = np.asarray(self.blocks, dtype=np.int64)
        T = self.levels.shape[0]
        if self.levels.shape != (T, 2, len(DESIGN_ATTRIBUTES)) or self.blocks.shape != (T,):
            raise ConfigurationError("design arrays have inconsistent shapes")
        for a, name in enumerate(DESIGN_ATTRIBUTES):
            col = self.levels[..., a]
            if col.size and (col.min() < 0 or col.max() >= self.spec.n_levels(name)):
                raise ConfigurationError(f"level index out of range for {name!r}")

    @property
    def n_tasks(self) -> int:
        return self.levels.shape[0]

    def copy(self) -> "Design":
        return Design(self.spec, self.levels.copy(), self.blocks.copy())

    def duplicated(self) -> "Design":
        return Design(self.spec, np.concatenate([self.levels, self.levels]),
                      np.concatenate([self.blocks, self.blocks]))

    def alternative(self, task: int, alt: int, band: int | None = None) -> AlternativeAttributes:
        row = self.levels[task, alt]
        natural = {name: self.spec.value(name, int(row[a]), band)
                   for a, name in enumerate(DESIGN_ATTRIBUTES) if name != "body_type"}
        return AlternativeAttributes.from_natural(self.spec.value("body_type", int(row[0])), **natural)

    def tasks_in_block(self, block: int) -> np.ndarray:
        return np.nonzero(self.blocks == block)[0]

    def features(self, band: int | None = None) -> np.ndarray:
        """Scored feature matrix, shape ``(n_tasks, 2, len(DESIGN_FEATURES))``, model units."""
        out = np.empty((self.n_tasks, 2, len(DESIGN_FEATURES)))
        for t in range(self.n_tasks):
            for j in range(2):
                x = self.alternative(t, j, band).features()
                out[t, j] = [x[f] for f in DESIGN_FEATURES]
        return out


def random_design(spec: DesignSpec, seed: int) -> Design:
    """Independent uniform level draws; tasks are blocked in order."""
    rng = np.random.default_rng(seed)
    levels = np.stack([rng.integers(0, spec.n_levels(a), size=(spec.n_tasks, 2))
                       for a in DESIGN_ATTRIBUTES], axis=-1)
    blocks = np.arange(spec.n_tasks) // spec.tasks_per_respondent
    return Design(spec, levels, blocks)


def _prior_vector(prior_beta: Mapping[str, float]) -> np.ndarray:
    missing = [f for f in DESIGN_FEATURES if f not in prior_beta]
    if missing:
        raise ConfigurationError(f"prior lacks a coefficient for {missing[0]!r}")
    return np.array([float(prior_beta[f]) for f in DESIGN_FEATURES])


def information_matrix(X: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Fisher information of an MNL over the designed alternatives, ``X`` of shape (T, J, K)."""
    V = X @ beta
    P = np.exp(V - V.max(axis=1, keepdims=True))
    P /= P.sum(axis=1, keepdims=True)
    D = X - np.einsum("tj,tjk->tk", P, X)[:, None, :]
    return np.einsum("tj,tjk,tjl->kl", P, D, D)


def _d_error_from_info(M: np.ndarray) -> float:
    sign, logdet = np.linalg.slogdet(M)
    if sign <= 0:
        return math.inf
    eig = np.linalg.eigvalsh(M)
    if eig[0] <= 1e-10 * max(eig[-1], 1e-300):
        return math.inf
    return math.exp(-logdet / M.shape[0])


def collinear_attributes(M: np.ndarray, tol: float = 1e-10) -> list[str]:
    eig, vec = np.linalg.eigh(M)
    null = vec[:, eig <= tol * max(eig[-1], 1e-300)]
    involved = np.any(np.abs(null) > 1e-6, axis=1)
    return [f for f, hit in zip(DESIGN_FEATURES, involved) if hit]


def d_error(design: Design, prior_beta: Mapping[str, float]) -> float:
    """``det(M^-1)^(1/K)`` for the MNL information ``M`` of the two designed alternatives.

    Returns ``inf`` (with a :class:`DesignWarning` naming the affected
    attributes) when ``M`` is singular.
    """
    M = information_matrix(design.features(), _prior_vector(prior_beta))
    value = _d_error_from_info(M)
    if math.isinf(value):
        warnings.warn(f"singular information matrix; collinear or constant attributes: "
                      f"{', '.join(collinear_attributes(M)) or 'all'}", DesignWarning, stacklevel=2)
    return value


def improve_design(design: Design, prior_beta: Mapping[str, float], swaps: int, seed: int) -> Design:
    """Coordinate exchange: random single-level changes, kept only when D-error falls."""
    rng = np.random.default_rng(seed)
    beta = _prior_vector(prior_beta)
    best = design.copy()
    if swaps <= 0:
        return best
    X = best.features()
    current = _d_error_from_info(information_matrix(X, beta))
    n_levels = [design.spec.n_levels(a) for a in DESIGN_ATTRIBUTES]
    for _ in range(swaps):
        t = int(rng.integers(best.n_tasks))
        j = int(rng.integers(2))
        a = int(rng.integers(len(DESIGN_ATTRIBUTES)))
        if n_levels[a] < 2:
            continue
        old = best.levels[t, j, a]
        new = (old + 1 + rng.integers(n_levels[a] - 1)) % n_levels[a]
        best.levels[t, j, a] = new
        x_old = X[t, j].copy()
        feats = best.alternative(t, j).features()
        X[t, j] = [feats[f] for f in DESIGN_FEATURES]
        score = _d_error_from_info(information_matrix(X, beta))
        if score < current:
            current = score
        else:
            best.levels[t, j, a] = old
            X[t, j] = x_old
    return best


# ---------------------------------------------------------------------------
# Respondents
# ---------------------------------------------------------------------------

# survey marginals; unspecified income is folded into the middle band
SURVEY_MARGINALS = {
    "age_groups": ((18, 30, 0.2314), (31, 45, 0.2807), (46, 65, 0.3420), (66, 85, 0.1459)),
    "female": 0.5102,
    "education": {"postgraduate": 0.2100, "undergraduate": 0.3941, "certificate": 0.3188, "other": 0.0771},
    "employment": {"full_time": 0.4275, "part_time": 0.1933, "other": 1 - 0.4275 - 0.1933},
    "household": {"couple_kids": 0.3076, "couple_no_kids": 0.3578, "single_parent": 0.0539,
                  "single": 0.1738, "other": 0.1069},
    "vehicles": {"none": 0.0353, "one": 0.4981, "two": 0.3550, "three_plus": 0.1115},
    "income": {"low": 0.2900, "middle": 0.2928 + 0.1041, "high": 0.3132},
    "dwelling": {"house": 0.6710, "apartment": 0.2193, "other": 0.1097},
    "tenure": {"owner": 0.3615, "owner_mortgage": 0.3253, "renter": 0.2946, "other": 0.0186},
}

CovariateSampler = Callable[[np.random.Generator, int], list[CovariateVector]]


def survey_sampler(rng: np.random.Generator, n: int) -> list[CovariateVector]:
    """Independent draws from the survey's marginal distributions."""
    m = SURVEY_MARGINALS
    groups = m["age_groups"]
    w = np.array([g[2] for g in groups])
    g = rng.choice(len(groups), size=n, p=w / w.sum())
    lo = np.array([groups[i][0] for i in g], dtype=float)
    hi = np.array([groups[i][1] for i in g], dtype=float)
    years = lo + rng.random(n) * (hi + 1 - lo)
    female = (rng.random(n) < m["female"]).astype(int)
    draws = {}
    for name in ("education", "employment", "household", "vehicles", "income", "dwelling", "tenure"):
        cats = list(m[name])
        p = np.array([m[name][c] for c in cats])
        draws[name] = [cats[i] for i in rng.choice(len(cats), size=n, p=p / p.sum())]
    return [CovariateVector(age=years[i] / 100.0, female=int(female[i]),
                            **{k: v[i] for k, v in draws.items()}) for i in range(n)]


def _feature_tensor(design: Design, keys: Sequence[str]) -> np.ndarray:
    """(n_tasks, 2, n_bands, len(keys)) features in model units."""
    out = np.empty((design.n_tasks, 2, design.spec.n_bands, len(keys)))
    for t in range(design.n_tasks):
        for j in range(2):
            for c in range(design.spec.n_bands):
                x = design.alternative(t, j, c).features()
                out[t, j, c] = [x[k] for k in keys]
    return out


def simulate_dataset(design: Design, true_params: ParameterSet, n_individuals: int,
                     covariate_sampler: CovariateSampler | None = None, seed: int = 0,
                     indicator_names: Sequence[str] | None = None) -> ChoiceDataset:
    """Draw respondents, latent attitudes, Likert answers and choices from ``true_params``.

    Every respondent is assigned a block and a budget band uniformly at
    random and answers that block's tasks. Utilities get i.i.d. Gumbel errors
    and the choice is the arg-max. Without a measurement block the indicator
    answers are left missing.
    """
    if n_individuals < 0:
        raise ConfigurationError("n_individuals must be >= 0")
    spec = design.spec
    for b in range(spec.n_blocks):
        if len(design.tasks_in_block(b)) != spec.tasks_per_respondent:
            raise ConfigurationError(f"block {b} does not hold {spec.tasks_per_respondent} tasks")
    meas = true_params.measurement
    names = tuple(indicator_names) if indicator_names is not None else (
        meas.names if meas is not None else tuple(n for n, _ in DEFAULT_INDICATORS))
    rng = np.random.default_rng(seed)
    sampler = covariate_sampler or survey_sampler
    N, T = n_individuals, spec.tasks_per_respondent

    covs = sampler(rng, N)
    mean = np.array([structural_mean(true_params, z) for z in covs]).reshape(N, len(LATENTS))
    scale = np.zeros(len(LATENTS)) if true_params.delta_scale is None else true_params.delta_scale
    att = mean + scale * rng.standard_normal((N, len(LATENTS)))

    if meas is not None:
        pos = {n: k for k, n in enumerate(meas.names)}
        u = rng.random((N, len(names)))
        answers = np.zeros((N, len(names)), dtype=np.int64)
        for c, name in enumerate(names):
            if name not in pos:
                raise ConfigurationError(f"no measurement parameters for indicator {name!r}")
            k = pos[name]
            cdf = expit(meas.thresholds[k][None, :] - meas.loadings[k] * att[:, meas.latent_index[k], None])
            answers[:, c] = 1 + np.sum(u[:, c, None] > cdf, axis=1)
    else:
        answers = None

    blocks = rng.integers(0, spec.n_blocks, size=N)
    bands = rng.integers(0, spec.n_bands, size=N)
    gumbel = rng.gumbel(size=(N, T, 3))

    keys = list(true_params.beta)
    inter_keys = [i.attribute for i in true_params.interactions]
    F = _feature_tensor(design, keys + inter_keys)
    beta = np.array([true_params.beta[k] for k in keys])
    coef = np.array([i.coefficient for i in true_params.interactions])
    lat = [LATENTS.index(i.latent) for i in true_params.interactions]
    alts = {}
    people = []
    order = [design.tasks_in_block(b) for b in range(spec.n_blocks)]
    for n in range(N):
        rows = order[blocks[n]]
        x = F[rows, :, bands[n]]  # (T, 2, keys)
        V = true_params.asc + x[..., :len(keys)] @ beta
        if len(coef):
            V = V + x[..., len(keys):] @ (coef * att[n, lat])
        U = np.concatenate([V, np.zeros((T, 1))], axis=1) + gumbel[n]
        chosen = np.argmax(U, axis=1)
        tasks = []
        for i, t in enumerate(rows):
            key = (int(t), int(bands[n]))
            if key not in alts:
                alts[key] = (design.alternative(t, 0, bands[n]), design.alternative(t, 1, bands[n]))
            tasks.append(Task(*alts[key], int(chosen[i])))
        ind = tuple(int(v) for v in answers[n]) if answers is not None else (None,) * len(names)
        people.append(Individual(n, covs[n], ind, tuple(tasks), int(blocks[n]), int(bands[n])))
    return ChoiceDataset(people, panel_length=T, indicator_names=names)


def shares(dataset: ChoiceDataset) -> np.ndarray:
    """Observed shares of EV 1, EV 2 and opt-out over all tasks."""
    counts = np.zeros(3)
    for p in dataset.individuals:
        for t in p.tasks:
            counts[t.chosen] += 1
    return counts / max(counts.sum(), 1)


# ---------------------------------------------------------------------------
# Illustrative true parameters for recovery studies
# ---------------------------------------------------------------------------

RECOVERY_COVARIATES = ("constant", "age", "female", "undergraduate", "full_time", "high_income")


def recovery_spec() -> ModelSpec:
    """Compact specification used by the recovery study: 79 free parameters."""
    return ModelSpec(covariates=RECOVERY_COVARIATES, indicators=DEFAULT_INDICATORS,
                     attributes=UTILITY_ATTRIBUTES, interactions=DEFAULT_INTERACTIONS)


def recovery_params() -> ParameterSet:
    """Illustrative true values for recovery studies.

    Latent means sit near zero, so the cut points (the reference indicator's
    first one at the logistic 20% quantile, matching the estimator's default
    anchor) spread answers over all five levels; choice coefficients give
    roughly a 25/25/50 split between the two EVs and the opt-out. Near-empty
    answer levels leave their cut points weakly identified and stall the
    optimiser, so keep both properties when editing."""
    A = np.array([
        [0.3, -0.8, 0.10, 0.20, 0.35, 0.05],
        [0.2, -0.5, 0.30, 0.25, 0.15, 0.10],
        [-0.3, 0.4, 0.35, 0.15, 0.35, 0.07],
    ])
    names = tuple(n for n, _ in DEFAULT_INDICATORS)
    latent_index = [LATENTS.index(l) for _, l in DEFAULT_INDICATORS]
    loadings = np.array([1.0, 0.8, 1.0, 1.2, 1.0, 0.9, 1.1, 0.7, 1.3, 0.85])
    first = math.log(0.2 / 0.8)
    base = np.array([first, first + 1.3, first + 2.5, first + 3.9])
    shifts = np.array([0.0, -0.3, 0.0, 0.4, 0.0, 0.2, 0.5, -0.4, 0.3, -0.2])
    thresholds = base + shifts[:, None]
    thresholds[:, 3] += np.linspace(0.0, 0.3, len(names))  # vary the top gap too
    meas = MeasurementParams(names, latent_index, loadings, thresholds)
    beta = {"hatchback": 0.49, "small_sedan": 0.417, "small_suv": 0.499, "price": -0.6,
            "setup_cost": -0.038, "operating_cost": -0.1, "recharge_time": -0.477,
            "rebate_upfront": 0.183, "energy_discount": 0.309, "market_uptake": 0.344}
    inter = [Interaction("design", "price", 0.5), Interaction("environment", "range_km", 0.023),
             Interaction("safety", "large_suv", 0.139), Interaction("safety", "large_sedan", 0.084)]
    return ParameterSet(RECOVERY_COVARIATES, A, np.array([1.5, 1.4, 1.6]), beta, inter, meas)
