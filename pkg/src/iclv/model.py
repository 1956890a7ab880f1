"""Domain types and probability kernels of the integrated choice and latent variable model.

Three latent attitudes (design, environment, safety) are linear in the
respondent's socio-demographics plus a normal disturbance. Each attitude is
measured by 5-point Likert indicators through an ordered logit, and enters
the utility of an electric-vehicle alternative through interactions with
vehicle attributes. Choices among {EV 1, EV 2, opt-out} follow an MNL kernel.

Unit conventions for alternative attributes are collected in :data:`UNITS`.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np
from scipy.special import expit

from .errors import ConfigurationError, DomainError, ParameterError

LATENTS = ("design", "environment", "safety")
N_LEVELS = 5

# ---------------------------------------------------------------------------
# Socio-demographic covariates
# ---------------------------------------------------------------------------

EDUCATION = ("certificate", "postgraduate", "undergraduate", "other")
EMPLOYMENT = ("full_time", "part_time", "other")
HOUSEHOLD = ("couple_kids", "couple_no_kids", "single_parent", "single", "other")
VEHICLES = ("none", "one", "two", "three_plus")
INCOME = ("low", "middle", "high")
DWELLING = ("house", "apartment", "other")
TENURE = ("owner", "owner_mortgage", "renter", "other")

# category -> dummy column; reference categories have no column
_DUMMY_GROUPS = {
    "education": {"certificate": "certificate", "postgraduate": "postgraduate",
                  "undergraduate": "undergraduate"},
    "employment": {"full_time": "full_time", "part_time": "part_time"},
    "household": {"couple_kids": "couple_kids", "couple_no_kids": "couple_no_kids",
                  "single_parent": "single_parent", "single": "single"},
    "vehicles": {"one": "one_vehicle", "two": "two_vehicles",
                 "three_plus": "three_plus_vehicles"},
    "income": {"low": "low_income", "high": "high_income"},
    "dwelling": {"house": "house", "apartment": "apartment"},
    "tenure": {"owner": "owner", "owner_mortgage": "owner_mortgage", "renter": "renter"},
}
_GROUP_LEVELS = {
    "education": EDUCATION, "employment": EMPLOYMENT, "household": HOUSEHOLD,
    "vehicles": VEHICLES, "income": INCOME, "dwelling": DWELLING, "tenure": TENURE,
}

COVARIATES = (
    "constant", "age", "age_sq", "age_cu", "female",
    *(col for group in _DUMMY_GROUPS.values() for col in group.values()),
)


@dataclass(frozen=True)
class CovariateVector:
    """Socio-demographic profile of one respondent.

    ``age`` is in years divided by 100. Categorical groups are stored as
    labels, so at most one dummy per group is ever switched on.
    """

    age: float
    female: int = 0
    education: str = "other"
    employment: str = "other"
    household: str = "other"
    vehicles: str = "none"
    income: str = "middle"
    dwelling: str = "other"
    tenure: str = "other"

    def __post_init__(self):
        if not (0.0 < self.age <= 1.2):
            raise ConfigurationError(f"scaled age must lie in (0, 1.2], got {self.age!r}")
        if self.female not in (0, 1, True, False):
            raise ConfigurationError(f"female must be 0 or 1, got {self.female!r}")
        for group, levels in _GROUP_LEVELS.items():
            value = getattr(self, group)
            if value not in levels:
                raise ConfigurationError(f"{group} must be one of {levels}, got {value!r}")

    @classmethod
    def from_years(cls, age_years: float, **kwargs) -> "CovariateVector":
        return cls(age=age_years / 100.0, **kwargs)

    @classmethod
    def from_dummies(cls, values: Mapping[str, float]) -> "CovariateVector":
        """Inverse of :meth:`values`; rejects groups with more than one active dummy."""
        try:
            age = float(values["age"])
        except KeyError:
            raise ConfigurationError("missing covariate 'age'") from None
        kwargs = {"female": int(values.get("female", 0))}
        for group, mapping in _DUMMY_GROUPS.items():
            active = [cat for cat, col in mapping.items() if values.get(col, 0)]
            bad = [col for col in mapping.values() if values.get(col, 0) not in (0, 1)]
            if bad:
                raise ConfigurationError(f"dummy {bad[0]} must be 0 or 1")
            if len(active) > 1:
                raise ConfigurationError(f"more than one {group} dummy set: {active}")
            if active:
                kwargs[group] = active[0]
            else:
                kwargs[group] = "middle" if group == "income" else (
                    "none" if group == "vehicles" else "other")
        z = cls(age=age, **kwargs)
        for power, name in ((2, "age_sq"), (3, "age_cu")):
            if name in values and not np.isclose(values[name], age ** power, rtol=0, atol=1e-12):
                raise ConfigurationError(f"{name} must equal age**{power}")
        return z

    def values(self) -> dict[str, float]:
        """Every design-matrix column, including the constant and age powers."""
        out = {name: 0.0 for name in COVARIATES}
        out["constant"] = 1.0
        out["age"] = self.age
        out["age_sq"] = self.age ** 2
        out["age_cu"] = self.age ** 3
        out["female"] = float(self.female)
        for group, mapping in _DUMMY_GROUPS.items():
            col = mapping.get(getattr(self, group))
            if col is not None:
                out[col] = 1.0
        return out

    def vector(self, names: Sequence[str]) -> np.ndarray:
        vals = self.values()
        try:
            return np.array([vals[n] for n in names], dtype=float)
        except KeyError as exc:
            raise ConfigurationError(f"missing covariate {exc.args[0]!r}") from None

    def categories(self) -> dict[str, object]:
        return {"age": self.age, "female": int(self.female),
                **{g: getattr(self, g) for g in _GROUP_LEVELS}}


# ---------------------------------------------------------------------------
# Alternatives
# ---------------------------------------------------------------------------

BODY_TYPES = ("hatchback", "small_sedan", "large_sedan", "small_suv", "large_suv", "minivan")

# divisor applied to the natural unit to obtain the model unit
UNITS = {
    "price": (100_000.0, "AUD"),
    "setup_cost": (1_000.0, "AUD"),
    "operating_cost": (1.0, "cents per km"),
    "recharge_time": (10.0, "hours"),
    "range_km": (100.0, "km"),
    "rebate_upfront": (10_000.0, "AUD"),
    "energy_discount": (1.0, "fraction"),
    "market_uptake": (1.0, "fraction"),
    "fast_charge_km": (1.0, "km"),
    "bus_lane": (1.0, "flag"),
    "parking_rebate": (100.0, "AUD per year"),
    "stamp_duty": (1.0, "fraction"),
}
NUMERIC_ATTRIBUTES = tuple(UNITS)
ATTRIBUTE_KEYS = BODY_TYPES + NUMERIC_ATTRIBUTES


@dataclass(frozen=True)
class AlternativeAttributes:
    """One EV alternative, every magnitude already divided by its :data:`UNITS` divisor."""

    body_type: str
    price: float
    setup_cost: float = 0.0
    operating_cost: float = 0.0
    recharge_time: float = 0.0
    range_km: float = 0.0
    rebate_upfront: float = 0.0
    energy_discount: float = 0.0
    market_uptake: float = 0.0
    fast_charge_km: float = 0.0
    bus_lane: float = 0.0
    parking_rebate: float = 0.0
    stamp_duty: float = 0.0

    def __post_init__(self):
        if self.body_type not in BODY_TYPES:
            raise ConfigurationError(f"body_type must be one of {BODY_TYPES}, got {self.body_type!r}")
        for name in NUMERIC_ATTRIBUTES:
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ConfigurationError(f"{name} must be finite and >= 0, got {value!r}")
        for name in ("energy_discount", "market_uptake", "stamp_duty", "bus_lane"):
            if getattr(self, name) > 1:
                raise ConfigurationError(f"{name} must lie in [0, 1]")

    @classmethod
    def from_natural(cls, body_type: str, **natural: float) -> "AlternativeAttributes":
        """Build from natural units (dollars, hours, km, ...)."""
        scaled = {}
        for name, value in natural.items():
            if name not in UNITS:
                raise ConfigurationError(f"unknown attribute {name!r}")
            scaled[name] = value / UNITS[name][0]
        return cls(body_type=body_type, **scaled)

    def natural(self) -> dict[str, float]:
        return {name: getattr(self, name) * UNITS[name][0] for name in NUMERIC_ATTRIBUTES}

    def features(self) -> dict[str, float]:
        """Body-type dummies plus every numeric attribute, keyed by :data:`ATTRIBUTE_KEYS`."""
        out = {b: float(b == self.body_type) for b in BODY_TYPES}
        for name in NUMERIC_ATTRIBUTES:
            out[name] = float(getattr(self, name))
        return out


OPT_OUT = None  # the "neither" alternative carries no attributes


class LatentAttitudes(NamedTuple):
    design: float
    environment: float
    safety: float


# ---------------------------------------------------------------------------
# Parameters and model specification
# ---------------------------------------------------------------------------

UTILITY_ATTRIBUTES = (
    "hatchback", "small_sedan", "small_suv", "price", "setup_cost", "operating_cost",
    "recharge_time", "rebate_upfront", "energy_discount", "market_uptake",
)
DEFAULT_INTERACTIONS = (
    ("design", "price"), ("environment", "range_km"),
    ("safety", "large_suv"), ("safety", "large_sedan"),
)
DEFAULT_INDICATORS = tuple(
    (f"I{k}", "safety" if k <= 2 else "environment" if k <= 4 else "design")
    for k in range(1, 11)
)


@dataclass(frozen=True)
class ModelSpec:
    """Declarative structure of the model: which names enter which equation.

    The first indicator listed for a latent is its reference indicator: its
    loading is fixed to 1 and, when ``anchor_thresholds`` is set, its first
    threshold is fixed as well so the latent's location is identified.
    """

    covariates: tuple[str, ...] = COVARIATES
    indicators: tuple[tuple[str, str], ...] = DEFAULT_INDICATORS
    attributes: tuple[str, ...] = UTILITY_ATTRIBUTES
    interactions: tuple[tuple[str, str], ...] = DEFAULT_INTERACTIONS
    estimate_delta_scale: bool = True
    anchor_thresholds: bool = True

    def __post_init__(self):
        object.__setattr__(self, "covariates", tuple(self.covariates))
        object.__setattr__(self, "indicators", tuple(tuple(i) for i in self.indicators))
        object.__setattr__(self, "attributes", tuple(self.attributes))
        object.__setattr__(self, "interactions", tuple(tuple(i) for i in self.interactions))
        self.validate()

    def validate(self) -> None:
        for name in self.covariates:
            if name not in COVARIATES:
                raise ConfigurationError(f"unknown covariate {name!r}")
        if len(set(self.covariates)) != len(self.covariates):
            raise ConfigurationError("duplicate covariate names")
        names = [n for n, _ in self.indicators]
        if len(set(names)) != len(names):
            raise ConfigurationError("duplicate indicator names")
        for name, latent in self.indicators:
            if latent not in LATENTS:
                raise ConfigurationError(f"indicator {name!r} refers to unknown latent {latent!r}")
        for attr in self.attributes:
            if attr not in ATTRIBUTE_KEYS:
                raise ConfigurationError(f"unknown attribute {attr!r}")
        for latent, attr in self.interactions:
            if latent not in LATENTS:
                raise ConfigurationError(f"interaction refers to unknown latent {latent!r}")
            if attr not in ATTRIBUTE_KEYS:
                raise ConfigurationError(f"interaction refers to unknown attribute {attr!r}")

    @property
    def indicator_names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.indicators)

    def indicator_latents(self) -> np.ndarray:
        return np.array([LATENTS.index(l) for _, l in self.indicators], dtype=int)

    def reference_indicators(self) -> dict[str, int]:
        """Latent name -> index of its reference indicator."""
        out: dict[str, int] = {}
        for k, (_, latent) in enumerate(self.indicators):
            out.setdefault(latent, k)
        return out

    def to_dict(self) -> dict:
        return {
            "covariates": list(self.covariates),
            "indicators": [{"name": n, "latent": l} for n, l in self.indicators],
            "attributes": list(self.attributes),
            "interactions": [{"latent": l, "attribute": a} for l, a in self.interactions],
            "estimate_delta_scale": self.estimate_delta_scale,
            "anchor_thresholds": self.anchor_thresholds,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ModelSpec":
        default = cls()
        return cls(
            covariates=tuple(data.get("covariates", default.covariates)),
            indicators=tuple((d["name"], d["latent"]) for d in data["indicators"])
            if "indicators" in data else default.indicators,
            attributes=tuple(data.get("attributes", default.attributes)),
            interactions=tuple((d["latent"], d["attribute"]) for d in data["interactions"])
            if "interactions" in data else default.interactions,
            estimate_delta_scale=bool(data.get("estimate_delta_scale", True)),
            anchor_thresholds=bool(data.get("anchor_thresholds", True)),
        )


@dataclass
class MeasurementParams:
    """Ordered-logit measurement block: one row per indicator."""

    names: tuple[str, ...]
    latent_index: np.ndarray  # (K,) ints into LATENTS
    loadings: np.ndarray  # (K,)
    thresholds: np.ndarray  # (K, 4), strictly increasing along axis 1

    def __post_init__(self):
        self.names = tuple(self.names)
        self.latent_index = np.asarray(self.latent_index, dtype=int)
        self.loadings = np.asarray(self.loadings, dtype=float)
        self.thresholds = np.asarray(self.thresholds, dtype=float)
        k = len(self.names)
        if self.latent_index.shape != (k,) or self.loadings.shape != (k,):
            raise ConfigurationError("measurement arrays must have one entry per indicator")
        if self.thresholds.shape != (k, N_LEVELS - 1):
            raise ConfigurationError(f"thresholds must have shape ({k}, {N_LEVELS - 1})")
        if np.any((self.latent_index < 0) | (self.latent_index >= len(LATENTS))):
            raise ConfigurationError("latent_index out of range")

    def check(self) -> None:
        if not np.all(np.isfinite(self.thresholds)) or not np.all(np.isfinite(self.loadings)):
            raise ParameterError("measurement parameters must be finite")
        bad = np.nonzero(np.any(np.diff(self.thresholds, axis=1) <= 0, axis=1))[0]
        if bad.size:
            raise ParameterError(f"thresholds of indicator {self.names[bad[0]]!r} are not strictly increasing")

    def copy(self) -> "MeasurementParams":
        return MeasurementParams(self.names, self.latent_index.copy(),
                                 self.loadings.copy(), self.thresholds.copy())


@dataclass(frozen=True)
class Interaction:
    latent: str
    attribute: str
    coefficient: float


@dataclass
class ParameterSet:
    """Every coefficient of the model.

    ``A`` has one row per latent and one column per entry of ``covariates``
    (the constant included). ``delta_scale`` holds the standard deviations of
    the latent disturbances and may be ``None`` when only latent means are
    needed. ``asc`` is added to each EV alternative's utility; the opt-out is
    normalised to zero.
    """

    covariates: tuple[str, ...]
    A: np.ndarray
    delta_scale: np.ndarray | None
    beta: dict[str, float]
    interactions: list[Interaction] = field(default_factory=list)
    measurement: MeasurementParams | None = None
    asc: float = 0.0

    def __post_init__(self):
        self.covariates = tuple(self.covariates)
        self.A = np.asarray(self.A, dtype=float).reshape(len(LATENTS), len(self.covariates))
        if self.delta_scale is not None:
            self.delta_scale = np.asarray(self.delta_scale, dtype=float)
            if self.delta_scale.shape != (len(LATENTS),):
                raise ConfigurationError("delta_scale must have one entry per latent")
            if np.any(self.delta_scale < 0) or not np.all(np.isfinite(self.delta_scale)):
                raise ParameterError("delta_scale must be finite and non-negative")
        self.beta = {str(k): float(v) for k, v in self.beta.items()}
        self.interactions = [i if isinstance(i, Interaction) else Interaction(*i)
                             for i in self.interactions]
        for name in self.beta:
            if name not in ATTRIBUTE_KEYS:
                raise ConfigurationError(f"unknown attribute {name!r} in beta")
        for inter in self.interactions:
            if inter.latent not in LATENTS:
                raise ConfigurationError(f"interaction refers to unknown latent {inter.latent!r}")
            if inter.attribute not in ATTRIBUTE_KEYS:
                raise ConfigurationError(f"interaction refers to unknown attribute {inter.attribute!r}")

    def copy(self) -> "ParameterSet":
        return replace(
            self, A=self.A.copy(),
            delta_scale=None if self.delta_scale is None else self.delta_scale.copy(),
            beta=dict(self.beta), interactions=list(self.interactions),
            measurement=None if self.measurement is None else self.measurement.copy(),
        )

    def structural_coefficient(self, latent: str, covariate: str) -> float:
        return float(self.A[LATENTS.index(latent), self.covariates.index(covariate)])


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------

def _covariate_array(params: ParameterSet, z) -> np.ndarray:
    if isinstance(z, CovariateVector):
        return z.vector(params.covariates)
    if isinstance(z, Mapping):
        try:
            return np.array([float(z[name]) for name in params.covariates])
        except KeyError as exc:
            raise ConfigurationError(f"missing covariate {exc.args[0]!r}") from None
    arr = np.asarray(z, dtype=float)
    if arr.shape[-1] != len(params.covariates):
        missing = params.covariates[arr.shape[-1]:] if arr.shape[-1] < len(params.covariates) else ()
        hint = f"; missing covariate {missing[0]!r}" if missing else ""
        raise ConfigurationError(
            f"covariate vector has {arr.shape[-1]} entries, A expects {len(params.covariates)}{hint}")
    return arr


def structural_mean(params: ParameterSet, z) -> LatentAttitudes:
    """Latent means ``A @ z`` (the disturbance set to zero)."""
    x = _covariate_array(params, z)
    return LatentAttitudes(*(params.A @ x))


def draw_latents(params: ParameterSet, z, draws) -> np.ndarray:
    """Latent attitudes for each standard-normal draw; returns ``(R, 3)``."""
    if params.delta_scale is None:
        raise ConfigurationError("delta_scale is required to draw latents")
    draws = np.atleast_2d(np.asarray(draws, dtype=float))
    if draws.shape[-1] != len(LATENTS):
        raise ConfigurationError(f"draws must have {len(LATENTS)} columns")
    mean = np.asarray(structural_mean(params, z))
    return mean + params.delta_scale * draws


def indicator_probs(meas: MeasurementParams, k: int, att) -> np.ndarray:
    """Probabilities of the five Likert levels of indicator ``k``."""
    meas.check()
    x = meas.loadings[k] * np.asarray(att, dtype=float)[meas.latent_index[k]]
    cdf = np.concatenate(([0.0], expit(meas.thresholds[k] - x), [1.0]))
    return np.diff(cdf)


def indicator_prob(meas: MeasurementParams, k: int, att, level: int) -> float:
    if not 1 <= level <= N_LEVELS:
        raise DomainError(f"level must be in 1..{N_LEVELS}, got {level}")
    return float(indicator_probs(meas, k, att)[level - 1])


def systematic_utility(params: ParameterSet, alt: AlternativeAttributes | None, att) -> float:
    if alt is OPT_OUT:
        return 0.0
    x = alt.features()
    att = np.asarray(att, dtype=float)
    v = params.asc
    for name, coef in params.beta.items():
        v += coef * x[name]
    for inter in params.interactions:
        try:
            xa = x[inter.attribute]
        except KeyError:
            raise ConfigurationError(f"unknown attribute {inter.attribute!r}") from None
        v += inter.coefficient * att[LATENTS.index(inter.latent)] * xa
    return float(v)


def choice_prob(utilities: Iterable[float], availability: Iterable[bool] | None = None) -> np.ndarray:
    """MNL probabilities over the available alternatives (max-subtracted softmax)."""
    v = np.asarray(list(utilities), dtype=float)
    avail = np.ones(v.shape, dtype=bool) if availability is None else np.asarray(list(availability), dtype=bool)
    if avail.shape != v.shape:
        raise ConfigurationError("availability must match utilities")
    if not avail.any():
        raise DomainError("no alternative is available")
    out = np.zeros_like(v)
    va = v[avail]
    e = np.exp(va - va.max())
    out[avail] = e / e.sum()
    return out


# ---------------------------------------------------------------------------
# Panel data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Task:
    """One stated-preference task; ``chosen`` is 0 (EV 1), 1 (EV 2) or 2 (opt-out)."""

    alt1: AlternativeAttributes
    alt2: AlternativeAttributes
    chosen: int

    def __post_init__(self):
        if self.chosen not in (0, 1, 2):
            raise ConfigurationError(f"chosen must be 0, 1 or 2, got {self.chosen!r}")


@dataclass(frozen=True)
class Individual:
    id: int
    covariates: CovariateVector
    indicators: tuple[int | None, ...]
    tasks: tuple[Task, ...]
    block: int | None = None
    budget_band: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "indicators", tuple(self.indicators))
        object.__setattr__(self, "tasks", tuple(self.tasks))
        for level in self.indicators:
            if level is not None and level not in range(1, N_LEVELS + 1):
                raise ConfigurationError(f"individual {self.id}: indicator level {level!r} outside 1..{N_LEVELS}")


@dataclass
class ChoiceDataset:
    """Panel of respondents, each answering ``panel_length`` tasks."""

    individuals: list[Individual]
    panel_length: int = 8
    indicator_names: tuple[str, ...] = tuple(n for n, _ in DEFAULT_INDICATORS)

    def __post_init__(self):
        self.indicator_names = tuple(self.indicator_names)
        self.validate()

    def validate(self) -> None:
        if self.panel_length < 1:
            raise ConfigurationError("panel_length must be >= 1")
        for person in self.individuals:
            if len(person.tasks) != self.panel_length:
                raise ConfigurationError(
                    f"individual {person.id} has {len(person.tasks)} tasks, expected {self.panel_length}")
            if len(person.indicators) != len(self.indicator_names):
                raise ConfigurationError(
                    f"individual {person.id} has {len(person.indicators)} indicator responses, "
                    f"expected {len(self.indicator_names)}")

    def __len__(self) -> int:
        return len(self.individuals)

    def sorted_by_id(self) -> list[Individual]:
        return sorted(self.individuals, key=lambda p: p.id)
