"""Cohort-level simulation: latent attitudes, Likert profiles and policy sweeps.

Simulations evaluate one electric vehicle against the opt-out at the
cohort's latent means. The EV utility can carry a calibration constant
(stored with the parameters) that shifts every cohort's baseline
equally; it is fixed once and never re-fit per scenario.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.special import expit, logit

from .errors import ConfigurationError
from .model import (
    LATENTS, AlternativeAttributes, CovariateVector, LatentAttitudes, ParameterSet,
    indicator_probs, structural_mean, systematic_utility,
)

GENDERS = ("male", "female")


@dataclass(frozen=True)
class CohortSpec:
    name: str
    age_years: float
    gender: str
    education: str = "other"
    employment: str = "other"
    household: str = "other"
    vehicles: str = "none"
    income: str = "middle"
    dwelling: str = "other"
    tenure: str = "other"

    def __post_init__(self):
        if self.gender not in GENDERS:
            raise ConfigurationError(f"cohort {self.name!r}: gender must be one of {GENDERS}")
        self.covariates()  # validates every category

    @property
    def label(self) -> str:
        return f"{self.name} {self.gender}"

    def covariates(self) -> CovariateVector:
        try:
            return CovariateVector.from_years(
                self.age_years, female=int(self.gender == "female"), education=self.education,
                employment=self.employment, household=self.household, vehicles=self.vehicles,
                income=self.income, dwelling=self.dwelling, tenure=self.tenure)
        except ConfigurationError as exc:
            raise ConfigurationError(f"cohort {self.name!r}: {exc}") from None

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, data: Mapping) -> "CohortSpec":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigurationError(f"unmapped cohort field {sorted(unknown)[0]!r}")
        return cls(**data)


def _pair(name, age, **kw):
    return tuple(CohortSpec(name, age, g, **kw) for g in GENDERS)


DEFAULT_COHORTS: tuple[CohortSpec, ...] = (
    *_pair("Gen Z", 20, education="certificate", employment="part_time", household="other",
           vehicles="one", income="middle", dwelling="house", tenure="renter"),
    *_pair("Gen Y", 37, education="undergraduate", employment="full_time", household="couple_kids",
           vehicles="one", income="high", dwelling="house", tenure="owner_mortgage"),
    *_pair("Gen X", 50, education="undergraduate", employment="full_time", household="couple_kids",
           vehicles="one", income="high", dwelling="house", tenure="owner"),
)


@dataclass(frozen=True)
class BaseVehicle:
    """Reference EV of the sweeps, in model units."""

    body_type: str = "large_sedan"
    price: float = 1.00
    setup_cost: float = 10.0
    range_km: float = 4.50
    recharge_time: float = 0.125
    operating_cost: float = 6.12
    rebate_upfront: float = 0.0
    energy_discount: float = 0.0
    market_uptake: float = 0.01

    def alternative(self, **overrides) -> AlternativeAttributes:
        fields = {k: getattr(self, k) for k in self.__dataclass_fields__}
        fields.update(overrides)
        return AlternativeAttributes(**fields)


# swept field, x -> model-unit value, default grid (natural units), design-grid bounds
SCENARIOS = {
    1: ("price_subsidy", "price", "AUD", (0.0, 50_000.0), (25_000.0, 160_000.0)),
    2: ("rebate_upfront", "rebate_upfront", "AUD", (0.0, 50_000.0), (0.0, 10_000.0)),
    3: ("range_km", "range_km", "km", (450.0, 700.0), (120.0, 540.0)),
    4: ("recharge_time", "recharge_time", "minutes", (75.0, 25.0), (30.0, 450.0)),
    5: ("energy_discount", "energy_discount", "fraction", (0.0, 1.0), (0.0, 1.0)),
    6: ("market_uptake", "market_uptake", "fraction", (0.01, 0.90), (0.01, 0.90)),
}


@dataclass(frozen=True)
class ScenarioSweep:
    scenario_id: int
    grid: tuple[float, ...]
    cohorts: tuple[CohortSpec, ...] = DEFAULT_COHORTS

    def __post_init__(self):
        if self.scenario_id not in SCENARIOS:
            raise ConfigurationError(f"unknown scenario {self.scenario_id!r}; expected 1..6")
        grid = np.asarray(self.grid, dtype=float)
        if grid.size == 0 or not np.all(np.isfinite(grid)):
            raise ConfigurationError("sweep grid must be a nonempty set of finite values")
        steps = np.diff(grid)
        if grid.size > 1 and not (np.all(steps > 0) or np.all(steps < 0)):
            raise ConfigurationError("sweep grid must be strictly monotone")
        object.__setattr__(self, "grid", tuple(grid.tolist()))
        object.__setattr__(self, "cohorts", tuple(self.cohorts))

    @property
    def swept_field(self) -> str:
        return SCENARIOS[self.scenario_id][0]

    @property
    def unit(self) -> str:
        return SCENARIOS[self.scenario_id][2]

    @classmethod
    def default(cls, scenario_id: int, n_points: int = 11,
                cohorts: Sequence[CohortSpec] = DEFAULT_COHORTS) -> "ScenarioSweep":
        if scenario_id not in SCENARIOS:
            raise ConfigurationError(f"unknown scenario {scenario_id!r}; expected 1..6")
        lo, hi = SCENARIOS[scenario_id][3]
        return cls(scenario_id, tuple(np.linspace(lo, hi, n_points)), tuple(cohorts))

    def apply(self, base: BaseVehicle, x: float) -> AlternativeAttributes:
        """The base vehicle with the swept field set from the natural-unit value ``x``."""
        sid = self.scenario_id
        if sid == 1:
            return base.alternative(price=base.price - x / 100_000.0)
        if sid == 2:
            return base.alternative(rebate_upfront=x / 10_000.0)
        if sid == 3:
            return base.alternative(range_km=x / 100.0)
        if sid == 4:
            return base.alternative(recharge_time=x / 600.0)
        if sid == 5:
            return base.alternative(energy_discount=x)
        return base.alternative(market_uptake=x)

    def natural_value(self, alt: AlternativeAttributes) -> float:
        """Value of the swept attribute in the units of its design-grid bounds."""
        attr = SCENARIOS[self.scenario_id][1]
        nat = alt.natural()[attr]
        return nat * 60.0 if attr == "recharge_time" else nat


@dataclass(frozen=True)
class CurveRow:
    scenario: int
    cohort: str
    gender: str
    x: float
    probability: float


@dataclass
class SweepResult:
    sweep: ScenarioSweep
    rows: list[CurveRow]
    warnings: list[str] = field(default_factory=list)
    ev_constant: float = 0.0

    def curve(self, cohort: str, gender: str) -> tuple[np.ndarray, np.ndarray]:
        sel = [r for r in self.rows if r.cohort == cohort and r.gender == gender]
        if not sel:
            raise KeyError(f"no curve for {cohort} {gender}")
        return np.array([r.x for r in sel]), np.array([r.probability for r in sel])

    def change(self, cohort: str, gender: str) -> float:
        """Probability at the last grid point minus the first."""
        _, p = self.curve(cohort, gender)
        return float(p[-1] - p[0])


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def cohort_latents(params: ParameterSet, cohort: CohortSpec) -> LatentAttitudes:
    """Latent means of the cohort (disturbance at zero)."""
    return structural_mean(params, cohort.covariates())


def age_profile(params: ParameterSet, age_grid) -> np.ndarray:
    """Constant plus the age polynomial, other covariates at zero; shape ``(len(grid), 3)``."""
    a = np.asarray(age_grid, dtype=float) / 100.0
    out = np.empty((a.size, len(LATENTS)))
    for l, latent in enumerate(LATENTS):
        c = [params.structural_coefficient(latent, n) if n in params.covariates else 0.0
             for n in ("constant", "age", "age_sq", "age_cu")]
        out[:, l] = c[0] + c[1] * a + c[2] * a ** 2 + c[3] * a ** 3
    return out


def profile_minimum(params: ParameterSet, latent: str, lo: float = 18.0, hi: float = 85.0) -> float | None:
    """Age in years of the interior local minimum of the age curve, if one exists."""
    c = [params.structural_coefficient(latent, n) for n in ("age", "age_sq", "age_cu")]
    roots = np.roots([3 * c[2], 2 * c[1], c[0]])
    for root in sorted(r.real for r in roots if abs(r.imag) < 1e-12):
        years = 100 * root
        if lo <= years <= hi and 6 * c[2] * root + 2 * c[1] > 0:
            return float(years)
    return None


def measurement_profile(params: ParameterSet, cohort: CohortSpec) -> np.ndarray:
    """Level probabilities of every indicator at the cohort's latent means, shape ``(K, 5)``."""
    if params.measurement is None:
        raise ConfigurationError("parameter set has no measurement block")
    att = np.asarray(cohort_latents(params, cohort))
    return np.array([indicator_probs(params.measurement, k, att) for k in range(len(params.measurement.names))])


def _required_coefficient(params: ParameterSet, sweep: ScenarioSweep) -> None:
    attr = SCENARIOS[sweep.scenario_id][1]
    if attr not in params.beta and not any(i.attribute == attr for i in params.interactions):
        raise ConfigurationError(f"parameter set has no coefficient for {attr!r}")


def ev_probability(params: ParameterSet, alt: AlternativeAttributes, att, ev_constant: float = 0.0) -> float:
    """P(EV) in the binary choice {EV, opt-out}."""
    return float(expit(systematic_utility(params, alt, att) + ev_constant))


def scenario_sweep(params: ParameterSet, sweep: ScenarioSweep, base: BaseVehicle | None = None,
                   ev_constant: float = 0.0, n_draws: int = 0, seed: int = 0) -> SweepResult:
    """P(EV) along the sweep grid for every cohort, ordered by cohort then grid index.

    With ``n_draws > 0`` the probability is averaged over draws of the latent
    disturbances instead of being evaluated at the latent means.
    """
    base = base or BaseVehicle()
    _required_coefficient(params, sweep)
    warnings = []
    lo, hi = SCENARIOS[sweep.scenario_id][4]
    alts = [sweep.apply(base, x) for x in sweep.grid]
    outside = [x for x, alt in zip(sweep.grid, alts)
               if not lo - 1e-9 <= sweep.natural_value(alt) <= hi + 1e-9]
    if outside:
        warnings.append(f"scenario {sweep.scenario_id}: {len(outside)} grid point(s) outside the "
                        f"surveyed attribute range [{lo:g}, {hi:g}] ({sweep.unit}); extrapolating")
    if not 1_000 <= base.setup_cost * 1_000 <= 3_250 or not 1.2 <= base.range_km <= 5.4:
        warnings.append("base vehicle lies outside the surveyed attribute ranges; extrapolating")
    draws = None
    if n_draws > 0:
        if params.delta_scale is None:
            raise ConfigurationError("Monte Carlo mode needs delta_scale")
        draws = np.random.default_rng(seed).standard_normal((n_draws, len(LATENTS)))
    rows = []
    for cohort in sweep.cohorts:
        mean = np.asarray(cohort_latents(params, cohort))
        atts = [mean] if draws is None else mean + params.delta_scale * draws
        for x, alt in zip(sweep.grid, alts):
            p = float(np.mean([ev_probability(params, alt, a, ev_constant) for a in atts]))
            rows.append(CurveRow(sweep.scenario_id, cohort.name, cohort.gender, float(x), p))
    return SweepResult(sweep, rows, warnings, ev_constant)


# target baseline P(EV) of the reference vehicle, per cohort
BASELINE_SHARES = {
    ("Gen X", "male"): 0.289, ("Gen X", "female"): 0.346,
    ("Gen Z", "male"): 0.369, ("Gen Z", "female"): 0.432,
    ("Gen Y", "male"): 0.50, ("Gen Y", "female"): 0.55,
}


def calibrate_ev_constant(params: ParameterSet, base: BaseVehicle | None = None,
                          targets: Mapping[tuple[str, str], float] = BASELINE_SHARES,
                          cohorts: Sequence[CohortSpec] = DEFAULT_COHORTS) -> float:
    """Least-squares constant on the logit scale matching baseline P(EV) per cohort."""
    base = base or BaseVehicle()
    alt = base.alternative()
    gaps = []
    for c in cohorts:
        key = (c.name, c.gender)
        if key in targets:
            v = systematic_utility(params, alt, cohort_latents(params, c))
            gaps.append(float(logit(targets[key])) - v)
    if not gaps:
        raise ConfigurationError("no calibration target matches the cohorts")
    return math.fsum(gaps) / len(gaps)
