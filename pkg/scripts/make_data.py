"""Regenerate the JSON/CSV files bundled in ``src/iclv/data``.

Run from the repository root: ``python3 scripts/make_data.py``.
"""

import os
from pathlib import Path

import numpy as np

from iclv import io
from iclv.cli import main as cli_main
from iclv.estimation import EstimationSettings
from iclv.model import COVARIATES, Interaction, ModelSpec, ParameterSet
from iclv.policy import DEFAULT_COHORTS, calibrate_ev_constant
from iclv.synthetic import DesignSpec, benchmark_spec, recovery_params, recovery_spec

DATA = Path(__file__).resolve().parents[1] / "src" / "iclv" / "data"

# structural coefficients (design, environment, safety) of the reference fit
STRUCTURAL = {
    "constant": (3.97, 5.41, 3.05), "age": (-3.33, -9.36, 2.58), "age_sq": (-8.71, 13.6, -27.5),
    "age_cu": (12.2, -5.61, 27.4), "female": (.086, .266, .347), "certificate": (-.15, .174, -.053),
    "postgraduate": (.444, .355, .736), "undergraduate": (.196, .266, .157), "full_time": (.362, .155, .368),
    "part_time": (.122, -.065, .354), "couple_kids": (.49, .431, .665), "couple_no_kids": (-.042, .283, -.041),
    "single_parent": (.053, .209, .449), "single": (-.128, .363, -.019), "one_vehicle": (-.093, -.343, -.635),
    "two_vehicles": (-.207, -.379, -.954), "three_plus_vehicles": (-.317, -.217, -1.34),
    "low_income": (.409, .017, .396), "high_income": (.038, .111, .067), "house": (-.047, -.161, .123),
    "apartment": (-.206, -.179, -.05), "owner": (.524, -.581, .436), "owner_mortgage": (.349, -.585, .269),
    "renter": (.379, -.568, .205),
}
BETA = {"hatchback": .49, "small_sedan": .417, "small_suv": .499, "price": -7.98, "setup_cost": -.038,
        "operating_cost": -.46, "recharge_time": -.477, "rebate_upfront": .183, "energy_discount": .309,
        "market_uptake": .344}
INTERACTIONS = [Interaction("design", "price", 2.38), Interaction("environment", "range_km", .023),
                Interaction("safety", "large_suv", .139), Interaction("safety", "large_sedan", .084)]

# small prior coefficients with the expected signs, model units
PRIORS = {
    "hatchback": 0.2, "small_sedan": 0.2, "large_sedan": 0.1, "small_suv": 0.2, "large_suv": 0.1,
    "price": -1.5, "setup_cost": -0.05, "operating_cost": -0.1, "recharge_time": -0.3, "range_km": 0.2,
    "rebate_upfront": 0.2, "energy_discount": 0.3, "market_uptake": 0.3, "fast_charge_km": 0.02,
    "bus_lane": 0.1, "parking_rebate": 0.05, "stamp_duty": 0.5,
}


def main() -> None:
    A = np.array([STRUCTURAL[c] for c in COVARIATES]).T
    ref = ParameterSet(COVARIATES, A, None, BETA, INTERACTIONS, None)
    c = calibrate_ev_constant(ref)
    io.write_params(DATA / "reference_params.json", ref, {
        "ev_constant": c,
        "note": "constant added to the EV utility in cohort simulations; least-squares fit on the "
                "logit scale to the baseline shares of the six cohorts, then frozen",
        "reference_fit": {"log_likelihood": -118279.273, "rho_square": 0.373, "n_respondents": 1176}})
    io.write_cohorts(DATA / "cohorts.json", DEFAULT_COHORTS)
    io.write_design_spec(DATA / "design_full.json", DesignSpec())
    io.write_design_spec(DATA / "design_benchmark.json", benchmark_spec())
    io.write_priors(DATA / "priors.json", PRIORS)
    io.write_spec(DATA / "recovery_spec.json", recovery_spec())
    io.write_params(DATA / "recovery_params.json", recovery_params())
    io.write_settings(DATA / "default_settings.json", EstimationSettings())
    # 50-respondent fixture produced by the generator itself
    os.chdir(DATA)  # keep manifest paths relative
    rc = cli_main(["generate", "design_benchmark.json", "recovery_params.json",
                   "-n", "50", "--seed", "7", "--name", "fixture", "--out-dir", "fixture"])
    assert rc == 0
    # a model small enough for 50 respondents: the design latent with its six
    # indicators; the full recovery spec has no finite optimum at this size
    fixture_spec = ModelSpec(covariates=("constant", "female"),
                             indicators=tuple(i for i in recovery_spec().indicators if i[1] == "design"),
                             attributes=recovery_spec().attributes, interactions=(("design", "price"),))
    io.write_spec(DATA / "fixture" / "spec.json", fixture_spec)
    print(f"ev_constant {c:.12g}; wrote {sorted(p.name for p in DATA.iterdir())}")


if __name__ == "__main__":
    main()
