"""Simulated maximum likelihood estimation of the joint model.

The free parameters are packed into a flat vector by :class:`ParameterLayout`.
Disturbance scales live on the log scale and thresholds are written as a
first cut plus exponentiated gaps, so every point of the flat space is a
valid parameter set. The optimiser is BFGS with a backtracking (Armijo)
line search on central-difference gradients; standard errors come from the
inverse of the negative numerical Hessian, mapped back to natural units with
the delta method.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import logit

from .errors import ConfigurationError, ICLVError, IdentificationError, ParameterError
from .likelihood import (
    DrawSettings, NumericalError, ParamArrays, SimulatedLikelihood, null_log_likelihood, rho_square,
)
from .model import (
    LATENTS, N_LEVELS, ChoiceDataset, Interaction, MeasurementParams, ModelSpec, ParameterSet,
)

log = logging.getLogger(__name__)

# logistic quintiles: the default first guess for every indicator's cut points
QUINTILE_THRESHOLDS = logit(np.arange(1, N_LEVELS) / N_LEVELS)
STARTING_VALUES = ("zeros_with_unit_scales", "user_supplied")
INITIAL_HESSIANS = ("bhhh", "identity")


# ---------------------------------------------------------------------------
# Free-parameter layout
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FreeParameter:
    name: str  # natural-scale name, e.g. "threshold[I3,2]"
    kind: str  # structural | scale | beta | interaction | loading | threshold
    index: tuple  # position inside its block
    transform: str = "identity"  # identity | log | gap


def default_start(spec: ModelSpec) -> ParameterSet:
    """Zeros for coefficients, ones for loadings and scales, quintile thresholds."""
    p = len(spec.covariates)
    meas = None
    if spec.indicators:
        K = len(spec.indicators)
        meas = MeasurementParams(spec.indicator_names, spec.indicator_latents(), np.ones(K),
                                 np.tile(QUINTILE_THRESHOLDS, (K, 1)))
    return ParameterSet(
        covariates=spec.covariates, A=np.zeros((len(LATENTS), p)),
        delta_scale=np.ones(len(LATENTS)), beta={a: 0.0 for a in spec.attributes},
        interactions=[Interaction(l, a, 0.0) for l, a in spec.interactions], measurement=meas,
    )


def used_latents(spec: ModelSpec) -> set[str]:
    """Latents that enter the likelihood through an indicator or an interaction."""
    return {l for l, _ in spec.interactions} | {l for _, l in spec.indicators}


def _check_identification(spec: ModelSpec) -> None:
    counts = {l: 0 for l in LATENTS}
    for _, latent in spec.indicators:
        counts[latent] += 1
    used = used_latents(spec)
    for latent in LATENTS:
        if latent in used and counts[latent] < 2:
            raise IdentificationError(
                f"latent {latent!r} has {counts[latent]} indicator(s); at least 2 are required")
    if spec.covariates and not used:
        raise IdentificationError("structural coefficients are not identified: no latent enters the likelihood")


def _thresholds_anchored(spec: ModelSpec) -> bool:
    # with a constant in the structural equation the latent location is free,
    # so the reference indicator's first cut point is pinned
    return spec.anchor_thresholds and "constant" in spec.covariates


class ParameterLayout:
    """Bijection between a flat vector of free parameters and a :class:`ParameterSet`.

    Fixed quantities (one unit loading per latent, the anchored cut point,
    disturbance scales when not estimated, the alternative-specific constant)
    are taken from ``template``.
    """

    def __init__(self, spec: ModelSpec, template: ParameterSet | None = None):
        _check_identification(spec)
        self.spec = spec
        template = template if template is not None else default_start(spec)
        ParamArrays.build(template, spec)  # validates names and shapes
        self.template = template
        self.entries: list[FreeParameter] = []
        add = self.entries.append
        # latents outside the likelihood keep their template values
        used = [(l, latent) for l, latent in enumerate(LATENTS) if latent in used_latents(spec)]
        for l, latent in used:
            for j, cov in enumerate(spec.covariates):
                add(FreeParameter(f"A[{latent},{cov}]", "structural", (l, j)))
        if spec.estimate_delta_scale:
            for l, latent in used:
                add(FreeParameter(f"delta_scale[{latent}]", "scale", (l,), "log"))
        for f, attr in enumerate(spec.attributes):
            add(FreeParameter(f"beta[{attr}]", "beta", (f,)))
        for i, (latent, attr) in enumerate(spec.interactions):
            add(FreeParameter(f"interaction[{latent},{attr}]", "interaction", (i,)))
        refs = set(spec.reference_indicators().values())
        anchored = _thresholds_anchored(spec)
        for k, name in enumerate(spec.indicator_names):
            if k not in refs:
                add(FreeParameter(f"loading[{name}]", "loading", (k,)))
            if not (anchored and k in refs):
                add(FreeParameter(f"threshold[{name},1]", "threshold", (k, 0)))
            for j in range(1, N_LEVELS - 1):
                add(FreeParameter(f"threshold[{name},{j + 1}]", "threshold", (k, j), "gap"))
        self.base = ParamArrays.build(template, spec)
        if spec.indicators:
            self.base.tau = np.asarray(self.base.tau, dtype=float)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def names(self) -> list[str]:
        return [e.name for e in self.entries]

    # -- packing ---------------------------------------------------------------

    def to_vector(self, params: ParameterSet) -> np.ndarray:
        P = ParamArrays.build(params, self.spec)
        out = np.empty(len(self.entries))
        for n, e in enumerate(self.entries):
            if e.kind == "structural":
                out[n] = P.A[e.index]
            elif e.kind == "scale":
                if P.delta[e.index[0]] <= 0:
                    raise ParameterError("estimated disturbance scales must be > 0")
                out[n] = math.log(P.delta[e.index[0]])
            elif e.kind == "beta":
                out[n] = P.beta[e.index[0]]
            elif e.kind == "interaction":
                out[n] = P.inter[e.index[0]]
            elif e.kind == "loading":
                out[n] = P.gamma[e.index[0]]
            else:
                k, j = e.index
                out[n] = P.tau[k, 0] if j == 0 else math.log(P.tau[k, j] - P.tau[k, j - 1])
        return out

    def arrays(self, theta: np.ndarray) -> ParamArrays:
        b = self.base
        P = ParamArrays(b.A.copy(), b.delta.copy(), b.beta.copy(), b.asc, b.inter.copy(),
                        b.gamma.copy(), b.tau.copy())
        gaps = np.diff(b.tau, axis=1) if len(b.tau) else b.tau
        gaps = gaps.copy()
        for value, e in zip(theta, self.entries):
            if e.kind == "structural":
                P.A[e.index] = value
            elif e.kind == "scale":
                P.delta[e.index[0]] = math.exp(value)
            elif e.kind == "beta":
                P.beta[e.index[0]] = value
            elif e.kind == "interaction":
                P.inter[e.index[0]] = value
            elif e.kind == "loading":
                P.gamma[e.index[0]] = value
            else:
                k, j = e.index
                if j == 0:
                    P.tau[k, 0] = value
                else:
                    gaps[k, j - 1] = math.exp(value)
        if len(P.tau):
            P.tau[:, 1:] = P.tau[:, :1] + np.cumsum(gaps, axis=1)
        return P

    def to_params(self, theta: np.ndarray) -> ParameterSet:
        P = self.arrays(np.asarray(theta, dtype=float))
        spec, t = self.spec, self.template
        meas = None
        if spec.indicators:
            meas = MeasurementParams(spec.indicator_names, spec.indicator_latents(), P.gamma, P.tau)
        return ParameterSet(
            covariates=spec.covariates, A=P.A,
            delta_scale=None if t.delta_scale is None else P.delta,
            beta=dict(zip(spec.attributes, P.beta.tolist())),
            interactions=[Interaction(l, a, float(c)) for (l, a), c in zip(spec.interactions, P.inter)],
            measurement=meas, asc=P.asc,
        )

    def natural(self, theta: np.ndarray) -> np.ndarray:
        """Free parameters on their natural scale (scales and cut points un-transformed)."""
        P = self.arrays(np.asarray(theta, dtype=float))
        out = np.empty(len(self.entries))
        for n, e in enumerate(self.entries):
            if e.kind == "structural":
                out[n] = P.A[e.index]
            elif e.kind == "scale":
                out[n] = P.delta[e.index[0]]
            elif e.kind == "beta":
                out[n] = P.beta[e.index[0]]
            elif e.kind == "interaction":
                out[n] = P.inter[e.index[0]]
            elif e.kind == "loading":
                out[n] = P.gamma[e.index[0]]
            else:
                out[n] = P.tau[e.index]
        return out

    def natural_jacobian(self, theta: np.ndarray) -> np.ndarray:
        """``d natural / d theta``: block structure is known, so it is filled in directly."""
        P = self.arrays(theta)
        n = len(self.entries)
        J = np.zeros((n, n))
        pos = {(e.kind, e.index): i for i, e in enumerate(self.entries)}
        for i, e in enumerate(self.entries):
            if e.kind == "scale":
                J[i, i] = P.delta[e.index[0]]
            elif e.kind == "threshold":
                k, j = e.index
                # tau_j = tau_1 + sum_{i<=j} exp(g_i)
                first = pos.get(("threshold", (k, 0)))
                if first is not None:
                    J[i, first] = 1.0
                for m in range(1, j + 1):
                    J[i, pos[("threshold", (k, m))]] = P.tau[k, m] - P.tau[k, m - 1]
            else:
                J[i, i] = 1.0
        return J


def free_parameter_map(spec: ModelSpec) -> list[str]:
    """Ordered names of the free parameters of ``spec``."""
    return ParameterLayout(spec).names


# ---------------------------------------------------------------------------
# Gradients
# ---------------------------------------------------------------------------

def _steps(point: np.ndarray, rel_step: float) -> np.ndarray:
    return rel_step * np.maximum(1.0, np.abs(point))


def numerical_gradient(objective: Callable[[np.ndarray], float], point, rel_step: float = 1e-5,
                       names: Sequence[str] | None = None) -> np.ndarray:
    """Central-difference gradient with step ``rel_step * max(1, |x_i|)``."""
    x = np.asarray(point, dtype=float)
    f0 = objective(x)
    if not np.isfinite(f0):
        raise NumericalError("objective is not finite at the evaluation point")
    h = _steps(x, rel_step)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h[i]
        fp, fm = objective(x + e), objective(x - e)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            label = names[i] if names is not None else str(i)
            raise NumericalError(f"non-finite objective when perturbing coordinate {label}")
        g[i] = (fp - fm) / (2 * h[i])
    return g


class LikelihoodObjective:
    """Simulated log likelihood as a function of the flat free-parameter vector."""

    def __init__(self, engine: SimulatedLikelihood, layout: ParameterLayout, threads: int = 1):
        self.engine = engine
        self.layout = layout
        self.threads = max(1, int(threads))
        self.n_evaluations = 0

    def __call__(self, theta) -> float:
        self.n_evaluations += 1
        try:
            P = self.layout.arrays(np.asarray(theta, dtype=float))
        except OverflowError:
            return -math.inf
        per = self.engine.per_person(P)
        return math.fsum(per.tolist())

    def _delta(self, S, entry: FreeParameter, P: ParamArrays, d: float) -> np.ndarray:
        eng = self.engine
        if entry.kind == "structural":
            l, j = entry.index
            return eng.delta_structural(S, l, j, d)
        if entry.kind == "beta":
            return eng.delta_beta(S, entry.index[0], d)
        if entry.kind in ("loading", "threshold"):
            k = entry.index[0]
            return eng.delta_indicator(S, k, P.gamma[k], P.tau[k])
        if entry.kind == "scale":
            l = entry.index[0]
            return eng.delta_scale(S, l, P.delta[l])
        return eng.delta_interaction(S, entry.index[0], d)

    def gradient(self, theta, rel_step: float = 1e-5, scores: bool = False):
        """Central differences, each evaluated as a change relative to cached state.

        Only the pieces of the likelihood that a coordinate touches are
        recomputed; the result equals :func:`numerical_gradient` applied to
        ``self`` up to rounding. With ``scores`` also returns the per-respondent
        score matrix ``(N, K)`` from the same differences.
        """
        theta = np.asarray(theta, dtype=float)
        S = self.engine.state(self.layout.arrays(theta))
        h = _steps(theta, rel_step)

        def one(i):
            entry = self.layout.entries[i]
            out = []
            for sign in (1.0, -1.0):
                t = theta.copy()
                t[i] += sign * h[i]
                P = self.layout.arrays(t)
                out.append(self._delta(S, entry, P, sign * h[i]))
            up, down = float(np.sum(out[0])), float(np.sum(out[1]))
            if not (math.isfinite(up) and math.isfinite(down)):
                raise NumericalError(f"non-finite objective when perturbing coordinate {entry.name}")
            return (up - down) / (2 * h[i]), (out[0] - out[1]) / (2 * h[i])

        idx = range(theta.size)
        if self.threads > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                parts = list(pool.map(one, idx))
        else:
            parts = [one(i) for i in idx]
        g = np.array([p[0] for p in parts])
        if scores:
            return g, np.column_stack([p[1] for p in parts]) if parts else np.zeros((self.engine.panel.n, 0))
        return g

    def hessian(self, theta, rel_step: float = 1e-4, grad_step: float = 1e-5) -> np.ndarray:
        """Forward differences of the gradient, symmetrised."""
        theta = np.asarray(theta, dtype=float)
        g0 = self.gradient(theta, grad_step)
        h = _steps(theta, rel_step)
        H = np.empty((theta.size, theta.size))
        for i in range(theta.size):
            t = theta.copy()
            t[i] += h[i]
            H[:, i] = (self.gradient(t, grad_step) - g0) / h[i]
        return 0.5 * (H + H.T)


# ---------------------------------------------------------------------------
# Optimiser
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EstimationSettings:
    max_iterations: int = 500
    gradient_step: float = 1e-5
    convergence_tol: float = 1e-4
    draw_settings: DrawSettings = field(default_factory=DrawSettings)
    starting_values: str = "zeros_with_unit_scales"
    threads: int = 1
    hessian_step: float = 1e-4
    max_step: float = 1.0  # cap on the first BFGS step and after resets
    std_errors: bool = True
    initial_hessian: str = "bhhh"  # or "identity"

    def __post_init__(self):
        if self.max_iterations < 0:
            raise ConfigurationError("max_iterations must be >= 0")
        for name in ("gradient_step", "convergence_tol", "hessian_step", "max_step"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be > 0")
        if self.starting_values not in STARTING_VALUES:
            raise ConfigurationError(f"starting_values must be one of {STARTING_VALUES}")
        if self.threads < 1:
            raise ConfigurationError("threads must be >= 1")
        if self.initial_hessian not in INITIAL_HESSIANS:
            raise ConfigurationError(f"initial_hessian must be one of {INITIAL_HESSIANS}")

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in (
            "max_iterations", "gradient_step", "convergence_tol", "starting_values", "threads",
            "hessian_step", "max_step", "std_errors", "initial_hessian")}
        out["draw_settings"] = self.draw_settings.to_dict()
        return out

    @classmethod
    def from_dict(cls, data) -> "EstimationSettings":
        kwargs = {k: v for k, v in data.items() if k in cls.__dataclass_fields__ and k != "draw_settings"}
        if "draw_settings" in data:
            kwargs["draw_settings"] = DrawSettings.from_dict(data["draw_settings"])
        return cls(**kwargs)


@dataclass
class IterationInfo:
    iteration: int
    theta: np.ndarray
    params: ParameterSet
    log_likelihood: float
    gradient_max: float


@dataclass
class EstimationResult:
    params: ParameterSet
    spec: ModelSpec
    free_names: list[str]
    estimates: np.ndarray  # natural scale, aligned with free_names
    std_errors: np.ndarray  # NaN where unavailable
    final_ll: float
    null_ll: float
    iterations: int
    converged: bool
    message: str
    settings: EstimationSettings
    covariance: np.ndarray | None = None
    n_individuals: int = 0
    n_tasks: int = 0
    elapsed_seconds: float = 0.0
    ll_history: list[float] = field(default_factory=list)

    @property
    def rho_square(self) -> float:
        return rho_square(self.final_ll, self.null_ll)

    @property
    def t_stats(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.std_errors > 0, self.estimates / self.std_errors, np.nan)

    def std_error(self, name: str) -> float:
        return float(self.std_errors[self.free_names.index(name)])

    def table(self) -> dict[str, dict[str, float]]:
        """Name -> {estimate, std_error, t_stat} for every free parameter."""
        t = self.t_stats
        return {n: {"estimate": float(e), "std_error": float(s), "t_stat": float(ti)}
                for n, e, s, ti in zip(self.free_names, self.estimates, self.std_errors, t)}

    def to_dict(self) -> dict:
        from .io import params_to_dict  # io depends on estimation only lazily

        rows = self.table()

        def row(name, value):
            r = rows.get(name)
            if r is None:
                return {"estimate": float(value), "std_error": None, "t_stat": None, "fixed": True}
            return {k: (None if not np.isfinite(v) else v) for k, v in r.items()}

        p = self.params
        structural = {
            latent: {cov: row(f"A[{latent},{cov}]", p.A[l, j]) for j, cov in enumerate(p.covariates)}
            for l, latent in enumerate(LATENTS)}
        choice = {a: row(f"beta[{a}]", v) for a, v in p.beta.items()}
        choice.update({f"{i.latent} x {i.attribute}": row(f"interaction[{i.latent},{i.attribute}]", i.coefficient)
                       for i in p.interactions})
        measurement = {}
        if p.measurement is not None:
            m = p.measurement
            for k, name in enumerate(m.names):
                measurement[name] = {
                    "latent": LATENTS[m.latent_index[k]],
                    "loading": row(f"loading[{name}]", m.loadings[k]),
                    "thresholds": [row(f"threshold[{name},{j + 1}]", m.thresholds[k, j])
                                   for j in range(N_LEVELS - 1)],
                }
        scales = None if p.delta_scale is None else {
            latent: row(f"delta_scale[{latent}]", p.delta_scale[l]) for l, latent in enumerate(LATENTS)}
        return {
            "schema_version": 1,
            "kind": "estimation_result",
            "converged": self.converged,
            "message": self.message,
            "iterations": self.iterations,
            "fit": {"final_ll": self.final_ll, "null_ll": self.null_ll, "rho_square": self.rho_square,
                    "n_individuals": self.n_individuals, "n_tasks": self.n_tasks,
                    "n_free_parameters": len(self.free_names)},
            "structural": structural,
            "delta_scale": scales,
            "choice": choice,
            "measurement": measurement or None,
            "std_errors_available": bool(np.all(np.isfinite(self.std_errors))),
            "params": params_to_dict(self.params),
            "spec": self.spec.to_dict(),
            "settings": self.settings.to_dict(),
            "elapsed_seconds": self.elapsed_seconds,
        }


def _bfgs(objective: LikelihoodObjective, theta0: np.ndarray, settings: EstimationSettings,
          callback: Callable[[IterationInfo], None] | None):
    """Maximise ``objective`` (minimising its negative) from ``theta0``."""
    x = theta0.copy()
    f = -objective(x)
    if not np.isfinite(f):
        raise NumericalError("log likelihood is not finite at the starting values")
    bhhh = settings.initial_hessian == "bhhh"
    n = x.size

    def grad(point):
        if not bhhh:
            return -objective.gradient(point, settings.gradient_step), None
        g, sc = objective.gradient(point, settings.gradient_step, scores=True)
        return -g, sc

    def initial(sc):
        """Inverse BHHH matrix from per-respondent scores, else None."""
        if sc is None:
            return None
        B = sc.T @ sc
        try:
            L = np.linalg.cholesky(B)
        except np.linalg.LinAlgError:
            return None
        Linv = np.linalg.solve(L, np.eye(n))
        return Linv.T @ Linv

    def reset(sc):
        """Fresh inverse-Hessian approximation; the flag marks a plain identity."""
        H0 = initial(sc)
        return (np.eye(n), True) if H0 is None else (H0, False)

    g, sc = grad(x)
    Hinv, plain = reset(sc)
    fresh = True
    history = [-f]
    converged = False
    message = "maximum iterations reached"
    it = 0

    def report():
        if callback is not None:
            callback(IterationInfo(it, x.copy(), objective.layout.to_params(x), -f, float(np.max(np.abs(g), initial=0))))

    report()
    while True:
        if np.max(np.abs(g), initial=0.0) < settings.convergence_tol:
            converged, message = True, "gradient max-norm below tolerance"
            break
        if it >= settings.max_iterations:
            break
        p = -Hinv @ g
        slope = float(g @ p)
        if not slope < 0:
            Hinv, plain, fresh = np.eye(n), True, True
            p, slope = -g, -float(g @ g)
        if plain:
            norm = np.linalg.norm(p)
            if norm > settings.max_step:
                p *= settings.max_step / norm
                slope = float(g @ p)
        step, accepted = 1.0, False
        for _ in range(60):
            trial = x + step * p
            try:
                ft = -objective(trial)
            except (ParameterError, FloatingPointError):
                ft = math.inf
            if np.isfinite(ft) and ft <= f + 1e-4 * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            if not fresh:
                (Hinv, plain), fresh = reset(sc), True
                continue
            message = "line search failed to improve the log likelihood"
            break
        gt, sct = grad(trial)
        s, y = trial - x, gt - g
        sy = float(s @ y)
        if sy > 1e-10:
            if plain:
                Hinv = np.eye(n) * (sy / float(y @ y))
            rho = 1.0 / sy
            Hy = Hinv @ y
            Hinv = Hinv + ((sy + y @ Hy) * rho * rho) * np.outer(s, s) - rho * (np.outer(Hy, s) + np.outer(s, Hy))
            plain = fresh = False
        x, f, g, sc = trial, ft, gt, sct
        it += 1
        history.append(-f)
        log.debug("iteration %d  LL %.6f  max|g| %.3g", it, -f, np.max(np.abs(g)))
        report()
    return x, -f, g, it, converged, message, history


def standard_errors(objective: LikelihoodObjective, theta: np.ndarray, settings: EstimationSettings):
    """Delta-method standard errors of the natural-scale free parameters.

    Returns ``(se, covariance, message)``; ``se`` is all-NaN when the negative
    Hessian is not positive definite or is numerically singular.
    """
    H = objective.hessian(theta, settings.hessian_step, settings.gradient_step)
    info = -H
    n = theta.size
    nan = np.full(n, np.nan)
    eig = np.linalg.eigvalsh(info)
    if not np.all(np.isfinite(eig)) or eig.min() <= 0 or eig.min() < 1e-12 * eig.max():
        return nan, None, "Hessian is singular or not negative definite; standard errors unavailable"
    cov_theta = np.linalg.inv(info)
    J = objective.layout.natural_jacobian(theta)
    cov = J @ cov_theta @ J.T
    cov = 0.5 * (cov + cov.T)
    return np.sqrt(np.diag(cov)), cov, ""


def estimate(dataset: ChoiceDataset, spec: ModelSpec, settings: EstimationSettings | None = None,
             start: ParameterSet | None = None,
             callback: Callable[[IterationInfo], None] | None = None,
             engine: SimulatedLikelihood | None = None) -> EstimationResult:
    """Maximum simulated likelihood estimates of every free parameter of ``spec``."""
    settings = settings or EstimationSettings()
    if len(dataset) == 0:
        raise ConfigurationError("dataset is empty")
    if settings.starting_values == "user_supplied" and start is None:
        raise ConfigurationError("starting_values is 'user_supplied' but no starting parameters were given")
    t0 = time.perf_counter()
    layout = ParameterLayout(spec, start)
    if engine is None:
        engine = SimulatedLikelihood.from_dataset(dataset, spec, settings.draw_settings)
    objective = LikelihoodObjective(engine, layout, settings.threads)
    theta0 = layout.to_vector(layout.template)
    x, ll, g, iters, converged, message, history = _bfgs(objective, theta0, settings, callback)
    se = np.full(x.size, np.nan)
    cov = None
    if settings.std_errors and converged:
        try:
            se, cov, note = standard_errors(objective, x, settings)
        except ICLVError as exc:
            note = f"standard errors unavailable: {exc}"
        if note:
            message = f"{message}; {note}"
    elif settings.std_errors:
        message = f"{message}; standard errors not computed"
    return EstimationResult(
        params=layout.to_params(x), spec=spec, free_names=layout.names, estimates=layout.natural(x),
        std_errors=se, final_ll=ll, null_ll=null_log_likelihood(dataset), iterations=iters,
        converged=converged, message=message, settings=settings, covariance=cov,
        n_individuals=len(dataset), n_tasks=len(dataset) * dataset.panel_length,
        elapsed_seconds=time.perf_counter() - t0, ll_history=history,
    )
