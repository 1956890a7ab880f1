"""Joint simulated likelihood of choices and Likert indicators for panel data.

For respondent ``n`` with draws ``r = 1..R`` of the latent disturbance,

    L_n = 1/R * sum_r  prod_t P(choice_t | att_nr) * prod_k P(I_k | att_nr)

and all tasks of a respondent share the same draw. Everything is evaluated
in log space: per draw the log terms are summed, then a log-sum-exp over
draws gives ``log L_n``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc

from .errors import ConfigurationError, ICLVError
from .model import (
    LATENTS, N_LEVELS, ChoiceDataset, Individual, ModelSpec, ParameterSet,
)

# utilities are clipped here before exponentiation; exp(700) is finite
_V_CLIP = 700.0


class NumericalError(ICLVError):
    """A likelihood contribution was not finite."""


class DrawScheme(str, Enum):
    QUASI_RANDOM = "quasi_random"
    PSEUDO_RANDOM = "pseudo_random"


@dataclass(frozen=True)
class DrawSettings:
    """How the latent integral is simulated.

    Quasi-random draws are Halton points. Respondent ``id`` receives the
    consecutive block of ``n_draws`` points starting at index
    ``1 + burn_in + id * n_draws`` (index 0 is the origin and is never used),
    so draws depend only on (seed, id, scheme).
    """

    n_draws: int = 500
    scheme: DrawScheme = DrawScheme.QUASI_RANDOM
    seed: int = 0
    scramble: bool = False
    burn_in: int = 10

    def __post_init__(self):
        object.__setattr__(self, "scheme", DrawScheme(self.scheme))
        if self.n_draws < 1:
            raise ConfigurationError("n_draws must be >= 1")
        if self.burn_in < 0:
            raise ConfigurationError("burn_in must be >= 0")

    def to_dict(self) -> dict:
        return {"n_draws": self.n_draws, "scheme": self.scheme.value, "seed": self.seed,
                "scramble": self.scramble, "burn_in": self.burn_in}

    @classmethod
    def from_dict(cls, data) -> "DrawSettings":
        return cls(**{k: data[k] for k in ("n_draws", "scheme", "seed", "scramble", "burn_in") if k in data})


def halton_uniforms(n_points: int, dim: int, start: int = 1, scramble: bool = False,
                    seed: int | None = None) -> np.ndarray:
    """Halton points ``start .. start + n_points - 1`` in ``[0, 1)^dim``."""
    engine = qmc.Halton(d=dim, scramble=scramble, seed=seed)
    if start:
        engine.fast_forward(start)
    return engine.random(n_points)


def generate_draws(settings: DrawSettings, individual: int, dim: int = len(LATENTS)) -> np.ndarray:
    """Standard-normal draws for one respondent, shape ``(n_draws, dim)``."""
    individual = int(individual)
    if individual < 0:
        raise ConfigurationError("draws are keyed by non-negative integer ids")
    R = settings.n_draws
    if settings.scheme is DrawScheme.PSEUDO_RANDOM:
        rng = np.random.default_rng([settings.seed, individual])
        return rng.standard_normal((R, dim))
    start = 1 + settings.burn_in + individual * R
    u = halton_uniforms(R, dim, start, settings.scramble, settings.seed)
    return ndtri(np.clip(u, 1e-15, 1 - 1e-15))


def panel_draws(settings: DrawSettings, ids: Sequence[int], dim: int = len(LATENTS)) -> np.ndarray:
    """Draws for many respondents, shape ``(N, n_draws, dim)``.

    Runs of consecutive ids share one Halton engine call; the result is
    identical to calling :func:`generate_draws` per id.
    """
    ids = [int(i) for i in ids]
    R = settings.n_draws
    out = np.empty((len(ids), R, dim))
    if settings.scheme is DrawScheme.PSEUDO_RANDOM:
        for n, i in enumerate(ids):
            out[n] = generate_draws(settings, i, dim)
        return out
    order = np.argsort(ids, kind="stable")
    pos = 0
    while pos < len(order):
        end = pos + 1
        while end < len(order) and ids[order[end]] == ids[order[end - 1]] + 1:
            end += 1
        first = ids[order[pos]]
        if first < 0:
            raise ConfigurationError("draws are keyed by non-negative integer ids")
        u = halton_uniforms((end - pos) * R, dim, 1 + settings.burn_in + first * R,
                            settings.scramble, settings.seed)
        block = ndtri(np.clip(u, 1e-15, 1 - 1e-15)).reshape(end - pos, R, dim)
        out[order[pos:end]] = block
        pos = end
    return out


# ---------------------------------------------------------------------------
# Compiled data and parameters
# ---------------------------------------------------------------------------

def spec_from_params(params: ParameterSet) -> ModelSpec:
    """The model specification implied by a parameter set."""
    meas = params.measurement
    indicators = () if meas is None else tuple(
        (name, LATENTS[l]) for name, l in zip(meas.names, meas.latent_index))
    return ModelSpec(
        covariates=params.covariates, indicators=indicators,
        attributes=tuple(params.beta),
        interactions=tuple((i.latent, i.attribute) for i in params.interactions),
        estimate_delta_scale=params.delta_scale is not None,
    )


@dataclass
class Panel:
    """Dataset laid out as dense arrays, respondents sorted by id."""

    ids: np.ndarray  # (N,)
    Z: np.ndarray  # (N, p)
    X: np.ndarray  # (N, T, 2, F) attributes entering beta
    XI: np.ndarray  # (N, T, 2, I) attributes entering interactions
    chosen: np.ndarray  # (N, T) in {0, 1, 2}
    Y: np.ndarray  # (N, K) levels 1..5, 0 when missing

    @property
    def n(self) -> int:
        return len(self.ids)


def compile_panel(dataset: ChoiceDataset, spec: ModelSpec) -> Panel:
    people = dataset.sorted_by_id()
    N, T = len(people), dataset.panel_length
    F, I = len(spec.attributes), len(spec.interactions)
    Z = np.zeros((N, len(spec.covariates)))
    X = np.zeros((N, T, 2, F))
    XI = np.zeros((N, T, 2, I))
    chosen = np.zeros((N, T), dtype=np.int64)
    pos = {name: k for k, name in enumerate(dataset.indicator_names)}
    missing = [name for name in spec.indicator_names if name not in pos]
    if missing:
        raise ConfigurationError(f"dataset has no indicator {missing[0]!r}")
    cols = [pos[name] for name in spec.indicator_names]
    Y = np.zeros((N, len(cols)), dtype=np.int64)
    inter_attrs = [a for _, a in spec.interactions]
    for n, person in enumerate(people):
        Z[n] = person.covariates.vector(spec.covariates)
        for t, task in enumerate(person.tasks):
            for j, alt in enumerate((task.alt1, task.alt2)):
                x = alt.features()
                X[n, t, j] = [x[a] for a in spec.attributes]
                XI[n, t, j] = [x[a] for a in inter_attrs]
            chosen[n, t] = task.chosen
        Y[n] = [person.indicators[c] or 0 for c in cols]
    ids = np.array([p.id for p in people], dtype=np.int64)
    return Panel(ids, Z, X, XI, chosen, Y)


@dataclass
class ParamArrays:
    """A :class:`ParameterSet` aligned with a :class:`ModelSpec`."""

    A: np.ndarray  # (3, p)
    delta: np.ndarray  # (3,)
    beta: np.ndarray  # (F,)
    asc: float
    inter: np.ndarray  # (I,)
    gamma: np.ndarray  # (K,)
    tau: np.ndarray  # (K, 4)

    @classmethod
    def build(cls, params: ParameterSet, spec: ModelSpec) -> "ParamArrays":
        try:
            cols = [params.covariates.index(c) for c in spec.covariates]
        except ValueError as exc:
            raise ConfigurationError(f"parameter set lacks covariate: {exc}") from None
        A = params.A[:, cols]
        extra = set(params.beta) - set(spec.attributes)
        if extra:
            raise ConfigurationError(f"coefficient for attribute {sorted(extra)[0]!r} is not in the model spec")
        beta = np.array([params.beta.get(a, 0.0) for a in spec.attributes])
        lookup = {(i.latent, i.attribute): i.coefficient for i in params.interactions}
        inter = np.array([lookup.get(key, 0.0) for key in spec.interactions])
        K = len(spec.indicators)
        if K:
            meas = params.measurement
            if meas is None:
                raise ConfigurationError("model spec has indicators but the parameter set has no measurement block")
            meas.check()
            pos = {name: k for k, name in enumerate(meas.names)}
            try:
                rows = [pos[name] for name in spec.indicator_names]
            except KeyError as exc:
                raise ConfigurationError(f"no measurement parameters for indicator {exc.args[0]!r}") from None
            if np.any(meas.latent_index[rows] != spec.indicator_latents()):
                raise ConfigurationError("indicator-to-latent allocation differs from the model spec")
            gamma, tau = meas.loadings[rows].copy(), meas.thresholds[rows].copy()
        else:
            gamma, tau = np.zeros(0), np.zeros((0, N_LEVELS - 1))
        if params.delta_scale is None:
            if K or spec.interactions:
                raise ConfigurationError("delta_scale is required for likelihood evaluation")
            delta = np.zeros(len(LATENTS))
        else:
            delta = params.delta_scale.copy()
        return cls(A, delta, beta, float(params.asc), inter, gamma, tau)


def _softplus(x):
    out = np.exp(-np.abs(x))
    np.log1p(out, out=out)
    out += np.maximum(x, 0.0)
    return out


@dataclass
class LikelihoodState:
    """Intermediate arrays at one parameter point, reused for cheap perturbations."""

    P: ParamArrays
    att: np.ndarray  # (3, N, R)
    P1: np.ndarray  # (N, T, R) probability of EV 1
    P2: np.ndarray  # (N, T, R) probability of EV 2
    C: np.ndarray  # (N, R) choice log-probability summed over tasks
    m: np.ndarray  # (K, N, R) indicator log-probabilities
    tot: np.ndarray  # (N, R)
    ell: np.ndarray  # (N,) log L_n
    extra: dict = field(default_factory=dict)


class SimulatedLikelihood:
    """Vectorised simulated log likelihood over a compiled panel.

    ``draws`` has shape ``(N, R, 3)`` and is held fixed (common random
    numbers), so the objective is a smooth deterministic function of the
    parameters.
    """

    def __init__(self, panel: Panel, spec: ModelSpec, draws: np.ndarray):
        draws = np.asarray(draws, dtype=float)
        if draws.shape[0] != panel.n or draws.shape[2] != len(LATENTS):
            raise ConfigurationError(f"draws must have shape ({panel.n}, R, {len(LATENTS)})")
        self.panel = panel
        self.spec = spec
        self.D = np.ascontiguousarray(draws.transpose(2, 0, 1))
        self.R = draws.shape[1]
        self.ind_latent = spec.indicator_latents()
        self.inter_latent = np.array([LATENTS.index(l) for l, _ in spec.interactions], dtype=int)
        self.choice_latents = sorted(set(self.inter_latent.tolist()))
        chosen = panel.chosen
        self._alt_idx = np.minimum(chosen, 1)[:, :, None, None]
        self._is_ev = (chosen != 2)[:, :, None]

    @classmethod
    def from_dataset(cls, dataset: ChoiceDataset, spec: ModelSpec, settings: DrawSettings) -> "SimulatedLikelihood":
        panel = compile_panel(dataset, spec)
        return cls(panel, spec, panel_draws(settings, panel.ids))

    # -- building blocks -----------------------------------------------------

    def arrays(self, params: ParameterSet) -> ParamArrays:
        return ParamArrays.build(params, self.spec)

    def latents(self, P: ParamArrays, idx=slice(None)) -> np.ndarray:
        Z = self.panel.Z[idx]
        mean = (Z[:, None, :] * P.A[None, :, :]).sum(-1)  # row-wise sums keep results chunk-invariant
        return mean.T[:, :, None] + P.delta[:, None, None] * self.D[:, idx]

    def interaction_weights(self, P: ParamArrays, idx=slice(None)) -> dict[int, np.ndarray]:
        """Per latent, the utility slope ``sum_i c_i x_i`` with shape ``(n, T, 2)``."""
        XI = self.panel.XI[idx]
        out = {}
        for l in self.choice_latents:
            sel = self.inter_latent == l
            out[l] = (XI[..., sel] * P.inter[sel]).sum(-1)
        return out

    def choice_terms(self, P: ParamArrays, att: np.ndarray, idx=slice(None), probs: bool = False):
        """Summed choice log-probabilities ``(n, R)``; with ``probs`` also the EV probabilities."""
        X = self.panel.X[idx]
        V = ((X * P.beta).sum(-1) + P.asc)[..., None]
        for l, w in self.interaction_weights(P, idx).items():
            V = V + w[..., None] * att[l][:, None, None, :]
        if V.shape[-1] != att.shape[-1]:
            V = np.broadcast_to(V, V.shape[:-1] + (att.shape[-1],))
        V = np.minimum(V, _V_CLIP)
        E = np.exp(V)
        Vc = np.take_along_axis(V, self._alt_idx[idx], axis=2)[:, :, 0, :]
        Vc = np.where(self._is_ev[idx], Vc, 0.0)
        denom = 1.0 + E[:, :, 0] + E[:, :, 1]
        C = (Vc - np.log(denom)).sum(1)
        if not probs:
            return C
        return C, E[:, :, 0] / denom, E[:, :, 1] / denom

    def indicator_term(self, k: int, gamma: float, tau: np.ndarray, att_l: np.ndarray,
                       idx=slice(None)) -> np.ndarray:
        y = self.panel.Y[idx, k]
        ext = np.concatenate(([-np.inf], tau, [np.inf]))
        upper = np.where(y > 0, ext[np.clip(y, 1, N_LEVELS)], np.inf)
        lower = np.where(y > 0, ext[np.clip(y, 1, N_LEVELS) - 1], -np.inf)
        with np.errstate(invalid="ignore"):
            gap = np.log(-np.expm1(-(upper - lower)))
        x = gamma * att_l
        # log[sigma(u) - sigma(l)] = -softplus(-u) - softplus(l) + log(1 - exp(l - u))
        return gap[:, None] - _softplus(x - upper[:, None]) - _softplus(lower[:, None] - x)

    def log_mean_exp(self, tot: np.ndarray) -> np.ndarray:
        mx = tot.max(axis=1)
        return mx + np.log(np.exp(tot - mx[:, None]).mean(axis=1))

    # -- evaluation ------------------------------------------------------------

    def per_person(self, params: ParameterSet | ParamArrays, idx=slice(None)) -> np.ndarray:
        """``log L_n`` for the respondents selected by ``idx``."""
        P = params if isinstance(params, ParamArrays) else self.arrays(params)
        att = self.latents(P, idx)
        tot = self.choice_terms(P, att, idx).copy()
        for k in range(len(P.gamma)):
            tot += self.indicator_term(k, P.gamma[k], P.tau[k], att[self.ind_latent[k]], idx)
        return self.log_mean_exp(tot)

    def state(self, params: ParameterSet | ParamArrays) -> LikelihoodState:
        P = params if isinstance(params, ParamArrays) else self.arrays(params)
        att = self.latents(P)
        C, P1, P2 = self.choice_terms(P, att, probs=True)
        K = len(P.gamma)
        m = np.empty((K,) + C.shape)
        tot = C.copy()
        for k in range(K):
            m[k] = self.indicator_term(k, P.gamma[k], P.tau[k], att[self.ind_latent[k]])
            tot += m[k]
        return LikelihoodState(P, att, np.ascontiguousarray(P1), np.ascontiguousarray(P2),
                               C, m, tot, self.log_mean_exp(tot))

    # -- perturbations relative to a cached state ----------------------------
    # Each returns the per-respondent changes log L_n(new) - log L_n(state), shape (N,).

    def choice_change(self, S: LikelihoodState, c: np.ndarray, g=None):
        """Change of the choice block when EV utilities move by ``c[n,t,j] * g[n,(r)]``.

        ``g`` is None (a draw-independent shift ``c``), shape ``(N,)`` or
        ``(N, R)``. Only (respondent, task) pairs with a nonzero ``c`` are
        touched. Returns ``(rows, dC)`` with ``dC`` of shape ``(len(rows), R)``.
        """
        N, T = self.panel.chosen.shape
        R = self.R
        active = np.flatnonzero(np.any(c != 0, axis=2))
        if active.size == 0:
            return np.zeros(0, dtype=np.int64), np.zeros((0, R))
        n_idx = active // T
        c_sel = c.reshape(N * T, 2)[active]
        if g is None:
            dV = c_sel[:, :, None]
        elif np.ndim(g) == 1:
            dV = (c_sel * g[n_idx, None])[:, :, None]
        else:
            dV = c_sel[:, :, None] * g[n_idx][:, None, :]
        a = np.expm1(dV)
        if active.size == N * T:
            P1, P2 = S.P1.reshape(N * T, R), S.P2.reshape(N * T, R)
        else:
            P1, P2 = S.P1.reshape(N * T, R)[active], S.P2.reshape(N * T, R)[active]
        work = np.multiply(P1, a[:, 0])
        tmp = np.multiply(P2, a[:, 1])
        work += tmp
        np.log1p(work, out=work)
        # utility change of the chosen alternative (zero for the opt-out)
        chosen = self.panel.chosen.reshape(-1)[active]
        pick = np.minimum(chosen, 1)
        dVc = dV[np.arange(active.size), pick] * (chosen != 2)[:, None]
        np.subtract(dVc, work, out=work)
        if active.size == N * T:
            return np.arange(N), work.reshape(N, T, R).sum(axis=1)
        starts = np.flatnonzero(np.r_[True, n_idx[1:] != n_idx[:-1]])
        return n_idx[starts], np.add.reduceat(work, starts, axis=0)

    def _finish(self, S: LikelihoodState, rows, dtot: np.ndarray) -> np.ndarray:
        out = np.zeros(self.panel.n)
        if isinstance(rows, np.ndarray) and rows.size == 0:
            return out
        out[rows] = self.log_mean_exp(S.tot[rows] + dtot) - S.ell[rows]
        return out

    def delta_indicator(self, S: LikelihoodState, k: int, gamma: float, tau: np.ndarray) -> np.ndarray:
        m_new = self.indicator_term(k, gamma, tau, S.att[self.ind_latent[k]])
        m_new -= S.m[k]
        return self._finish(S, slice(None), m_new)

    def delta_beta(self, S: LikelihoodState, f: int, d: float) -> np.ndarray:
        rows, dC = self.choice_change(S, d * self.panel.X[..., f])
        return self._finish(S, rows, dC)

    def delta_asc(self, S: LikelihoodState, d: float) -> np.ndarray:
        rows, dC = self.choice_change(S, np.full(self.panel.chosen.shape + (2,), d))
        return self._finish(S, rows, dC)

    def _weights(self, S: LikelihoodState, l: int) -> np.ndarray:
        w = S.extra.get(("w", l))
        if w is None:
            w = S.extra[("w", l)] = self.interaction_weights(S.P)[l]
        return w

    def delta_structural(self, S: LikelihoodState, l: int, j: int, d: float) -> np.ndarray:
        zj = self.panel.Z[:, j]
        rows = np.flatnonzero(zj != 0)
        if rows.size == 0:
            return np.zeros(self.panel.n)
        shift = d * zj
        dtot = np.zeros((self.panel.n, self.R))
        if l in self.choice_latents:
            w = self._weights(S, l)
            c = w * (zj != 0)[:, None, None]
            crow, dC = self.choice_change(S, c, shift)
            dtot[crow] += dC
        att_l = S.att[l, rows] + shift[rows, None]
        for k in np.flatnonzero(self.ind_latent == l):
            dtot[rows] += self.indicator_term(k, S.P.gamma[k], S.P.tau[k], att_l, rows) - S.m[k, rows]
        return self._finish(S, rows, dtot[rows])

    def delta_interaction(self, S: LikelihoodState, i: int, d: float) -> np.ndarray:
        l = self.inter_latent[i]
        rows, dC = self.choice_change(S, d * self.panel.XI[..., i], S.att[l])
        return self._finish(S, rows, dC)

    def delta_scale(self, S: LikelihoodState, l: int, new_scale: float) -> np.ndarray:
        dd = new_scale - S.P.delta[l]
        N = self.panel.n
        dtot = np.zeros((N, self.R))
        g = dd * self.D[l]
        if l in self.choice_latents:
            crow, dC = self.choice_change(S, self._weights(S, l), g)
            dtot[crow] += dC
        att_l = S.att[l] + g
        for k in np.flatnonzero(self.ind_latent == l):
            dtot += self.indicator_term(k, S.P.gamma[k], S.P.tau[k], att_l) - S.m[k]
        return self._finish(S, slice(None), dtot)

    def delta_general(self, S: LikelihoodState, P_new: ParamArrays) -> np.ndarray:
        """Full recomputation at ``P_new``; the reference path for the shortcuts above."""
        return self.per_person(P_new) - S.ell


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------

@dataclass
class LogLikelihood:
    total: float
    per_individual: np.ndarray
    ids: np.ndarray


def _single_person_dataset(person: Individual, indicator_names) -> ChoiceDataset:
    return ChoiceDataset([person], panel_length=len(person.tasks), indicator_names=indicator_names)


def individual_log_likelihood(params: ParameterSet, person: Individual, draws: np.ndarray,
                              spec: ModelSpec | None = None,
                              indicator_names: Sequence[str] | None = None) -> float:
    """``log L_n`` for one respondent with explicitly supplied ``(R, 3)`` draws."""
    spec = spec or spec_from_params(params)
    names = tuple(indicator_names) if indicator_names is not None else spec.indicator_names
    if not person.tasks:
        raise ConfigurationError("respondent has no tasks")
    draws = np.atleast_2d(np.asarray(draws, dtype=float))
    if draws.shape[0] == 0:
        raise ConfigurationError("at least one draw is required")
    engine = SimulatedLikelihood(compile_panel(_single_person_dataset(person, names), spec), spec, draws[None])
    return float(engine.per_person(params)[0])


def individual_likelihood(params: ParameterSet, person: Individual, draws: np.ndarray,
                          spec: ModelSpec | None = None,
                          indicator_names: Sequence[str] | None = None) -> float:
    return math.exp(individual_log_likelihood(params, person, draws, spec, indicator_names))


def log_likelihood(params: ParameterSet, dataset: ChoiceDataset, settings: DrawSettings | None = None,
                   spec: ModelSpec | None = None, threads: int = 1, chunk_size: int = 256,
                   engine: SimulatedLikelihood | None = None) -> LogLikelihood:
    """Total and per-respondent simulated log likelihood.

    Respondents are evaluated in chunks, optionally on a thread pool; the
    total is an exactly rounded sum in id order, so it does not depend on
    ``threads`` or ``chunk_size``.
    """
    if len(dataset) == 0:
        raise ConfigurationError("dataset is empty")
    spec = spec or spec_from_params(params)
    if engine is None:
        engine = SimulatedLikelihood.from_dataset(dataset, spec, settings or DrawSettings())
    P = engine.arrays(params)
    N = engine.panel.n
    chunks = [slice(s, min(s + chunk_size, N)) for s in range(0, N, chunk_size)]
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda sl: engine.per_person(P, sl), chunks))
    else:
        parts = [engine.per_person(P, sl) for sl in chunks]
    per = np.concatenate(parts)
    bad = np.nonzero(~np.isfinite(per))[0]
    if bad.size:
        raise NumericalError(f"non-finite log likelihood for individual {int(engine.panel.ids[bad[0]])}")
    return LogLikelihood(math.fsum(per.tolist()), per, engine.panel.ids.copy())


def null_log_likelihood(dataset: ChoiceDataset) -> float:
    """Equal shares over the three options and uniform 1/5 indicator probabilities."""
    terms = []
    for person in dataset.individuals:
        answered = sum(level is not None for level in person.indicators)
        terms.append(len(person.tasks) * math.log(1 / 3) + answered * math.log(1 / N_LEVELS))
    return math.fsum(terms)


def rho_square(ll: float, ll_null: float) -> float:
    return 1.0 - ll / ll_null
