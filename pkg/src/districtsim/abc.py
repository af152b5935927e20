"""Likelihood-free calibration of model parameters.

Two samplers share one evaluation protocol: a candidate parameter vector is
simulated ``replicas_per_candidate`` times, the summaries are averaged, and
the candidate is scored by its distance to the observed summary.

Seed protocol, for a base ``seed``:

* prior draws come from ``default_rng([seed, 0])``
* replica ``r`` of the ``j``-th evaluated candidate uses ``[seed, 1, j, r]``
* Gaussian perturbations come from ``default_rng([seed, 2])``

so the first ``n`` prior candidates of :func:`abc_reject` and of
:func:`abc_explore_exploit` are the same draws, scored identically.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .core import ElectorateSpec
from .errors import ConfigError, NoAcceptanceWarning, ValidationError
from .models import ModelParams, default_params, get_model, set_values
from .stats import SummaryStats, distance, mean_summary, summarize


@dataclass(frozen=True)
class ParamPrior:
    name: str
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValidationError(f"prior for {self.name}: need lo < hi, got [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class PriorSpec:
    """Independent uniform priors over named parameters."""

    params: tuple[ParamPrior, ...]

    def __post_init__(self):
        names = [p.name for p in self.params]
        if not names:
            raise ValidationError("prior covers no parameters")
        dupes = {n for n in names if names.count(n) > 1}
        if dupes:
            raise ValidationError(f"parameters listed twice in prior: {', '.join(sorted(dupes))}")

    @classmethod
    def from_dict(cls, d: dict) -> PriorSpec:
        """``{"gamma": [0, 1]}`` or ``{"parameters": [{"name":.., "lo":.., "hi":..}]}``."""
        if "parameters" in d:
            unknown = set(d) - {"parameters"}
            if unknown:
                raise ConfigError(f"unknown prior key(s): {', '.join(sorted(unknown))}")
            items = []
            for p in d["parameters"]:
                extra = set(p) - {"name", "lo", "hi"}
                if extra:
                    raise ConfigError(f"unknown prior field(s): {', '.join(sorted(extra))}")
                items.append(ParamPrior(p["name"], float(p["lo"]), float(p["hi"])))
            return cls(tuple(items))
        return cls(tuple(ParamPrior(k, float(v[0]), float(v[1])) for k, v in d.items()))

    def to_dict(self) -> dict:
        return {"parameters": [{"name": p.name, "lo": p.lo, "hi": p.hi} for p in self.params]}

    @property
    def names(self) -> list[str]:
        return [p.name for p in self.params]

    @property
    def lo(self) -> np.ndarray:
        return np.array([p.lo for p in self.params])

    @property
    def hi(self) -> np.ndarray:
        return np.array([p.hi for p in self.params])

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.lo, self.hi)

    def clamp(self, psi: np.ndarray) -> np.ndarray:
        return np.clip(psi, self.lo, self.hi)

    def contains(self, psi: np.ndarray) -> bool:
        return bool(np.all(psi >= self.lo) and np.all(psi <= self.hi))


def free_parameters(model: str, spec: ElectorateSpec) -> Optional[list[str]]:
    """The parameters a prior must cover for ``model``; None when any
    subset of fields may be calibrated."""
    name = get_model(model).name
    if name == "dpm":
        return ["gamma"]
    if name == "ecm":
        return ["alpha", "beta"]
    if name == "pcm":
        return [f"eta.{k}" for k in range(spec.num_parties)]
    return None


def default_prior(model: str, spec: ElectorateSpec) -> PriorSpec:
    name = get_model(model).name
    if name == "dpm":
        return PriorSpec((ParamPrior("gamma", 0.0, 1.0),))
    if name == "ecm":
        return PriorSpec((ParamPrior("alpha", 1.0, 100.0), ParamPrior("beta", 1e-6, 1.0)))
    if name == "pcm":
        return PriorSpec(tuple(ParamPrior(f"eta.{k}", 0.0, 1.0) for k in range(spec.num_parties)))
    if name == "sim":
        return PriorSpec((ParamPrior("alpha_crp", 0.0, 1.0),))
    raise ConfigError(f"model {model!r} has no free parameters to calibrate")


def check_prior(prior: PriorSpec, model: str, spec: ElectorateSpec) -> None:
    required = free_parameters(model, spec)
    if required is not None and sorted(required) != sorted(prior.names):
        raise ValidationError(f"prior must cover exactly {required} for {model}, got {prior.names}")
    base = default_params(model, spec)
    set_values(base, dict(zip(prior.names, prior.lo)))


@dataclass(frozen=True)
class ABCConfig:
    explore_budget: int = 200
    seed_count: int = 10
    exploit_budget: int = 50
    perturb_scale: float = 0.05
    acceptance_eps: float = 0.05
    target_accepted: int = 100
    max_rounds: int = 20
    replicas_per_candidate: int = 5
    reject_budget: int = 1000
    weights: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)

    def __post_init__(self):
        for name in ("explore_budget", "seed_count", "target_accepted", "max_rounds", "replicas_per_candidate", "reject_budget"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be at least 1")
        if self.exploit_budget < 0:
            raise ValidationError("exploit_budget must be non-negative")
        if not self.acceptance_eps > 0:
            raise ValidationError("acceptance_eps must be positive")
        if not 0 < self.perturb_scale <= 1:
            raise ValidationError("perturb_scale must lie in (0, 1]")
        if len(self.weights) != 4 or any(w < 0 for w in self.weights):
            raise ValidationError("weights must be four non-negative numbers")

    @classmethod
    def from_dict(cls, d: dict) -> ABCConfig:
        names = set(cls.__dataclass_fields__)
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown ABC setting(s): {', '.join(sorted(unknown))}")
        d = dict(d)
        if "weights" in d:
            d["weights"] = tuple(float(w) for w in d["weights"])
        if d.get("acceptance_eps") in ("inf", "Infinity"):
            d["acceptance_eps"] = math.inf
        return cls(**d)

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["weights"] = list(self.weights)
        return out


@dataclass
class CalibrationResult:
    """Accepted samples, the best evaluated candidate, and the cost.

    ``accepted_any`` is False when nothing passed the threshold; ``psi_opt``
    is then the best candidate seen.
    """

    names: list[str]
    accepted: list[tuple[np.ndarray, float]]
    psi_opt: np.ndarray
    psi_opt_distance: float
    evaluations_used: int
    simulations_used: int
    accepted_any: bool
    first_acceptance: Optional[int] = None
    best_distance_history: list[float] = field(default_factory=list)

    @property
    def psi_opt_dict(self) -> dict[str, float]:
        return dict(zip(self.names, map(float, self.psi_opt)))

    def to_dict(self) -> dict:
        return {
            "names": list(self.names),
            "accepted": [{"psi": p.tolist(), "distance": d} for p, d in self.accepted],
            "psi_opt": self.psi_opt.tolist(),
            "psi_opt_distance": self.psi_opt_distance,
            "evaluations_used": self.evaluations_used,
            "simulations_used": self.simulations_used,
            "accepted_any": self.accepted_any,
            "first_acceptance": self.first_acceptance,
            "best_distance_history": list(self.best_distance_history),
        }


@dataclass(frozen=True)
class _Task:
    model: str
    spec: ElectorateSpec
    base: ModelParams
    names: tuple[str, ...]
    observed: SummaryStats
    replicas: int
    weights: tuple[float, ...]
    seed: int


def _evaluate(task: _Task, index: int, psi: np.ndarray) -> float:
    params = set_values(task.base, dict(zip(task.names, psi)))
    simulate = get_model(task.model).simulate
    stats = [
        summarize(simulate(task.spec, params, [task.seed, 1, index, r]), task.spec)
        for r in range(task.replicas)
    ]
    return distance(mean_summary(stats), task.observed, task.weights)


def _evaluate_star(args):
    return _evaluate(*args)


class _Evaluator:
    def __init__(self, task: _Task, mapper: Optional[Callable] = None):
        self.task = task
        self.mapper = mapper or map
        self.count = 0

    def __call__(self, batch: Sequence[np.ndarray]) -> list[tuple[int, np.ndarray, float]]:
        idx = range(self.count, self.count + len(batch))
        self.count += len(batch)
        dists = list(self.mapper(_evaluate_star, [(self.task, i, p) for i, p in zip(idx, batch)]))
        return list(zip(idx, batch, dists))


def _setup(model, spec, observed, prior, config, seed, base_params):
    if observed.num_parties != spec.num_parties:
        raise ValidationError(f"observed summary has {observed.num_parties} parties, spec has {spec.num_parties}")
    check_prior(prior, model, spec)
    base = base_params if base_params is not None else default_params(model, spec)
    return _Task(
        model=model,
        spec=spec,
        base=base,
        names=tuple(prior.names),
        observed=observed,
        replicas=config.replicas_per_candidate,
        weights=tuple(config.weights),
        seed=int(seed),
    )


def _result(task, accepted, evaluated, first, history, evaluations) -> CalibrationResult:
    best_index, best_psi, best_dist = min(evaluated, key=lambda e: (e[2], e[0]))
    if not accepted:
        warnings.warn(
            f"no candidate within eps after {evaluations} evaluations; best distance {best_dist:.4g}",
            NoAcceptanceWarning,
            stacklevel=3,
        )
    return CalibrationResult(
        names=list(task.names),
        accepted=[(p, d) for _, p, d in accepted],
        psi_opt=best_psi,
        psi_opt_distance=best_dist,
        evaluations_used=evaluations,
        simulations_used=evaluations * task.replicas,
        accepted_any=bool(accepted),
        first_acceptance=first,
        best_distance_history=history,
    )


def abc_reject(
    model: str,
    spec: ElectorateSpec,
    observed: SummaryStats,
    prior: PriorSpec,
    config: ABCConfig = ABCConfig(),
    seed: int = 0,
    base_params: Optional[ModelParams] = None,
    mapper: Optional[Callable] = None,
    chunk: int = 16,
) -> CalibrationResult:
    """Plain rejection sampling from the prior.

    Stops after ``target_accepted`` acceptances or ``reject_budget`` prior
    draws, whichever comes first.
    """
    task = _setup(model, spec, observed, prior, config, seed, base_params)
    evaluate = _Evaluator(task, mapper)
    rng = np.random.default_rng([task.seed, 0])
    eps = config.acceptance_eps
    evaluated, accepted, history = [], [], []
    first = None
    done = False
    while not done and evaluate.count < config.reject_budget:
        n = min(chunk, config.reject_budget - evaluate.count)
        batch = [prior.sample(rng) for _ in range(n)]
        for item in evaluate(batch):
            evaluated.append(item)
            if item[2] <= eps:
                accepted.append(item)
                if first is None:
                    first = item[0] + 1
            history.append(min(history[-1], item[2]) if history else item[2])
            if len(accepted) >= config.target_accepted:
                done = True
                break
    return _result(task, accepted, evaluated, first, history, len(evaluated))


def _top(evaluated: Iterable[tuple[int, np.ndarray, float]], n: int):
    return sorted(evaluated, key=lambda e: (e[2], e[0]))[:n]


def abc_explore_exploit(
    model: str,
    spec: ElectorateSpec,
    observed: SummaryStats,
    prior: PriorSpec,
    config: ABCConfig = ABCConfig(),
    seed: int = 0,
    base_params: Optional[ModelParams] = None,
    mapper: Optional[Callable] = None,
) -> CalibrationResult:
    """Explore the prior, then search around the best points found.

    The explore phase scores ``explore_budget`` prior draws and keeps the
    ``seed_count`` best as seeds. Each exploit round perturbs every seed
    ``exploit_budget`` times with Gaussian noise of standard deviation
    ``perturb_scale`` times the prior range (clamped to the prior box), then
    refreshes the seeds to the best points evaluated so far. Rounds stop at
    ``max_rounds`` or once ``target_accepted`` candidates are within eps.

    ``psi_opt`` is the evaluated candidate closest to the observation.
    """
    task = _setup(model, spec, observed, prior, config, seed, base_params)
    evaluate = _Evaluator(task, mapper)
    prior_rng = np.random.default_rng([task.seed, 0])
    step_rng = np.random.default_rng([task.seed, 2])
    eps = config.acceptance_eps
    width = prior.hi - prior.lo
    evaluated, accepted, history = [], [], []
    first = None

    def absorb(items):
        nonlocal first
        for item in items:
            evaluated.append(item)
            if item[2] <= eps:
                accepted.append(item)
                if first is None:
                    first = item[0] + 1
        history.append(min(e[2] for e in evaluated))

    absorb(evaluate([prior.sample(prior_rng) for _ in range(config.explore_budget)]))
    seeds = _top(evaluated, config.seed_count)

    for _ in range(config.max_rounds):
        if len(accepted) >= config.target_accepted or config.exploit_budget == 0:
            break
        batch = [
            prior.clamp(psi + step_rng.normal(0.0, config.perturb_scale * width))
            for _, psi, _ in seeds
            for _ in range(config.exploit_budget)
        ]
        absorb(evaluate(batch))
        seeds = _top(evaluated, config.seed_count)

    return _result(task, accepted, evaluated, first, history, len(evaluated))


def calibrated_params(result: CalibrationResult, model: str, spec: ElectorateSpec, base_params: Optional[ModelParams] = None) -> ModelParams:
    base = base_params if base_params is not None else default_params(model, spec)
    return set_values(base, result.psi_opt_dict)
