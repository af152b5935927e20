"""Generative voter models mapping (spec, params, seed) to a tally.

Five models are provided:

``dm``   district-wise: each district draws its own popularity from a
         Dirichlet around θ.
``dpm``  district-wise polarization: electors lean towards the party already
         leading locally, mixed with θ by a polarization weight γ.
``ecm``  elector communities: electors form communities by a CRP inside each
         district and every community votes as one block.
``pcm``  party-wise concentration: each elector gets a party first, then a
         district that favours places where the party is already strong.
``sim``  social identity: communities with party affinities settle into
         districts and vote by noisy valuations.

All models except ``sim`` reproduce the party vote totals of the spec
exactly.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import _kernels
from .core import ElectorateSpec, TallyMatrix, equal_sizes
from .errors import (
    ConfigError,
    Exhausted,
    PhiRejectionExceeded,
    UnknownCommunity,
    ValidationError,
)

PHI_MAX_ATTEMPTS = 10_000
PHI_PARTY_LIMIT = 0.5


def _probability(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ValidationError(f"{name}={value} is outside [0, 1]")


def _positive(name: str, value: float) -> None:
    if not value > 0.0:
        raise ValidationError(f"{name}={value} must be strictly positive")


@dataclass(frozen=True)
class DMParams:
    """District-wise model. ``concentration`` scales the Dirichlet around θ."""

    concentration: float = 1.0

    def validate(self, spec: ElectorateSpec) -> None:
        _positive("concentration", self.concentration)


@dataclass(frozen=True)
class DPMParams:
    """District-wise polarization model.

    Attributes
    ----------
    gamma : float or sequence of float
        Polarization weight in [0, 1], one value for all districts or one per
        district.
    prior_count : float
        Pseudo-votes per party added to the running district tally before it
        is turned into a local vote fraction.
    literal_counts : bool
        Use raw in-district counts instead of the smoothed local fraction.
    """

    gamma: Union[float, tuple[float, ...]] = 0.8
    prior_count: float = 2.0
    literal_counts: bool = False

    def gamma_per_district(self, spec: ElectorateSpec) -> np.ndarray:
        g = np.asarray(self.gamma, dtype=float)
        if g.ndim == 0:
            return np.full(spec.num_districts, float(g))
        if g.shape != (spec.num_districts,):
            raise ValidationError(f"{g.size} gamma values for {spec.num_districts} districts")
        return g

    def validate(self, spec: ElectorateSpec) -> None:
        for g in np.atleast_1d(self.gamma_per_district(spec)):
            _probability("gamma", float(g))
        if self.prior_count < 0:
            raise ValidationError("prior_count must be non-negative")


@dataclass(frozen=True)
class ECMParams:
    """Elector community model: CRP concentration ``alpha`` and the weight
    ``beta`` a community puts on how earlier communities voted."""

    alpha: float = 20.0
    beta: float = 0.5
    literal_counts: bool = False

    def validate(self, spec: ElectorateSpec) -> None:
        _positive("alpha", self.alpha)
        _positive("beta", self.beta)
        if not self.literal_counts:
            _probability("beta", self.beta)


@dataclass(frozen=True)
class PCMParams:
    """Party-wise concentration model, one ``eta`` in [0, 1] per party."""

    eta: tuple[float, ...] = (0.5, 0.5)
    literal_counts: bool = False

    def validate(self, spec: ElectorateSpec) -> None:
        if len(self.eta) != spec.num_parties:
            raise ValidationError(f"{len(self.eta)} eta values for {spec.num_parties} parties")
        for e in self.eta:
            _probability("eta", e)


@dataclass(frozen=True)
class SIMParams:
    """Social identity model.

    Community proportions, the community/party affinity matrix and party
    valuation spreads are either given explicitly or drawn per run from
    their priors (stick-breaking with ``c_sbp``, constrained uniform over
    {-1, 0, 1}, and Gamma with shape ``c_gam``).

    ``sigma`` is the standard deviation of each party's valuation noise.
    With ``grouped_arrival`` electors are indexed community by community
    (community labels are still drawn i.i.d.), so placement seats one whole
    community before the next; otherwise communities arrive interleaved.
    ``kappa`` overrides the per-run Beta(a, b) draw of the weight on an
    elector's own valuation under local influence.
    """

    num_communities: int = 3
    eta: Optional[tuple[float, ...]] = None
    c_sbp: float = 1.0
    phi: Optional[tuple[tuple[int, ...], ...]] = None
    sigma: Optional[tuple[float, ...]] = None
    c_gam: float = 2.0
    alpha_crp: float = 0.5
    grouped_arrival: bool = True
    local_influence: bool = False
    a: float = 2.0
    b: float = 2.0
    kappa: Optional[float] = None

    def validate(self, spec: ElectorateSpec) -> None:
        C, K = self.num_communities, spec.num_parties
        if C < 1:
            raise ValidationError("num_communities must be at least 1")
        if self.eta is not None:
            eta = np.asarray(self.eta, dtype=float)
            if eta.shape != (C,):
                raise ValidationError(f"{eta.size} community proportions for {C} communities")
            if np.any(eta < 0) or abs(eta.sum() - 1.0) > 1e-9:
                raise ValidationError("community proportions must be non-negative and sum to 1")
        else:
            _positive("c_sbp", self.c_sbp)
        if self.phi is not None:
            phi = np.asarray(self.phi)
            if phi.shape != (C, K):
                raise ValidationError(f"phi must be {C}x{K}, got {phi.shape}")
            if not np.all(np.isin(phi, (-1, 0, 1))):
                raise ValidationError("phi entries must be -1, 0 or 1")
        if self.sigma is not None:
            if len(self.sigma) != K:
                raise ValidationError(f"{len(self.sigma)} sigma values for {K} parties")
            for s in self.sigma:
                _positive("sigma", s)
        else:
            _positive("c_gam", self.c_gam)
        _probability("alpha_crp", self.alpha_crp)
        _positive("a", self.a)
        _positive("b", self.b)
        if self.kappa is not None:
            _probability("kappa", self.kappa)


ModelParams = Union[DMParams, DPMParams, ECMParams, PCMParams, SIMParams]


@dataclass(frozen=True)
class AgentTrace:
    """Per-elector district, vote and (ECM/SIM) community labels."""

    district_of: np.ndarray
    vote_of: np.ndarray
    community_of: Optional[np.ndarray] = None
    num_districts: int = 0


SeedLike = Union[int, Sequence[int], np.random.SeedSequence, None]


def _district_index(spec: ElectorateSpec) -> np.ndarray:
    return np.repeat(np.arange(spec.num_districts), spec.sizes)


def _finish(V, ok, spec, trace, return_trace):
    if not ok:
        raise Exhausted("quota book-keeping ran dry before every elector voted")
    tally = TallyMatrix(V)
    return (tally, trace) if return_trace else tally


def simulate_dm(spec: ElectorateSpec, params: DMParams = DMParams(), seed: SeedLike = None, return_trace=False):
    """District-wise model.

    Each district draws θ_s ~ Dirichlet(concentration · θ) from normalised
    Gamma variates; its electors then vote ∝ θ_s with party quotas enforced.
    Parties with θ_k = 0 receive no weight anywhere.
    """
    params.validate(spec)
    rng = np.random.default_rng(seed)
    X = np.empty(spec.num_electors, np.int64)
    V, ok = _kernels.dm_kernel(rng, spec.theta, spec.sizes, spec.votes.copy(), float(params.concentration), X)
    return _finish(V, ok, spec, AgentTrace(_district_index(spec), X, None, spec.num_districts), return_trace)


def simulate_dpm(spec: ElectorateSpec, params: DPMParams, seed: SeedLike = None, return_trace=False):
    """District-wise polarization model.

    Elector i of district s votes for party k with weight
    ``γ_s · f_sk + (1 - γ_s) · θ_k`` where ``f_sk`` is the party's vote
    fraction among the district's earlier electors, smoothed by
    ``prior_count`` pseudo-votes per party. With ``literal_counts`` the raw
    count replaces ``f_sk``.
    """
    params.validate(spec)
    rng = np.random.default_rng(seed)
    X = np.empty(spec.num_electors, np.int64)
    V, ok = _kernels.dpm_kernel(
        rng,
        spec.theta,
        spec.sizes,
        spec.votes.copy(),
        params.gamma_per_district(spec),
        float(params.prior_count),
        bool(params.literal_counts),
        X,
    )
    return _finish(V, ok, spec, AgentTrace(_district_index(spec), X, None, spec.num_districts), return_trace)


def simulate_ecm(spec: ElectorateSpec, params: ECMParams, seed: SeedLike = None, return_trace=False):
    """Elector community model.

    Inside each district electors join communities by a Chinese Restaurant
    Process with concentration α. Each community then votes as a block for
    party k with weight ``β · d_k / Σd + (1 - β) · θ_k``, where ``d_k``
    counts earlier communities (across all districts) that chose k. A block
    can only go to a party whose remaining quota covers it; a block no party
    can absorb is split and its members vote one by one.
    """
    params.validate(spec)
    rng = np.random.default_rng(seed)
    X = np.empty(spec.num_electors, np.int64)
    C = np.empty(spec.num_electors, np.int64)
    V, ok = _kernels.ecm_kernel(
        rng,
        spec.theta,
        spec.sizes,
        spec.votes.copy(),
        float(params.alpha),
        float(params.beta),
        bool(params.literal_counts),
        X,
        C,
    )
    return _finish(V, ok, spec, AgentTrace(_district_index(spec), X, C, spec.num_districts), return_trace)


def simulate_pcm(spec: ElectorateSpec, params: PCMParams, seed: SeedLike = None, return_trace=False):
    """Party-wise concentration model.

    Electors are processed one at a time. Each gets a party drawn ∝ θ under
    party quotas, then a district with weight
    ``η_k · V[s, k] + (1 - η_k) · u_k`` among districts with free seats.
    ``u_k`` is the same for every district: the party's current mean count
    per district (1 with ``literal_counts``).
    """
    params.validate(spec)
    rng = np.random.default_rng(seed)
    X = np.empty(spec.num_electors, np.int64)
    Z = np.empty(spec.num_electors, np.int64)
    V, ok = _kernels.pcm_kernel(
        rng,
        spec.theta,
        spec.sizes.copy(),
        spec.votes.copy(),
        np.asarray(params.eta, dtype=float),
        bool(params.literal_counts),
        X,
        Z,
    )
    return _finish(V, ok, spec, AgentTrace(Z, X, None, spec.num_districts), return_trace)


def stick_breaking(rng: np.random.Generator, num_components: int, concentration: float) -> np.ndarray:
    """Truncated stick-breaking weights; the last component takes the rest."""
    weights = np.empty(num_components)
    rest = 1.0
    for c in range(num_components - 1):
        frac = rng.beta(1.0, concentration)
        weights[c] = rest * frac
        rest -= weights[c]
    weights[-1] = rest
    return weights


def draw_phi(rng: np.random.Generator, eta: np.ndarray, num_parties: int, limit: float = PHI_PARTY_LIMIT) -> np.ndarray:
    """Uniform {-1, 0, 1} affinities, each party column redrawn until
    ``Σ_c η_c φ_ck ≤ limit``."""
    C = eta.shape[0]
    phi = np.empty((C, num_parties), dtype=np.int64)
    for k in range(num_parties):
        for _ in range(PHI_MAX_ATTEMPTS):
            col = rng.integers(-1, 2, size=C)
            if eta @ col <= limit + 1e-12:
                phi[:, k] = col
                break
        else:
            raise PhiRejectionExceeded(f"party {k}: no admissible affinity column in {PHI_MAX_ATTEMPTS} attempts")
    return phi


def sim_votes(
    phi: np.ndarray,
    sigma: np.ndarray,
    community: np.ndarray,
    district: np.ndarray,
    noise: np.ndarray,
    kappa: Optional[float],
    num_districts: int,
) -> np.ndarray:
    """Votes from valuations ``λ = φ[C_i] + σ · noise``.

    With ``kappa`` set, each valuation is blended with the mean valuation of
    the elector's district (the elector included) before the argmax.
    """
    lam = phi[community] + noise * sigma
    if kappa is not None:
        totals = np.zeros((num_districts, lam.shape[1]))
        np.add.at(totals, district, lam)
        counts = np.bincount(district, minlength=num_districts)
        means = totals / np.maximum(counts, 1)[:, None]
        lam = kappa * lam + (1.0 - kappa) * means[district]
    return lam.argmax(axis=1)


@dataclass(frozen=True)
class SIMDraws:
    """The run-level quantities a social identity run used."""

    eta: np.ndarray
    phi: np.ndarray
    sigma: np.ndarray
    kappa: Optional[float]


def simulate_sim(spec: ElectorateSpec, params: SIMParams, seed: SeedLike = None, return_trace=False, return_draws=False):
    """Social identity model.

    Vote shares are emergent: party totals in ``spec`` are not enforced.
    District capacities must be equal (``N // S``, remainder spread over the
    first districts).
    """
    params.validate(spec)
    S, K, N = spec.num_districts, spec.num_parties, spec.num_electors
    if tuple(spec.district_sizes) != equal_sizes(S, N):
        raise ValidationError("the social identity model needs equal district capacities")
    rng = np.random.default_rng(seed)
    C = params.num_communities

    eta = np.asarray(params.eta, dtype=float) if params.eta is not None else stick_breaking(rng, C, params.c_sbp)
    phi = np.asarray(params.phi, dtype=np.int64) if params.phi is not None else draw_phi(rng, eta, K)
    sigma = (
        np.asarray(params.sigma, dtype=float)
        if params.sigma is not None
        else rng.gamma(params.c_gam, 1.0, size=K)
    )

    cdf = np.cumsum(eta)
    cdf[-1] = 1.0
    community = np.searchsorted(cdf, rng.random(N), side="right").astype(np.int64)
    if params.grouped_arrival:
        community.sort()
    Z, ok = _kernels.sim_placement_kernel(rng, community, C, spec.sizes.copy(), float(params.alpha_crp))
    if not ok:
        raise Exhausted("district capacity ran out during placement")

    noise = rng.standard_normal((N, K))
    kappa = None
    if params.local_influence:
        kappa = params.kappa if params.kappa is not None else float(rng.beta(params.a, params.b))
    X = sim_votes(phi, sigma, community, Z, noise, kappa, S)

    V = np.zeros((S, K), np.int64)
    np.add.at(V, (Z, X), 1)
    out = [TallyMatrix(V)]
    if return_trace:
        out.append(AgentTrace(Z, X, community, S))
    if return_draws:
        out.append(SIMDraws(eta, phi, sigma, kappa))
    return out[0] if len(out) == 1 else tuple(out)


def community_histogram(trace: AgentTrace, community: int) -> np.ndarray:
    """Members of ``community`` per district."""
    if trace.community_of is None or trace.community_of.size == 0:
        raise UnknownCommunity("trace carries no community labels")
    members = trace.community_of == community
    if community < 0 or not members.any():
        raise UnknownCommunity(community)
    S = trace.num_districts or int(trace.district_of.max()) + 1
    return np.bincount(trace.district_of[members], minlength=S)


@dataclass(frozen=True)
class Model:
    name: str
    params_type: type
    simulate: Callable
    constrained: bool = True


MODELS: dict[str, Model] = {
    "dm": Model("dm", DMParams, simulate_dm),
    "dpm": Model("dpm", DPMParams, simulate_dpm),
    "ecm": Model("ecm", ECMParams, simulate_ecm),
    "pcm": Model("pcm", PCMParams, simulate_pcm),
    "sim": Model("sim", SIMParams, simulate_sim, constrained=False),
}


def get_model(name: str) -> Model:
    try:
        return MODELS[name.lower()]
    except KeyError:
        raise ConfigError(f"unknown model {name!r}; choose from {', '.join(MODELS)}") from None


def simulate(model: str, spec: ElectorateSpec, params: ModelParams, seed: SeedLike = None) -> TallyMatrix:
    return get_model(model).simulate(spec, params, seed)


def _freeze(value):
    if isinstance(value, list):
        return tuple(_freeze(v) for v in value)
    return value


def params_from_dict(model: str, values: dict) -> ModelParams:
    """Build a params object; unknown keys are errors."""
    cls = get_model(model).params_type
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(values) - names
    if unknown:
        raise ConfigError(f"unknown {model} parameter(s): {', '.join(sorted(unknown))}")
    return cls(**{k: _freeze(v) for k, v in values.items()})


def params_to_dict(params: ModelParams) -> dict:
    out = {}
    for f in dataclasses.fields(params):
        v = getattr(params, f.name)
        if isinstance(v, tuple):
            v = [list(x) if isinstance(x, tuple) else x for x in v]
        out[f.name] = v
    return out


def set_values(params: ModelParams, values: dict[str, float]) -> ModelParams:
    """Return ``params`` with named values replaced.

    Names are field names (``gamma``) or ``field.index`` for one entry of a
    vector field (``eta.2``).
    """
    changes: dict[str, object] = {}
    for name, value in values.items():
        base, _, idx = name.partition(".")
        if not hasattr(params, base):
            raise ConfigError(f"{type(params).__name__} has no parameter {base!r}")
        if idx:
            current = list(changes.get(base, getattr(params, base)))
            current[int(idx)] = float(value)
            changes[base] = tuple(current)
        elif isinstance(value, (list, tuple)):
            changes[base] = _freeze(list(value))
        elif isinstance(getattr(params, base), int) and not isinstance(getattr(params, base), bool):
            changes[base] = int(value)
        else:
            changes[base] = float(value)
    return dataclasses.replace(params, **changes)


def default_params(model: str, spec: ElectorateSpec) -> ModelParams:
    cls = get_model(model).params_type
    if cls is PCMParams:
        return PCMParams(eta=(0.5,) * spec.num_parties)
    return cls()
