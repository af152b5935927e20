"""Electoral setting, tallies and the winner/margin/seat mechanics."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence

import numpy as np

from . import _kernels
from .errors import Exhausted, NonPositive, RowSumViolation, ShareMismatch, SizeMismatch


def largest_remainder(shares: Sequence[float], total: int) -> np.ndarray:
    """Apportion ``total`` integer units proportionally to ``shares``.

    Leftover units go to the largest fractional parts; ties favour the lower
    index.
    """
    shares = np.asarray(shares, dtype=float)
    exact = shares / shares.sum() * total
    base = np.floor(exact).astype(np.int64)
    left = int(total - base.sum())
    if left:
        order = sorted(range(len(shares)), key=lambda k: (-(exact[k] - base[k]), k))
        for k in order[:left]:
            base[k] += 1
    return base


def equal_sizes(num_districts: int, num_electors: int) -> tuple[int, ...]:
    """``N // S`` electors per district, the first ``N % S`` taking one extra."""
    if num_districts < 1:
        raise NonPositive(f"need at least one district, got {num_districts}")
    q, r = divmod(num_electors, num_districts)
    return tuple(q + 1 if s < r else q for s in range(num_districts))


@dataclass(frozen=True)
class ElectorateSpec:
    """The fixed electoral setting.

    ``popularity`` and ``party_vote_totals`` may each be omitted; the missing
    one is derived by :func:`validate_spec`.
    """

    num_districts: int
    num_parties: int
    num_electors: int
    district_sizes: tuple[int, ...]
    popularity: Optional[tuple[float, ...]] = None
    party_vote_totals: Optional[tuple[int, ...]] = None

    @classmethod
    def uniform(cls, num_districts: int, num_electors: int, popularity: Sequence[float]) -> ElectorateSpec:
        """Equal-size districts, validated."""
        spec = cls(
            num_districts=num_districts,
            num_parties=len(popularity),
            num_electors=num_electors,
            district_sizes=equal_sizes(num_districts, num_electors),
            popularity=tuple(float(p) for p in popularity),
        )
        return validate_spec(spec)

    @property
    def sizes(self) -> np.ndarray:
        return np.asarray(self.district_sizes, dtype=np.int64)

    @property
    def theta(self) -> np.ndarray:
        return np.asarray(self.popularity, dtype=float)

    @property
    def votes(self) -> np.ndarray:
        return np.asarray(self.party_vote_totals, dtype=np.int64)

    @property
    def equal_districts(self) -> bool:
        return max(self.district_sizes) - min(self.district_sizes) <= 1

    def to_dict(self) -> dict:
        return {
            "num_districts": self.num_districts,
            "num_parties": self.num_parties,
            "num_electors": self.num_electors,
            "district_sizes": list(self.district_sizes),
            "popularity": None if self.popularity is None else list(self.popularity),
            "party_vote_totals": None if self.party_vote_totals is None else list(self.party_vote_totals),
        }

    def digest(self) -> str:
        """Short content hash identifying this setting in run records."""
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def validate_spec(spec: ElectorateSpec) -> ElectorateSpec:
    """Check every invariant and fill in whichever of θ / v is missing.

    Raises
    ------
    NonPositive
        S < 1, K < 2, N < 1, a non-positive district size, or a negative share.
    SizeMismatch
        District sizes do not sum to N, or vote totals do not sum to N.
    ShareMismatch
        θ and v disagree by more than one elector's worth.
    """
    S, K, N = spec.num_districts, spec.num_parties, spec.num_electors
    if S < 1:
        raise NonPositive(f"need at least one district, got {S}")
    if K < 2:
        raise NonPositive(f"need at least two parties, got {K}")
    if N < 1:
        raise NonPositive(f"need at least one elector, got {N}")
    sizes = tuple(int(n) for n in spec.district_sizes)
    if len(sizes) != S:
        raise SizeMismatch(f"{len(sizes)} district sizes for {S} districts")
    if any(n <= 0 for n in sizes):
        raise NonPositive("district sizes must be positive")
    if sum(sizes) != N:
        raise SizeMismatch(f"district sizes sum to {sum(sizes)}, expected {N}")

    if spec.popularity is None and spec.party_vote_totals is None:
        raise ShareMismatch("either popularity or party_vote_totals is required")

    votes = None
    if spec.party_vote_totals is not None:
        votes = tuple(int(v) for v in spec.party_vote_totals)
        if len(votes) != K:
            raise SizeMismatch(f"{len(votes)} vote totals for {K} parties")
        if any(v < 0 for v in votes):
            raise NonPositive("party vote totals must be non-negative")
        if sum(votes) != N:
            raise SizeMismatch(f"party vote totals sum to {sum(votes)}, expected {N}")

    if spec.popularity is not None:
        theta = np.asarray(spec.popularity, dtype=float)
        if theta.shape != (K,):
            raise SizeMismatch(f"{theta.size} popularity entries for {K} parties")
        if np.any(theta < 0) or not np.all(np.isfinite(theta)):
            raise NonPositive("popularity entries must be finite and non-negative")
        if theta.sum() <= 0:
            raise NonPositive("popularity must have positive mass")
        theta = theta / theta.sum()
        if votes is None:
            votes = tuple(int(v) for v in largest_remainder(theta, N))
        else:
            gap = np.abs(np.asarray(votes) / N - theta).max()
            if gap > 1.0 / N + 1e-9:
                raise ShareMismatch(f"popularity and vote totals differ by {gap:.3g}")
    else:
        theta = np.asarray(votes, dtype=float) / N

    return ElectorateSpec(
        num_districts=S,
        num_parties=K,
        num_electors=N,
        district_sizes=sizes,
        popularity=tuple(float(t) for t in theta),
        party_vote_totals=votes,
    )


@dataclass(frozen=True)
class TallyMatrix:
    """Votes per district (rows) per party (columns)."""

    votes: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.votes, dtype=np.int64)
        if v.ndim != 2:
            raise ValueError("tally must be a 2-d district x party grid")
        if np.any(v < 0):
            raise ValueError("tally entries must be non-negative")
        object.__setattr__(self, "votes", v)

    @property
    def num_districts(self) -> int:
        return self.votes.shape[0]

    @property
    def num_parties(self) -> int:
        return self.votes.shape[1]

    def check(self, spec: ElectorateSpec, constrained: bool = True) -> None:
        """Raise RowSumViolation unless the marginals match ``spec``."""
        if self.votes.shape != (spec.num_districts, spec.num_parties):
            raise RowSumViolation(f"tally shape {self.votes.shape} does not match spec")
        rows = self.votes.sum(axis=1)
        if not np.array_equal(rows, spec.sizes):
            bad = int(np.flatnonzero(rows != spec.sizes)[0])
            raise RowSumViolation(f"district {bad} holds {rows[bad]} votes, expected {spec.sizes[bad]}")
        if constrained and spec.party_vote_totals is not None:
            cols = self.votes.sum(axis=0)
            if not np.array_equal(cols, spec.votes):
                raise RowSumViolation(f"party totals {cols.tolist()} differ from {list(spec.party_vote_totals)}")

    def __eq__(self, other):
        return isinstance(other, TallyMatrix) and np.array_equal(self.votes, other.votes)

    __hash__ = None


@dataclass(frozen=True)
class ElectionOutcome:
    winners: np.ndarray
    margins: np.ndarray
    seats: np.ndarray


def decide_outcome(tally: TallyMatrix, spec: ElectorateSpec) -> ElectionOutcome:
    """Plurality winner per district, winner's vote fraction, and seat counts.

    Ties go to the lowest party index.
    """
    tally.check(spec, constrained=False)
    V = tally.votes
    winners = V.argmax(axis=1)
    margins = V[np.arange(V.shape[0]), winners] / spec.sizes
    seats = np.bincount(winners, minlength=V.shape[1])
    return ElectionOutcome(winners=winners, margins=margins, seats=seats)


@dataclass
class SamplerState:
    """Book-keeping counters for constrained categorical draws."""

    remaining_party_votes: np.ndarray
    remaining_district_capacity: np.ndarray
    rng: np.random.Generator = field(repr=False)

    @classmethod
    def for_spec(cls, spec: ElectorateSpec, seed=None) -> SamplerState:
        return cls(
            remaining_party_votes=spec.votes.copy(),
            remaining_district_capacity=spec.sizes.copy(),
            rng=np.random.default_rng(seed),
        )


def constrained_sample(
    weights: Sequence[float],
    state: SamplerState,
    axis: Literal["party", "district"] = "party",
) -> int:
    """Draw an index ∝ ``weights`` among indices with quota left, then
    decrement that quota.

    When every active index has zero weight the draw is uniform over the
    active set.
    """
    if axis == "party":
        quota = state.remaining_party_votes
    elif axis == "district":
        quota = state.remaining_district_capacity
    else:
        raise ValueError(f"axis must be 'party' or 'district', not {axis!r}")
    w = np.asarray(weights, dtype=float)
    if w.shape != quota.shape:
        raise ValueError(f"{w.size} weights for {quota.size} {axis} quotas")
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")
    k = _kernels.pick(state.rng, w, quota)
    if k < 0:
        raise Exhausted(f"no {axis} has remaining quota")
    quota[k] -= 1
    return int(k)
