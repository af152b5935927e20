"""Summary statistics of an election and distances between them."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import ElectorateSpec, TallyMatrix, decide_outcome
from .errors import DimensionMismatch

FAMILIES = ("seat_share", "mean_vote_fraction", "margin_mean", "margin_std")


@dataclass(frozen=True)
class SummaryStats:
    """Seat shares, district-averaged vote fractions, and the mean and
    population standard deviation of winning margins."""

    seat_share: np.ndarray
    mean_vote_fraction: np.ndarray
    margin_mean: float
    margin_std: float

    def __post_init__(self):
        object.__setattr__(self, "seat_share", np.asarray(self.seat_share, dtype=float))
        object.__setattr__(self, "mean_vote_fraction", np.asarray(self.mean_vote_fraction, dtype=float))
        object.__setattr__(self, "margin_mean", float(self.margin_mean))
        object.__setattr__(self, "margin_std", float(self.margin_std))

    @property
    def num_parties(self) -> int:
        return self.seat_share.shape[0]

    def vector(self) -> np.ndarray:
        return np.concatenate([self.seat_share, self.mean_vote_fraction, [self.margin_mean, self.margin_std]])

    def to_dict(self) -> dict:
        return {
            "seat_share": self.seat_share.tolist(),
            "mean_vote_fraction": self.mean_vote_fraction.tolist(),
            "margin_mean": self.margin_mean,
            "margin_std": self.margin_std,
        }

    @classmethod
    def from_dict(cls, d: dict) -> SummaryStats:
        return cls(d["seat_share"], d["mean_vote_fraction"], d["margin_mean"], d["margin_std"])

    def __eq__(self, other):
        return isinstance(other, SummaryStats) and np.array_equal(self.vector(), other.vector())

    __hash__ = None


def summarize(tally: TallyMatrix, spec: ElectorateSpec) -> SummaryStats:
    outcome = decide_outcome(tally, spec)
    fractions = tally.votes / spec.sizes[:, None]
    return SummaryStats(
        seat_share=outcome.seats / spec.num_districts,
        mean_vote_fraction=fractions.mean(axis=0),
        margin_mean=outcome.margins.mean(),
        margin_std=outcome.margins.std(),
    )


def mean_summary(stats: Sequence[SummaryStats]) -> SummaryStats:
    """Component-wise mean of several summaries."""
    if not stats:
        raise ValueError("nothing to average")
    return SummaryStats(
        seat_share=np.mean([s.seat_share for s in stats], axis=0),
        mean_vote_fraction=np.mean([s.mean_vote_fraction for s in stats], axis=0),
        margin_mean=np.mean([s.margin_mean for s in stats]),
        margin_std=np.mean([s.margin_std for s in stats]),
    )


def distance(a: SummaryStats, b: SummaryStats, weights: Sequence[float] = (1.0, 1.0, 1.0, 1.0)) -> float:
    """Weighted Euclidean distance over the concatenated summary vector.

    ``weights`` multiplies the differences of each family, in the order
    seat share, mean vote fraction, margin mean, margin std.
    """
    if a.num_parties != b.num_parties:
        raise DimensionMismatch(f"{a.num_parties} vs {b.num_parties} parties")
    w = np.asarray(weights, dtype=float)
    if w.shape != (4,):
        raise DimensionMismatch("distance needs exactly four family weights")
    K = a.num_parties
    scale = np.concatenate([np.full(K, w[0]), np.full(K, w[1]), [w[2], w[3]]])
    # hypot rescales internally, so tiny differences do not underflow to 0
    return math.hypot(*(scale * (a.vector() - b.vector())).tolist())
