import numpy as np
import pytest

from districtsim import (
    ElectorateSpec,
    SamplerState,
    TallyMatrix,
    constrained_sample,
    decide_outcome,
    largest_remainder,
    validate_spec,
)
from districtsim.core import equal_sizes
from districtsim.errors import Exhausted, NonPositive, RowSumViolation, ShareMismatch, SizeMismatch


def test_largest_remainder_hand_cases():
    assert largest_remainder([0.5, 0.4, 0.1], 10).tolist() == [5, 4, 1]
    # 1/3 each of 10: one leftover unit goes to the lowest index
    assert largest_remainder([1, 1, 1], 10).tolist() == [4, 3, 3]
    assert largest_remainder([0.335, 0.335, 0.33], 100).tolist() == [34, 33, 33]


def test_equal_sizes_spreads_remainder_first():
    assert equal_sizes(3, 10) == (4, 3, 3)
    assert sum(equal_sizes(7, 1001)) == 1001


def test_uniform_spec_derives_votes():
    spec = ElectorateSpec.uniform(4, 100, (0.5, 0.4, 0.1))
    assert spec.district_sizes == (25, 25, 25, 25)
    assert spec.party_vote_totals == (50, 40, 10)
    assert abs(sum(spec.popularity) - 1) < 1e-12


def test_popularity_is_normalised():
    spec = ElectorateSpec.uniform(70, 700, (0.54, 0.32, 0.10))
    assert abs(sum(spec.popularity) - 1) < 1e-12
    assert sum(spec.party_vote_totals) == 700


def test_votes_only_spec_derives_theta():
    spec = validate_spec(ElectorateSpec(2, 2, 10, (5, 5), party_vote_totals=(7, 3)))
    assert spec.popularity == (0.7, 0.3)


@pytest.mark.parametrize(
    "kwargs, err",
    [
        (dict(num_districts=0, num_parties=2, num_electors=10, district_sizes=(), popularity=(0.5, 0.5)), NonPositive),
        (dict(num_districts=2, num_parties=1, num_electors=10, district_sizes=(5, 5), popularity=(1.0,)), NonPositive),
        (dict(num_districts=2, num_parties=2, num_electors=10, district_sizes=(5, 4), popularity=(0.5, 0.5)), SizeMismatch),
        (dict(num_districts=2, num_parties=2, num_electors=10, district_sizes=(5,), popularity=(0.5, 0.5)), SizeMismatch),
        (dict(num_districts=2, num_parties=2, num_electors=10, district_sizes=(10, 0), popularity=(0.5, 0.5)), NonPositive),
        (dict(num_districts=2, num_parties=2, num_electors=10, district_sizes=(5, 5), popularity=(-0.1, 1.1)), NonPositive),
        (dict(num_districts=2, num_parties=2, num_electors=10, district_sizes=(5, 5), party_vote_totals=(6, 5)), SizeMismatch),
        (
            dict(num_districts=2, num_parties=2, num_electors=10, district_sizes=(5, 5), popularity=(0.5, 0.5), party_vote_totals=(8, 2)),
            ShareMismatch,
        ),
        (dict(num_districts=2, num_parties=2, num_electors=10, district_sizes=(5, 5)), ShareMismatch),
    ],
)
def test_validate_spec_rejects(kwargs, err):
    with pytest.raises(err):
        validate_spec(ElectorateSpec(**kwargs))


def test_validation_errors_are_value_errors():
    with pytest.raises(ValueError):
        ElectorateSpec.uniform(0, 10, (0.5, 0.5))


def test_digest_is_stable_and_sensitive():
    a = ElectorateSpec.uniform(4, 100, (0.5, 0.5))
    b = ElectorateSpec.uniform(4, 100, (0.5, 0.5))
    c = ElectorateSpec.uniform(4, 100, (0.6, 0.4))
    assert a.digest() == b.digest() != c.digest()


def test_decide_outcome_hand_example():
    spec = validate_spec(ElectorateSpec(3, 3, 30, (10, 10, 10), party_vote_totals=(12, 12, 6)))
    tally = TallyMatrix([[6, 3, 1], [2, 5, 3], [4, 4, 2]])
    out = decide_outcome(tally, spec)
    assert out.winners.tolist() == [0, 1, 0]  # tie in district 2 goes to party 0
    assert np.allclose(out.margins, [0.6, 0.5, 0.4])
    assert out.seats.tolist() == [2, 1, 0]


def test_tally_check_catches_marginal_violations():
    spec = validate_spec(ElectorateSpec(2, 2, 4, (2, 2), party_vote_totals=(2, 2)))
    TallyMatrix([[2, 0], [0, 2]]).check(spec)
    with pytest.raises(RowSumViolation):
        TallyMatrix([[2, 1], [0, 1]]).check(spec)
    with pytest.raises(RowSumViolation):
        TallyMatrix([[2, 0], [2, 0]]).check(spec)
    TallyMatrix([[2, 0], [2, 0]]).check(spec, constrained=False)


def test_tally_rejects_negative_entries():
    with pytest.raises(ValueError):
        TallyMatrix([[1, -1]])


def _state(party_quota, seed=0):
    return SamplerState(np.array(party_quota, dtype=np.int64), np.array([100], dtype=np.int64), np.random.default_rng(seed))


def test_constrained_sample_frequencies_follow_weights():
    st = _state([10**6] * 3)
    draws = np.array([constrained_sample([1.0, 2.0, 3.0], st) for _ in range(60_000)])
    freq = np.bincount(draws, minlength=3) / draws.size
    assert np.allclose(freq, [1 / 6, 2 / 6, 3 / 6], atol=0.01)


def test_constrained_sample_masks_exhausted_and_decrements():
    st = _state([0, 5, 5])
    draws = [constrained_sample([100.0, 1.0, 1.0], st) for _ in range(10)]
    assert 0 not in draws
    assert st.remaining_party_votes.tolist() == [0, 0, 0]
    with pytest.raises(Exhausted):
        constrained_sample([1.0, 1.0, 1.0], st)


def test_constrained_sample_zero_weight_falls_back_to_uniform():
    st = _state([10**6, 10**6, 0])
    draws = np.array([constrained_sample([0.0, 0.0, 5.0], st) for _ in range(20_000)])
    freq = np.bincount(draws, minlength=3) / draws.size
    assert freq[2] == 0
    assert np.allclose(freq[:2], [0.5, 0.5], atol=0.015)


def test_constrained_sample_district_axis():
    st = SamplerState(np.array([5]), np.array([0, 3]), np.random.default_rng(1))
    assert [constrained_sample([1.0, 1.0], st, axis="district") for _ in range(3)] == [1, 1, 1]
    with pytest.raises(Exhausted):
        constrained_sample([1.0, 1.0], st, axis="district")


def test_constrained_sample_bad_input():
    st = _state([1, 1])
    with pytest.raises(ValueError):
        constrained_sample([1.0], st)
    with pytest.raises(ValueError):
        constrained_sample([1.0, -1.0], st)
    with pytest.raises(ValueError):
        constrained_sample([1.0, 1.0], st, axis="elector")
