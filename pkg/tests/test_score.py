from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import given, settings, strategies as st

from ecogauge.score import (
    ClockSkewError,
    EcoScoreState,
    PenaltySchedule,
    accrue,
    apply_query,
    image_bracket,
    on_query,
)

from conftest import T0, at

SCHEDULE = PenaltySchedule()


def fresh(score=100):
    return EcoScoreState(score=score, last_accrual_at=T0)


class TestPenaltyTiers:
    @pytest.mark.parametrize("pause_min, penalty", [
        (90, 7), (60, 7),        # boundary belongs to the milder tier
        (59.999, 8), (30, 8),
        (29, 9), (15, 9),
        (14, 10), (7, 10),
        (6, 11), (3, 11),
        (2, 12), (1, 12),
        (0.5, 13), (0, 13),
    ])
    def test_tier_lookup(self, pause_min, penalty):
        assert SCHEDULE.penalty_for(timedelta(minutes=pause_min)) == penalty

    def test_first_query_charges_mildest_tier(self):
        assert SCHEDULE.penalty_for(None) == 7

    def test_invalid_schedules(self):
        with pytest.raises(ValueError):
            PenaltySchedule(tiers=((timedelta(minutes=30), 8), (timedelta(minutes=60), 7),
                                   (timedelta(0), 13)))
        with pytest.raises(ValueError):
            PenaltySchedule(tiers=((timedelta(minutes=60), 7),))  # no 0 tier

    def test_from_tier_list(self):
        schedule = PenaltySchedule.from_tier_list([[60, 7], [30, 8], [0, 13]])
        assert schedule.penalty_for(timedelta(minutes=45)) == 8


class TestAccrue:
    def test_no_time_no_change(self):
        state = accrue(fresh(50), T0)
        assert state.score == 50

    def test_overnight_24_points(self):
        state = accrue(fresh(76), at(minutes=480))
        assert state.score == 100

    def test_clamped_at_100(self):
        state = accrue(fresh(90), at(minutes=600))
        assert state.score == 100

    def test_remainder_carries_across_calls(self):
        state = accrue(fresh(50), at(minutes=19))
        assert state.score == 50
        state = accrue(state, at(minutes=20))
        assert state.score == 51
        assert state.regen_remainder == timedelta(0)

    def test_rejects_backwards_clock(self):
        with pytest.raises(ClockSkewError):
            accrue(fresh(), T0 - timedelta(seconds=1))

    @settings(max_examples=200)
    @given(total=st.integers(min_value=0, max_value=10**6),
           split=st.integers(min_value=0, max_value=10**6))
    def test_partition_invariance(self, total, split):
        split = min(split, total)
        whole = accrue(fresh(10), T0 + timedelta(seconds=total))
        parted = accrue(fresh(10), T0 + timedelta(seconds=split))
        parted = accrue(parted, T0 + timedelta(seconds=total))
        assert whole.score == parted.score
        assert whole.regen_remainder == parted.regen_remainder


class TestApplyQuery:
    def test_ninety_minute_pause(self):
        state = EcoScoreState(score=100, last_query_at=T0, last_accrual_at=at(90))
        assert apply_query(state, SCHEDULE, at(90)).score == 93

    def test_rapid_query_clamps_at_zero(self):
        state = EcoScoreState(score=10, last_query_at=T0, last_accrual_at=T0)
        assert apply_query(state, SCHEDULE, at(seconds=30)).score == 0

    def test_first_ever_query(self):
        assert apply_query(fresh(), SCHEDULE, T0).score == 93


class TestQueryTransition:
    def test_six_hourly_cycles_reach_76(self):
        state = fresh(100)
        for i in range(1, 7):
            state = on_query(state, SCHEDULE, at(minutes=60 * i))
        assert state.score == 76

    def test_next_day_opens_at_100(self):
        state = fresh(100)
        for i in range(1, 7):
            state = on_query(state, SCHEDULE, at(minutes=60 * i))
        morning = accrue(state, at(minutes=60 * 6 + 480))
        assert morning.score == 100

    def test_regen_nets_against_penalty_before_clamp(self):
        # one hour at full score: the 3 earned points offset the 7-point penalty
        state = on_query(fresh(100), SCHEDULE, at(minutes=60))
        assert state.score == 96

    def test_scores_never_leave_range(self):
        state = fresh(0)
        state = on_query(state, SCHEDULE, at(seconds=10))
        assert state.score == 0
        state = fresh(100)
        state = on_query(state, SCHEDULE, at(minutes=60 * 24 * 7))
        assert state.score == 100


class TestImageBracket:
    @pytest.mark.parametrize("score, bracket", [
        (100, 1), (80, 1), (79.999, 2), (67, 2), (60, 2),
        (54, 3), (40, 3), (28, 4), (24, 4), (20, 4), (15, 5), (0, 5),
    ])
    def test_brackets(self, score, bracket):
        assert image_bracket(score) == bracket

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            image_bracket(101)
        with pytest.raises(ValueError):
            image_bracket(-1)


class TestProperties:
    @settings(max_examples=300)
    @given(gaps=st.lists(st.integers(min_value=0, max_value=10**6), min_size=1, max_size=30))
    def test_trajectory_bounded_and_deterministic(self, gaps):
        def run():
            state = fresh(100)
            trail = []
            t = T0
            for gap in gaps:
                t = t + timedelta(seconds=gap)
                state = on_query(state, SCHEDULE, t)
                assert 0 <= state.score <= 100
                trail.append((state.score, state.regen_remainder))
            return trail

        assert run() == run()

    @settings(max_examples=300)
    @given(score=st.integers(min_value=0, max_value=100),
           short=st.integers(min_value=0, max_value=10**5),
           extra=st.integers(min_value=0, max_value=10**5))
    def test_shorter_pause_never_scores_higher(self, score, short, extra):
        base = EcoScoreState(score=score, last_query_at=T0, last_accrual_at=T0)
        near = on_query(base, SCHEDULE, T0 + timedelta(seconds=short))
        far = on_query(base, SCHEDULE, T0 + timedelta(seconds=short + extra))
        assert near.score <= far.score
