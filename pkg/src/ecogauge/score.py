"""Eco Score state machine: tiered per-query penalties and time regeneration.

Scores live in [0, 100]. Each detected query costs points according to how
long the user paused since their previous query (longer pause, smaller
penalty); idle time earns 1 point per 20 minutes with the sub-period
remainder carried so accrual is partition-invariant no matter how often the
state is polled.

The query transition nets regeneration earned during the pause against the
penalty before clamping. This keeps the worked dynamics exact: six hourly
queries from a full score land on 76 (each cycle is +3 regen, -7 penalty),
and an 8-hour idle earns exactly 24 points.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from datetime import datetime, timedelta, timezone
from typing import Optional, Sequence

MIN_SCORE = 0
MAX_SCORE = 100

REGEN_PERIOD = timedelta(minutes=20)

# (minimum pause, points lost). First matching tier wins; a pause of exactly
# the boundary belongs to the milder tier (>= comparison, continuous time).
DEFAULT_TIERS: tuple[tuple[timedelta, int], ...] = (
    (timedelta(minutes=60), 7),
    (timedelta(minutes=30), 8),
    (timedelta(minutes=15), 9),
    (timedelta(minutes=7), 10),
    (timedelta(minutes=3), 11),
    (timedelta(minutes=1), 12),
    (timedelta(0), 13),
)


class ClockSkewError(ValueError):
    """Raised when an event timestamp precedes the state's accrual anchor."""


@dataclass(frozen=True)
class PenaltySchedule:
    tiers: tuple[tuple[timedelta, int], ...] = DEFAULT_TIERS
    regen_period: timedelta = REGEN_PERIOD
    regen_points: int = 1

    def __post_init__(self) -> None:
        if not self.tiers:
            raise ValueError("penalty schedule needs at least one tier")
        if self.tiers[-1][0] != timedelta(0):
            raise ValueError("last tier must start at pause 0 to cover all pauses")
        for (p_prev, pen_prev), (p_next, pen_next) in zip(self.tiers, self.tiers[1:]):
            if not p_prev > p_next:
                raise ValueError("tier pauses must be strictly decreasing")
            if not pen_prev < pen_next:
                raise ValueError("tier penalties must be strictly increasing")
        if self.regen_period <= timedelta(0):
            raise ValueError("regeneration period must be positive")
        if self.regen_points <= 0:
            raise ValueError("regeneration points must be positive")

    @classmethod
    def from_tier_list(cls, tiers: Sequence[Sequence[float]], regen_minutes: float = 20,
                       regen_points: int = 1) -> "PenaltySchedule":
        """Build from config-shaped [[pause_minutes, penalty], ...] rows."""
        built = tuple((timedelta(minutes=float(m)), int(p)) for m, p in tiers)
        return cls(tiers=built, regen_period=timedelta(minutes=float(regen_minutes)),
                   regen_points=regen_points)

    def penalty_for(self, pause: Optional[timedelta]) -> int:
        """Points lost for a pause; a first-ever query charges the mildest tier."""
        if pause is None:
            return self.tiers[0][1]
        if pause < timedelta(0):
            raise ValueError("pause cannot be negative")
        for min_pause, penalty in self.tiers:
            if pause >= min_pause:
                return penalty
        return self.tiers[-1][1]  # unreachable: last tier starts at 0


@dataclass(frozen=True)
class EcoScoreState:
    score: int = MAX_SCORE
    last_query_at: Optional[datetime] = None
    last_accrual_at: Optional[datetime] = None
    regen_remainder: timedelta = timedelta(0)

    def __post_init__(self) -> None:
        if not MIN_SCORE <= self.score <= MAX_SCORE:
            raise ValueError(f"score {self.score} outside [0, 100]")
        if self.regen_remainder < timedelta(0):
            raise ValueError("regeneration remainder cannot be negative")


def _as_utc(instant: datetime) -> datetime:
    if instant.tzinfo is None:
        raise ValueError("instants must be timezone-aware")
    return instant.astimezone(timezone.utc)


def _pending_regen(state: EcoScoreState, now: datetime,
                   schedule: PenaltySchedule) -> tuple[int, timedelta]:
    """Whole points earned since the accrual anchor and the leftover duration."""
    anchor = state.last_accrual_at
    if anchor is None:
        return 0, state.regen_remainder
    if now < anchor:
        raise ClockSkewError(f"time ran backwards: {now.isoformat()} < {anchor.isoformat()}")
    total = (now - anchor) + state.regen_remainder
    periods = total // schedule.regen_period
    remainder = total - periods * schedule.regen_period
    return periods * schedule.regen_points, remainder


def accrue(state: EcoScoreState, now: datetime,
           schedule: PenaltySchedule = PenaltySchedule()) -> EcoScoreState:
    """Credit idle-time regeneration up to ``now``, clamped at 100."""
    now = _as_utc(now)
    if state.last_accrual_at is None:
        return replace(state, last_accrual_at=now)
    points, remainder = _pending_regen(state, now, schedule)
    return replace(
        state,
        score=min(MAX_SCORE, state.score + points),
        last_accrual_at=now,
        regen_remainder=remainder,
    )


def apply_query(state: EcoScoreState, schedule: PenaltySchedule,
                query_at: datetime) -> EcoScoreState:
    """Charge the pause-tier penalty for a query. Assumes accrual is current."""
    query_at = _as_utc(query_at)
    pause = query_at - state.last_query_at if state.last_query_at is not None else None
    penalty = schedule.penalty_for(pause)
    return replace(
        state,
        score=max(MIN_SCORE, state.score - penalty),
        last_query_at=query_at,
        last_accrual_at=query_at if state.last_accrual_at is None else state.last_accrual_at,
    )


def on_query(state: EcoScoreState, schedule: PenaltySchedule,
             query_at: datetime) -> EcoScoreState:
    """Atomic query transition: pending regeneration nets against the penalty.

    The single clamp at the end is what makes the hourly-cycle walkthrough
    exact; clamping the regeneration first would silently drop points earned
    while the score sat at 100.
    """
    query_at = _as_utc(query_at)
    points, remainder = _pending_regen(state, query_at, schedule)
    pause = query_at - state.last_query_at if state.last_query_at is not None else None
    penalty = schedule.penalty_for(pause)
    score = max(MIN_SCORE, min(MAX_SCORE, state.score + points - penalty))
    return EcoScoreState(
        score=score,
        last_query_at=query_at,
        last_accrual_at=query_at,
        regen_remainder=remainder,
    )


def image_bracket(score: float) -> int:
    """Map a score to one of the five 20-point display brackets (1 = best)."""
    if not MIN_SCORE <= score <= MAX_SCORE:
        raise ValueError(f"score {score} outside [0, 100]")
    if score >= 80:
        return 1
    if score >= 60:
        return 2
    if score >= 40:
        return 3
    if score >= 20:
        return 4
    return 5
