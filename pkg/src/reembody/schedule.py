"""Balanced Latin-square assignment of conditions and routes to participants.

Three conditions over three ordinal positions use the classic six-row
balanced square (three forward rows plus their reversals), so every
condition occupies every position equally and first-order carryover is
balanced once the participant count is a multiple of six.  Routes rotate
against conditions so each condition is measured on each route equally often
when the count is a multiple of nine's divisor three; at 24 participants
every condition x route pair occurs exactly eight times.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

# Rows 0-2 cycle the three conditions; rows 3-5 are their reversals.
_SQUARE = (
    (0, 1, 2),
    (1, 2, 0),
    (2, 0, 1),
    (2, 1, 0),
    (0, 2, 1),
    (1, 0, 2),
)


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class Assignment:
    """One scheduled run: participant does `condition` on `route` at `position`."""

    participant: str
    participant_index: int
    position: int
    condition: str
    route: str


def participant_label(index: int) -> str:
    return f"P{index + 1:02d}"


def latin_square_schedule(
    participants: int,
    conditions: Sequence[str],
    routes: Sequence[str],
) -> list[Assignment]:
    """Ordered assignments: three rows per participant, square-balanced.

    The route for (participant p, condition c) is routes[(c + p) % 3], which
    keeps condition x route counts equal whenever p ranges over a multiple
    of three participants.
    """
    if participants <= 0:
        raise ScheduleError("participants must be positive")
    if len(conditions) != 3 or len(set(conditions)) != 3:
        raise ScheduleError("exactly three distinct conditions are required")
    if len(routes) != 3 or len(set(routes)) != 3:
        raise ScheduleError("exactly three distinct routes are required")
    out: list[Assignment] = []
    for p in range(participants):
        row = _SQUARE[p % len(_SQUARE)]
        for position, condition_index in enumerate(row):
            out.append(
                Assignment(
                    participant=participant_label(p),
                    participant_index=p,
                    position=position,
                    condition=conditions[condition_index],
                    route=routes[(condition_index + p) % 3],
                )
            )
    return out
