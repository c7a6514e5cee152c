"""Makespan bounds for pipelined ring training.

A single circulating model gives no overlap (pipelined time equals the
sequential time). With one model copy in flight per round, the schedule
behaves like a flowshop of identical jobs, and the makespan is bounded
between the fully-overlapped flowshop optimum and a lockstep schedule
paced entirely by the bottleneck stage. Both bounds come with a
discrete-event simulation of the corresponding token schedule.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass


@dataclass(frozen=True)
class PipelineModel:
    compute: tuple[float, ...]  # per-node visit time, logical units
    hop: tuple[float, ...]      # per-node transfer time to its successor
    rounds: int

    def __post_init__(self):
        if len(self.compute) != len(self.hop):
            raise ValueError("compute and hop must cover the same nodes")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if any(t <= 0 for t in self.compute + self.hop):
            raise ValueError("all times must be positive")

    @property
    def stage_times(self) -> tuple[float, ...]:
        return tuple(c + h for c, h in zip(self.compute, self.hop))


@dataclass(frozen=True)
class MakespanEstimate:
    sequential: float        # one token, no overlap
    pipelined_lower: float   # fully-overlapped round waves
    pipelined_upper: float   # lockstep at the bottleneck stage cadence
    tokens_for_full_overlap: int


def estimate_pipeline_makespan(model: PipelineModel) -> MakespanEstimate:
    stages = model.stage_times
    total = sum(stages)
    bottleneck = max(stages)
    c, r = len(stages), model.rounds
    return MakespanEstimate(
        sequential=r * total,
        pipelined_lower=total + (r - 1) * bottleneck,
        pipelined_upper=total + (r - 1) * c * bottleneck,
        tokens_for_full_overlap=c,
    )


def simulate_sequential(model: PipelineModel) -> float:
    """One token visits every stage every round; nothing overlaps."""
    t = 0.0
    for _ in range(model.rounds):
        for s in model.stage_times:
            t += s
    return t


def simulate_pipelined(model: PipelineModel) -> float:
    """Event-driven flowshop: one wave per round, a stage serves one wave
    at a time in FIFO order, unlimited buffering between stages."""
    c, r = len(model.compute), model.rounds
    stages = model.stage_times
    stage_free = [0.0] * c
    wave_ready = [0.0] * r  # when each wave may enter the next stage
    events: list[tuple[float, int, int]] = [(0.0, w, 0) for w in range(r)]
    heapq.heapify(events)
    finish = 0.0
    while events:
        ready, wave, stage = heapq.heappop(events)
        start = max(ready, stage_free[stage])
        done = start + stages[stage]
        stage_free[stage] = done
        if stage + 1 < c:
            heapq.heappush(events, (done, wave, stage + 1))
        else:
            finish = max(finish, done)
    return finish


def simulate_lockstep(model: PipelineModel) -> float:
    """Worst-case schedule: the first wave traverses at true speed, every
    later round is barrier-synchronized with each hop paced by the
    bottleneck stage."""
    bottleneck = max(model.stage_times)
    t = sum(model.stage_times)
    for _ in range(model.rounds - 1):
        for _ in range(len(model.compute)):
            t += bottleneck
    return t
