"""Ground-truth references: exhaustive optimum, naive baselines, lower bound.

The exhaustive search enumerates every machine assignment and every
per-machine order, timing each order as-soon-as-possible (start at release or
at the previous completion, whichever is later). ASAP within a fixed order is
optimal for that order, and orders that place a later-released job first
express deliberate idling, so the enumeration covers all non-preemptive
schedules that matter. Costs are exact rationals; ties resolve to the
lexicographically smallest (assignment, per-machine orders) encoding.

Because the cost of an assignment splits into independent per-machine terms,
the search memoizes the best order per (machine, job set) instead of walking
the full cross product; the chosen schedule is identical to the one full
enumeration with the same tie-break would return.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import permutations, product

from .engine import EventRecord, SimOutcome
from .instance import Instance, JobSpec

__all__ = [
    "TooLarge",
    "OracleSchedule",
    "brute_force_opt",
    "baseline",
    "lower_bound_trivial",
    "BASELINE_POLICIES",
]

_ZERO = Fraction(0)

BASELINE_POLICIES = ("hdf-no-reject", "fcfs")


class TooLarge(ValueError):
    pass


@dataclass(frozen=True)
class OracleSchedule:
    """A complete non-preemptive schedule: per-machine job order, per-job
    start time, and its total weighted flow."""

    sequences: tuple[tuple[int, ...], ...]
    starts: dict[int, Fraction]
    cost: Fraction

    def assignment(self) -> dict[int, tuple[int, Fraction]]:
        """job id -> (machine, start time)."""
        out: dict[int, tuple[int, Fraction]] = {}
        for machine, seq in enumerate(self.sequences):
            for job_id in seq:
                out[job_id] = (machine, self.starts[job_id])
        return out


def _order_cost(
    order: tuple[JobSpec, ...], machine: int
) -> tuple[Fraction, list[Fraction]]:
    cost = _ZERO
    starts: list[Fraction] = []
    t = _ZERO
    for job in order:
        start = max(job.release, t)
        starts.append(start)
        t = start + job.proc[machine]
        cost += job.weight * (t - job.release)
    return cost, starts


def brute_force_opt(instance: Instance, limit: int = 7) -> OracleSchedule:
    n = len(instance.jobs)
    if n > limit:
        raise TooLarge(f"{n} jobs exceeds the exhaustive-search cap of {limit}")
    m = instance.machines
    if n == 0:
        return OracleSchedule(tuple(() for _ in range(m)), {}, _ZERO)

    jobs = list(instance.jobs)

    best_order: dict[tuple[int, frozenset[int]], tuple[Fraction, tuple[JobSpec, ...], list[Fraction]]] = {}

    def solve_machine(machine: int, members: tuple[JobSpec, ...]):
        key = (machine, frozenset(j.id for j in members))
        hit = best_order.get(key)
        if hit is not None:
            return hit
        best = None
        # Permutations of the id-sorted tuple come out in lexicographic
        # order, so keeping strict improvements picks the smallest encoding.
        for order in permutations(sorted(members, key=lambda j: j.id)):
            cost, starts = _order_cost(order, machine)
            if best is None or cost < best[0]:
                best = (cost, order, starts)
        best_order[key] = best
        return best

    best_total: Fraction | None = None
    best_pick = None
    for assignment in product(range(m), repeat=n):
        members: list[list[JobSpec]] = [[] for _ in range(m)]
        for job, machine in zip(jobs, assignment):
            members[machine].append(job)
        total = _ZERO
        picks = []
        for machine in range(m):
            cost, order, starts = solve_machine(machine, tuple(members[machine]))
            total += cost
            picks.append((order, starts))
        if best_total is None or total < best_total:
            best_total = total
            best_pick = picks
    assert best_total is not None and best_pick is not None
    starts_map: dict[int, Fraction] = {}
    sequences = []
    for order, starts in best_pick:
        sequences.append(tuple(job.id for job in order))
        for job, s in zip(order, starts):
            starts_map[job.id] = s
    return OracleSchedule(tuple(sequences), starts_map, best_total)


def lower_bound_trivial(instance: Instance) -> Fraction:
    """Every job's flow is at least its fastest processing time."""
    return sum(
        (job.weight * min(job.proc[i] for i in range(instance.machines)) for job in instance.jobs),
        _ZERO,
    )


def baseline(instance: Instance, policy: str) -> SimOutcome:
    """Online comparison run with rejection disabled.

    Dispatch goes to the machine minimizing current backlog plus the job's
    own processing time (ties to the lowest machine id). The queue order is
    the policy's: highest density first, or first-come-first-served; ties
    break by release then id. Event order within a timestamp matches the
    main simulator: completions, then arrivals by id, then starts.
    """
    if policy not in BASELINE_POLICIES:
        raise ValueError(f"unknown baseline policy {policy!r}")
    jobs = {j.id: j for j in instance.jobs}
    out = SimOutcome(instance=instance)
    out.w_traj = [[(_ZERO, _ZERO)] for _ in range(instance.machines)]
    out.r1_events = [[] for _ in range(instance.machines)]
    out.r2_events = [[] for _ in range(instance.machines)]
    out.snapshots = [[] for _ in range(instance.machines)]

    if policy == "hdf-no-reject":
        def queue_key(job_id: int, machine: int):
            job = jobs[job_id]
            return (-job.density(machine), job.release, job.id)
    else:
        def queue_key(job_id: int, machine: int):
            job = jobs[job_id]
            return (job.release, job.id)

    running: list[int | None] = [None] * instance.machines
    run_start: list[Fraction | None] = [None] * instance.machines
    pending: list[list[int]] = [[] for _ in range(instance.machines)]
    for j in instance.jobs:
        out.S[j.id] = None
        out.C[j.id] = None
        out.reject_cause[j.id] = None
        out.reject_trigger[j.id] = None

    def backlog(machine: int, now: Fraction) -> Fraction:
        total = _ZERO
        if running[machine] is not None:
            total += jobs[running[machine]].proc[machine] - (now - run_start[machine])
        for h in pending[machine]:
            total += jobs[h].proc[machine]
        return total

    cursor = 0
    order = list(instance.jobs)
    while True:
        next_arrival = order[cursor].release if cursor < len(order) else None
        completions = [
            run_start[i] + jobs[running[i]].proc[i]
            for i in range(instance.machines)
            if running[i] is not None
        ]
        next_completion = min(completions) if completions else None
        if next_arrival is None and next_completion is None:
            break
        now = min(t for t in (next_arrival, next_completion) if t is not None)
        for i in range(instance.machines):
            if running[i] is not None and run_start[i] + jobs[running[i]].proc[i] == now:
                done = running[i]
                out.events.append(EventRecord(now, "complete", job=done, machine=i))
                out.C[done] = now
                out.L[done] = now
                running[i] = None
                run_start[i] = None
        while cursor < len(order) and order[cursor].release == now:
            j = order[cursor]
            cursor += 1
            chosen = min(
                range(instance.machines),
                key=lambda i: (backlog(i, now) + j.proc[i], i),
            )
            out.machine_of[j.id] = chosen
            out.events.append(EventRecord(now, "arrival", job=j.id, machine=chosen))
            pending[chosen].append(j.id)
            pending[chosen].sort(key=lambda h: queue_key(h, chosen))
        for i in range(instance.machines):
            if running[i] is None and pending[i]:
                job_id = pending[i].pop(0)
                running[i] = job_id
                run_start[i] = now
                out.events.append(EventRecord(now, "start", job=job_id, machine=i))
                out.S[job_id] = now

    out.total_weight = instance.total_weight
    for j in instance.jobs:
        c = out.C[j.id]
        assert c is not None
        out.weighted_flow_completed += j.weight * (c - j.release)
    return out
