"""Seeded workload generation.

The generator must be reproducible bit-for-bit by independent implementations,
so it uses an explicitly documented splitmix-style 64-bit mix PRNG rather than
a library generator whose algorithm could differ between platforms. The
algorithm, draw order, and bounded-draw scheme are documented in
``docs/generator.md`` and summarized here:

* State update: ``state = (state + 0x9E3779B97F4A7C15) mod 2^64``; the output
  of one step mixes the new state with ``z ^= z >> 30; z *= 0xBF58476D1CE4E5B9``
  then ``z ^= z >> 27; z *= 0x94D049BB133111EB`` then ``z ^= z >> 31`` (all
  multiplications mod 2^64).
* Uniform draw from an integer range [lo, hi]: rejection sampling on 64-bit
  outputs so every value is exactly equally likely. With span = hi - lo + 1,
  draw 64-bit words until one is below ``(2^64 // span) * span``, then return
  ``lo + word % span``.
* Draw order per instance: for each job in id order 0..n-1, draw its
  interarrival gap, then its weight, then its processing time on machines
  0..m-1, in that order.

All generated data is integral, so every generated instance lies on the
integer grid required by the unit-slot accounting in the analysis module.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .instance import Instance, JobSpec, make_instance

__all__ = ["WorkloadSpec", "SplitMix64", "generate"]

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


class SplitMix64:
    """Splitmix-style 64-bit mix generator; see the module docstring."""

    def __init__(self, seed: int) -> None:
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + _GAMMA) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        return z ^ (z >> 31)

    def uniform(self, lo: int, hi: int) -> int:
        """Unbiased uniform integer in [lo, hi] via rejection sampling."""
        if lo > hi:
            raise ValueError(f"empty range [{lo}, {hi}]")
        span = hi - lo + 1
        limit = ((1 << 64) // span) * span
        while True:
            word = self.next_u64()
            if word < limit:
                return lo + word % span


@dataclass(frozen=True)
class WorkloadSpec:
    """Parameters of one generated workload; generation is a pure function of this."""

    n: int
    m: int
    p_min: int
    p_max: int
    w_min: int
    w_max: int
    mean_interarrival: int
    seed: int
    epsilon: Fraction = Fraction(1, 2)

    def __post_init__(self) -> None:
        if self.n < 0:
            raise ValueError("n must be >= 0")
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if not 1 <= self.p_min <= self.p_max:
            raise ValueError("need 1 <= p_min <= p_max")
        if not 1 <= self.w_min <= self.w_max:
            raise ValueError("need 1 <= w_min <= w_max")
        if self.mean_interarrival < 1:
            raise ValueError("mean_interarrival must be >= 1")
        if not 0 <= self.seed <= _MASK64:
            raise ValueError("seed must fit in 64 unsigned bits")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must satisfy 0 < epsilon < 1")


def generate(spec: WorkloadSpec) -> Instance:
    """Deterministically generate an instance from ``spec``.

    Releases are cumulative sums of interarrival gaps drawn uniformly from
    [0, 2 * mean_interarrival]; weights and processing times are uniform in
    their configured ranges.
    """
    rng = SplitMix64(spec.seed)
    jobs = []
    release = 0
    for job_id in range(spec.n):
        release += rng.uniform(0, 2 * spec.mean_interarrival)
        weight = rng.uniform(spec.w_min, spec.w_max)
        proc = {i: Fraction(rng.uniform(spec.p_min, spec.p_max)) for i in range(spec.m)}
        jobs.append(
            JobSpec(id=job_id, release=Fraction(release), weight=Fraction(weight), proc=proc)
        )
    return make_instance(machines=spec.m, jobs=jobs, epsilon=spec.epsilon)
