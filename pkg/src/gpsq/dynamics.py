"""One-step dynamics of the measure-valued processor-sharing recursion.

State is a :class:`~gpsq.measures.CountingMeasure` of remaining processing
times.  All present customers are served simultaneously at the common rate
``r(n)`` given by a :class:`~gpsq.rates.RateFunction`.  Between two arrival
epochs separated by ``x`` time units the profile evolves by pure drain:
customers leave in increasing order of remaining work, and each departure
raises the per-customer rate of the survivors.

The closed-form route (:func:`phi`) computes, for each atom index ``i``
(ascending), the per-customer work ``gamma_i`` that customer ``i`` would
need to have received by the next arrival for the drain analysis to place
its departure inside the cycle.  A customer departs iff its remaining work
is at most its ``gamma_i``; the overall per-customer drain of the cycle is
``gamma = max_i gamma_i``, and the next profile is ``mu.shift(gamma)``.

The independent check (:func:`fluid_oracle_phi`) simulates the same cycle
event by event -- advance to the next emptying atom at the current rate,
subtract the drained work from everyone, repeat -- and shares no code with
the closed form.  Their agreement is part of the acceptance suite.

:func:`simulate_queue_path` is an equivalent lazy-deletion fast path for
long runs (the per-step cost is O(log n) instead of O(n)); its agreement
with repeated :func:`step` is property-tested.
"""

from __future__ import annotations

import bisect
import heapq
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .measures import CountingMeasure, ZERO
from .rates import RateFunction

#: Tolerance for the departure test ``alpha_i <= gamma_i``: a customer
#: finishing exactly at the arrival instant counts as departed, and float
#: noise must not flip that.
CMP_TOL = 1e-9

#: Departure threshold for the event-driven oracle's drained atoms.
_ORACLE_EPS = 1e-12


def _rate_table(r: RateFunction, n: int) -> list[float]:
    # rates[k] = r(k) for k = 1..n; index 0 unused
    return [0.0] + [r(k) for k in range(1, n + 1)]


def gamma_values(mu: CountingMeasure, x: float, r: RateFunction) -> tuple[float, ...]:
    """Per-atom drain thresholds ``gamma_i`` for a cycle of length ``x``.

    ``gamma_i = r(n-i+1) * (x - c_i)`` where ``c_i`` accumulates, over the
    atoms below ``i``, the extra time those earlier departures spent being
    served at lower rates (``alpha_j * (1/r(n-j+1) - 1/r(n-j))``).
    """
    if mu.is_empty:
        raise ValueError("gamma values are undefined for the zero measure")
    if x < 0.0:
        raise ValueError(f"cycle length must be nonnegative, got {x!r}")
    atoms = mu.atoms
    n = len(atoms)
    rates = _rate_table(r, n)
    out = []
    corr = 0.0
    for i in range(1, n + 1):
        out.append(rates[n - i + 1] * (x - corr))
        if i < n:
            corr += atoms[i - 1] * (1.0 / rates[n - i + 1] - 1.0 / rates[n - i])
    return tuple(out)


def gamma_i(mu: CountingMeasure, x: float, r: RateFunction, i: int) -> float:
    """The drain threshold of the ``i``-th smallest atom (1-based)."""
    if mu.is_empty:
        raise ValueError("gamma_i is undefined for the zero measure")
    if not 1 <= i <= mu.num_atoms:
        raise ValueError(f"index {i} out of range 1..{mu.num_atoms}")
    return gamma_values(mu, x, r)[i - 1]


def last_departure_index(mu: CountingMeasure, x: float, r: RateFunction) -> int:
    """Index of the last customer departing within the cycle (0 if none).

    A customer departs iff its remaining work is at most its threshold,
    within :data:`CMP_TOL`.
    """
    gs = gamma_values(mu, x, r)
    atoms = mu.atoms
    last = 0
    for i in range(len(atoms), 0, -1):
        if atoms[i - 1] <= gs[i - 1] + CMP_TOL:
            last = i
            break
    return last


def gamma(mu: CountingMeasure, x: float, r: RateFunction) -> float:
    """Per-customer work drained over a cycle of length ``x`` (the max of
    the thresholds; never negative since the first threshold is
    ``r(n) * x``)."""
    return max(gamma_values(mu, x, r))


def phi(mu: CountingMeasure, x: float, r: RateFunction) -> CountingMeasure:
    """Profile at the end of an arrival-free cycle of length ``x``.

    The zero measure is a fixed point: nothing to drain.
    """
    if x < 0.0:
        raise ValueError(f"cycle length must be nonnegative, got {x!r}")
    if mu.is_empty:
        return ZERO
    return mu.shift(gamma(mu, x, r))


def step(
    mu: CountingMeasure, sigma: float, xi: float, r: RateFunction
) -> CountingMeasure:
    """One arrival-to-arrival step: admit a customer with service demand
    ``sigma``, then drain for the inter-arrival time ``xi``.

    Returns the profile just before the next arrival.
    """
    return phi(mu.add_atom(sigma), xi, r)


# ---------------------------------------------------------------------------
# cycle schedules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CycleSchedule:
    """Departure analysis of one arrival-free drain cycle.

    ``departure_times[i-1]`` is the instant the ``i``-th smallest atom
    would empty if no further arrival interrupted the drain.  When a cycle
    budget ``x`` is supplied the threshold fields are filled in:
    ``gamma_values`` per atom, ``last_departure_index`` (0 = nobody leaves
    within the budget), and ``gamma``, the realized per-customer drain.
    Without a budget those fields are ``None`` (they are only meaningful
    relative to a next-arrival deadline).
    """

    base_time: float
    departure_times: tuple[float, ...]
    budget: float | None = None
    gamma_values: tuple[float, ...] | None = None
    last_departure_index: int | None = None
    gamma: float | None = None

    def to_json_dict(self) -> dict:
        return {
            "base_time": self.base_time,
            "departure_times": list(self.departure_times),
            "budget": self.budget,
            "gamma_values": None if self.gamma_values is None else list(self.gamma_values),
            "last_departure_index": self.last_departure_index,
            "gamma": self.gamma,
        }


def departure_schedule(
    mu: CountingMeasure,
    r: RateFunction,
    base_time: float = 0.0,
    budget: float | None = None,
) -> CycleSchedule:
    """All theoretical departure times of ``mu`` assuming no further
    arrivals, by the induction ``T_i = T_{i-1} + (a_i - a_{i-1}) / r(n-i+1)``.

    With a ``budget`` (time to the next arrival) the schedule also carries
    the threshold analysis used by :func:`phi`.
    """
    if mu.is_empty:
        raise ValueError("departure schedule is undefined for the zero measure")
    atoms = mu.atoms
    n = len(atoms)
    rates = _rate_table(r, n)
    times = []
    t = base_time
    prev = 0.0
    for i in range(1, n + 1):
        t = t + (atoms[i - 1] - prev) / rates[n - i + 1]
        times.append(t)
        prev = atoms[i - 1]
    if budget is None:
        return CycleSchedule(base_time=base_time, departure_times=tuple(times))
    gs = gamma_values(mu, budget, r)
    return CycleSchedule(
        base_time=base_time,
        departure_times=tuple(times),
        budget=budget,
        gamma_values=gs,
        last_departure_index=last_departure_index(mu, budget, r),
        gamma=max(gs),
    )


# ---------------------------------------------------------------------------
# continuous-time trajectory
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrajectorySegment:
    """Maximal interval with a constant customer count.

    On the segment the workload is linear: ``w(t) = w_start -
    drain_rate * (t - t_start)`` with ``drain_rate = q * r(q)`` (0 when the
    system is empty).
    """

    t_start: float
    t_end: float
    q: int
    w_start: float
    drain_rate: float

    @property
    def w_end(self) -> float:
        return self.w_start - self.drain_rate * (self.t_end - self.t_start)

    def to_json_dict(self) -> dict:
        return {
            "t_start": self.t_start,
            "t_end": self.t_end,
            "q": self.q,
            "w_start": self.w_start,
            "drain_rate": self.drain_rate,
        }

    def to_csv_row(self) -> tuple:
        return (self.t_start, self.t_end, self.q, self.w_start, self.drain_rate)


TRAJECTORY_CSV_HEADER = ("t_start", "t_end", "q", "w_start", "drain_rate")


def trajectory(
    mu0: CountingMeasure,
    events: Sequence[tuple[float, float]],
    horizon: float,
    r: RateFunction,
) -> list[TrajectorySegment]:
    """Piecewise description of (customer count, workload) on [0, horizon].

    ``events`` is a list of ``(arrival_time, service_demand)`` pairs with
    strictly increasing times in ``[0, horizon)``.  The count jumps +1 at
    arrivals and -1 at departures; an arrival landing exactly on a
    departure instant is processed departure-first (the recursion's
    just-before-arrival convention).  Zero-length segments are dropped.
    """
    if horizon <= 0.0:
        raise ValueError(f"horizon must be positive, got {horizon!r}")
    prev_t = -1.0
    for t, s in events:
        if t <= prev_t:
            raise ValueError(f"arrival times must be strictly increasing, got {t!r}")
        if not 0.0 <= t < horizon:
            raise ValueError(f"arrival time {t!r} outside [0, horizon)")
        if s < 0.0:
            raise ValueError(f"service demand must be nonnegative, got {s!r}")
        prev_t = t

    atoms = [a for a in mu0.atoms if a > 0.0]
    segments: list[TrajectorySegment] = []
    t = 0.0
    ev = 0
    while t < horizon:
        next_arrival = events[ev][0] if ev < len(events) else float("inf")
        if atoms:
            q = len(atoms)
            rate = r(q)
            t_next = min(t + atoms[0] / rate, next_arrival, horizon)
            drain = q * rate
        else:
            q = 0
            rate = 0.0
            t_next = min(next_arrival, horizon)
            drain = 0.0
        if t_next > t:
            segments.append(
                TrajectorySegment(
                    t_start=t,
                    t_end=t_next,
                    q=q,
                    w_start=sum(atoms),
                    drain_rate=drain,
                )
            )
            if atoms:
                d = rate * (t_next - t)
                atoms = [a - d for a in atoms]
        t = t_next
        # departures first, then the arrival sharing the same instant
        while atoms and atoms[0] <= _ORACLE_EPS:
            atoms.pop(0)
        if ev < len(events) and events[ev][0] == t and t < horizon:
            bisect.insort(atoms, events[ev][1])
            ev += 1
    return segments


# ---------------------------------------------------------------------------
# independent fluid oracle
# ---------------------------------------------------------------------------


def fluid_oracle_phi(
    mu: CountingMeasure, x: float, r: RateFunction
) -> CountingMeasure:
    """Event-driven drain of one cycle, written independently of
    :func:`phi` for cross-checking.

    Repeatedly: find how long the smallest remaining atom survives at the
    current per-customer rate, advance by the smaller of that and the
    remaining budget, subtract the drained work from every atom, drop the
    emptied ones.  No threshold formulas, no shift operator.
    """
    if x < 0.0:
        raise ValueError(f"cycle length must be nonnegative, got {x!r}")
    atoms = [a for a in mu.atoms if a > 0.0]
    budget = x
    while atoms and budget > 0.0:
        rate = r(len(atoms))
        dt = min(atoms[0] / rate, budget)
        d = rate * dt
        atoms = [a - d for a in atoms]
        budget -= dt
        while atoms and atoms[0] <= _ORACLE_EPS:
            atoms.pop(0)
    return CountingMeasure(a for a in atoms if a > _ORACLE_EPS)


# ---------------------------------------------------------------------------
# long-run fast path
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QueuePath:
    """Per-epoch observables of a forward run.

    ``q[n]`` and ``w[n]`` are the customer count and workload just before
    arrival ``n`` (so ``q[0]``/``w[0]`` describe the initial profile).
    ``final_profile`` is the profile just before arrival ``n_steps``.
    """

    q: np.ndarray
    w: np.ndarray
    final_profile: CountingMeasure


def simulate_queue_path(
    gen,
    r: RateFunction,
    n_steps: int,
    initial: CountingMeasure = ZERO,
    start_index: int = 0,
) -> QueuePath:
    """Run ``n_steps`` arrival-to-arrival steps of the recursion.

    Equivalent to iterating :func:`step` with the marks of ``gen`` at
    indices ``start_index, start_index + 1, ...``, but using a lazy global
    drain offset and a min-heap of absolute finish levels, so each step
    costs O(log n) plus one event per departure.  Intended for the long
    statistical runs where the per-step closed form would be quadratic
    overall.
    """
    if n_steps < 0:
        raise ValueError(f"n_steps must be nonnegative, got {n_steps}")
    offset = 0.0  # cumulative per-customer drained work since the start
    heap = [a for a in initial.atoms if a > 0.0]
    heapq.heapify(heap)
    total = sum(heap)  # sum of absolute levels currently in the heap
    q = np.empty(n_steps + 1, dtype=np.int64)
    w = np.empty(n_steps + 1, dtype=np.float64)
    rate_cache: dict[int, float] = {}

    def rate_at(n: int) -> float:
        v = rate_cache.get(n)
        if v is None:
            v = r(n)
            rate_cache[n] = v
        return v

    for n in range(n_steps):
        q[n] = len(heap)
        w[n] = total - offset * len(heap)
        xi, sigma = gen.sample(start_index + n)
        level = sigma + offset
        heapq.heappush(heap, level)
        total += level
        b = xi
        while heap and b > 0.0:
            rate = rate_at(len(heap))
            dt = (heap[0] - offset) / rate
            if dt <= b:
                b -= dt
                offset = heap[0]
                total -= heapq.heappop(heap)
            else:
                offset += rate * b
                b = 0.0
        while heap and heap[0] - offset <= 0.0:
            total -= heapq.heappop(heap)
    q[n_steps] = len(heap)
    w[n_steps] = total - offset * len(heap)
    final = CountingMeasure(v - offset for v in heap)
    return QueuePath(q=q, w=w, final_profile=final)
