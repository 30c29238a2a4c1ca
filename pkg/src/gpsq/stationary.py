"""Backward constructions: stationary profiles and perfect sampling.

Everything here scans the input sequence backward from the origin.  The
three scalar/measure constructions are

* :func:`loynes_L` -- the all-time record ``[sup_j (sigma_{-j} -
  sum_{i<=j} xi_{-i})]^+``: the remaining work, at the origin, of the past
  customer who reaches furthest into the future when every customer is
  served at unit rate.  It solves ``L . theta = [max(L, sigma) - xi]^+``.
* :func:`stationary_profile_gginf` -- the explicit stationary profile of
  the infinite-server system: one atom ``sigma_{-i} - sum_{j<=i} xi_{-j}``
  for every past customer still unfinished at the origin.
* :func:`lindley_W` -- the stationary workload of a single server that
  drains at the constant rate ``K_r`` whenever busy:
  ``W . theta = [W + sigma - K_r xi]^+``.

:func:`backward_coupling_ps` turns the Lindley workload into a perfect
sampler for the processor-sharing profile: the profile's workload is
dominated by ``W`` (the rate floor guarantees at least ``K_r`` of
throughput), so any past epoch where ``W = 0`` forces an empty profile;
restarting the recursion empty at such an epoch and iterating forward to
the origin yields an exact draw from the stationary profile law.

A backward scan over an infinite past is only computable with a stopping
rule.  The rules used here are explicit and reported: the record
constructions stop once the accumulated inter-arrival mass provably (up to
a declared service-demand quantile) exceeds any future candidate; the
Lindley scan stops after a configurable run of non-improving partial sums
that has also fallen a configurable margin below the running record.
Every result says whether it was certified or the horizon was exhausted --
"unstable" and "did not look far enough" are never conflated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .dynamics import step
from .input_process import MarkedInputGenerator, replication_seed
from .measures import ATOM_TOL, ZERO, CountingMeasure
from .rates import RateFunction, validate

#: Per-draw tail probability the certification rules are allowed to ignore.
DEFAULT_QUANTILE = 1.0 - 1e-9


@dataclass(frozen=True)
class LoynesResult:
    """Value of a backward record construction plus its diagnostics.

    ``argmax_index`` is the backward index ``j >= 1`` achieving the record
    (``None`` when the record is the empty-past value 0).  ``converged``
    means the stopping rule certified that deeper terms cannot raise the
    value; otherwise the horizon was exhausted and the value is a lower
    bound.
    """

    value: float
    argmax_index: int | None
    converged: bool
    iterations: int
    tail_bound_note: str

    def to_json_dict(self) -> dict:
        return {
            "value": self.value,
            "argmax_index": self.argmax_index,
            "converged": self.converged,
            "iterations": self.iterations,
            "tail_bound_note": self.tail_bound_note,
        }


@dataclass(frozen=True)
class StationaryProfileResult:
    """Truncated backward evaluation of the infinite-server profile."""

    profile: CountingMeasure
    converged: bool
    iterations: int
    truncation_note: str


@dataclass(frozen=True)
class CouplingReport:
    """Outcome of a perfect-sampling run.

    ``regeneration_index`` is the (nonpositive) epoch found with zero
    Lindley workload; ``stationary_profile`` the exact stationary draw at
    index 0.  ``horizon_exhausted`` is set when no certified regeneration
    epoch exists within the lookback.
    """

    coupled: bool
    regeneration_index: int | None
    stationary_profile: CountingMeasure | None
    iterations_used: int
    horizon_exhausted: bool

    def to_json_dict(self) -> dict:
        return {
            "coupled": self.coupled,
            "regeneration_index": self.regeneration_index,
            "stationary_profile": None
            if self.stationary_profile is None
            else list(self.stationary_profile.atoms),
            "iterations_used": self.iterations_used,
            "horizon_exhausted": self.horizon_exhausted,
        }


def _sigma_quantile(gen, p: float) -> float | None:
    try:
        return gen.sigma_quantile(p)
    except (AttributeError, NotImplementedError):
        return None


def loynes_L(
    gen,
    max_lookback: int = 100_000,
    quantile: float = DEFAULT_QUANTILE,
) -> LoynesResult:
    """Backward record ``[sup_{1<=j} (sigma_{-j} - sum_{i<=j} xi_{-i})]^+``.

    Stops early once ``sum xi - best`` exceeds the service-demand quantile
    bound: no deeper candidate can then beat the record, since candidates
    shrink by the ever-growing inter-arrival mass.
    """
    if max_lookback < 1:
        raise ValueError(f"max_lookback must be >= 1, got {max_lookback}")
    qp = _sigma_quantile(gen, quantile)
    best = -math.inf
    best_j: int | None = None
    sum_xi = 0.0
    converged = False
    j = 0
    for j in range(1, max_lookback + 1):
        xi, sigma = gen.sample(-j)
        sum_xi += xi
        cand = sigma - sum_xi
        if cand > best:
            best = cand
            best_j = j
        if qp is not None and qp - sum_xi <= best:
            converged = True
            break
    value = max(best, 0.0)
    note = (
        f"certified: sum(xi) - best exceeds the {quantile} service quantile ({qp})"
        if converged
        else f"horizon exhausted at lookback {max_lookback}"
        + ("" if qp is not None else " (no quantile bound available)")
    )
    return LoynesResult(
        value=value,
        argmax_index=best_j if best > 0.0 else None,
        converged=converged,
        iterations=j,
        tail_bound_note=note,
    )


def stationary_profile_gginf(
    gen,
    max_lookback: int = 100_000,
    quantile: float = DEFAULT_QUANTILE,
) -> StationaryProfileResult:
    """Stationary infinite-server profile by direct backward evaluation.

    Past customer ``-i`` contributes an atom ``sigma_{-i} - sum_{j<=i}
    xi_{-j}`` whenever that is nonnegative (it is still in service at the
    origin).  The scan stops once the accumulated inter-arrival mass
    exceeds the service-demand quantile bound, past which no further
    customer can still be present.
    """
    if max_lookback < 1:
        raise ValueError(f"max_lookback must be >= 1, got {max_lookback}")
    qp = _sigma_quantile(gen, quantile)
    atoms: list[float] = []
    sum_xi = 0.0
    converged = False
    i = 0
    for i in range(1, max_lookback + 1):
        xi, sigma = gen.sample(-i)
        sum_xi += xi
        v = sigma - sum_xi
        if v >= 0.0:
            atoms.append(v)
        if qp is not None and sum_xi > qp:
            converged = True
            break
    note = (
        f"certified: accumulated inter-arrival mass {sum_xi} exceeds the "
        f"{quantile} service quantile ({qp})"
        if converged
        else f"horizon exhausted at lookback {max_lookback}; atoms may be missing"
    )
    return StationaryProfileResult(
        profile=CountingMeasure(atoms),
        converged=converged,
        iterations=i,
        truncation_note=note,
    )


def lindley_W(
    gen,
    k_r: float,
    max_lookback: int = 100_000,
    improvement_window: int | None = None,
    drop_margin: float | None = None,
) -> LoynesResult:
    """Stationary workload of the constant-drain bound:
    ``[sup_j sum_{i<=j} (sigma_{-i} - K_r xi_{-i})]^+``.

    Certification is heuristic under negative drift: stop once the partial
    sum has not improved the record for ``improvement_window`` consecutive
    terms and sits at least ``drop_margin`` below it.  Defaults derive from
    the drift estimate (window ``10 / (1 - rho_hat)``, margin ``50 * (K_r
    E[xi] - E[sigma])``); both are configurable, and with nonnegative
    drift there is no certification, only horizon exhaustion.
    """
    if k_r <= 0.0:
        raise ValueError(f"drain rate must be positive, got {k_r!r}")
    if max_lookback < 1:
        raise ValueError(f"max_lookback must be >= 1, got {max_lookback}")
    mean_xi = mean_sigma = None
    try:
        mean_xi, mean_sigma = gen.mean_xi(), gen.mean_sigma()
    except (AttributeError, NotImplementedError):
        pass
    if mean_xi is not None and mean_sigma is not None:
        gap = k_r * mean_xi - mean_sigma
        rho_hat = mean_sigma / (k_r * mean_xi)
        if improvement_window is None and rho_hat < 1.0:
            improvement_window = math.ceil(10.0 / (1.0 - rho_hat))
        if drop_margin is None and gap > 0.0:
            drop_margin = 50.0 * gap
    s = 0.0
    best = -math.inf
    best_j = 0
    since_improve = 0
    converged = False
    j = 0
    for j in range(1, max_lookback + 1):
        xi, sigma = gen.sample(-j)
        s += sigma - k_r * xi
        if s > best:
            best = s
            best_j = j
            since_improve = 0
        else:
            since_improve += 1
        if (
            improvement_window is not None
            and since_improve >= improvement_window
            and (drop_margin is None or best - s >= drop_margin)
        ):
            converged = True
            break
    note = (
        f"certified: no record improvement for {since_improve} terms, "
        f"partial sum {best - s} below the record"
        if converged
        else f"horizon exhausted at lookback {max_lookback}"
        + (
            ""
            if improvement_window is not None
            else " (no negative-drift estimate; cannot certify)"
        )
    )
    return LoynesResult(
        value=max(best, 0.0),
        argmax_index=best_j if best > 0.0 else None,
        converged=converged,
        iterations=j,
        tail_bound_note=note,
    )


def _renovation_scan_epochs(max_lookback: int) -> list[int]:
    # every epoch in the near past, then a doubling tail; idle events at
    # nearby epochs are strongly correlated, so the consecutive prefix is
    # what buys coupling probability and the doubling reaches deep cheaply
    out = [m for m in range(0, 33) if m <= max_lookback]
    m = 64
    while m <= max_lookback:
        out.append(m)
        m *= 2
    return out


def backward_coupling_ps(
    gen,
    r: RateFunction,
    max_lookback: int = 10_000,
    improvement_window: int | None = None,
    drop_margin: float | None = None,
    validate_n_max: int = 128,
) -> CouplingReport:
    """Exact draw from the stationary processor-sharing profile.

    Scans candidate epochs ``-m`` (doubling schedule) for one whose
    Lindley workload at drain rate ``K_r`` is certified zero; from such an
    epoch the stationary profile is empty, so iterating the recursion
    forward from the zero measure reproduces the stationary profile at the
    origin exactly.  Fails closed: without a certified regeneration epoch
    within the lookback the report says so instead of guessing.
    """
    report = validate(r, n_max=validate_n_max)
    if not report.ok:
        raise ValueError(
            "rate function fails validation: " + "; ".join(report.violations)
        )
    if r.declared_floor <= 0.0:
        raise ValueError("perfect sampling requires a positive throughput floor")
    iterations = 0
    for m in _renovation_scan_epochs(max_lookback):
        res = lindley_W(
            gen.shift(-m),
            r.declared_floor,
            max_lookback=max_lookback,
            improvement_window=improvement_window,
            drop_margin=drop_margin,
        )
        iterations += res.iterations
        if res.converged and res.value <= ATOM_TOL:
            mu = ZERO
            for k in range(-m, 0):
                xi, sigma = gen.sample(k)
                mu = step(mu, sigma, xi, r)
            iterations += m
            return CouplingReport(
                coupled=True,
                regeneration_index=-m,
                stationary_profile=mu,
                iterations_used=iterations,
                horizon_exhausted=False,
            )
    return CouplingReport(
        coupled=False,
        regeneration_index=None,
        stationary_profile=None,
        iterations_used=iterations,
        horizon_exhausted=True,
    )


@dataclass(frozen=True)
class StabilityReport:
    """Drift comparison ``E[sigma]`` vs ``K_r E[xi]`` with a no-decision
    band of three standard errors."""

    verdict: str  # "stable" | "unstable" | "inconclusive"
    mean_xi: float
    mean_sigma: float
    floor: float
    margin: float  # K_r * mean_xi - mean_sigma
    se_margin: float
    n_samples: int


def check_stability(gen, r: RateFunction, n_samples: int = 10_000) -> StabilityReport:
    """Empirical verdict on ``E[sigma] < K_r E[xi]``."""
    rep = gen.empirical_means(n_samples)
    k_r = r.declared_floor
    margin = k_r * rep.mean_xi - rep.mean_sigma
    se = math.hypot(k_r * rep.se_xi, rep.se_sigma)
    if margin > 3.0 * se:
        verdict = "stable"
    elif margin < -3.0 * se:
        verdict = "unstable"
    else:
        verdict = "inconclusive"
    return StabilityReport(
        verdict=verdict,
        mean_xi=rep.mean_xi,
        mean_sigma=rep.mean_sigma,
        floor=k_r,
        margin=margin,
        se_margin=se,
        n_samples=n_samples,
    )


def forward_couple_two(
    gen,
    r: RateFunction,
    zeta1: CountingMeasure,
    zeta2: CountingMeasure,
    horizon: int,
) -> int | None:
    """First index at which the recursion started from ``zeta1`` and from
    ``zeta2`` on the same input path merge (then, by determinism, they
    agree forever); ``None`` if they have not merged within the horizon.

    For infinite-server runs the merge-to-stationarity guarantee needs the
    initial largest atom not to exceed the backward record; that cannot be
    checked here without computing the record first, so it is the caller's
    lookout.
    """
    x, y = zeta1, zeta2
    for n in range(horizon + 1):
        if x.tv_distance(y) == 0:
            return n
        if n == horizon:
            break
        xi, sigma = gen.sample(n)
        x = step(x, sigma, xi, r)
        y = step(y, sigma, xi, r)
    return None


def backward_iterate(
    gen, r: RateFunction, n_back: int, initial: CountingMeasure = ZERO
) -> CountingMeasure:
    """Start the recursion from ``initial`` at index ``-n_back`` and return
    the profile at index 0 (one term of the backward scheme)."""
    if n_back < 0:
        raise ValueError(f"n_back must be nonnegative, got {n_back}")
    mu = initial
    for k in range(-n_back, 0):
        xi, sigma = gen.sample(k)
        mu = step(mu, sigma, xi, r)
    return mu


@dataclass(frozen=True)
class ZeroRecordEstimate:
    """Monte-Carlo estimate of the probability that the backward record is
    zero (the uniqueness/coupling condition of the infinite-server
    construction)."""

    p_zero: float
    se: float
    n_seeds: int
    n_converged: int


def estimate_prob_L_zero(
    gen: MarkedInputGenerator,
    n_seeds: int = 200,
    max_lookback: int = 100_000,
) -> ZeroRecordEstimate:
    """Estimate ``P(L = 0)`` over independent replication seeds derived
    from the generator's seed."""
    if n_seeds < 1:
        raise ValueError(f"n_seeds must be >= 1, got {n_seeds}")
    zeros = 0
    converged = 0
    for i in range(n_seeds):
        g = gen.with_seed(replication_seed(gen.seed, i))
        res = loynes_L(g, max_lookback=max_lookback)
        if res.converged:
            converged += 1
            if res.value <= ATOM_TOL:
                zeros += 1
    if converged == 0:
        return ZeroRecordEstimate(p_zero=float("nan"), se=float("nan"), n_seeds=n_seeds, n_converged=0)
    p = zeros / converged
    se = math.sqrt(max(p * (1.0 - p), 1e-12) / converged)
    return ZeroRecordEstimate(p_zero=p, se=se, n_seeds=n_seeds, n_converged=converged)
