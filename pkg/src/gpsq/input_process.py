"""Seeded bi-infinite marked arrival sequences.

A :class:`MarkedInputGenerator` produces, for any integer index ``n``
(negative indices reach into the stationary past), the pair
``(xi_n, sigma_n)``: the inter-arrival time from arrival ``n`` to ``n + 1``
and the service demand of arrival ``n``.  Two hard requirements drive the
design:

* every sample is a pure function of ``(seed, model, n + offset)`` --
  re-evaluating any index gives the same pair, in any order, at O(1) cost,
  which is what the backward constructions need;
* the time shift is an index translation: ``gen.shift(k).sample(n) ==
  gen.sample(n + k)``, exactly.

Randomness is counter-based: each index owns a block of a Philox stream
keyed by ``(seed, purpose)`` with the index in the counter, so no
sequential state exists to advance.  Variates are produced by inverse-CDF
transforms of ``Generator.random()`` to keep the mapping from bits to
values explicit and stable.

The Markov-modulated model is exactly stationary: the modulating state at
index ``n`` is resolved by coupling from the past over the grand coupling
of the chain (one shared uniform per index, inverse-CDF transition rows),
doubling the lookback until all start states coalesce.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Protocol, runtime_checkable

import numpy as np

_MASK64 = (1 << 64) - 1
_PURPOSE_CHAIN = 0
_PURPOSE_MARKS = 1

#: Lookback cap for the modulating chain's coupling-from-the-past search.
_MM_MAX_LOOKBACK = 1 << 20


def _rng_at(seed: int, purpose: int, index: int) -> np.random.Generator:
    """Fresh generator for one (seed, purpose, index) block."""
    key = np.array([seed & _MASK64, purpose], dtype=np.uint64)
    counter = np.array([0, 0, 0, index & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def splitmix64(x: int) -> int:
    """Standard 64-bit finalizer; the documented seed-splitting hash."""
    z = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def replication_seed(base_seed: int, i: int) -> int:
    """Seed of replication ``i``: ``base_seed XOR splitmix64(i)``."""
    return (base_seed ^ splitmix64(i)) & _MASK64


# ---------------------------------------------------------------------------
# distributions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Exponential:
    mean: float

    def __post_init__(self):
        if self.mean <= 0.0:
            raise ValueError(f"exponential mean must be positive, got {self.mean!r}")

    def draw(self, rng: np.random.Generator) -> float:
        return -self.mean * math.log1p(-rng.random())

    def dist_mean(self) -> float:
        return self.mean

    def quantile(self, p: float) -> float:
        return -self.mean * math.log1p(-p)

    def scaled(self, c: float) -> "Exponential":
        return Exponential(self.mean * c)


@dataclass(frozen=True)
class Deterministic:
    value: float

    def __post_init__(self):
        if self.value < 0.0:
            raise ValueError(f"deterministic value must be nonnegative, got {self.value!r}")

    def draw(self, rng: np.random.Generator) -> float:
        return self.value

    def dist_mean(self) -> float:
        return self.value

    def quantile(self, p: float) -> float:
        return self.value

    def scaled(self, c: float) -> "Deterministic":
        return Deterministic(self.value * c)


@dataclass(frozen=True)
class Uniform:
    low: float
    high: float

    def __post_init__(self):
        if not 0.0 <= self.low < self.high:
            raise ValueError(f"need 0 <= low < high, got [{self.low!r}, {self.high!r}]")

    def draw(self, rng: np.random.Generator) -> float:
        return self.low + (self.high - self.low) * rng.random()

    def dist_mean(self) -> float:
        return 0.5 * (self.low + self.high)

    def quantile(self, p: float) -> float:
        return self.low + (self.high - self.low) * p

    def scaled(self, c: float) -> "Uniform":
        return Uniform(self.low * c, self.high * c)


@dataclass(frozen=True)
class Pareto:
    """Pareto with shape ``alpha`` and minimum ``scale``; ``alpha > 1`` so
    the mean is finite."""

    alpha: float
    scale: float

    def __post_init__(self):
        if self.alpha <= 1.0:
            raise ValueError(f"pareto shape must exceed 1 for a finite mean, got {self.alpha!r}")
        if self.scale <= 0.0:
            raise ValueError(f"pareto scale must be positive, got {self.scale!r}")

    def draw(self, rng: np.random.Generator) -> float:
        return self.scale * (1.0 - rng.random()) ** (-1.0 / self.alpha)

    def dist_mean(self) -> float:
        return self.alpha * self.scale / (self.alpha - 1.0)

    def quantile(self, p: float) -> float:
        return self.scale * (1.0 - p) ** (-1.0 / self.alpha)

    def scaled(self, c: float) -> "Pareto":
        return Pareto(self.alpha, self.scale * c)


Distribution = Exponential | Deterministic | Uniform | Pareto


def dist_from_config(cfg: dict) -> Distribution:
    """Build a distribution from its config mapping, e.g.
    ``{"dist": "exp", "mean": 3}``."""
    if not isinstance(cfg, dict) or "dist" not in cfg:
        raise ValueError(f"distribution spec must be a mapping with a 'dist' key, got {cfg!r}")
    kind = cfg["dist"]
    try:
        if kind in ("exp", "exponential"):
            return Exponential(float(cfg["mean"]))
        if kind in ("det", "deterministic"):
            return Deterministic(float(cfg["value"]))
        if kind == "uniform":
            return Uniform(float(cfg["low"]), float(cfg["high"]))
        if kind == "pareto":
            return Pareto(float(cfg["alpha"]), float(cfg["scale"]))
    except KeyError as exc:
        raise ValueError(f"distribution {kind!r} is missing parameter {exc}") from None
    raise ValueError(f"unknown distribution kind {kind!r}")


def dist_to_config(d: Distribution) -> dict:
    if isinstance(d, Exponential):
        return {"dist": "exp", "mean": d.mean}
    if isinstance(d, Deterministic):
        return {"dist": "deterministic", "value": d.value}
    if isinstance(d, Uniform):
        return {"dist": "uniform", "low": d.low, "high": d.high}
    return {"dist": "pareto", "alpha": d.alpha, "scale": d.scale}


# ---------------------------------------------------------------------------
# input models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IIDModel:
    """Independent marks: ``xi_n ~ xi_dist`` and ``sigma_n ~ sigma_dist``,
    independently across indices."""

    xi_dist: Distribution
    sigma_dist: Distribution

    def __post_init__(self):
        if self.xi_dist.dist_mean() <= 0.0:
            raise ValueError("inter-arrival distribution must have positive mean")

    def sample_at(self, seed: int, index: int) -> tuple[float, float]:
        rng = _rng_at(seed, _PURPOSE_MARKS, index)
        return self.xi_dist.draw(rng), self.sigma_dist.draw(rng)

    def mean_xi(self) -> float:
        return self.xi_dist.dist_mean()

    def mean_sigma(self) -> float:
        return self.sigma_dist.dist_mean()

    def sigma_quantile(self, p: float) -> float:
        return self.sigma_dist.quantile(p)


@dataclass(frozen=True)
class DeterministicModel:
    """Constant marks ``(xi, sigma)`` at every index."""

    xi: float
    sigma: float

    def __post_init__(self):
        if self.xi <= 0.0:
            raise ValueError(f"inter-arrival time must be positive, got {self.xi!r}")
        if self.sigma < 0.0:
            raise ValueError(f"service demand must be nonnegative, got {self.sigma!r}")

    def sample_at(self, seed: int, index: int) -> tuple[float, float]:
        return self.xi, self.sigma

    def mean_xi(self) -> float:
        return self.xi

    def mean_sigma(self) -> float:
        return self.sigma

    def sigma_quantile(self, p: float) -> float:
        return self.sigma


def _chain_period(edges: list[list[int]]) -> int:
    # gcd of (depth[u] + 1 - depth[v]) over edges of a strongly
    # connected digraph, via BFS levels from state 0
    depth = {0: 0}
    frontier = [0]
    while frontier:
        nxt = []
        for u in frontier:
            for v in edges[u]:
                if v not in depth:
                    depth[v] = depth[u] + 1
                    nxt.append(v)
        frontier = nxt
    g = 0
    for u in range(len(edges)):
        for v in edges[u]:
            g = math.gcd(g, depth[u] + 1 - depth[v])
    return abs(g)


def _reachable(edges: list[list[int]], start: int) -> set[int]:
    seen = {start}
    stack = [start]
    while stack:
        u = stack.pop()
        for v in edges[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return seen


@dataclass(frozen=True)
class MarkovModulatedModel:
    """Finite ergodic chain sampled at arrival epochs, modulating the
    marks jointly: in state ``s`` the pair is drawn from
    ``(xi_dists[s], sigma_dists[s])``.

    The chain must be irreducible and aperiodic (checked at construction);
    the state at an index is the exactly stationary one, obtained by
    coupling from the past.
    """

    transition: tuple[tuple[float, ...], ...]
    xi_dists: tuple[Distribution, ...]
    sigma_dists: tuple[Distribution, ...]

    def __post_init__(self):
        k = len(self.transition)
        if k == 0:
            raise ValueError("transition matrix must be non-empty")
        if len(self.xi_dists) != k or len(self.sigma_dists) != k:
            raise ValueError("need one xi and one sigma distribution per state")
        for row in self.transition:
            if len(row) != k:
                raise ValueError("transition matrix must be square")
            if any(p < 0.0 for p in row) or abs(sum(row) - 1.0) > 1e-9:
                raise ValueError(f"transition row {row!r} is not a probability vector")
        edges = [[j for j, p in enumerate(row) if p > 0.0] for row in self.transition]
        if _reachable(edges, 0) != set(range(k)):
            raise ValueError("chain is not irreducible")
        back = [[] for _ in range(k)]
        for u in range(k):
            for v in edges[u]:
                back[v].append(u)
        if _reachable(back, 0) != set(range(k)):
            raise ValueError("chain is not irreducible")
        if _chain_period(edges) != 1:
            raise ValueError("chain is not aperiodic")
        for d in self.xi_dists:
            if d.dist_mean() <= 0.0:
                raise ValueError("inter-arrival distributions must have positive mean")

    @property
    def n_states(self) -> int:
        return len(self.transition)

    def stationary_distribution(self) -> np.ndarray:
        p = np.array(self.transition, dtype=float)
        k = p.shape[0]
        a = np.vstack([(p.T - np.eye(k)), np.ones(k)])
        b = np.zeros(k + 1)
        b[-1] = 1.0
        pi, *_ = np.linalg.lstsq(a, b, rcond=None)
        return np.clip(pi, 0.0, None)

    def _advance(self, state: int, u: float) -> int:
        acc = 0.0
        row = self.transition[state]
        for j, p in enumerate(row):
            acc += p
            if u < acc:
                return j
        return len(row) - 1

    def state_at(self, seed: int, index: int) -> int:
        return _mm_state_at(self, seed, index)

    def sample_at(self, seed: int, index: int) -> tuple[float, float]:
        s = self.state_at(seed, index)
        rng = _rng_at(seed, _PURPOSE_MARKS, index)
        return self.xi_dists[s].draw(rng), self.sigma_dists[s].draw(rng)

    def mean_xi(self) -> float:
        pi = self.stationary_distribution()
        return float(sum(pi[s] * d.dist_mean() for s, d in enumerate(self.xi_dists)))

    def mean_sigma(self) -> float:
        pi = self.stationary_distribution()
        return float(sum(pi[s] * d.dist_mean() for s, d in enumerate(self.sigma_dists)))

    def sigma_quantile(self, p: float) -> float:
        return max(d.quantile(p) for d in self.sigma_dists)


@lru_cache(maxsize=1 << 16)
def _mm_state_at(model: MarkovModulatedModel, seed: int, index: int) -> int:
    """Stationary chain state at an index via coupling from the past.

    Uses one shared uniform per index and the inverse-CDF map of each row;
    once every possible start state has been funnelled into one value the
    remaining steps evolve that single state deterministically.
    """
    lookback = 8
    while lookback <= _MM_MAX_LOOKBACK:
        states = set(range(model.n_states))
        single: int | None = None
        for m in range(index - lookback + 1, index + 1):
            u = _rng_at(seed, _PURPOSE_CHAIN, m).random()
            if single is None:
                states = {model._advance(s, u) for s in states}
                if len(states) == 1:
                    single = next(iter(states))
            else:
                single = model._advance(single, u)
        if single is not None:
            return single
        if len(states) == 1:
            return next(iter(states))
        lookback *= 2
    raise RuntimeError(
        "modulating chain did not coalesce within the lookback cap; "
        "its rows may not admit a common inverse-CDF collapse"
    )


InputModel = IIDModel | DeterministicModel | MarkovModulatedModel


# ---------------------------------------------------------------------------
# the generator
# ---------------------------------------------------------------------------


@runtime_checkable
class InputSequence(Protocol):
    """What the backward constructions need from an input source."""

    def sample(self, n: int) -> tuple[float, float]: ...

    def shift(self, k: int) -> "InputSequence": ...

    def mean_xi(self) -> float | None: ...

    def mean_sigma(self) -> float | None: ...

    def sigma_quantile(self, p: float) -> float | None: ...


@dataclass(frozen=True)
class MarkedInputGenerator:
    """Shift-indexable view of a marked input model.

    ``sample(n)`` returns ``(xi_n, sigma_n)`` as a pure function of
    ``(seed, model, n + offset)``; ``shift(k)`` translates the origin.
    """

    model: InputModel
    seed: int
    offset: int = 0

    def sample(self, n: int) -> tuple[float, float]:
        return self.model.sample_at(self.seed, n + self.offset)

    def shift(self, k: int) -> "MarkedInputGenerator":
        return replace(self, offset=self.offset + k)

    def mean_xi(self) -> float:
        return self.model.mean_xi()

    def mean_sigma(self) -> float:
        return self.model.mean_sigma()

    def sigma_quantile(self, p: float) -> float:
        return self.model.sigma_quantile(p)

    def with_seed(self, seed: int) -> "MarkedInputGenerator":
        return replace(self, seed=seed)

    def empirical_means(self, n_samples: int) -> "MeansReport":
        """Arithmetic means of the marks over indices ``0..n_samples - 1``,
        with plain standard errors."""
        if n_samples < 1:
            raise ValueError(f"n_samples must be >= 1, got {n_samples}")
        xs = np.empty(n_samples)
        ss = np.empty(n_samples)
        for n in range(n_samples):
            xs[n], ss[n] = self.sample(n)
        se_x = float(xs.std(ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else 0.0
        se_s = float(ss.std(ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else 0.0
        return MeansReport(
            mean_xi=float(xs.mean()),
            mean_sigma=float(ss.mean()),
            se_xi=se_x,
            se_sigma=se_s,
            n_samples=n_samples,
        )


@dataclass(frozen=True)
class MeansReport:
    mean_xi: float
    mean_sigma: float
    se_xi: float
    se_sigma: float
    n_samples: int


def iid_input(xi: Distribution, sigma: Distribution, seed: int) -> MarkedInputGenerator:
    return MarkedInputGenerator(model=IIDModel(xi, sigma), seed=seed)


def deterministic_input(xi: float, sigma: float, seed: int = 0) -> MarkedInputGenerator:
    return MarkedInputGenerator(model=DeterministicModel(xi, sigma), seed=seed)


def generator_from_config(cfg: dict, seed_override: int | None = None) -> MarkedInputGenerator:
    """Build a generator from a config mapping.

    Supported shapes::

        {"model": "iid", "xi": {...}, "sigma": {...}, "seed": 42}
        {"model": "deterministic", "xi": 3.0, "sigma": 1.0, "seed": 42}
        {"model": "markov_modulated", "transition": [[...], ...],
         "states": [{"xi": {...}, "sigma": {...}}, ...], "seed": 42}
    """
    if not isinstance(cfg, dict) or "model" not in cfg:
        raise ValueError(f"input spec must be a mapping with a 'model' key, got {cfg!r}")
    kind = cfg["model"]
    if kind == "iid":
        model: InputModel = IIDModel(dist_from_config(cfg["xi"]), dist_from_config(cfg["sigma"]))
    elif kind == "deterministic":
        model = DeterministicModel(float(cfg["xi"]), float(cfg["sigma"]))
    elif kind == "markov_modulated":
        states = cfg["states"]
        model = MarkovModulatedModel(
            transition=tuple(tuple(float(p) for p in row) for row in cfg["transition"]),
            xi_dists=tuple(dist_from_config(s["xi"]) for s in states),
            sigma_dists=tuple(dist_from_config(s["sigma"]) for s in states),
        )
    else:
        raise ValueError(f"unknown input model {kind!r}")
    seed = seed_override if seed_override is not None else int(cfg.get("seed", 0))
    return MarkedInputGenerator(model=model, seed=seed)


def scale_sigma(gen: MarkedInputGenerator, factor: float) -> MarkedInputGenerator:
    """Generator with every service-demand distribution scaled by
    ``factor`` (for load sweeps over families scalable by mean)."""
    if factor < 0.0:
        raise ValueError(f"scale factor must be nonnegative, got {factor!r}")
    m = gen.model
    if isinstance(m, IIDModel):
        new: InputModel = IIDModel(m.xi_dist, m.sigma_dist.scaled(factor))
    elif isinstance(m, DeterministicModel):
        new = DeterministicModel(m.xi, m.sigma * factor)
    else:
        new = MarkovModulatedModel(
            transition=m.transition,
            xi_dists=m.xi_dists,
            sigma_dists=tuple(d.scaled(factor) for d in m.sigma_dists),
        )
    return replace(gen, model=new)
