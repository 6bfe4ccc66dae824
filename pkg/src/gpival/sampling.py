"""Latin hypercube sampling of configuration spaces.

The unit-cube design is a maximin Latin hypercube: the best of ``B``
candidate sets of row permutations (largest minimal distance between
occupied cases, in case-index units), with each point drawn uniformly
inside its case.  Unit points are mapped affinely onto the index domain of
a space and floored onto measurable values.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .space import CONTINUOUS, DISCRETE, INDEX, POWER_SPAN_DB, ConfigSpace

INITIAL_SIZE = 400
TEST_SIZE = 50
MAXIMIN_CANDIDATES = 50
MAX_RETRIES = 100

_MODES = {"initial": 0, "test": 1}


class SamplingError(RuntimeError):
    pass


@dataclass(frozen=True)
class LhsPlan:
    space: ConfigSpace
    size: int = INITIAL_SIZE
    seed: int = 0
    mode: str = "initial"
    candidates: int = MAXIMIN_CANDIDATES

    def __post_init__(self):
        if self.size < 2:
            raise ValueError("LHS size must be at least 2")
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {sorted(_MODES)}")
        if self.candidates < 1:
            raise ValueError("need at least one candidate design")


def _maximin_cases(k: int, n: int, rng: np.random.Generator, candidates: int) -> np.ndarray:
    best, best_score = None, -1.0
    for _ in range(candidates):
        cases = np.argsort(rng.random((k, n)), axis=0)
        score = pdist(cases).min() if k > 1 else 0.0
        if score > best_score:
            best, best_score = cases, score
    return best


def lhs_unit(k: int, n: int, seed=None, candidates: int = MAXIMIN_CANDIDATES) -> np.ndarray:
    """Maximin Latin hypercube of ``k`` points in ``[0, 1]^n``.

    Every axis-aligned slab ``[i/k, (i+1)/k)`` of every dimension holds
    exactly one point.  The output is fully determined by ``(k, n, seed,
    candidates)``.
    """
    if k < 2 or n < 1:
        raise ValueError("need k >= 2 and n >= 1")
    rng = np.random.default_rng(seed)
    cases = _maximin_cases(k, n, rng, candidates)
    return (cases + rng.random((k, n))) / k


def index_domain(space: ConfigSpace, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Bounds of the continuous index domain J_X used to place LHS points.

    Discrete dimensions are widened by one ``k``-th of their span so that
    flooring gives the top raster value the same share as the others; the
    power axis is the level index ``[0, 21]``.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    lo = np.empty(space.ndim)
    hi = np.empty(space.ndim)
    for i, d in enumerate(space.dimensions):
        if d.treatment == CONTINUOUS:
            lo[i], hi[i] = d.lower, d.upper
        elif d.treatment == DISCRETE:
            lo[i], hi[i] = d.lower, d.upper + d.width / k
        elif d.treatment == INDEX:
            lo[i], hi[i] = 0.0, POWER_SPAN_DB + 1.0
    return lo, hi


def _draw(plan: LhsPlan, k: int, rng: np.random.Generator, exclude=()) -> np.ndarray:
    space = plan.space
    lo, hi = index_domain(space, plan.size)
    taken = {tuple(p) for p in exclude}
    cases = _maximin_cases(k, space.ndim, rng, plan.candidates)
    jitter = rng.random(cases.shape)
    for attempt in range(MAX_RETRIES + 1):
        unit = (cases + jitter) / k
        points = np.array([space.snap_floor(p) for p in lo + unit * (hi - lo)])
        seen = set(taken)
        bad = []
        for i, p in enumerate(points):
            key = tuple(p)
            if key in seen:
                bad.append(i)
            seen.add(key)
        if not bad:
            return points
        if attempt < MAX_RETRIES // 2:
            jitter[bad] = rng.random((len(bad), space.ndim))
        else:
            cases = _maximin_cases(k, space.ndim, rng, plan.candidates)
            jitter = rng.random(cases.shape)
    raise SamplingError(f"could not draw {k} distinct configurations in {MAX_RETRIES} retries")


def generate_initial_sample(plan: LhsPlan) -> np.ndarray:
    """Distinct, floored LHS configurations for model creation."""
    if plan.mode != "initial":
        raise ValueError("plan.mode must be 'initial'")
    rng = np.random.default_rng(np.random.SeedSequence([plan.seed, _MODES["initial"]]))
    return _draw(plan, plan.size, rng)


def generate_test_sample(plan: LhsPlan, existing=()) -> np.ndarray:
    """Locally uniform test configurations disjoint from ``existing``."""
    if plan.mode != "test":
        raise ValueError("plan.mode must be 'test'")
    rng = np.random.default_rng(np.random.SeedSequence([plan.seed, _MODES["test"]]))
    existing = np.asarray(existing, dtype=float).reshape(-1, plan.space.ndim)
    return _draw(plan, plan.size, rng, exclude=existing)
