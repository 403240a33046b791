"""Teacher pools: quality scoring, threshold filtering, and pairing.

A pool keeps every sampled teacher response — invalid ones included, at
quality zero — so that filtering and matching decisions stay auditable.
Filtering only zeroes qualities; it never drops responses.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from mskd.metrics import DEFAULT_METRICS, MetricConfig, quality_score
from mskd.tasks import ParsedResponse, SupervisionExample, TaskType, parse_response


class InvalidPoolError(ValueError):
    """Pool construction was handed unusable inputs."""


class DegeneratePoolError(ValueError):
    """All matching mass vanished; skip this example for pairing."""


class NoValidTargetError(ValueError):
    """No response qualifies as an SFT target; exclude the example."""


@dataclass(frozen=True, slots=True)
class TeacherPool:
    """K parsed teacher responses for one example.

    qualities is None for open-ended tasks (no ground-truth metric exists);
    tau_applied records the threshold of the last filter pass, if any.
    """

    example_id: str
    task: TaskType
    responses: tuple[ParsedResponse, ...]
    qualities: tuple[float, ...] | None
    tau_applied: float | None = None

    @property
    def k(self) -> int:
        return len(self.responses)


@dataclass(frozen=True, slots=True)
class MatchingDistribution:
    """Categorical over pool indices used to pair student rollouts."""

    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        if any(p < 0 for p in self.probs):
            raise ValueError("matching probabilities must be non-negative")
        total = sum(self.probs)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"matching probabilities must sum to 1, got {total!r}")


def build_pool(
    ex: SupervisionExample,
    raws: Sequence[str],
    cfg: MetricConfig = DEFAULT_METRICS,
) -> TeacherPool:
    """Parse K raw responses and score them against the example's truth."""
    if len(raws) == 0:
        raise InvalidPoolError(f"example {ex.id}: empty response list")
    responses = tuple(parse_response(raw, ex.task) for raw in raws)
    if ex.task.is_closed:
        qualities = tuple(quality_score(r, ex, cfg) for r in responses)
    else:
        qualities = None
    return TeacherPool(ex.id, ex.task, responses, qualities)


def apply_filter(pool: TeacherPool, tau: float) -> TeacherPool:
    """Zero the quality of every response below tau; responses stay put."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must be in [0,1], got {tau}")
    if pool.qualities is None:
        warnings.warn(
            f"pool {pool.example_id}: filtering an open-ended pool is a no-op",
            stacklevel=2,
        )
        return pool
    effective = tuple(q if q >= tau else 0.0 for q in pool.qualities)
    return replace(pool, qualities=effective, tau_applied=tau)


def matching_distribution(pool: TeacherPool, mode: str = "quality") -> MatchingDistribution:
    """Derive pairing probabilities over pool indices.

    mode="quality": p_k proportional to (filtered) quality — the adaptive
    strategy for closed-ended pools.  mode="uniform": equal mass over the
    unfiltered support; before any filter pass (or at tau=0) that means all
    K responses, valid or not.  Open-ended pools are always uniform over K.
    """
    if mode not in ("quality", "uniform"):
        raise ValueError(f"unknown matching mode {mode!r}")
    k = pool.k
    if pool.qualities is None:
        return MatchingDistribution(tuple([1.0 / k] * k))
    if mode == "uniform":
        if pool.tau_applied is None or pool.tau_applied == 0.0:
            return MatchingDistribution(tuple([1.0 / k] * k))
        kept = {i for i, q in enumerate(pool.qualities) if q > 0.0}
        if not kept:
            raise DegeneratePoolError(f"pool {pool.example_id}: no responses survive the filter")
        p = 1.0 / len(kept)
        return MatchingDistribution(tuple(p if i in kept else 0.0 for i in range(k)))
    total = sum(pool.qualities)
    if total <= 0.0:
        raise DegeneratePoolError(f"pool {pool.example_id}: all qualities are zero")
    return MatchingDistribution(tuple(q / total for q in pool.qualities))


def sample_matches(
    dist: MatchingDistribution,
    n: int,
    rng_seed: int | np.random.SeedSequence | np.random.Generator,
) -> np.ndarray:
    """Draw n pool indices with replacement from the matching distribution."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    return rng.choice(len(dist.probs), size=n, p=np.asarray(dist.probs))


def select_sft_target(
    pool: TeacherPool,
    rng_seed: int | np.random.SeedSequence | np.random.Generator = 0,
) -> int:
    """Pick the supervised-fit target index for this pool.

    Closed-ended: argmax quality, lowest index on ties; all-zero pools have
    no usable target and raise.  Open-ended: a seeded uniform draw.
    """
    if pool.k == 0:
        raise InvalidPoolError(f"pool {pool.example_id}: empty")
    if pool.qualities is None:
        rng = (
            rng_seed
            if isinstance(rng_seed, np.random.Generator)
            else np.random.default_rng(rng_seed)
        )
        return int(rng.integers(pool.k))
    best = max(pool.qualities)
    if best <= 0.0:
        raise NoValidTargetError(f"pool {pool.example_id}: no response with positive quality")
    return pool.qualities.index(best)


def write_pool_cache(pools: Iterable[TeacherPool], path: str | Path) -> None:
    """Persist pools as JSON lines, one pool per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for pool in pools:
            obj = {
                "example_id": pool.example_id,
                "task": pool.task.value,
                "responses": [
                    {
                        "text": r.raw,
                        "outer_valid": r.outer_valid,
                        "task_valid": r.task_valid,
                        "q": None if pool.qualities is None else pool.qualities[i],
                    }
                    for i, r in enumerate(pool.responses)
                ],
                "tau_applied": pool.tau_applied,
            }
            fh.write(json.dumps(obj, sort_keys=True) + "\n")


def read_pool_cache(path: str | Path) -> list[TeacherPool]:
    """Load pools written by write_pool_cache; payloads are re-extracted."""
    pools = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            task = TaskType(obj["task"])
            responses = tuple(parse_response(r["text"], task) for r in obj["responses"])
            qs = [r["q"] for r in obj["responses"]]
            qualities = None if any(q is None for q in qs) else tuple(float(q) for q in qs)
            pools.append(
                TeacherPool(
                    example_id=str(obj["example_id"]),
                    task=task,
                    responses=responses,
                    qualities=qualities,
                    tau_applied=obj.get("tau_applied"),
                )
            )
    return pools
