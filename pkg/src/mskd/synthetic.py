"""Synthetic teacher: a calibrated categorical over each answer space.

Base mass on candidate j is exp(concentration * score_j), where score is
the ground-truth metric of that candidate (or a latent rating for
open-ended spaces).  Sampling applies temperature and top-p on top, and a
configurable fraction of emitted responses get their envelope corrupted,
so downstream validity handling is exercised end to end.

Because the distribution is explicit, expected quality and retention
probabilities are exact — calibration bisects concentration against them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mskd.policy import nucleus, softmax
from mskd.tasks import SupervisionExample, render_payload


@dataclass
class SyntheticTeacher:
    """Per-example sampling distributions plus corruption behavior."""

    probs: dict[str, np.ndarray]
    violation_rate: dict[str, float]
    temperature: float = 1.0
    top_p: float = 0.9
    concentration: dict[str, float] | None = None


def sampling_probs(
    scores: np.ndarray, concentration: float, temperature: float = 1.0, top_p: float = 0.9
) -> np.ndarray:
    """Distribution actually sampled from, given candidate scores."""
    base = softmax(concentration * np.asarray(scores, dtype=float))
    return nucleus(base, temperature, top_p)


def expected_quality(scores: np.ndarray, probs: np.ndarray) -> float:
    return float(np.asarray(scores, dtype=float) @ np.asarray(probs, dtype=float))


def calibrate_concentration(
    scores: np.ndarray,
    target_mean: float,
    temperature: float = 1.0,
    top_p: float = 0.9,
    lo: float = -400.0,
    hi: float = 400.0,
    iters: int = 100,
) -> float:
    """Bisect concentration so expected score under sampling hits target.

    Expected score is monotone non-decreasing in concentration; targets
    outside the achievable range clip to the nearest endpoint.
    """
    scores = np.asarray(scores, dtype=float)

    def mean_at(c: float) -> float:
        return expected_quality(scores, sampling_probs(scores, c, temperature, top_p))

    if target_mean <= mean_at(lo):
        return lo
    if target_mean >= mean_at(hi):
        return hi
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mean_at(mid) < target_mean:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def retention_probability(
    scores: np.ndarray, probs: np.ndarray, tau: float, violation_rate: float
) -> float:
    """Exact P(quality >= tau) for one example's sampling distribution.

    Corrupted samples carry quality zero, which still clears a zero
    threshold — retention at tau=0 is 1 by construction.
    """
    scores = np.asarray(scores, dtype=float)
    probs = np.asarray(probs, dtype=float)
    valid_part = (1.0 - violation_rate) * float(probs[scores >= tau].sum())
    return valid_part + (violation_rate if tau <= 0.0 else 0.0)


def corrupt_envelope(raw: str) -> str:
    """Break the outer format deterministically (drop the closing tag)."""
    return raw.replace("</answer>", "")


def sample_teacher_pool(
    teacher: SyntheticTeacher,
    ex: SupervisionExample,
    k: int,
    seed: int | np.random.SeedSequence | np.random.Generator,
) -> list[str]:
    """Draw k responses: render the sampled payload, sometimes corrupted."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if ex.answer_space is None:
        raise ValueError(f"example {ex.id}: answer_space required for synthetic sampling")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    p = teacher.probs[ex.id]
    idx = rng.choice(len(p), size=k, p=p)
    corrupt = rng.random(k) < teacher.violation_rate[ex.id]
    raws = []
    for j, bad in zip(idx, corrupt):
        raw = render_payload(ex.answer_space[int(j)])
        raws.append(corrupt_envelope(raw) if bad else raw)
    return raws
