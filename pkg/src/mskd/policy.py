"""Categorical student policy over each example's enumerated answer space."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from mskd.tasks import SupervisionExample

SHARED_KEY = "__shared__"


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - np.max(logits)
    e = np.exp(z)
    return e / e.sum()


def nucleus(probs: np.ndarray, temperature: float = 1.0, top_p: float = 1.0) -> np.ndarray:
    """Temperature then top-p truncation of a categorical distribution.

    Tied probabilities at the nucleus boundary are kept in stable index
    order, so the result is deterministic for a given input.
    """
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    if not 0.0 < top_p <= 1.0:
        raise ValueError(f"top_p must be in (0,1], got {top_p}")
    p = np.asarray(probs, dtype=float)
    if temperature != 1.0:
        logp = np.where(p > 0.0, np.log(np.where(p > 0.0, p, 1.0)), -np.inf)
        p = softmax(logp / temperature) if np.any(np.isfinite(logp)) else p
        # renormalize over the original support only
        p = np.where(np.asarray(probs) > 0.0, p, 0.0)
        p = p / p.sum()
    if top_p == 1.0:
        return p
    order = np.argsort(-p, kind="stable")
    csum = np.cumsum(p[order])
    cut = int(np.searchsorted(csum, top_p)) + 1  # smallest prefix with mass >= top_p
    keep = order[:cut]
    out = np.zeros_like(p)
    out[keep] = p[keep]
    return out / out.sum()


@dataclass
class StudentPolicy:
    """Per-example logits over answer spaces; optionally one shared vector.

    In shared mode every example must use an answer space of the same size
    and the single vector under SHARED_KEY is read (and updated) for all.
    """

    logits: dict[str, np.ndarray] = field(default_factory=dict)
    shared: bool = False

    def logits_for(self, ex: SupervisionExample) -> np.ndarray:
        return self.logits[SHARED_KEY if self.shared else ex.id]

    def probs(self, ex: SupervisionExample) -> np.ndarray:
        return softmax(self.logits_for(ex))

    def sample(
        self,
        ex: SupervisionExample,
        n: int,
        rng: np.random.Generator,
        temperature: float = 1.0,
        top_p: float = 1.0,
    ) -> np.ndarray:
        p = self.probs(ex)
        if temperature != 1.0 or top_p != 1.0:
            p = nucleus(p, temperature, top_p)
        return rng.choice(len(p), size=n, p=p)

    def copy(self) -> "StudentPolicy":
        return StudentPolicy(
            logits={k: v.copy() for k, v in self.logits.items()}, shared=self.shared
        )


def init_student(examples, shared: bool = False) -> StudentPolicy:
    """Uniform (zero-logit) policy; requires answer spaces on every example."""
    sizes = {}
    for ex in examples:
        if ex.answer_space is None:
            raise ValueError(f"example {ex.id}: answer_space required for a simulated policy")
        sizes[ex.id] = len(ex.answer_space)
    if shared:
        uniq = set(sizes.values())
        if len(uniq) != 1:
            raise ValueError(f"shared policy needs equal answer-space sizes, got {sorted(uniq)}")
        return StudentPolicy(logits={SHARED_KEY: np.zeros(uniq.pop())}, shared=True)
    return StudentPolicy(logits={ex.id: np.zeros(sizes[ex.id]) for ex in examples})


def kl_divergence(p: np.ndarray, q: np.ndarray) -> float:
    """KL(p || q) over a finite space; exact summation, 0 log 0 = 0."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    mask = p > 0.0
    if np.any(q[mask] <= 0.0):
        return float("inf")
    return float(np.sum(p[mask] * (np.log(p[mask]) - np.log(q[mask]))))


def kl_gradient_logits(p: np.ndarray, q: np.ndarray) -> tuple[float, np.ndarray]:
    """KL(p || q) and its exact gradient w.r.t. the logits behind p.

    With p = softmax(theta): d KL / d theta_j = p_j ((log p_j - log q_j) - KL).
    """
    kl = kl_divergence(p, q)
    diff = np.where(p > 0.0, np.log(np.where(p > 0.0, p, 1.0)) - np.log(q), 0.0)
    return kl, p * (diff - kl)
