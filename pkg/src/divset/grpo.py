"""Group-relative policy optimization over a finite embedding vocabulary.

The policy is a linear softmax over three context features per vocabulary
item (query cosine, best reference-member cosine, a constant) plus a
per-candidate bias. It is deliberately small: every quantity in the
clipped-surrogate objective, including the exact discrete KL penalty and
the full parameter gradient, is computable in closed form and checkable
against finite differences.

Training follows the group-relative scheme: sync the old policy, sample a
group of candidates, score each with the composite diversity-plus-relevance
reward against the current reference context, normalize rewards into
advantages within the group, and ascend the surrogate gradient. Everything
is deterministic given the config seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .embeddings import Embedding, EmbeddingSet
from .errors import NumericalError, ValidationError
from .kernel import UNIT_NORM_TOL
from .rewards import ReferenceSet, composite_reward

N_FEATURES = 3

# Rewards with spread below this are treated as constant (zero advantages).
ZERO_STD_TOL = 1e-12


@dataclass(eq=False)
class ToyPolicy:
    """Softmax policy over a fixed vocabulary of candidate embeddings.

    Logit of candidate c in context (query, ref):

        theta[0] * cos(c, query) + theta[1] * max_g cos(c, g) + theta[2] + bias[c]

    with the max over an empty reference set defined as 0. theta[2] shifts
    all logits equally and therefore never changes the distribution; it is
    kept so the feature map stays a plain affine map.
    """

    vocabulary: EmbeddingSet
    theta: np.ndarray | None = None
    bias: np.ndarray | None = None

    def __post_init__(self) -> None:
        if len(self.vocabulary) == 0:
            raise ValidationError("policy vocabulary must be non-empty")
        norms = np.linalg.norm(self.vocabulary.matrix(), axis=1)
        bad = np.flatnonzero(np.abs(norms - 1.0) > UNIT_NORM_TOL)
        if bad.size:
            raise ValidationError(
                f"vocabulary item {self.vocabulary[int(bad[0])].id!r} is not unit-normalized"
            )
        if self.theta is None:
            self.theta = np.zeros(N_FEATURES)
        if self.bias is None:
            self.bias = np.zeros(len(self.vocabulary))
        self.theta = np.asarray(self.theta, dtype=float)
        self.bias = np.asarray(self.bias, dtype=float)
        if self.theta.shape != (N_FEATURES,):
            raise ValidationError(f"theta must have shape ({N_FEATURES},), got {self.theta.shape}")
        if self.bias.shape != (len(self.vocabulary),):
            raise ValidationError(
                f"bias must have one entry per vocabulary item, got shape {self.bias.shape}"
            )
        if not (np.all(np.isfinite(self.theta)) and np.all(np.isfinite(self.bias))):
            raise ValidationError("policy parameters must be finite")

    def copy(self) -> "ToyPolicy":
        # bypass __init__: the copied state is already validated
        clone = object.__new__(ToyPolicy)
        clone.vocabulary = self.vocabulary
        clone.theta = self.theta.copy()
        clone.bias = self.bias.copy()
        return clone


def context_features(policy: ToyPolicy, query: Embedding, ref: ReferenceSet) -> np.ndarray:
    """Per-candidate feature rows [cos to query, max cos to ref member, 1]."""
    V = policy.vocabulary.matrix()
    f = np.ones((len(policy.vocabulary), N_FEATURES))
    f[:, 0] = V @ query.vector
    if len(ref):
        f[:, 1] = np.max(V @ ref.members.matrix().T, axis=1)
    else:
        f[:, 1] = 0.0
    return f


def policy_probs(policy: ToyPolicy, query: Embedding, ref: ReferenceSet) -> np.ndarray:
    """Softmax action distribution over the vocabulary in the given context."""
    logits = context_features(policy, query, ref) @ policy.theta + policy.bias
    shifted = logits - np.max(logits)
    weights = np.exp(shifted)
    return weights / weights.sum()


@dataclass(eq=False)
class CandidateGroup:
    """One group of sampled candidates with rewards and advantages."""

    indices: np.ndarray
    items: list[Embedding]
    old_log_probs: np.ndarray
    rewards: np.ndarray | None = None
    advantages: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.indices = np.asarray(self.indices, dtype=int)
        self.old_log_probs = np.asarray(self.old_log_probs, dtype=float)
        if self.group_size < 2:
            raise ValidationError(f"group size must be at least 2, got {self.group_size}")
        if len(self.items) != self.group_size or self.old_log_probs.shape != (self.group_size,):
            raise ValidationError("group fields must all have length G")

    @property
    def group_size(self) -> int:
        return int(self.indices.size)


def sample_group(
    policy: ToyPolicy,
    query: Embedding,
    ref: ReferenceSet,
    group_size: int,
    rng_seed: int,
) -> CandidateGroup:
    """Draw G candidates i.i.d. (with replacement) from the policy.

    Deterministic for a fixed seed; log-probabilities under the sampling
    policy are recorded at draw time.
    """
    if group_size < 2:
        raise ValidationError(f"group size must be at least 2, got {group_size}")
    probs = policy_probs(policy, query, ref)
    rng = np.random.default_rng(rng_seed)
    indices = rng.choice(len(probs), size=group_size, replace=True, p=probs)
    return CandidateGroup(
        indices=indices,
        items=[policy.vocabulary[int(i)] for i in indices],
        old_log_probs=np.log(probs[indices]),
    )


def compute_advantages(rewards) -> np.ndarray:
    """Group-normalized advantages (r - mean) / std, population std.

    A group with (numerically) constant rewards gets all-zero advantages
    instead of dividing by zero.
    """
    r = np.asarray(rewards, dtype=float)
    if r.ndim != 1 or r.size < 2:
        raise ValidationError("advantage normalization needs at least two rewards")
    std = float(r.std())
    if std < ZERO_STD_TOL:
        return np.zeros_like(r)
    return (r - r.mean()) / std


def exact_kl(p: np.ndarray, q: np.ndarray) -> float:
    """Discrete KL(p || q); infinite when q has a zero where p does not."""
    support = p > 0
    with np.errstate(divide="ignore"):
        terms = p[support] * (np.log(p[support]) - np.log(q[support]))
    return float(terms.sum())


def policy_entropy(p: np.ndarray) -> float:
    """Shannon entropy in nats of a probability vector."""
    support = p > 0
    return float(-(p[support] * np.log(p[support])).sum())


def _clipped_terms(
    policy: ToyPolicy,
    old: ToyPolicy,
    group: CandidateGroup,
    query: Embedding,
    ref: ReferenceSet,
    clip_epsilon: float,
):
    if group.advantages is None:
        raise ValidationError("group advantages must be computed before the surrogate")
    p_new = policy_probs(policy, query, ref)
    p_old = policy_probs(old, query, ref)
    sampled_old = p_old[group.indices]
    if np.any(sampled_old == 0.0):
        raise NumericalError("old policy assigns zero probability to a sampled action")
    ratios = p_new[group.indices] / sampled_old
    adv = group.advantages
    unclipped = ratios * adv
    clipped = np.clip(ratios, 1.0 - clip_epsilon, 1.0 + clip_epsilon) * adv
    return p_new, ratios, unclipped, clipped


def surrogate_objective(
    policy: ToyPolicy,
    old: ToyPolicy,
    ref_policy: ToyPolicy,
    group: CandidateGroup,
    query: Embedding,
    ref: ReferenceSet,
    clip_epsilon: float,
    kl_beta: float,
) -> float:
    """Clipped importance-ratio surrogate minus the KL penalty.

    (1/G) sum_i min(rho_i A_i, clip(rho_i, 1-eps, 1+eps) A_i)
        - beta * KL(pi_theta || pi_ref)

    with rho_i the new/old probability ratio of the sampled action and the
    KL taken exactly over the vocabulary in the current context.
    """
    p_new, _, unclipped, clipped = _clipped_terms(policy, old, group, query, ref, clip_epsilon)
    p_ref = policy_probs(ref_policy, query, ref)
    return float(np.minimum(unclipped, clipped).mean()) - kl_beta * exact_kl(p_new, p_ref)


def surrogate_gradient(
    policy: ToyPolicy,
    old: ToyPolicy,
    ref_policy: ToyPolicy,
    group: CandidateGroup,
    query: Embedding,
    ref: ReferenceSet,
    clip_epsilon: float,
    kl_beta: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Analytic gradient of surrogate_objective w.r.t. (theta, bias).

    Each sampled term contributes gradient only while its unclipped value
    is the minimum; where the clipped branch is strictly active the term is
    locally constant in the parameters. Through the softmax,

        d rho_i / d logits = rho_i * (onehot(a_i) - p)
        d KL / d logits    = p * (log p - log p_ref - KL)

    and theta/bias gradients follow by the chain rule through the affine
    logit map.
    """
    p_new, ratios, unclipped, clipped = _clipped_terms(policy, old, group, query, ref, clip_epsilon)
    p_ref = policy_probs(ref_policy, query, ref)
    features = context_features(policy, query, ref)
    G = group.group_size

    active = unclipped <= clipped
    coef = np.where(active, group.advantages * ratios, 0.0) / G
    g_logits = np.zeros_like(p_new)
    np.add.at(g_logits, group.indices, coef)
    g_logits -= coef.sum() * p_new

    if kl_beta != 0.0:
        support = p_new > 0
        s = np.zeros_like(p_new)
        with np.errstate(divide="ignore"):
            s[support] = np.log(p_new[support]) - np.log(p_ref[support])
        kl = float((p_new[support] * s[support]).sum())
        g_logits -= kl_beta * p_new * (s - kl)

    return features.T @ g_logits, g_logits


@dataclass
class GrpoConfig:
    """Hyperparameters of one training run; every field is validated."""

    group_size: int = 8
    clip_epsilon: float = 0.2
    kl_beta: float = 0.04
    learning_rate: float = 0.01
    iterations: int = 1200
    lambda_div: float = 0.5
    lambda_rel: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if int(self.group_size) != self.group_size or self.group_size < 2:
            raise ValidationError(f"group_size must be an integer >= 2, got {self.group_size}")
        if not 0.0 < self.clip_epsilon < 1.0:
            raise ValidationError(
                f"clip_epsilon must lie in the open interval (0, 1), got {self.clip_epsilon}"
            )
        if self.kl_beta < 0:
            raise ValidationError(f"kl_beta must be >= 0, got {self.kl_beta}")
        if self.learning_rate <= 0:
            raise ValidationError(f"learning_rate must be > 0, got {self.learning_rate}")
        if int(self.iterations) != self.iterations or self.iterations < 0:
            raise ValidationError(f"iterations must be a non-negative integer, got {self.iterations}")
        if self.lambda_div < 0 or self.lambda_rel < 0:
            raise ValidationError("lambda_div and lambda_rel must be non-negative")
        if self.lambda_div == 0 and self.lambda_rel == 0:
            raise ValidationError("lambda_div and lambda_rel must not both be zero")
        if int(self.seed) != self.seed:
            raise ValidationError(f"seed must be an integer, got {self.seed}")
        self.group_size = int(self.group_size)
        self.iterations = int(self.iterations)
        self.seed = int(self.seed)

    def to_dict(self) -> dict:
        return {
            "group_size": self.group_size,
            "clip_epsilon": self.clip_epsilon,
            "kl_beta": self.kl_beta,
            "learning_rate": self.learning_rate,
            "iterations": self.iterations,
            "lambda_div": self.lambda_div,
            "lambda_rel": self.lambda_rel,
            "seed": self.seed,
        }


@dataclass(eq=False)
class TrainingTask:
    """What the policy is trained on: a vocabulary, a query, and a pool of
    curated reference exemplars.

    When ``context_sizes`` is None every iteration conditions on the full
    exemplar pool. When it is an inclusive (low, high) range, each
    iteration draws a random exemplar subset of a size in that range, so
    the policy sees varied partial contexts and can learn how candidate
    rewards depend on what the reference set already covers.
    """

    vocabulary: EmbeddingSet
    query: Embedding
    exemplars: EmbeddingSet = field(default_factory=EmbeddingSet)
    context_sizes: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        if len(self.vocabulary) == 0:
            raise ValidationError("training vocabulary must be non-empty")
        if self.vocabulary.dim != self.query.dim:
            raise ValidationError("vocabulary and query dimensions differ")
        if len(self.exemplars) and self.exemplars.dim != self.query.dim:
            raise ValidationError("exemplar and query dimensions differ")
        if self.context_sizes is not None:
            lo, hi = self.context_sizes
            if not 0 <= lo <= hi <= len(self.exemplars):
                raise ValidationError(
                    f"context_sizes {self.context_sizes} must satisfy "
                    f"0 <= low <= high <= {len(self.exemplars)}"
                )


def _iteration_context(task: TrainingTask, rng: np.random.Generator) -> ReferenceSet:
    if task.context_sizes is None:
        members = task.exemplars
    else:
        lo, hi = task.context_sizes
        size = int(rng.integers(lo, hi + 1))
        chosen = sorted(rng.choice(len(task.exemplars), size=size, replace=False).tolist())
        members = EmbeddingSet([task.exemplars[i] for i in chosen])
    return ReferenceSet(members, task.query)


def train(config: GrpoConfig, task) -> tuple[ToyPolicy, list[dict]]:
    """Run the full training loop and return the policy plus per-iteration log.

    ``task`` is a TrainingTask or anything exposing ``training_task()``
    (e.g. a simulation world). The policy starts uniform (all parameters
    zero); the KL penalty is taken against that initial policy. Each
    iteration syncs the old policy, samples a group, scores it with the
    composite reward against the iteration's reference context, normalizes
    advantages, and takes one gradient-ascent step on the surrogate.

    Log records carry iteration, objective, mean_reward, kl and
    policy_entropy. The whole run is deterministic given config.seed.
    """
    if hasattr(task, "training_task"):
        task = task.training_task()
    policy = ToyPolicy(task.vocabulary)
    ref_policy = policy.copy()
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    records: list[dict] = []

    for iteration in range(config.iterations):
        ref = _iteration_context(task, rng)
        group_seed = int(rng.integers(0, 2**63))
        old = policy.copy()
        group = sample_group(old, task.query, ref, config.group_size, group_seed)

        reward_cache: dict[int, float] = {}
        for idx, item in zip(group.indices, group.items):
            if int(idx) not in reward_cache:
                reward_cache[int(idx)] = composite_reward(
                    item, ref, config.lambda_div, config.lambda_rel
                ).composite
        group.rewards = np.array([reward_cache[int(i)] for i in group.indices])
        group.advantages = compute_advantages(group.rewards)

        p_new, _, unclipped, clipped = _clipped_terms(
            policy, old, group, task.query, ref, config.clip_epsilon
        )
        kl = exact_kl(p_new, policy_probs(ref_policy, task.query, ref))
        objective = float(np.minimum(unclipped, clipped).mean()) - config.kl_beta * kl

        theta_grad, bias_grad = surrogate_gradient(
            policy, old, ref_policy, group, task.query, ref, config.clip_epsilon, config.kl_beta
        )
        if not (np.all(np.isfinite(theta_grad)) and np.all(np.isfinite(bias_grad))):
            raise NumericalError(f"non-finite gradient at iteration {iteration}")
        policy.theta = policy.theta + config.learning_rate * theta_grad
        policy.bias = policy.bias + config.learning_rate * bias_grad

        records.append(
            {
                "iteration": iteration,
                "objective": objective,
                "mean_reward": float(group.rewards.mean()),
                "kl": kl,
                "policy_entropy": policy_entropy(p_new),
            }
        )

    return policy, records


def save_training_log(records: list[dict], path: str | Path) -> None:
    """Write per-iteration records as JSON Lines."""
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
