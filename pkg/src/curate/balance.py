"""Semantic distribution balancing of the curated clip set.

Clips carry taxonomy tags (primary class / subcategory). Overrepresented
subcategories are down-sampled toward the target distribution and
underrepresented ones oversampled by cyclic repetition, capped at a
multiplier of what actually exists. Target weights are user policy, not a
built-in constant; uniform is the default.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .clipper import Clip
from .errors import EmptyTaxonomy, PlanMismatch
from .rng import SplitMix64, derive_seed

UNTAGGED = "untagged"


@dataclass(frozen=True)
class TaxonomyTag:
    primary: str
    sub: str

    @property
    def key(self) -> str:
        return f"{self.primary}/{self.sub}"

    def to_dict(self) -> dict:
        return {"primary": self.primary, "sub": self.sub}

    @classmethod
    def from_dict(cls, d: dict) -> "TaxonomyTag":
        return cls(primary=d["primary"], sub=d["sub"])


def validate_tag(taxonomy: dict[str, list[str]], tag: TaxonomyTag) -> bool:
    """True when the tag's subcategory belongs to its primary class."""
    return tag.sub in taxonomy.get(tag.primary, ())


@dataclass(frozen=True)
class DistributionSpec:
    target_weights: dict[str, float]
    budget: int
    max_oversample: float = 5.0

    def __post_init__(self):
        if self.budget < 0:
            raise ValueError("budget must be >= 0")
        if self.max_oversample < 1.0:
            raise ValueError("max_oversample must be >= 1")
        if any(w < 0 for w in self.target_weights.values()):
            raise ValueError("weights must be >= 0")


def clip_subcategory(clip: Clip) -> str:
    """The subcategory a clip counts under (first tag, or 'untagged')."""
    return clip.tags[0].key if clip.tags else UNTAGGED


def tally_distribution(clips: Sequence[Clip]) -> dict[str, int]:
    """Exact clip counts per subcategory key."""
    counts: dict[str, int] = {}
    for clip in clips:
        key = clip_subcategory(clip)
        counts[key] = counts.get(key, 0) + 1
    return counts


def _largest_remainder(shares: dict[str, float], total: int) -> dict[str, int]:
    """Round fractional shares to integers summing to exactly `total`."""
    floors = {k: int(v) for k, v in shares.items()}
    leftover = total - sum(floors.values())
    # ties on the fractional part resolve by key for determinism
    order = sorted(shares, key=lambda k: (-(shares[k] - floors[k]), k))
    for k in order[:leftover]:
        floors[k] += 1
    return floors


def plan_balance(counts: dict[str, int], spec: DistributionSpec) -> dict[str, int]:
    """Planned per-subcategory clip counts honoring budget and oversample cap.

    ideal_k = budget * weight_k / sum(weights), rounded by largest
    remainder; the oversample cap (count_k * max_oversample) then binds,
    and the capped deficit is redistributed proportionally among uncapped
    subcategories in one pass. The plan never exceeds the budget.
    """
    total_weight = sum(spec.target_weights.values())
    if not spec.target_weights or total_weight <= 0:
        raise EmptyTaxonomy("no positive-weight subcategories")

    shares = {
        k: spec.budget * w / total_weight for k, w in spec.target_weights.items()
    }
    rounded = _largest_remainder(shares, spec.budget)

    caps = {
        k: int(counts.get(k, 0) * spec.max_oversample)
        for k in spec.target_weights
    }
    planned = {k: min(rounded[k], caps[k]) for k in rounded}
    deficit = sum(rounded[k] - planned[k] for k in rounded)

    uncapped = [k for k in rounded if rounded[k] <= caps[k]]
    if deficit > 0 and uncapped:
        weight_sum = sum(spec.target_weights[k] for k in uncapped)
        if weight_sum > 0:
            extra_shares = {
                k: deficit * spec.target_weights[k] / weight_sum for k in uncapped
            }
            extras = _largest_remainder(extra_shares, deficit)
            for k in uncapped:
                planned[k] = min(planned[k] + extras[k], caps[k])
    return planned


@dataclass(frozen=True)
class BalancedClip:
    """One sampled entry; ordinal > 0 marks an oversampling repeat."""

    clip: Clip
    ordinal: int = 0


def sample_balanced(
    clips: Sequence[Clip], plan: dict[str, int], seed: int
) -> list[BalancedClip]:
    """Materialize a balance plan into a concrete clip list.

    Down-sampled subcategories are drawn uniformly without replacement
    from a per-subcategory stream (so partitions are order-independent);
    oversampled ones repeat their originals cyclically with increasing
    ordinals. Output is deterministic given (clip order, plan, seed).
    """
    groups: dict[str, list[Clip]] = {}
    for clip in clips:
        groups.setdefault(clip_subcategory(clip), []).append(clip)

    out: list[BalancedClip] = []
    for key in sorted(plan):
        planned = plan[key]
        if planned <= 0:
            continue
        members = groups.get(key)
        if not members:
            raise PlanMismatch(f"plan names unknown subcategory {key!r}")
        n = len(members)
        if planned <= n:
            rng = SplitMix64(derive_seed(seed, key))
            chosen = sorted(rng.shuffle_indices(n)[:planned])
            out.extend(BalancedClip(members[i], 0) for i in chosen)
        else:
            for j in range(planned):
                out.append(BalancedClip(members[j % n], j // n))
    return out
