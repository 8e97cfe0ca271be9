"""Mapping operator importances onto the five inferred texture concepts
(rugged, plated, furrow, vertical_stripped, smooth), ranking them, and
comparing rankings with tie-corrected Kendall's tau.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

from .errors import RegistryMismatchError
from .operators import default_registry
from .surrogate import ImportanceReport

# fixed tie-break order; also the canonical listing order for the five concepts
CONCEPT_TIE_ORDER = ("rugged", "plated", "furrow", "vertical_stripped", "smooth")
CONCEPTS = frozenset(CONCEPT_TIE_ORDER)


@dataclass(frozen=True)
class ConceptSignificance:
    """Significance of each inferred concept, derived from operator importances."""

    rugged: float
    plated: float
    furrow: float
    vertical_stripped: float
    smooth: float

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in CONCEPT_TIE_ORDER}


def concept_significance(report: ImportanceReport) -> ConceptSignificance:
    """Combine operator importances into the five concept significances.

    smooth: max of the two smoothing operators; vertical_stripped: mean of
    the +/-30 rotations; rugged: groove removal; plated: mean of +/-30
    rotations and both flips; furrow: mean of rugged and vertical_stripped.
    """
    expected = set(default_registry().ids)
    if set(report.operator_ids) != expected:
        raise RegistryMismatchError(
            f"concept mapping needs the default 12-operator registry, got {sorted(report.operator_ids)}"
        )
    fi = report.by_id
    rugged = fi["groove_remove"]
    vertical_stripped = (fi["rotate_-30"] + fi["rotate_+30"]) / 2.0
    return ConceptSignificance(
        rugged=rugged,
        plated=(fi["rotate_-30"] + fi["rotate_+30"] + fi["flip_h"] + fi["flip_v"]) / 4.0,
        furrow=(rugged + vertical_stripped) / 2.0,
        vertical_stripped=vertical_stripped,
        smooth=max(fi["smooth_150"], fi["smooth_300"]),
    )


@dataclass(frozen=True)
class ConceptRanking:
    """Ordered partition of the five concepts, most significant group first.

    Singleton groups are the common case; a group with several names records
    an exact tie.
    """

    groups: tuple[tuple[str, ...], ...]

    def __post_init__(self) -> None:
        flat = [name for group in self.groups for name in group]
        if sorted(flat) != sorted(CONCEPTS):
            raise ValueError(f"ranking must cover exactly the concepts {sorted(CONCEPTS)}, got {flat}")

    @classmethod
    def from_order(cls, names: Iterable[str]) -> "ConceptRanking":
        """Tie-free ranking from an ordered list of the five concept names."""
        return cls(groups=tuple((name,) for name in names))

    @property
    def order(self) -> tuple[str, ...]:
        return tuple(name for group in self.groups for name in group)

    @property
    def tie_groups(self) -> tuple[tuple[str, ...], ...]:
        return tuple(group for group in self.groups if len(group) > 1)

    def rank_of(self) -> dict[str, int]:
        """Group index per concept (0 = most significant); tied names share one."""
        return {name: i for i, group in enumerate(self.groups) for name in group}


def rank_concepts(sig: ConceptSignificance) -> ConceptRanking:
    """Sort concepts by descending significance; exact ties collapse into one
    group, ordered by the fixed tie-break order."""
    values = sig.as_dict()
    names = sorted(CONCEPT_TIE_ORDER, key=lambda n: (-values[n], CONCEPT_TIE_ORDER.index(n)))
    groups: list[tuple[str, ...]] = []
    current = [names[0]]
    for name in names[1:]:
        if values[name] == values[current[-1]]:
            current.append(name)
        else:
            groups.append(tuple(current))
            current = [name]
    groups.append(tuple(current))
    return ConceptRanking(groups=tuple(groups))


def kendall_tau(a: ConceptRanking, b: ConceptRanking) -> float:
    """Tie-corrected (tau-b) rank correlation between two concept rankings.

    Equals the classical Kendall's tau when both rankings are tie-free.
    Returns 0.0 when either ranking is one big tie (no pair is ordered).
    """
    if set(a.order) != set(b.order):
        raise ValueError("rankings must cover the same concepts")
    names = sorted(a.order)
    ra = a.rank_of()
    rb = b.rank_of()
    concordant = discordant = 0
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            da = ra[names[i]] - ra[names[j]]
            db = rb[names[i]] - rb[names[j]]
            prod = da * db
            if prod > 0:
                concordant += 1
            elif prod < 0:
                discordant += 1
    n = len(names)
    n_pairs = n * (n - 1) // 2
    ties_a = sum(len(g) * (len(g) - 1) // 2 for g in a.groups)
    ties_b = sum(len(g) * (len(g) - 1) // 2 for g in b.groups)
    denom = math.sqrt((n_pairs - ties_a) * (n_pairs - ties_b))
    if denom == 0.0:
        return 0.0
    return (concordant - discordant) / denom
