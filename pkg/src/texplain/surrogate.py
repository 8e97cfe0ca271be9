"""Plan sampling, the (design matrix, confidence) dataset, and the three
surrogate models: ordinary least squares, a variance-reduction CART, and a
bootstrap forest of CARTs, plus per-operator importance extraction.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    InsufficientSamplesError,
    RegistryMismatchError,
    SamplingError,
    ScorerTransportError,
)
from .operators import OperatorRegistry, PerturbationPlan, compose, default_registry
from .raster import Raster
from .scorers import score
from .segmentation import SegmentationParams


@dataclass(frozen=True)
class SamplingConfig:
    """How to draw perturbation plans: i.i.d. Bernoulli bits, deduplicated."""

    m: int = 256
    include_empty_plan: bool = True
    seed: int = 0
    inclusion_prob: float = 0.5

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if not 0.0 < self.inclusion_prob < 1.0:
            raise ValueError(f"inclusion_prob must lie in (0, 1), got {self.inclusion_prob}")


def sample_plans(cfg: SamplingConfig, registry: OperatorRegistry | None = None) -> list[PerturbationPlan]:
    """Draw ``cfg.m`` unique plans covering every operator at least once.

    Bits are i.i.d. Bernoulli(``inclusion_prob``); duplicates are redrawn.
    If random draws stall before the universe is exhausted, the remaining
    plans are filled in deterministically, and missing single-operator
    coverage is patched by swapping in singleton plans. Deterministic for a
    given seed.
    """
    registry = registry or default_registry()
    n = len(registry)
    universe = 2 ** n
    if cfg.m > universe:
        raise SamplingError(f"m={cfg.m} exceeds the {universe} distinct plans over {n} operators")
    if cfg.m <= n:
        raise SamplingError(f"m must exceed the operator count ({n}), got {cfg.m}")

    rng = np.random.default_rng(cfg.seed)
    seen: set[tuple[int, ...]] = set()
    plans: list[tuple[int, ...]] = []

    def add(bits: tuple[int, ...]) -> None:
        if bits not in seen:
            seen.add(bits)
            plans.append(bits)

    if cfg.include_empty_plan:
        add((0,) * n)
    max_attempts = 60 * cfg.m + 4 * universe
    attempts = 0
    while len(plans) < cfg.m and attempts < max_attempts:
        add(tuple((rng.random(n) < cfg.inclusion_prob).astype(int)))
        attempts += 1
    if len(plans) < cfg.m:  # fill deterministically from the enumerated universe
        for code in range(universe):
            add(tuple((code >> j) & 1 for j in range(n)))
            if len(plans) == cfg.m:
                break

    # patch coverage: every operator must appear in at least one plan
    counts = np.array(plans).sum(axis=0)
    for j in np.nonzero(counts == 0)[0]:
        singleton = tuple(int(i == j) for i in range(n))
        for victim in reversed(range(len(plans))):
            bits = plans[victim]
            if sum(bits) == 0 and cfg.include_empty_plan:
                continue
            if all(counts[k] >= 2 for k, b in enumerate(bits) if b):
                counts -= np.array(bits)
                seen.discard(bits)
                plans[victim] = singleton
                seen.add(singleton)
                counts[j] += 1
                break
        else:
            raise SamplingError(f"cannot cover operator index {j} within m={cfg.m} unique plans")
    return [PerturbationPlan(bits) for bits in plans]


@dataclass(frozen=True)
class PerturbationDataset:
    """Binary design matrix (m x |F|) paired with scorer confidences (m)."""

    phi: np.ndarray
    c: np.ndarray
    operator_ids: tuple[str, ...]
    target_class: str = ""
    image_id: str = ""

    def __post_init__(self) -> None:
        phi = np.array(self.phi, dtype=np.uint8, order="C")
        c = np.array(self.c, dtype=np.float64, order="C")
        if phi.ndim != 2 or c.ndim != 1 or phi.shape[0] != c.shape[0]:
            raise ValueError(f"phi {phi.shape} and c {c.shape} must be (m, n) and (m,)")
        if phi.shape[1] != len(self.operator_ids):
            raise ValueError(f"phi has {phi.shape[1]} columns for {len(self.operator_ids)} operator ids")
        if not np.isin(phi, (0, 1)).all():
            raise ValueError("phi entries must be 0 or 1")
        if (phi.sum(axis=0) == 0).any():
            missing = [self.operator_ids[j] for j in np.nonzero(phi.sum(axis=0) == 0)[0]]
            raise ValueError(f"operators never selected by any plan: {missing}")
        if len({tuple(row) for row in phi.tolist()}) != phi.shape[0]:
            raise ValueError("plans must be unique as bit-vectors")
        phi.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "c", c)

    @property
    def m(self) -> int:
        return self.phi.shape[0]

    @property
    def n_operators(self) -> int:
        return self.phi.shape[1]

    def plans(self) -> list[PerturbationPlan]:
        return [PerturbationPlan(tuple(int(b) for b in row)) for row in self.phi]


def build_dataset(
    img: Raster,
    plans: Sequence[PerturbationPlan],
    scorer,
    target_class: str,
    registry: OperatorRegistry | None = None,
    seg_params: SegmentationParams = SegmentationParams(),
    image_id: str = "",
    max_workers: int = 1,
) -> PerturbationDataset:
    """Score every plan's composed image; row i aligns with ``plans[i]``."""
    registry = registry or default_registry()

    def confidence(item: tuple[int, PerturbationPlan]) -> float:
        i, plan = item
        try:
            reply = score(scorer, compose(img, plan, registry, seg_params))
        except ScorerTransportError as exc:
            raise ScorerTransportError(f"plan {i} ({'+'.join(plan.operator_ids(registry)) or 'empty'}): {exc}") from exc
        return reply.prob(target_class)

    items = list(enumerate(plans))
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            c = list(pool.map(confidence, items))
    else:
        c = [confidence(item) for item in items]
    phi = np.array([plan.bits for plan in plans], dtype=np.uint8)
    return PerturbationDataset(
        phi=phi, c=np.array(c), operator_ids=registry.ids,
        target_class=target_class, image_id=image_id,
    )


def dump_dataset_csv(ds: PerturbationDataset, path: str | Path) -> None:
    """Write header of operator ids + 'confidence', one row per plan."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(ds.operator_ids) + ["confidence"])
        for bits, conf in zip(ds.phi, ds.c):
            writer.writerow([int(b) for b in bits] + [repr(float(conf))])


def load_dataset_csv(path: str | Path) -> PerturbationDataset:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][-1:] != ["confidence"]:
        raise ValueError(f"{path}: expected header of operator ids ending in 'confidence'")
    ids = tuple(rows[0][:-1])
    phi = [[int(cell) for cell in row[:-1]] for row in rows[1:]]
    c = [float(row[-1]) for row in rows[1:]]
    return PerturbationDataset(phi=np.array(phi, dtype=np.uint8), c=np.array(c), operator_ids=ids)


@dataclass(frozen=True)
class LinearSurrogate:
    """OLS fit of confidence on plan bits; one slope per operator."""

    intercept: float
    slopes: np.ndarray
    operator_ids: tuple[str, ...]
    degenerate: bool
    gradient_norm: float

    def predict(self, phi: np.ndarray) -> np.ndarray:
        return self.intercept + np.asarray(phi, dtype=np.float64) @ self.slopes


def fit_linear(ds: PerturbationDataset) -> LinearSurrogate:
    """Least squares via SVD; falls back to ridge (lambda=1e-8) when the
    intercept-augmented design is rank deficient, flagging the fit."""
    phi = ds.phi.astype(np.float64)
    m, n = phi.shape
    if m <= n:
        raise InsufficientSamplesError(f"OLS needs m >= |F|+1 = {n + 1} rows, got {m}")
    design = np.column_stack([np.ones(m), phi])
    beta, _, rank, _ = np.linalg.lstsq(design, ds.c, rcond=None)
    degenerate = bool(rank < n + 1)
    if degenerate:
        lam = 1e-8
        beta = np.linalg.solve(design.T @ design + lam * np.eye(n + 1), design.T @ ds.c)
    gradient = 2.0 * design.T @ (design @ beta - ds.c)
    return LinearSurrogate(
        intercept=float(beta[0]),
        slopes=beta[1:].copy(),
        operator_ids=ds.operator_ids,
        degenerate=degenerate,
        gradient_norm=float(np.linalg.norm(gradient)),
    )


@dataclass(frozen=True)
class TreeParams:
    max_depth: int = 6
    min_leaf: int = 5

    def __post_init__(self) -> None:
        if self.max_depth < 1 or self.min_leaf < 1:
            raise ValueError("max_depth and min_leaf must be >= 1")


@dataclass(frozen=True)
class TreeLeaf:
    mean: float
    n: int


@dataclass(frozen=True)
class TreeSplit:
    op_index: int
    gain: float  # sum-of-squares decrease achieved by this split
    n: int
    mean: float
    left: "TreeSplit | TreeLeaf"   # operator bit 0
    right: "TreeSplit | TreeLeaf"  # operator bit 1


def _sse(values: np.ndarray) -> float:
    return float(np.sum((values - values.mean()) ** 2))


def _best_split(phi: np.ndarray, c: np.ndarray, candidates: Sequence[int], min_leaf: int):
    """Best (gain, op, left_rows, right_rows) over candidate operators.

    Gain is the sum-of-squares decrease; exact ties break toward the lowest
    operator index (candidates are scanned in ascending order with strict >).
    """
    node_sse = _sse(c)
    best = None
    for j in candidates:
        right = phi[:, j] == 1
        n_right = int(right.sum())
        n_left = len(c) - n_right
        if n_left < min_leaf or n_right < min_leaf:
            continue
        gain = node_sse - _sse(c[~right]) - _sse(c[right])
        if best is None or gain > best[0]:
            best = (gain, j, ~right, right)
    return best


def _grow(
    phi: np.ndarray,
    c: np.ndarray,
    depth: int,
    params: TreeParams,
    rng: np.random.Generator | None,
    feature_fraction: float,
) -> TreeSplit | TreeLeaf:
    mean = float(c.mean())
    n = len(c)
    if depth >= params.max_depth or n < 2 * params.min_leaf or np.ptp(c) == 0:
        return TreeLeaf(mean=mean, n=n)
    n_features = phi.shape[1]
    if rng is not None and feature_fraction < 1.0:
        k = max(1, int(round(feature_fraction * n_features)))
        candidates = sorted(rng.choice(n_features, size=k, replace=False).tolist())
    else:
        candidates = range(n_features)
    found = _best_split(phi, c, candidates, params.min_leaf)
    if found is None:
        return TreeLeaf(mean=mean, n=n)
    gain, j, left, right = found
    return TreeSplit(
        op_index=j,
        gain=float(gain),
        n=n,
        mean=mean,
        left=_grow(phi[left], c[left], depth + 1, params, rng, feature_fraction),
        right=_grow(phi[right], c[right], depth + 1, params, rng, feature_fraction),
    )


@dataclass(frozen=True)
class TreeSurrogate:
    """Greedy variance-reduction CART over binary plan features."""

    root: TreeSplit | TreeLeaf
    operator_ids: tuple[str, ...]
    params: TreeParams
    n_samples: int

    def predict(self, bits: Sequence[int]) -> float:
        node = self.root
        while isinstance(node, TreeSplit):
            node = node.right if bits[node.op_index] else node.left
        return node.mean

    def operator_gains(self) -> np.ndarray:
        """Total sum-of-squares decrease credited to each operator."""
        gains = np.zeros(len(self.operator_ids))

        def walk(node) -> None:
            if isinstance(node, TreeSplit):
                gains[node.op_index] += node.gain
                walk(node.left)
                walk(node.right)

        walk(self.root)
        return gains

    def depth(self) -> int:
        def walk(node) -> int:
            if isinstance(node, TreeLeaf):
                return 0
            return 1 + max(walk(node.left), walk(node.right))

        return walk(self.root)


def fit_cart(ds: PerturbationDataset, params: TreeParams = TreeParams()) -> TreeSurrogate:
    if ds.m < 2 * params.min_leaf:
        raise InsufficientSamplesError(f"CART needs m >= 2*min_leaf = {2 * params.min_leaf} rows, got {ds.m}")
    root = _grow(ds.phi.astype(np.int8), ds.c, 0, params, rng=None, feature_fraction=1.0)
    return TreeSurrogate(root=root, operator_ids=ds.operator_ids, params=params, n_samples=ds.m)


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    bootstrap: bool = True
    feature_fraction: float = 1.0 / 3.0
    seed: int = 0
    tree: TreeParams = field(default_factory=TreeParams)

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise ValueError(f"n_trees must be >= 1, got {self.n_trees}")
        if not 0.0 < self.feature_fraction <= 1.0:
            raise ValueError(f"feature_fraction must lie in (0, 1], got {self.feature_fraction}")


@dataclass(frozen=True)
class ForestSurrogate:
    trees: tuple[TreeSurrogate, ...]
    operator_ids: tuple[str, ...]
    params: ForestParams

    def predict(self, bits: Sequence[int]) -> float:
        return float(np.mean([t.predict(bits) for t in self.trees]))

    def operator_gains(self) -> np.ndarray:
        return np.sum([t.operator_gains() for t in self.trees], axis=0)


def fit_forest(ds: PerturbationDataset, params: ForestParams = ForestParams()) -> ForestSurrogate:
    """Bootstrap-resampled CARTs with per-split feature subsampling.

    With one tree, full feature fraction, and bootstrap disabled this reduces
    exactly to :func:`fit_cart`.
    """
    if ds.m < 2 * params.tree.min_leaf:
        raise InsufficientSamplesError(
            f"forest needs m >= 2*min_leaf = {2 * params.tree.min_leaf} rows, got {ds.m}"
        )
    phi = ds.phi.astype(np.int8)
    trees = []
    for seq in np.random.SeedSequence(params.seed).spawn(params.n_trees):
        rng = np.random.default_rng(seq)
        rows = rng.integers(0, ds.m, size=ds.m) if params.bootstrap else np.arange(ds.m)
        root = _grow(phi[rows], ds.c[rows], 0, params.tree, rng=rng, feature_fraction=params.feature_fraction)
        trees.append(TreeSurrogate(root=root, operator_ids=ds.operator_ids, params=params.tree, n_samples=ds.m))
    return ForestSurrogate(trees=tuple(trees), operator_ids=ds.operator_ids, params=params)


TRANSFORMS = ("identity", "negate", "absolute")


@dataclass(frozen=True)
class ImportanceReport:
    """Per-operator importance on the probability simplex (sums to 1)."""

    values: tuple[float, ...]
    operator_ids: tuple[str, ...]
    surrogate_kind: str  # "lr" | "dt" | "rf"
    slope_transform: str | None

    def __post_init__(self) -> None:
        if len(self.values) != len(self.operator_ids):
            raise ValueError("one importance value per operator required")
        if any(v < 0 for v in self.values):
            raise ValueError("importance values must be non-negative")
        if abs(sum(self.values) - 1.0) > 1e-9:
            raise ValueError(f"importance values sum to {sum(self.values)!r}, expected 1 within 1e-9")

    @property
    def by_id(self) -> dict[str, float]:
        return dict(zip(self.operator_ids, self.values))

    def ranked_ids(self) -> list[str]:
        """Operator ids sorted by importance, largest first (stable)."""
        order = sorted(range(len(self.values)), key=lambda i: (-self.values[i], i))
        return [self.operator_ids[i] for i in order]


def _softmax(values: np.ndarray) -> np.ndarray:
    shifted = np.exp(values - values.max())
    return shifted / shifted.sum()


def importance(surrogate, transform: str = "absolute") -> ImportanceReport:
    """Per-operator importance.

    Linear: softmax of transformed slopes (``identity``, ``negate`` or
    ``absolute``). Tree/forest: each operator's share of the total
    sum-of-squares decrease (already non-negative, so no softmax); a tree
    with no splits reports the uniform distribution.
    """
    if transform not in TRANSFORMS:
        raise ValueError(f"transform must be one of {TRANSFORMS}, got {transform!r}")
    if isinstance(surrogate, LinearSurrogate):
        slopes = np.asarray(surrogate.slopes, dtype=np.float64)
        if transform == "negate":
            slopes = -slopes
        elif transform == "absolute":
            slopes = np.abs(slopes)
        values = _softmax(slopes)
        kind, used = "lr", transform
    elif isinstance(surrogate, (TreeSurrogate, ForestSurrogate)):
        gains = surrogate.operator_gains()
        total = gains.sum()
        values = gains / total if total > 0 else np.full(len(gains), 1.0 / len(gains))
        kind = "dt" if isinstance(surrogate, TreeSurrogate) else "rf"
        used = None
    else:
        raise TypeError(f"unsupported surrogate type {type(surrogate).__name__}")
    return ImportanceReport(
        values=tuple(float(v) for v in values),
        operator_ids=surrogate.operator_ids,
        surrogate_kind=kind,
        slope_transform=used,
    )


@dataclass(frozen=True)
class PathStep:
    operator_id: str
    branch: str  # "left" (bit 0) or "right" (bit 1)
    n: int
    mean: float


@dataclass(frozen=True)
class ReasoningPath:
    """Root-to-leaf trace through a tree surrogate (Figure-style read-out)."""

    steps: tuple[PathStep, ...]
    leaf_mean: float
    leaf_n: int

    def to_dict(self) -> dict:
        return {
            "steps": [
                {"operator": s.operator_id, "branch": s.branch, "n": s.n, "mean": s.mean}
                for s in self.steps
            ],
            "leaf_mean": self.leaf_mean,
            "leaf_n": self.leaf_n,
        }


def tree_reasoning_path(tree: TreeSurrogate, plan: PerturbationPlan | None = None) -> ReasoningPath:
    """Trace the tree for a plan; without a plan, follow the majority child
    at each split (ties go left)."""
    if plan is not None and len(plan) != len(tree.operator_ids):
        raise RegistryMismatchError(f"plan length {len(plan)} != operator count {len(tree.operator_ids)}")
    steps: list[PathStep] = []
    node = tree.root
    while isinstance(node, TreeSplit):
        if plan is not None:
            go_right = bool(plan.bits[node.op_index])
        else:
            left_n = node.left.n
            right_n = node.right.n
            go_right = right_n > left_n
        child = node.right if go_right else node.left
        steps.append(PathStep(
            operator_id=tree.operator_ids[node.op_index],
            branch="right" if go_right else "left",
            n=child.n,
            mean=child.mean,
        ))
        node = child
    return ReasoningPath(steps=tuple(steps), leaf_mean=node.mean, leaf_n=node.n)
