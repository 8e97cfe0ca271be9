"""End-to-end explanation pipeline and the ranking-agreement evaluation
harness: per image, sample plans -> build dataset -> fit surrogate ->
importance -> concept ranking; per class, mean and population std of
Kendall's tau against human (or planted) ground truth.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .concepts import CONCEPT_TIE_ORDER, CONCEPTS, ConceptRanking, concept_significance, kendall_tau, rank_concepts
from .errors import GroundTruthError
from .operators import OperatorRegistry, default_registry
from .raster import Raster, read_image
from .scorers import score
from .segmentation import SegmentationParams
from .surrogate import (
    ForestParams,
    ImportanceReport,
    LinearSurrogate,
    SamplingConfig,
    TreeParams,
    TreeSurrogate,
    build_dataset,
    fit_cart,
    fit_forest,
    fit_linear,
    importance,
    sample_plans,
    tree_reasoning_path,
)

GROUND_TRUTH_HEADER = ("path", "class", "rank1", "rank2", "rank3", "rank4", "rank5")

SURROGATE_KINDS = ("lr", "dt", "rf")


def derive_seed(seed: int, *key: int) -> int:
    """Stable named substream: same (seed, key) always yields the same value."""
    return int(np.random.SeedSequence(entropy=seed, spawn_key=tuple(key)).generate_state(1)[0])


@dataclass(frozen=True)
class GroundTruthRecord:
    path: str
    label: str
    ranking: ConceptRanking


def load_ground_truth(path: str | Path) -> list[GroundTruthRecord]:
    """Parse the ground-truth CSV; errors name the offending line number."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise GroundTruthError(f"{path}: file is empty")
    if tuple(rows[0]) != GROUND_TRUTH_HEADER:
        raise GroundTruthError(f"{path} line 1: header must be {','.join(GROUND_TRUTH_HEADER)}")
    records = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(GROUND_TRUTH_HEADER):
            raise GroundTruthError(f"{path} line {lineno}: expected {len(GROUND_TRUTH_HEADER)} cells, got {len(row)}")
        ranks = row[2:]
        if sorted(ranks) != sorted(CONCEPTS):
            raise GroundTruthError(
                f"{path} line {lineno}: ranks must be a permutation of {sorted(CONCEPTS)}, got {ranks}"
            )
        if not row[0]:
            raise GroundTruthError(f"{path} line {lineno}: empty image path")
        records.append(GroundTruthRecord(path=row[0], label=row[1], ranking=ConceptRanking.from_order(ranks)))
    if not records:
        raise GroundTruthError(f"{path}: no data rows")
    return records


def write_ground_truth(records: list[GroundTruthRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(GROUND_TRUTH_HEADER)
        for rec in records:
            writer.writerow([rec.path, rec.label, *rec.ranking.order])


@dataclass(frozen=True)
class ExplainerSettings:
    """Everything the per-image pipeline needs besides the image and scorer."""

    surrogate: str = "lr"
    transform: str = "absolute"
    m: int = 256
    inclusion_prob: float = 0.5
    include_empty_plan: bool = True
    seg_params: SegmentationParams = field(default_factory=SegmentationParams)
    tree: TreeParams = field(default_factory=TreeParams)
    forest: ForestParams = field(default_factory=ForestParams)
    max_workers: int = 1

    def __post_init__(self) -> None:
        if self.surrogate not in SURROGATE_KINDS:
            raise ValueError(f"surrogate must be one of {SURROGATE_KINDS}, got {self.surrogate!r}")


@dataclass(frozen=True)
class Explanation:
    """Per-image result: importances, concept significances, ranking."""

    report: ImportanceReport
    significance: dict[str, float]
    ranking: ConceptRanking
    surrogate: object
    seed: int
    m: int
    target_class: str

    def to_dict(self) -> dict:
        out = {
            "surrogate": self.report.surrogate_kind,
            "slope_transform": self.report.slope_transform,
            "seed": self.seed,
            "m": self.m,
            "target_class": self.target_class,
            "operator_importance": self.report.by_id,
            "concept_significance": self.significance,
            "concept_ranking": list(self.ranking.order),
            "tie_groups": [list(g) for g in self.ranking.tie_groups],
        }
        if isinstance(self.surrogate, LinearSurrogate):
            out["intercept"] = self.surrogate.intercept
            out["slopes"] = dict(zip(self.surrogate.operator_ids, map(float, self.surrogate.slopes)))
            out["degenerate_fit"] = self.surrogate.degenerate
            out["gradient_norm"] = self.surrogate.gradient_norm
        if isinstance(self.surrogate, TreeSurrogate):
            out["reasoning_path"] = tree_reasoning_path(self.surrogate).to_dict()
        return out


def explain_raster(
    img: Raster,
    scorer,
    target_class: str,
    settings: ExplainerSettings = ExplainerSettings(),
    seed: int = 0,
    registry: OperatorRegistry | None = None,
    image_id: str = "",
) -> Explanation:
    """Run the full pipeline on one raster. All randomness derives from ``seed``."""
    registry = registry or default_registry()
    cfg = SamplingConfig(
        m=settings.m,
        include_empty_plan=settings.include_empty_plan,
        seed=derive_seed(seed, 0),
        inclusion_prob=settings.inclusion_prob,
    )
    plans = sample_plans(cfg, registry)
    ds = build_dataset(
        img, plans, scorer, target_class,
        registry=registry, seg_params=settings.seg_params,
        image_id=image_id, max_workers=settings.max_workers,
    )
    if settings.surrogate == "lr":
        model = fit_linear(ds)
        report = importance(model, settings.transform)
    elif settings.surrogate == "dt":
        model = fit_cart(ds, settings.tree)
        report = importance(model)
    else:
        model = fit_forest(ds, replace(settings.forest, seed=derive_seed(seed, 1)))
        report = importance(model)
    sig = concept_significance(report)
    return Explanation(
        report=report,
        significance=sig.as_dict(),
        ranking=rank_concepts(sig),
        surrogate=model,
        seed=seed,
        m=settings.m,
        target_class=target_class,
    )


def resolve_target_class(explicit: str | None, scorer, img: Raster, gt_label: str | None = None) -> str:
    """Pick the confidence target: the explicit class if given, else the
    ground-truth label when the scorer knows it, else fail."""
    if explicit:
        return explicit
    labels = scorer.descriptor.class_labels
    if not labels:
        labels = score(scorer, img).labels
    if gt_label and gt_label in labels:
        return gt_label
    raise ValueError(
        f"no target class: pass one explicitly (scorer labels: {list(labels) or 'reported per reply'})"
    )


@dataclass(frozen=True)
class TauResult:
    label: str
    mean_tau: float
    std_tau: float  # population standard deviation
    n: int


@dataclass(frozen=True)
class ImageResult:
    path: str
    label: str
    tau: float
    predicted: tuple[str, ...]
    ground_truth: tuple[str, ...]
    operator_importance: dict[str, float]
    significance: dict[str, float]
    gradient_norm: float | None = None  # linear surrogate only


@dataclass(frozen=True)
class EvaluationReport:
    classes: tuple[TauResult, ...]
    images: tuple[ImageResult, ...]
    warnings: tuple[dict, ...]
    metadata: dict

    def csv_text(self) -> str:
        lines = ["class,mean_tau,std_tau,n"]
        for row in self.classes:
            lines.append(f"{row.label},{row.mean_tau!r},{row.std_tau!r},{row.n}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "metadata": self.metadata,
            "classes": [
                {"class": r.label, "mean_tau": r.mean_tau, "std_tau": r.std_tau, "n": r.n}
                for r in self.classes
            ],
            "images": [
                {
                    "path": r.path,
                    "class": r.label,
                    "tau": r.tau,
                    "predicted_ranking": list(r.predicted),
                    "ground_truth_ranking": list(r.ground_truth),
                    "operator_importance": r.operator_importance,
                    "concept_significance": r.significance,
                    "gradient_norm": r.gradient_norm,
                }
                for r in self.images
            ],
            "warnings": list(self.warnings),
        }

    def json_text(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def evaluate(
    records: list[GroundTruthRecord],
    scorer,
    target_class: str | None,
    settings: ExplainerSettings = ExplainerSettings(),
    seed: int = 0,
    base_dir: str | Path | None = None,
    jobs: int = 1,
) -> EvaluationReport:
    """Explain every ground-truth image and score ranking agreement per class.

    Image i runs on substream (seed, 2, i), so results do not depend on
    execution interleaving. Per-image failures become warnings and are
    excluded from the aggregates, never silently dropped.
    """
    base = Path(base_dir) if base_dir is not None else None

    def run_one(item: tuple[int, GroundTruthRecord]):
        i, rec = item
        img_path = Path(rec.path) if base is None else base / rec.path
        img = read_image(img_path)
        target = resolve_target_class(target_class, scorer, img, rec.label)
        expl = explain_raster(
            img, scorer, target, settings, seed=derive_seed(seed, 2, i), image_id=rec.path
        )
        tau = kendall_tau(expl.ranking, rec.ranking)
        model = expl.surrogate
        return ImageResult(
            path=rec.path,
            label=rec.label,
            tau=tau,
            predicted=expl.ranking.order,
            ground_truth=rec.ranking.order,
            operator_importance=expl.report.by_id,
            significance=expl.significance,
            gradient_norm=model.gradient_norm if isinstance(model, LinearSurrogate) else None,
        )

    items = list(enumerate(records))
    outcomes: list[ImageResult | dict] = []
    if jobs > 1:
        def safe(item):
            try:
                return run_one(item)
            except Exception as exc:  # noqa: BLE001 - recorded as warning
                return {"path": item[1].path, "error": f"{type(exc).__name__}: {exc}"}
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(safe, items))
    else:
        for item in items:
            try:
                outcomes.append(run_one(item))
            except Exception as exc:  # noqa: BLE001 - recorded as warning
                outcomes.append({"path": item[1].path, "error": f"{type(exc).__name__}: {exc}"})

    images = tuple(o for o in outcomes if isinstance(o, ImageResult))
    warnings_out = tuple(o for o in outcomes if isinstance(o, dict))

    by_label: dict[str, list[float]] = {}
    for res in images:
        by_label.setdefault(res.label, []).append(res.tau)
    classes = tuple(
        TauResult(
            label=label,
            mean_tau=float(np.mean(taus)),
            std_tau=float(np.std(taus)),  # population std
            n=len(taus),
        )
        for label, taus in sorted(by_label.items())
    )
    metadata = {
        "seed": seed,
        "m": settings.m,
        "surrogate": settings.surrogate,
        "slope_transform": settings.transform if settings.surrogate == "lr" else None,
        "target_class": target_class,
        "n_images": len(records),
        "n_failed": len(warnings_out),
        "concepts": list(CONCEPT_TIE_ORDER),
    }
    return EvaluationReport(classes=classes, images=images, warnings=warnings_out, metadata=metadata)
