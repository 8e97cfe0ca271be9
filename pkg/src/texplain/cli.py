"""Command-line interface wiring all modules together.

Exit codes: 0 success, 2 usage/validation problem, 3 scorer transport
failure, 4 unexpected internal error.
"""

from __future__ import annotations

import json
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import click

from . import __version__
from .errors import DegenerateRemovalWarning, GroundTruthError, ScorerTransportError, TexplainError
from .evaluation import (
    ExplainerSettings,
    evaluate,
    explain_raster,
    load_ground_truth,
    resolve_target_class,
)
from .operators import PerturbationPlan, compose, cuco_score, default_registry
from .raster import read_image, write_png
from .scorers import HttpScorer, StdioScorer, make_builtin
from .segmentation import SegmentationParams, segment_grooves, write_mask_png, write_overlay_png
from .synth import KINDS, generate_corpus

EXIT_USAGE = 2
EXIT_TRANSPORT = 3
EXIT_INTERNAL = 4


def parse_scorer_spec(spec: str, input_size: tuple[int, int] | None = None):
    """Build a scorer from its CLI spec.

    ``builtin:<name>:k=v,...`` | ``exec:<command>`` | ``http(s)://<url>``
    (also accepted as ``http:<url>``).
    """
    if spec.startswith("builtin:"):
        rest = spec[len("builtin:"):]
        name, _, raw_params = rest.partition(":")
        params = {}
        if raw_params:
            for item in raw_params.split(","):
                key, sep, value = item.partition("=")
                if not sep:
                    raise ValueError(f"bad scorer parameter {item!r}; expected key=value")
                try:
                    params[key.strip()] = float(value)
                except ValueError:
                    raise ValueError(f"scorer parameter {key!r} must be numeric, got {value!r}") from None
        return make_builtin(name, **params)
    if spec.startswith("exec:"):
        return StdioScorer(spec[len("exec:"):], input_size=input_size)
    if spec.startswith(("http://", "https://")):
        return HttpScorer(spec, input_size=input_size)
    if spec.startswith("http:"):
        return HttpScorer("http://" + spec[len("http:"):].lstrip("/"), input_size=input_size)
    raise ValueError(f"scorer spec {spec!r} must start with 'builtin:', 'exec:', or 'http(s)://'")


def _parse_size(text: str | None) -> tuple[int, int] | None:
    if not text:
        return None
    w, sep, h = text.lower().partition("x")
    if not sep:
        raise ValueError(f"size must look like WxH, got {text!r}")
    return int(w), int(h)


def load_config_file(path: str | Path) -> dict[str, str]:
    """Flat key=value file; blank lines and #-comments ignored."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, value = stripped.partition("=")
        if not sep:
            raise ValueError(f"{path} line {lineno}: expected key=value, got {stripped!r}")
        out[key.strip()] = value.strip()
    return out


def _apply_config(ctx: click.Context, values: dict, casts: dict) -> dict:
    """Overlay config file values; explicit command-line flags win."""
    config_path = values.pop("config", None)
    if not config_path:
        return values
    config = load_config_file(config_path)
    for key, cast in casts.items():
        if key in config and ctx.get_parameter_source(key) != click.core.ParameterSource.COMMANDLINE:
            values[key] = cast(config[key])
    return values


def _seg_params(kernel: int, iterations: int, min_area: float) -> SegmentationParams:
    return SegmentationParams(
        morph_kernel=kernel, morph_iterations=iterations, min_component_area_frac=min_area
    )


_seg_options = [
    click.option("--seg-kernel", type=int, default=5, show_default=True,
                 help="Square morphology element size (odd)."),
    click.option("--seg-iterations", type=int, default=2, show_default=True,
                 help="Morphology iterations."),
    click.option("--seg-min-area", type=float, default=0.001, show_default=True,
                 help="Drop groove components smaller than this image-area fraction."),
]


def seg_options(fn):
    for opt in reversed(_seg_options):
        fn = opt(fn)
    return fn


@click.group()
@click.version_option(__version__)
def cli() -> None:
    """Concept-level explanations for texture-image classifiers."""


@cli.command()
@click.argument("image", type=click.Path(exists=True, dir_okay=False))
@click.option("--ops", default="all", show_default=True,
              help="Comma-separated operator ids, or 'all'.")
@click.option("--out", type=click.Path(file_okay=False), default=".", show_default=True)
@click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None)
@seg_options
@click.pass_context
def perturb(ctx, image, ops, out, config, seg_kernel, seg_iterations, seg_min_area):
    """Write one perturbed PNG per operator plus a contact sheet."""
    values = _apply_config(ctx, dict(ops=ops, out=out, seg_kernel=seg_kernel,
                                     seg_iterations=seg_iterations, seg_min_area=seg_min_area,
                                     config=config),
                           dict(ops=str, out=str, seg_kernel=int, seg_iterations=int, seg_min_area=float))
    registry = default_registry()
    requested = list(registry.ids) if values["ops"] == "all" else [s.strip() for s in values["ops"].split(",") if s.strip()]
    unknown = [op for op in requested if op not in registry.ids]
    if unknown:
        raise click.UsageError(
            f"unknown operator id(s) {', '.join(unknown)}; valid ids: {', '.join(registry.ids)}"
        )
    img = read_image(image)
    params = _seg_params(values["seg_kernel"], values["seg_iterations"], values["seg_min_area"])
    out_dir = Path(values["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(image).stem

    from .plots import save_contact_sheet

    tiles = [("original", img)]
    for op_id in requested:
        plan = PerturbationPlan.from_ids(registry, [op_id])
        perturbed = compose(img, plan, registry, params)
        path = out_dir / f"{stem}__{op_id}.png"
        write_png(perturbed, path)
        click.echo(str(path))
        tiles.append((op_id, perturbed))
    sheet = out_dir / f"{stem}__contact_sheet.png"
    save_contact_sheet(tiles, sheet)
    click.echo(str(sheet))


@cli.command()
@click.argument("image", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(file_okay=False), default=".", show_default=True)
@click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None)
@seg_options
@click.pass_context
def segment(ctx, image, out, config, seg_kernel, seg_iterations, seg_min_area):
    """Write the groove mask (1-bit PNG) and a red-tinted overlay."""
    values = _apply_config(ctx, dict(out=out, seg_kernel=seg_kernel, seg_iterations=seg_iterations,
                                     seg_min_area=seg_min_area, config=config),
                           dict(out=str, seg_kernel=int, seg_iterations=int, seg_min_area=float))
    img = read_image(image)
    mask = segment_grooves(img, _seg_params(values["seg_kernel"], values["seg_iterations"], values["seg_min_area"]))
    out_dir = Path(values["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(image).stem
    mask_path = out_dir / f"{stem}__groove_mask.png"
    overlay_path = out_dir / f"{stem}__overlay.png"
    write_mask_png(mask, mask_path)
    write_overlay_png(img, mask, overlay_path)
    click.echo(str(mask_path))
    click.echo(str(overlay_path))


@cli.command()
@click.argument("image", type=click.Path(exists=True, dir_okay=False))
@click.option("--ops", "plans", multiple=True,
              help="Comma-separated operator ids for one plan; repeatable. Default: all 12.")
@click.option("--orders", type=int, default=5, show_default=True, help="Random application orders.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="CSV file (default stdout).")
@click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None)
@seg_options
@click.pass_context
def cuco(ctx, image, plans, orders, seed, out, config, seg_kernel, seg_iterations, seg_min_area):
    """Score order sensitivity: mean pairwise MAE across application orders."""
    values = _apply_config(ctx, dict(orders=orders, seed=seed, out=out, seg_kernel=seg_kernel,
                                     seg_iterations=seg_iterations, seg_min_area=seg_min_area,
                                     config=config),
                           dict(orders=int, seed=int, out=str, seg_kernel=int,
                                seg_iterations=int, seg_min_area=float))
    registry = default_registry()
    img = read_image(image)
    params = _seg_params(values["seg_kernel"], values["seg_iterations"], values["seg_min_area"])
    plan_specs = list(plans) or [",".join(registry.ids)]
    lines = ["ops,n_orders,mean_pairwise_mae"]
    for spec in plan_specs:
        ids = [s.strip() for s in spec.split(",") if s.strip()]
        unknown = [op for op in ids if op not in registry.ids]
        if unknown:
            raise click.UsageError(f"unknown operator id(s) {', '.join(unknown)}; valid ids: {', '.join(registry.ids)}")
        plan = PerturbationPlan.from_ids(registry, ids)
        if plan.count < 2:
            raise click.UsageError(f"plan {spec!r} selects {plan.count} operator(s); need at least 2")
        score = cuco_score(img, plan, n_orders=values["orders"], seed=values["seed"],
                           registry=registry, seg_params=params)
        lines.append(f"{'+'.join(ids)},{values['orders']},{score!r}")
    text = "\n".join(lines) + "\n"
    if values["out"]:
        Path(values["out"]).write_text(text)
        click.echo(values["out"])
    else:
        click.echo(text, nl=False)


def _scorer_options(fn):
    opts = [
        click.option("--scorer", required=True,
                     help="builtin:<name>:k=v,... | exec:<command> | http(s)://<url>"),
        click.option("--target-class", default=None, help="Class whose confidence is explained."),
        click.option("--m", type=int, default=256, show_default=True, help="Unique plans to sample."),
        click.option("--seed", type=int, default=0, show_default=True),
        click.option("--surrogate", type=click.Choice(["lr", "dt", "rf"]), default="lr", show_default=True),
        click.option("--transform", type=click.Choice(["identity", "negate", "absolute"]),
                     default="absolute", show_default=True, help="Slope transform (lr only)."),
        click.option("--inclusion-prob", type=float, default=0.5, show_default=True,
                     help="Per-operator Bernoulli inclusion probability."),
        click.option("--input-size", default=None, help="Resize images to WxH before scoring (external scorers)."),
        click.option("--jobs", type=int, default=1, show_default=True),
        click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


_SCORER_CASTS = dict(scorer=str, target_class=str, m=int, seed=int, surrogate=str, transform=str,
                     inclusion_prob=float, input_size=str, jobs=int, out=str,
                     seg_kernel=int, seg_iterations=int, seg_min_area=float)


def _settings_from(values: dict) -> ExplainerSettings:
    return ExplainerSettings(
        surrogate=values["surrogate"],
        transform=values["transform"],
        m=values["m"],
        inclusion_prob=values["inclusion_prob"],
        seg_params=_seg_params(values["seg_kernel"], values["seg_iterations"], values["seg_min_area"]),
    )


@cli.command()
@click.argument("image", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(file_okay=False), default=".", show_default=True)
@_scorer_options
@seg_options
@click.pass_context
def explain(ctx, image, out, scorer, target_class, m, seed, surrogate, transform,
            inclusion_prob, input_size, jobs, config, seg_kernel, seg_iterations, seg_min_area):
    """Explain one image: operator importances, concept ranking, SVG chart."""
    values = _apply_config(ctx, dict(out=out, scorer=scorer, target_class=target_class, m=m, seed=seed,
                                     surrogate=surrogate, transform=transform, inclusion_prob=inclusion_prob,
                                     input_size=input_size, jobs=jobs, seg_kernel=seg_kernel,
                                     seg_iterations=seg_iterations, seg_min_area=seg_min_area,
                                     config=config),
                           _SCORER_CASTS)
    img = read_image(image)
    scorer_obj = parse_scorer_spec(values["scorer"], _parse_size(values["input_size"]))
    target = resolve_target_class(values["target_class"], scorer_obj, img)
    settings = replace(_settings_from(values), max_workers=values["jobs"])
    expl = explain_raster(img, scorer_obj, target, settings, seed=values["seed"], image_id=str(image))

    out_dir = Path(values["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {"image": str(image), "scorer": values["scorer"], **expl.to_dict()}
    json_path = out_dir / "explain.json"
    json_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    from .plots import save_importance_chart

    svg_path = out_dir / "importance.svg"
    save_importance_chart(expl.report, svg_path, title=f"{Path(image).name}: operator importance")
    click.echo(str(json_path))
    click.echo(str(svg_path))


@cli.command(name="evaluate")
@click.option("--ground-truth", required=True, type=click.Path(exists=True, dir_okay=False),
              help="CSV: path,class,rank1..rank5.")
@click.option("--base-dir", type=click.Path(file_okay=False), default=None,
              help="Directory image paths are relative to (default: the CSV's directory).")
@click.option("--out", type=click.Path(file_okay=False), default=".", show_default=True)
@_scorer_options
@seg_options
@click.pass_context
def evaluate_cmd(ctx, ground_truth, base_dir, out, scorer, target_class, m, seed, surrogate,
                 transform, inclusion_prob, input_size, jobs, config, seg_kernel, seg_iterations, seg_min_area):
    """Score concept rankings against ground truth; per-class mean/std tau."""
    values = _apply_config(ctx, dict(out=out, scorer=scorer, target_class=target_class, m=m, seed=seed,
                                     surrogate=surrogate, transform=transform, inclusion_prob=inclusion_prob,
                                     input_size=input_size, jobs=jobs, seg_kernel=seg_kernel,
                                     seg_iterations=seg_iterations, seg_min_area=seg_min_area,
                                     config=config),
                           _SCORER_CASTS)
    records = load_ground_truth(ground_truth)
    scorer_obj = parse_scorer_spec(values["scorer"], _parse_size(values["input_size"]))
    settings = _settings_from(values)
    report = evaluate(
        records, scorer_obj, values["target_class"], settings, seed=values["seed"],
        base_dir=base_dir or Path(ground_truth).parent, jobs=values["jobs"],
    )
    out_dir = Path(values["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "evaluate.csv"
    json_path = out_dir / "evaluate.json"
    csv_path.write_text(report.csv_text())
    json_path.write_text(report.json_text())
    from .plots import save_tau_chart

    chart_path = out_dir / "tau_by_class.svg"
    save_tau_chart([(r.label, r.mean_tau, r.std_tau) for r in report.classes], chart_path)
    for row in report.classes:
        click.echo(f"{row.label}: tau = {row.mean_tau:.3f} +/- {row.std_tau:.3f} (n={row.n})")
    if report.warnings:
        click.echo(f"{len(report.warnings)} image(s) failed and were excluded", err=True)
    click.echo(str(csv_path))
    click.echo(str(json_path))
    click.echo(str(chart_path))


@cli.command()
@click.option("--kind", type=click.Choice(KINDS), default="stripes", show_default=True)
@click.option("--n", type=int, default=50, show_default=True)
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--size", type=int, default=64, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--orientation", type=click.Choice(["vertical", "horizontal"]), default="vertical",
              show_default=True, help="Stripe direction (stripes kind only).")
@click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None)
@click.pass_context
def synth(ctx, kind, n, out, size, seed, orientation, config):
    """Generate a synthetic corpus with planted concept rankings."""
    values = _apply_config(ctx, dict(kind=kind, n=n, out=out, size=size, seed=seed,
                                     orientation=orientation, config=config),
                           dict(kind=str, n=int, out=str, size=int, seed=int, orientation=str))
    manifest = generate_corpus(values["out"], values["kind"], values["n"], size=values["size"],
                               seed=values["seed"], orientation=values["orientation"])
    click.echo(str(manifest))


def main(argv: list[str] | None = None) -> int:
    """Entry point mapping errors onto the documented exit codes."""
    warnings.filterwarnings("once", category=DegenerateRemovalWarning)
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        exc.show()
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.Abort:
        click.echo("aborted", err=True)
        return 130
    except ScorerTransportError as exc:
        click.echo(f"scorer transport error: {exc}", err=True)
        return EXIT_TRANSPORT
    except (TexplainError, GroundTruthError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - last-resort mapping to exit code 4
        click.echo(f"internal error: {type(exc).__name__}: {exc}", err=True)
        return EXIT_INTERNAL
    return 0


if __name__ == "__main__":
    sys.exit(main())
