"""Command line interface: ``limdep analyze | simulate | contour | verify``.

Exit codes: 0 success, 1 verification failure, 2 usage, 3 data, 4 modeling.
"""

from __future__ import annotations

import csv
import io
import json
import os
import sys

import click

from limdep import errors

EXIT_VERIFY_FAILED = 1
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_MODELING = 4


def _fail(stage: str, exc: Exception, code: int):
    click.echo(f"error [{stage}]: {exc}", err=True)
    sys.exit(code)


def parse_grid(text: str) -> tuple[float, ...]:
    """``"start:stop:step"`` (inclusive) or a comma separated list."""
    text = text.strip()
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
            raise ValueError("range grid must be start:stop:step with step > 0")
        start, stop, step = parts
        count = int(round((stop - start) / step)) + 1
        return tuple(round(start + k * step, 10) for k in range(count))
    values = tuple(float(v) for v in text.split(",") if v.strip())
    if not values:
        raise ValueError("empty grid")
    return values


class GridType(click.ParamType):
    name = "grid"

    def convert(self, value, param, ctx):
        if isinstance(value, tuple):
            return value
        try:
            return parse_grid(value)
        except ValueError as exc:
            self.fail(str(exc), param, ctx)


GRID = GridType()


def _write_text(path: str | None, text: str) -> None:
    if path is None or path == "-":
        click.echo(text, nl=False)
        return
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _spec_from_flags(spec_path, preset, **overrides):
    from limdep.synth import resolve_spec

    if spec_path and preset:
        raise click.UsageError("use either --spec or --preset, not both")
    try:
        return resolve_spec(preset=preset, path=spec_path, **overrides)
    except KeyError as exc:
        raise click.UsageError(str(exc.args[0]))
    except (ValueError, TypeError, OSError) as exc:
        _fail("spec", exc, EXIT_DATA)


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Two-component modelling tools for zero-inflated targets."""


@main.command()
@click.option("--data", "data_path", required=True, type=click.Path(dir_okay=False))
@click.option("--target", required=True, help="Name of the nonnegative target column.")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option(
    "--learner",
    default="forest",
    show_default=True,
    type=click.Choice(["forest", "constant_mean", "linear_least_squares"]),
)
@click.option("--trees", default=500, show_default=True, type=click.IntRange(min=1))
@click.option("--min-leaf", default=5, show_default=True, type=click.IntRange(min=1))
@click.option(
    "--split", "train_fraction", default=0.8, show_default=True,
    type=click.FloatRange(0, 1, min_open=True, max_open=True),
    help="Training share of the rows.",
)
@click.option("--sweep-grid", default="0:2:0.05", show_default=True, type=GRID)
@click.option("--drop", multiple=True, help="Column to exclude from the features.")
@click.option("--stratify", is_flag=True, help="Split zeros and positives separately.")
@click.option("--out", default="analysis.json", show_default=True, type=click.Path(dir_okay=False))
def analyze(data_path, target, seed, learner, trees, min_leaf, train_fraction,
            sweep_grid, drop, stratify, out):
    """Fit single and two-component models on a CSV and report test correlations."""
    from limdep.composer import fit_pipeline, summary_report
    from limdep.data import load_csv, split
    from limdep.learners import LearnerSpec

    try:
        dataset = load_csv(data_path, target, drop_columns=drop)
        parts = split(dataset, train_fraction, seed, stratify=stratify)
        train = dataset.subset(parts.train_rows)
        test = dataset.subset(parts.test_rows)
    except (errors.DataError, OSError) as exc:
        _fail("data", exc, EXIT_DATA)

    spec = LearnerSpec(kind=learner, n_trees=trees, min_leaf=min_leaf, seed=seed)
    try:
        models = fit_pipeline(train, spec)
        report = summary_report(
            models, train, test, grid=sweep_grid, learner_spec=spec,
            seeds={"split": seed, "learner": seed},
        )
    except (errors.LimdepError, ValueError) as exc:
        _fail("modeling", exc, EXIT_MODELING)

    _write_text(out, report.to_json())
    stem = os.path.splitext(out)[0]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["s_ad", "correlation"])
    for s, r in zip(report.sweep["grid"], report.sweep["correlations"]):
        writer.writerow([repr(float(s)), repr(float(r))])
    _write_text(f"{stem}_sweep.csv", buf.getvalue())
    click.echo(
        f"wrote {out} and {stem}_sweep.csv (best s_ad = {report.sweep['best_s_ad']})",
        err=True,
    )


@main.command()
@click.option("--spec", "spec_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--preset", default=None, help="REGIME-STRONG or REGIME-WEAK.")
@click.option("--n", type=click.IntRange(min=1), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", default=None, type=click.Path(dir_okay=False), help="JSON summary path.")
@click.option("--save-population", default=None, type=click.Path(dir_okay=False))
def simulate(spec_path, preset, n, seed, out, save_population):
    """Generate a synthetic population and print its moments as JSON."""
    from limdep.synth import generate, population_summary

    spec = _spec_from_flags(spec_path, preset, n=n, seed=seed)
    try:
        pop = generate(spec)
        summary = population_summary(pop)
    except errors.DataError as exc:
        _fail("simulate", exc, EXIT_DATA)
    except errors.ModelingError as exc:
        _fail("simulate", exc, EXIT_DATA)
    if save_population:
        pop.save(save_population)
    payload = {"spec": spec.to_dict(), "summary": summary}
    _write_text(out, json.dumps(payload, indent=2) + "\n")


@main.command()
@click.option("--spec", "spec_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--preset", default=None, help="REGIME-STRONG or REGIME-WEAK.")
@click.option("--n", type=click.IntRange(min=2), default=200_000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--target-cor", default=0.3, show_default=True,
              type=click.FloatRange(-1, 1))
@click.option("--grid", default="0.05:1:0.05", show_default=True, type=GRID)
@click.option("--tol", default=0.005, show_default=True, type=float)
@click.option("--out", default=None, type=click.Path(dir_okay=False), help="CSV path.")
def contour(spec_path, preset, n, seed, target_cor, grid, tol, out):
    """Pseudo-model qualities needed for a target product correlation."""
    from limdep.synth import MIN_CONTOUR_TOL, generate, required_correlation_contour

    if tol < MIN_CONTOUR_TOL:
        raise click.BadParameter(
            f"{tol} is below the Monte-Carlo resolution guard {MIN_CONTOUR_TOL}",
            param_hint="--tol",
        )
    if any(not 0.0 <= g <= 1.0 for g in grid):
        raise click.BadParameter("r_p grid values must lie in [0, 1]", param_hint="--grid")
    spec = _spec_from_flags(spec_path, preset or "REGIME-STRONG", n=n, seed=seed)
    try:
        points = required_correlation_contour(
            generate(spec), target_cor=target_cor, r_p_grid=grid, tol=tol, seed=seed
        )
    except errors.LimdepError as exc:
        _fail("contour", exc, EXIT_DATA)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["r_p", "r_mu", "achieved_cor", "feasible"])
    for p in points:
        writer.writerow([repr(p.r_p), repr(p.r_mu), repr(p.achieved_cor), int(p.feasible)])
    _write_text(out, buf.getvalue())


def _parse_tolerances(items) -> dict:
    out = {}
    for item in items:
        name, sep, value = item.partition("=")
        if not sep:
            raise click.BadParameter(f"expected NAME=VALUE, got {item!r}", param_hint="--tol")
        try:
            out[name.strip()] = float(value)
        except ValueError:
            raise click.BadParameter(f"bad tolerance value in {item!r}", param_hint="--tol")
    return out


@main.command()
@click.option("--spec", "spec_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--preset", default=None, help="REGIME-STRONG or REGIME-WEAK.")
@click.option("--n", type=click.IntRange(min=10), default=1_000_000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--tol", "tolerances", multiple=True, help="Override a tolerance, NAME=VALUE.")
@click.option("--out", default=None, type=click.Path(dir_okay=False), help="JSON report path.")
def verify(spec_path, preset, n, seed, tolerances, out):
    """Run the Monte-Carlo identity checks; exit 1 if any check fails."""
    from limdep.synth import DEFAULT_TOLERANCES, verify_identities

    spec = _spec_from_flags(spec_path, preset)
    tol = _parse_tolerances(tolerances)
    unknown = set(tol) - set(DEFAULT_TOLERANCES)
    if unknown:
        raise click.BadParameter(f"unknown check names {sorted(unknown)}", param_hint="--tol")
    try:
        report = verify_identities(spec, n=n, seed=seed, tolerances=tol)
    except errors.LimdepError as exc:
        _fail("verify", exc, EXIT_DATA)
    for warning in report.warnings:
        click.echo(f"warning: {warning}", err=True)
    for check in report.checks:
        flag = "PASS" if check.passed else "FAIL"
        click.echo(
            f"{flag} {check.name}: deviation {check.deviation:.3g} (tolerance {check.tolerance:g})",
            err=True,
        )
    _write_text(out, report.to_json())
    if not report.passed:
        sys.exit(EXIT_VERIFY_FAILED)


if __name__ == "__main__":
    main()
