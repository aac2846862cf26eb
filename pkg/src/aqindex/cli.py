"""Command line entry points: data, training, scoring, serving."""

from __future__ import annotations

import csv
import functools
import json
from pathlib import Path

import click

from . import cohort as cohort_mod
from . import qp, screening, service, siamese
from .features import (
    FeatureRanking,
    InvalidRecord,
    NormalizationCaps,
)

_DOMAIN_ERRORS = (
    InvalidRecord,
    cohort_mod.BadSpec,
    cohort_mod.EmptyClass,
    qp.InfeasibleConstraints,
    qp.NonConvergence,
    screening.EmptyInput,
    screening.InvalidPermutation,
    screening.CapsMismatch,
    service.ValidationFailed,
    ValueError,
)


def _friendly(fn):
    """Turn domain errors into clean CLI failures instead of tracebacks."""
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except _DOMAIN_ERRORS as exc:
            raise click.ClickException(str(exc)) from exc
    return wrapper


def _write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _load_json(path):
    return json.loads(Path(path).read_text())


def _rows_from_file(path) -> list:
    p = Path(path)
    if p.suffix.lower() == ".json":
        data = json.loads(p.read_text())
        if not isinstance(data, list):
            raise click.ClickException("JSON records file must be an array")
        return [dict(r) for r in data]
    with open(p, newline="") as fh:
        return [dict(r) for r in csv.DictReader(fh)]


def _load_ranking(path) -> FeatureRanking:
    data = _load_json(path)
    if isinstance(data, dict):
        data = data.get("ranks", data)
    return FeatureRanking(data)


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text if text.endswith("\n") else text + "\n")
    else:
        click.echo(text)


@click.group()
@click.version_option(package_name="aqindex")
def main():
    """Academic quality index: train scorers, screen and rank candidates."""


@main.command("generate-data")
@click.option("--out", required=True, type=click.Path(dir_okay=False),
              help="cohort document destination (JSON)")
@click.option("--n-pos", default=20, show_default=True)
@click.option("--n-neg", default=20, show_default=True)
@click.option("--dispersion", default=cohort_mod.DEFAULT_DISPERSION,
              show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--level", default="AssistProf",
              type=click.Choice(cohort_mod.LEVELS), show_default=True)
@click.option("--field-tag", default="synthetic", show_default=True)
@click.option("--research-type", default="applied",
              type=click.Choice(cohort_mod.RESEARCH_TYPES), show_default=True)
@_friendly
def generate_data(out, n_pos, n_neg, dispersion, seed, level, field_tag,
                  research_type):
    """Sample a synthetic reference cohort (seeded, reproducible)."""
    spec = cohort_mod.SyntheticSpec(
        n_pos=n_pos, n_neg=n_neg, dispersion=dispersion, rng_seed=seed,
        level=level, field_tag=field_tag, research_type=research_type)
    cohort = cohort_mod.generate(spec)
    cohort_mod.save_cohort(cohort, out)
    click.echo(f"wrote {cohort.n_pos}+{cohort.n_neg} member cohort to {out}")


@main.command("import-cohort")
@click.argument("records_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--caps", "caps_file", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="normalization caps JSON (defaults used when omitted)")
@click.option("--level", default="AssistProf",
              type=click.Choice(cohort_mod.LEVELS), show_default=True)
@click.option("--field-tag", default="imported", show_default=True)
@click.option("--research-type", default="applied",
              type=click.Choice(cohort_mod.RESEARCH_TYPES), show_default=True)
@_friendly
def import_cohort(records_file, out, caps_file, level, field_tag,
                  research_type):
    """Validate and normalize a labelled records file into a cohort."""
    caps = NormalizationCaps.from_dict(_load_json(caps_file)) \
        if caps_file else None
    cohort = cohort_mod.import_cohort(records_file, caps, level=level,
                                      field_tag=field_tag,
                                      research_type=research_type)
    cohort_mod.save_cohort(cohort, out)
    click.echo(f"imported {cohort.n_pos}+{cohort.n_neg} members to {out}")


@main.command("train-opt")
@click.option("--cohort", "cohort_file", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--model", "kind", default="m1", show_default=True,
              type=click.Choice(["m1", "m2"]))
@click.option("--gamma", default=None, type=float,
              help="trade-off multiplier (default: cohort-balanced)")
@click.option("--bounds", "bounds_file", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="JSON with r_min / r_max (scalars or per-weight lists)")
@click.option("--ranking-file", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="JSON feature-importance permutation (m1 only)")
@click.option("--seed", default=0, show_default=True)
@click.option("--starts", default=8, show_default=True)
@click.option("--max-iters", default=500, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--run-log", default=None, type=click.Path(dir_okay=False),
              help="also write the objective trace")
@_friendly
def train_opt(cohort_file, kind, gamma, bounds_file, ranking_file, seed,
              starts, max_iters, out, run_log):
    """Tune simplex weights on a cohort and write the model artifact."""
    cohort = cohort_mod.load_cohort(cohort_file)
    bounds = _load_json(bounds_file) if bounds_file else {}
    ranking = _load_ranking(ranking_file) if ranking_file else None
    config = qp.OptimizerConfig(gamma=gamma, rng_seed=seed, n_starts=starts,
                                max_iters=max_iters)
    artifact, run = service.train_optimizer_model(
        cohort, kind, config, ranking=ranking,
        r_min=bounds.get("r_min"), r_max=bounds.get("r_max"))
    _write_json(out, artifact)
    if run_log:
        _write_json(run_log, run)
    training = artifact["training"]
    click.echo(f"trained {kind}: objective {training['objective']:.6g}, "
               f"max residual "
               f"{max(training['constraint_residuals'].values()):.2e}, "
               f"wrote {out}")


@main.command("train-siamese")
@click.option("--cohort", "cohort_file", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--loss", default="contrastive", show_default=True,
              type=click.Choice(["contrastive", "triplet"]))
@click.option("--margin", default=0.5, show_default=True)
@click.option("--epochs", default=200, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--lr", default=0.5, show_default=True)
@click.option("--momentum", default=0.9, show_default=True)
@click.option("--batch-size", default=32, show_default=True)
@click.option("--arch", default=None,
              help="comma-separated layer sizes, e.g. 21,16,8,1")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--run-log", default=None, type=click.Path(dir_okay=False))
@_friendly
def train_siamese(cohort_file, loss, margin, epochs, seed, lr, momentum,
                  batch_size, arch, out, run_log):
    """Train the comparison network and write the model artifact."""
    cohort = cohort_mod.load_cohort(cohort_file)
    sizes = tuple(int(p) for p in arch.split(",")) if arch else None
    config = siamese.TrainConfig(margin=margin, learning_rate=lr,
                                 momentum=momentum, epochs=epochs,
                                 batch_size=batch_size, rng_seed=seed)
    kind = "siamese_contrastive" if loss == "contrastive" \
        else "siamese_triplet"
    artifact, run = service.train_siamese_model(cohort, kind, config,
                                                layer_sizes=sizes)
    _write_json(out, artifact)
    if run_log:
        _write_json(run_log, run)
    training = artifact["training"]
    click.echo(f"trained {kind} on {training['n_examples']} examples: "
               f"loss {training['first_epoch_loss']:.4g} -> "
               f"{training['final_epoch_loss']:.4g}, wrote {out}")


@main.command("score")
@click.option("--model", "model_file", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--records", "records_file", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="raw records (CSV, or JSON array)")
@click.option("--features", "features_file", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="JSON array of {candidate_id, x} in feature space")
@click.option("--level", default=None, type=click.Choice(cohort_mod.LEVELS),
              help="also apply the minimum-requirements filter")
@click.option("--fmt", "fmt", default="json", show_default=True,
              type=click.Choice(["json", "csv"]))
@click.option("--out", default=None, type=click.Path(dir_okay=False))
@_friendly
def score(model_file, records_file, features_file, level, fmt, out):
    """Rank candidates with a trained model artifact."""
    if (records_file is None) == (features_file is None):
        raise click.UsageError("provide exactly one of --records/--features")
    model, caps = service.model_from_artifact(_load_json(model_file))
    if records_file:
        report = service.score_records(model, caps,
                                       _rows_from_file(records_file),
                                       level=level)
    else:
        if level is not None:
            raise click.UsageError(
                "--level needs raw records; feature vectors carry no "
                "filterable inputs")
        report = service.score_features(model, _load_json(features_file))
    _emit(report.to_json() if fmt == "json" else report.to_csv(), out)


@main.command("filter")
@click.option("--records", "records_file", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--level", required=True, type=click.Choice(cohort_mod.LEVELS))
@click.option("--out", default=None, type=click.Path(dir_okay=False))
@_friendly
def filter_cmd(records_file, level, out):
    """Apply the per-level minimum requirements to raw records."""
    spec = screening.FilterSpec(level=level)
    results = []
    for row in _rows_from_file(records_file):
        row.pop("class", None)
        rec = service.records_from_rows([row])[0]
        results.append(screening.apply_filter(rec, spec))
    doc = [{"candidate_id": r.candidate_id, "passed": r.passed,
            "reasons": list(r.reasons)} for r in results]
    _emit(json.dumps(doc, indent=2), out)


@main.command("aggregate-ranks")
@click.argument("rankings_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", default=None, type=click.Path(dir_okay=False))
@_friendly
def aggregate_ranks(rankings_file, out):
    """Average committee feature rankings into one permutation."""
    data = _load_json(rankings_file)
    if isinstance(data, dict):
        data = data.get("rankings", data)
    combined = screening.aggregate_rankings(data)
    ranks = combined.to_list() if isinstance(combined, FeatureRanking) \
        else list(combined)
    _emit(json.dumps({"ranks": ranks}), out)


@main.command("serve")
@click.option("--port", default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--root", "root_dir", default="aqindex-data", show_default=True,
              help="registry directory (created if missing)")
def serve(port, host, root_dir):
    """Run the HTTP service over an on-disk registry."""
    import uvicorn

    uvicorn.run(service.create_app(root_dir), host=host, port=port,
                log_level="info")


if __name__ == "__main__":
    main()
