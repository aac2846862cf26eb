"""Training, scoring and ranking behind one orchestration layer.

The functions in the first half are plain calls shared by the CLI and the
HTTP app: build a cohort, tune weights or train the comparison network,
serialize a model artifact, score candidate records end to end.  Artifacts
are deterministic documents (no clocks, no environment), so an identical
request with an identical seed reproduces identical bytes; timestamps live
in sidecar metadata.

The second half is a FastAPI app over an on-disk registry.  Errors follow
one shape everywhere: {"error": {"code", "message", "field_path"}}.
"""

from __future__ import annotations

import threading
from datetime import datetime, timezone
from typing import Optional

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import cohort as cohort_mod
from . import qp, regression, screening, siamese
from .backend import backend_name
from .features import (
    FeatureRanking,
    FeatureVector,
    InvalidRecord,
    NormalizationCaps,
    derive_features,
    normalize,
    record_from_mapping,
    validate_record,
)
from .registry import (
    Registry,
    UnknownCohort,
    UnknownModel,
    UnknownRun,
    content_id,
)

__all__ = [
    "ARTIFACT_SCHEMA",
    "OPT_KINDS",
    "SIAMESE_KINDS",
    "ALL_KINDS",
    "ValidationFailed",
    "train_optimizer_model",
    "train_siamese_model",
    "train_from_request",
    "model_from_artifact",
    "score_records",
    "score_features",
    "records_from_rows",
    "create_app",
]

ARTIFACT_SCHEMA = 1
OPT_KINDS = (regression.M1, regression.M2)
SIAMESE_KINDS = ("siamese_contrastive", "siamese_triplet")
ALL_KINDS = OPT_KINDS + SIAMESE_KINDS


class ValidationFailed(ValueError):
    """Input rejected; ``problems`` holds (field_path, message) pairs."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(f"{p}: {m}" for p, m in self.problems))


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _cohort_summary(cohort: cohort_mod.Cohort) -> dict:
    return {
        "hash": content_id("c", cohort.to_dict()),
        "level": cohort.level,
        "field_tag": cohort.field_tag,
        "research_type": cohort.research_type,
        "n_pos": cohort.n_pos,
        "n_neg": cohort.n_neg,
    }


def train_optimizer_model(cohort: cohort_mod.Cohort, kind: str,
                          config: qp.OptimizerConfig = qp.OptimizerConfig(),
                          ranking: Optional[FeatureRanking] = None,
                          r_min=None, r_max=None,
                          caps: Optional[NormalizationCaps] = None,
                          backend=None):
    """Tune simplex weights on a cohort; returns (artifact, run_log)."""
    caps = caps or NormalizationCaps()
    if kind not in OPT_KINDS:
        raise ValueError(f"kind must be one of {OPT_KINDS}")
    form, constraints = qp.assemble(cohort, kind, config.gamma, ranking,
                                    r_min, r_max)
    result = qp.solve(form, constraints, config, backend=backend)
    used_ranking = None
    if kind == regression.M1:
        used_ranking = (ranking or FeatureRanking.default()).to_list()
    artifact = {
        "schema": ARTIFACT_SCHEMA,
        "kind": kind,
        "model": result.weights.to_dict(caps),
        "training": {
            "framework": "optimizer",
            "gamma": form.gamma,
            "objective": result.objective_value,
            "constraint_residuals": {k: float(v) for k, v in
                                     result.constraint_residuals.items()},
            "converged": bool(result.converged),
            "start_index_of_best": int(result.start_index_of_best),
            "iterations": int(result.iterations),
            "config": {
                "gamma": config.gamma,
                "max_iters": config.max_iters,
                "step_size_init": config.step_size_init,
                "backtracking": config.backtracking,
                "tolerance": config.tolerance,
                "n_starts": config.n_starts,
                "rng_seed": config.rng_seed,
            },
            "ranking": used_ranking,
            "bounds": {
                "r_min": None if r_min is None else np.asarray(
                    r_min, dtype=np.float64).ravel().tolist(),
                "r_max": None if r_max is None else np.asarray(
                    r_max, dtype=np.float64).ravel().tolist(),
            },
            "cohort": _cohort_summary(cohort),
        },
    }
    best_trace = result.traces[result.start_index_of_best]
    run_log = {
        "status": "done",
        "framework": "optimizer",
        "trace": [[i, float(v)] for i, v in enumerate(best_trace)],
        "per_start": [{"start": s, "objective": [float(v) for v in t]}
                      for s, t in enumerate(result.traces)],
        "iterations": int(result.iterations),
        "constraint_residuals": artifact["training"]["constraint_residuals"],
    }
    return artifact, run_log


def train_siamese_model(cohort: cohort_mod.Cohort, kind: str,
                        config: siamese.TrainConfig = siamese.TrainConfig(),
                        layer_sizes=None,
                        caps: Optional[NormalizationCaps] = None,
                        backend=None):
    """Train the comparison network on cohort pairs or triplets."""
    caps = caps or NormalizationCaps()
    if kind not in SIAMESE_KINDS:
        raise ValueError(f"kind must be one of {SIAMESE_KINDS}")
    sizes = tuple(layer_sizes) if layer_sizes else siamese.DEFAULT_SIZES
    net = siamese.SiameseNet.init(sizes, seed=config.rng_seed,
                                  scale=config.init_scale)
    if kind == "siamese_contrastive":
        x_a, x_b, y = cohort_mod.pair_arrays(cohort_mod.make_pairs(cohort))
        trained, history = siamese.train_contrastive(net, x_a, x_b, y, config,
                                                     backend=backend)
        n_examples = int(y.shape[0])
    else:
        x_a, x_p, x_n = cohort_mod.triplet_arrays(
            cohort_mod.make_triplets(cohort))
        trained, history = siamese.train_triplet(net, x_a, x_p, x_n, config,
                                                 backend=backend)
        n_examples = int(x_a.shape[0])
    artifact = {
        "schema": ARTIFACT_SCHEMA,
        "kind": kind,
        "model": trained.to_dict(caps=caps, train=config.to_dict()),
        "training": {
            "framework": "siamese",
            "n_examples": n_examples,
            "layer_sizes": list(sizes),
            "first_epoch_loss": float(history[0]),
            "final_epoch_loss": float(history[-1]),
            "cohort": _cohort_summary(cohort),
        },
    }
    run_log = {
        "status": "done",
        "framework": "siamese",
        "trace": [[i, float(v)] for i, v in enumerate(history)],
        "iterations": len(history),
    }
    return artifact, run_log


def _optimizer_config_from(d: dict) -> qp.OptimizerConfig:
    try:
        return qp.OptimizerConfig(**d)
    except TypeError as exc:
        raise ValidationFailed([("config", str(exc))]) from None
    except ValueError as exc:
        raise ValidationFailed([("config", str(exc))]) from None


def _siamese_config_from(d: dict) -> tuple:
    d = dict(d)
    sizes = d.pop("layer_sizes", None)
    try:
        return siamese.TrainConfig(**d), sizes
    except TypeError as exc:
        raise ValidationFailed([("config", str(exc))]) from None
    except ValueError as exc:
        raise ValidationFailed([("config", str(exc))]) from None


def train_from_request(cohort: cohort_mod.Cohort, kind: str,
                       config: Optional[dict] = None,
                       ranking=None, bounds: Optional[dict] = None,
                       caps: Optional[dict] = None, backend=None):
    """Dispatch a JSON-shaped training request; returns (artifact, run_log)."""
    config = dict(config or {})
    caps_obj = NormalizationCaps.from_dict(caps) if caps else None
    if kind in OPT_KINDS:
        ranking_obj = None
        if ranking is not None:
            try:
                ranking_obj = FeatureRanking(np.asarray(ranking))
            except ValueError as exc:
                raise ValidationFailed([("ranking", str(exc))]) from None
        bounds = bounds or {}
        return train_optimizer_model(
            cohort, kind, _optimizer_config_from(config),
            ranking=ranking_obj, r_min=bounds.get("r_min"),
            r_max=bounds.get("r_max"), caps=caps_obj, backend=backend)
    if kind in SIAMESE_KINDS:
        cfg, sizes = _siamese_config_from(config)
        return train_siamese_model(cohort, kind, cfg, layer_sizes=sizes,
                                   caps=caps_obj, backend=backend)
    raise ValidationFailed([("kind", f"kind must be one of {ALL_KINDS}")])


def model_from_artifact(artifact: dict):
    """Rebuild the scoring object and its caps snapshot from an artifact."""
    kind = artifact.get("kind")
    model_doc = artifact["model"]
    caps = NormalizationCaps.from_dict(model_doc["caps"])
    if kind in OPT_KINDS:
        return regression.ModelWeights.from_dict(model_doc), caps
    if kind in SIAMESE_KINDS:
        return siamese.SiameseNet.from_dict(model_doc), caps
    raise ValueError(f"unknown artifact kind {kind!r}")


def records_from_rows(rows) -> list:
    records, problems = [], []
    seen = set()
    for i, row in enumerate(rows):
        path = f"records[{i}]"
        try:
            rec = record_from_mapping(dict(row))
        except InvalidRecord as exc:
            problems.append((path, str(exc)))
            continue
        report = validate_record(rec)
        if not report.ok:
            problems.append((path, "; ".join(report.violations)))
            continue
        if rec.candidate_id in seen:
            problems.append((path, f"duplicate candidate_id "
                                   f"{rec.candidate_id!r}"))
            continue
        seen.add(rec.candidate_id)
        records.append(rec)
    if problems:
        raise ValidationFailed(problems)
    return records


def score_records(model, caps: NormalizationCaps, rows,
                  level: Optional[str] = None,
                  backend=None) -> screening.AQIReport:
    """validate -> derive -> normalize -> (filter) -> rank, in one pass."""
    records = records_from_rows(rows)
    problems, vectors = [], []
    for i, rec in enumerate(records):
        try:
            vectors.append(normalize(derive_features(rec), caps))
        except InvalidRecord as exc:
            problems.append((f"records[{i}]", str(exc)))
    if problems:
        raise ValidationFailed(problems)
    filter_results = None
    if level is not None:
        try:
            spec = screening.FilterSpec(level=level)
        except ValueError as exc:
            raise ValidationFailed([("level", str(exc))]) from None
        filter_results = [screening.apply_filter(rec, spec)
                          for rec in records]
    return screening.rank_candidates(model, vectors, filter_results,
                                     backend=backend)


def score_features(model, features, backend=None) -> screening.AQIReport:
    """Rank already-normalized vectors ({candidate_id, x} objects)."""
    vectors, problems = [], []
    seen = set()
    for i, item in enumerate(features):
        path = f"features[{i}]"
        cid = str(item.get("candidate_id", "")).strip()
        if not cid:
            problems.append((path, "missing candidate_id"))
            continue
        if cid in seen:
            problems.append((path, f"duplicate candidate_id {cid!r}"))
            continue
        seen.add(cid)
        try:
            vectors.append(FeatureVector(cid, np.asarray(item["x"],
                                                         dtype=np.float64)))
        except (KeyError, TypeError, ValueError) as exc:
            problems.append((path, str(exc)))
    if problems:
        raise ValidationFailed(problems)
    return screening.rank_candidates(model, vectors, backend=backend)


# ---------------------------------------------------------------------------
# HTTP layer


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str,
                 field_path: str = ""):
        self.status = status
        self.code = code
        self.message = message
        self.field_path = field_path
        super().__init__(message)

    def payload(self) -> dict:
        return {"error": {"code": self.code, "message": self.message,
                          "field_path": self.field_path}}


def _require(body: dict, key: str, kind: type, where: str = ""):
    path = f"{where}{key}"
    if key not in body:
        raise ApiError(422, "validation_error", f"missing field {key!r}", path)
    value = body[key]
    if kind is not None and not isinstance(value, kind):
        raise ApiError(422, "validation_error",
                       f"field {key!r} must be {kind.__name__}", path)
    return value


def create_app(root, sync_member_limit: int = 200,
               sync_epoch_limit: int = 5000) -> FastAPI:
    """App over a registry rooted at ``root``.

    Training requests small enough to finish interactively run inline;
    anything larger becomes a background job polled via its run id.  Cohort
    training is serialized per cohort, artifact writes per model id.
    """
    registry = Registry(root)
    app = FastAPI(title="academic quality index service")
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    app.state.registry = registry

    @app.exception_handler(ApiError)
    async def _api_error(_: Request, exc: ApiError):
        return JSONResponse(exc.payload(), status_code=exc.status)

    @app.exception_handler(RequestValidationError)
    async def _body_error(_: Request, exc: RequestValidationError):
        first = exc.errors()[0] if exc.errors() else {}
        path = ".".join(str(p) for p in first.get("loc", ()) if p != "body")
        return JSONResponse(
            ApiError(422, "validation_error",
                     first.get("msg", "invalid request body"),
                     path).payload(),
            status_code=422)

    def _to_api_error(exc: Exception) -> ApiError:
        if isinstance(exc, ValidationFailed):
            path, message = exc.problems[0]
            return ApiError(422, "validation_error", message, path)
        if isinstance(exc, UnknownCohort):
            return ApiError(404, "unknown_cohort",
                            f"no cohort with id {exc.args[0]!r}", "cohort_id")
        if isinstance(exc, UnknownModel):
            return ApiError(404, "unknown_model",
                            f"no model with id {exc.args[0]!r}", "model_id")
        if isinstance(exc, UnknownRun):
            return ApiError(404, "unknown_run",
                            f"no run with id {exc.args[0]!r}", "run_id")
        if isinstance(exc, qp.InfeasibleConstraints):
            return ApiError(422, "infeasible_constraints", str(exc), "bounds")
        if isinstance(exc, (cohort_mod.EmptyClass, cohort_mod.BadSpec,
                            screening.EmptyInput,
                            screening.InvalidPermutation,
                            screening.CapsMismatch, InvalidRecord,
                            ValueError)):
            return ApiError(422, "validation_error", str(exc), "")
        raise exc

    @app.get("/health")
    def health():
        return {"status": "ok", "backend": backend_name()}

    @app.post("/cohorts", status_code=201)
    def post_cohort(body: dict):
        given = [k for k in ("document", "records", "spec") if k in body]
        if len(given) != 1:
            raise ApiError(422, "validation_error",
                           "provide exactly one of document, records, spec",
                           "")
        try:
            if "document" in body:
                cohort = cohort_mod.Cohort.from_dict(body["document"])
            elif "spec" in body:
                cohort = cohort_mod.generate(
                    cohort_mod.SyntheticSpec(**body["spec"]))
            else:
                caps = NormalizationCaps.from_dict(body.get("caps") or {})
                records = _require(body, "records", list)
                cohort = _cohort_from_rows(records, caps, body)
        except TypeError as exc:
            raise ApiError(422, "validation_error", str(exc), "spec")
        except (ValidationFailed, ValueError, KeyError,
                InvalidRecord) as exc:
            raise _to_api_error(exc if isinstance(exc, ValidationFailed)
                                else ValueError(str(exc)))
        cohort_id = registry.put_cohort(cohort.to_dict())
        return {"cohort_id": cohort_id, "n_pos": cohort.n_pos,
                "n_neg": cohort.n_neg, "level": cohort.level}

    def _cohort_from_rows(rows, caps, body) -> cohort_mod.Cohort:
        pos, neg, problems = [], [], []
        for i, row in enumerate(rows):
            row = dict(row)
            cls = str(row.pop("class", "")).strip().lower()
            if cls not in ("positive", "negative"):
                problems.append((f"records[{i}].class",
                                 "class must be positive or negative"))
                continue
            try:
                rec = record_from_mapping(row)
                report = validate_record(rec)
                if not report.ok:
                    problems.append((f"records[{i}]",
                                     "; ".join(report.violations)))
                    continue
                fv = normalize(derive_features(rec), caps)
            except InvalidRecord as exc:
                problems.append((f"records[{i}]", str(exc)))
                continue
            (pos if cls == "positive" else neg).append(fv)
        if problems:
            raise ValidationFailed(problems)
        if not pos or not neg:
            raise ValidationFailed(
                [("records", "need at least one positive and one negative")])
        return cohort_mod.Cohort(
            positives=pos, negatives=neg,
            level=body.get("level", "AssistProf"),
            field_tag=body.get("field_tag", "imported"),
            research_type=body.get("research_type", "applied"))

    @app.get("/cohorts")
    def list_cohorts():
        return {"cohorts": registry.list_cohorts()}

    @app.get("/cohorts/{cohort_id}")
    def get_cohort(cohort_id: str):
        try:
            document = registry.get_cohort(cohort_id)
        except UnknownCohort as exc:
            raise _to_api_error(exc)
        return {"cohort_id": cohort_id, "document": document}

    def _run_training(cohort, kind, config, ranking, bounds, caps,
                      model_id, run_id, request_doc, reraise):
        with registry.lock_for(f"train:{request_doc['cohort_id']}"):
            started = _utc_now()
            try:
                artifact, run_log = train_from_request(
                    cohort, kind, config, ranking, bounds, caps)
            except Exception as exc:  # failed jobs must stay inspectable
                registry.put_run(run_id, {
                    "run_id": run_id, "model_id": model_id,
                    "status": "failed", "error": str(exc), "trace": [],
                })
                if reraise:
                    raise
                return None
            with registry.lock_for(f"model:{model_id}"):
                registry.put_model(model_id, artifact, {
                    "created_at": started,
                    "finished_at": _utc_now(),
                    "backend": backend_name(),
                    "request": request_doc,
                })
            run_log = dict(run_log, run_id=run_id, model_id=model_id)
            registry.put_run(run_id, run_log)
            return artifact

    @app.post("/train")
    def post_train(body: dict):
        cohort_id = _require(body, "cohort_id", str)
        kind = _require(body, "kind", str)
        if kind not in ALL_KINDS:
            raise ApiError(422, "validation_error",
                           f"kind must be one of {list(ALL_KINDS)}", "kind")
        try:
            cohort = cohort_mod.Cohort.from_dict(registry.get_cohort(cohort_id))
        except (UnknownCohort, ValueError) as exc:
            raise _to_api_error(exc)
        config = body.get("config") or {}
        ranking = body.get("ranking")
        bounds = body.get("bounds")
        caps = body.get("caps")
        request_doc = {"cohort_id": cohort_id, "kind": kind, "config": config,
                       "ranking": ranking, "bounds": bounds, "caps": caps}
        model_id = content_id("m", request_doc)
        run_id = "r" + model_id[1:]
        if registry.has_model(model_id):
            return {"model_id": model_id, "run_id": run_id, "status": "done",
                    "cached": True, "artifact": registry.get_model(model_id)}

        members = cohort.n_pos + cohort.n_neg
        epochs = int(config.get("epochs", siamese.TrainConfig().epochs)) \
            if kind in SIAMESE_KINDS else 0
        background = members > sync_member_limit or epochs > sync_epoch_limit
        if background:
            registry.put_run(run_id, {"run_id": run_id, "model_id": model_id,
                                      "status": "running", "trace": []})
            worker = threading.Thread(
                target=_run_training,
                args=(cohort, kind, config, ranking, bounds, caps,
                      model_id, run_id, request_doc, False),
                daemon=True)
            worker.start()
            return JSONResponse({"model_id": model_id, "run_id": run_id,
                                 "status": "running", "cached": False},
                                status_code=202)
        try:
            artifact = _run_training(cohort, kind, config, ranking, bounds,
                                     caps, model_id, run_id, request_doc,
                                     True)
        except Exception as exc:
            raise _to_api_error(exc)
        return {"model_id": model_id, "run_id": run_id, "status": "done",
                "cached": False, "artifact": artifact}

    @app.get("/models")
    def list_models():
        return {"models": registry.list_models()}

    @app.get("/models/{model_id}")
    def get_model(model_id: str):
        try:
            artifact = registry.get_model(model_id)
        except UnknownModel as exc:
            raise _to_api_error(exc)
        return {"model_id": model_id, "artifact": artifact,
                "meta": registry.get_model_meta(model_id)}

    @app.post("/models/{model_id}/score")
    def post_score(model_id: str, body: dict):
        try:
            artifact = registry.get_model(model_id)
            model, caps = model_from_artifact(artifact)
            if "features" in body:
                report = score_features(model, _require(body, "features",
                                                        list))
            else:
                report = score_records(model, caps,
                                       _require(body, "records", list),
                                       level=body.get("level"))
        except ApiError:
            raise
        except Exception as exc:
            raise _to_api_error(exc)
        return {"model_id": model_id, "report": report.to_dict()}

    @app.post("/filter")
    def post_filter(body: dict):
        level = _require(body, "level", str)
        rows = _require(body, "records", list)
        overrides = {k: body[k] for k in
                     ("max_national_rank", "max_international_rank",
                      "min_gpa_g", "gpa_ref_scale") if k in body}
        try:
            spec = screening.FilterSpec(level=level, **overrides)
            records = records_from_rows(rows)
        except Exception as exc:
            raise _to_api_error(exc)
        results = [screening.apply_filter(rec, spec) for rec in records]
        return {"level": level, "results": [
            {"candidate_id": r.candidate_id, "passed": r.passed,
             "reasons": list(r.reasons)} for r in results]}

    @app.post("/rankings/aggregate")
    def post_aggregate(body: dict):
        rankings = _require(body, "rankings", list)
        try:
            combined = screening.aggregate_rankings(rankings)
        except Exception as exc:
            raise _to_api_error(exc)
        ranks = combined.to_list() if isinstance(combined, FeatureRanking) \
            else list(combined)
        return {"ranks": ranks}

    @app.get("/runs/{run_id}")
    def get_run(run_id: str):
        try:
            return registry.get_run(run_id)
        except UnknownRun as exc:
            raise _to_api_error(exc)

    return app
