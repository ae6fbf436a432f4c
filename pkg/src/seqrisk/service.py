"""HTTP service exposing the engine to the browser workbench.

The model and cohort load once at startup and are treated as an immutable
snapshot; scenarios are the only mutable state, serialized per scenario and
persisted to an append-only edit log that is replayed on restart. Every
success body carries a ``schema_version``; error responses use the fixed
envelope ``{error_code, message, detail}`` (their schema version travels in
the ``X-Schema-Version`` header).
"""

from __future__ import annotations

import json
import logging
import math
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import model as model_mod
from .data import (
    DataError,
    EventSequence,
    EventVocabulary,
    TrainingSample,
    load_cohort,
)
from .descriptions import DescriptionCatalog, load_descriptions
from .model import RetainModel, predict_sequence
from .similarity import (
    EventVectorTable,
    KeyEvent,
    event_vectors,
    query_by_key_events,
    similar_patients,
    split_and_aggregate,
)
from .whatif import (
    EditError,
    MODE_PREDICTED,
    Scenario,
    ScenarioEngine,
    cluster_treatments,
    compare_scenarios,
    edit_from_dict,
    edit_to_dict,
    significance_matrix,
)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class ApiError(Exception):
    def __init__(self, status: int, error_code: str, message: str, detail: Any = None):
        super().__init__(message)
        self.status = status
        self.error_code = error_code
        self.message = message
        self.detail = detail


@dataclass
class ServiceConfig:
    cohort_path: str
    checkpoint_path: str
    descriptions_path: str | None = None
    scenario_log_path: str | None = None
    bind_address: str = "127.0.0.1"
    port: int = 8000
    ui_path: str | None = None

    @staticmethod
    def load(path) -> "ServiceConfig":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        return ServiceConfig(**payload)


@dataclass
class ServiceState:
    vocabulary: EventVocabulary
    samples: list[TrainingSample]
    model: RetainModel
    vectors: EventVectorTable
    descriptions: DescriptionCatalog
    scenario_log_path: Path | None = None
    sequences: dict[str, EventSequence] = field(default_factory=dict)
    labels: dict[str, frozenset[str]] = field(default_factory=dict)
    prevalence: dict[str, float] = field(default_factory=dict)
    scenarios: dict[str, Scenario] = field(default_factory=dict)
    engine: ScenarioEngine | None = None
    _store_lock: threading.Lock = field(default_factory=threading.Lock)
    _scenario_locks: dict[str, threading.Lock] = field(default_factory=dict)

    def scenario_lock(self, scenario_id: str) -> threading.Lock:
        with self._store_lock:
            return self._scenario_locks.setdefault(scenario_id, threading.Lock())


def build_state(vocabulary: EventVocabulary, samples: list[TrainingSample],
                model: RetainModel, descriptions: DescriptionCatalog | None = None,
                scenario_log_path=None) -> ServiceState:
    sequences: dict[str, EventSequence] = {}
    labels: dict[str, frozenset[str]] = {}
    for sample in samples:
        if not sample.history.steps:
            continue
        pid = sample.history.patient_id
        if pid in sequences and sample.history.prediction_time <= sequences[pid].prediction_time:
            continue
        sequences[pid] = sample.history
        labels[pid] = sample.labels
    if len(sequences) < len(samples):
        logger.info("serving %d patients from %d samples (latest window per patient)",
                    len(sequences), len(samples))

    prevalence: dict[str, float] = {}
    if samples:
        for code in vocabulary.codes():
            prevalence[code] = sum(1 for s in samples if code in s.labels) / len(samples)

    state = ServiceState(
        vocabulary=vocabulary,
        samples=samples,
        model=model,
        vectors=event_vectors(model=model, mode="reused"),
        descriptions=descriptions or DescriptionCatalog(),
        scenario_log_path=Path(scenario_log_path) if scenario_log_path else None,
        sequences=sequences,
        labels=labels,
        prevalence=prevalence,
        engine=ScenarioEngine(model),
    )
    _replay_scenario_log(state)
    return state


def build_state_from_config(config: ServiceConfig) -> ServiceState:
    vocabulary, samples = load_cohort(config.cohort_path)
    model = model_mod.load(config.checkpoint_path, vocabulary)
    descriptions = None
    if config.descriptions_path and Path(config.descriptions_path).exists():
        descriptions = load_descriptions(config.descriptions_path)
    return build_state(vocabulary, samples, model, descriptions, config.scenario_log_path)


def _replay_scenario_log(state: ServiceState):
    path = state.scenario_log_path
    if path is None or not path.exists():
        return
    with path.open("r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            entry = json.loads(line)
            if entry["event"] == "create":
                base = state.sequences.get(entry["base_patient_id"])
                if base is None:
                    logger.warning("scenario log names unknown patient %r; skipping",
                                   entry["base_patient_id"])
                    continue
                state.scenarios[entry["scenario_id"]] = state.engine.create(
                    base, entry["scenario_id"], entry.get("label", ""))
            elif entry["event"] == "edit":
                scenario = state.scenarios.get(entry["scenario_id"])
                if scenario is None:
                    logger.warning("edit for unknown scenario %r; skipping", entry["scenario_id"])
                    continue
                state.scenarios[entry["scenario_id"]] = state.engine.apply_edit(
                    scenario, edit_from_dict(entry["op"]))


def _append_log(state: ServiceState, entry: dict):
    if state.scenario_log_path is None:
        return
    with state._store_lock:
        with state.scenario_log_path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry) + "\n")


# -- request models -------------------------------------------------------------


class SequencePayload(BaseModel):
    patient_id: str = "adhoc"
    steps: list[tuple[float, list[str]]]
    prediction_time: float


class PredictRequest(BaseModel):
    patient_id: Optional[str] = None
    sequence: Optional[SequencePayload] = None
    targets: Optional[list[str]] = None


class KeyEventPayload(BaseModel):
    code: str
    after_previous: bool = False


class SimilarRequest(BaseModel):
    patient_id: str
    k: int = 10
    n_bins: int = 20
    distance_range: Optional[tuple[float, float]] = None
    key_events: Optional[list[KeyEventPayload]] = None


class AggregateRequest(BaseModel):
    patient_id: str
    selection: list[str]
    n_stages: int = 3


class ScenarioCreateRequest(BaseModel):
    base_patient_id: str
    label: str = ""


class SignificanceRequest(BaseModel):
    patient_id: str
    targets: Optional[list[str]] = None
    n_groups: Optional[int] = None
    mode: str = MODE_PREDICTED
    selection: Optional[list[str]] = None


# -- serialization helpers --------------------------------------------------------


def _clean_float(x: float | None) -> float | None:
    if x is None or not math.isfinite(x):
        return None
    return float(x)


def _steps_json(seq: EventSequence, vocabulary: EventVocabulary) -> list[dict]:
    out = []
    for step in seq.steps:
        codes = []
        for code in sorted(step.codes):
            entry = vocabulary.entry(code) if code in vocabulary else None
            codes.append({
                "code": code,
                "kind": entry.kind if entry else "unknown",
                "display_name": entry.display_name if entry else code,
            })
        out.append({"timestamp": step.timestamp, "codes": codes})
    return out


def _sequence_json(seq: EventSequence, vocabulary: EventVocabulary) -> dict:
    return {
        "patient_id": seq.patient_id,
        "steps": _steps_json(seq, vocabulary),
        "prediction_time": seq.prediction_time,
    }


def _prediction_json(state: ServiceState, result) -> dict:
    ranked = [{
        "code": code,
        "probability": result.probabilities[code],
        "prevalence": state.prevalence.get(code, 0.0),
        "display_name": (state.vocabulary.entry(code).display_name
                         if code in state.vocabulary else code),
    } for code in result.ranked_targets()]
    return {
        "target_codes": list(result.target_codes),
        "probabilities": result.probabilities,
        "logits": result.logits,
        "ranked": ranked,
        "alphas": result.alphas.tolist(),
        "influence": [{
            "step": step,
            "code": code,
            "values": {t: float(v) for t, v in zip(result.target_codes, vec)},
        } for (step, code), vec in sorted(result.influence.items())],
    }


def _scenario_json(state: ServiceState, scenario: Scenario) -> dict:
    return {
        "scenario_id": scenario.scenario_id,
        "base_patient_id": scenario.base_patient_id,
        "label": scenario.label,
        "edits": [edit_to_dict(op) for op in scenario.edits],
        "edited_sequence": _sequence_json(scenario.edited_sequence, state.vocabulary),
        "prediction": _prediction_json(state, scenario.prediction),
    }


# -- application ------------------------------------------------------------------


def create_app(state: ServiceState | None) -> FastAPI:
    app = FastAPI(title="seqrisk decision service")
    app.state.engine_state = state

    def require_state() -> ServiceState:
        if app.state.engine_state is None:
            raise ApiError(503, "not_loaded", "model and cohort are not loaded")
        return app.state.engine_state

    def envelope(status: int, error_code: str, message: str, detail: Any = None) -> JSONResponse:
        return JSONResponse(
            status_code=status,
            content={"error_code": error_code, "message": message, "detail": detail},
            headers={"X-Schema-Version": str(SCHEMA_VERSION)},
        )

    @app.exception_handler(ApiError)
    async def _api_error(_req: Request, exc: ApiError):
        return envelope(exc.status, exc.error_code, exc.message, exc.detail)

    @app.exception_handler(RequestValidationError)
    async def _validation_error(_req: Request, exc: RequestValidationError):
        from fastapi.encoders import jsonable_encoder

        return envelope(422, "validation_error", "invalid request payload",
                        jsonable_encoder(exc.errors()))

    @app.exception_handler(EditError)
    async def _edit_error(_req: Request, exc: EditError):
        return envelope(422, "invalid_edit", str(exc))

    @app.exception_handler(DataError)
    async def _data_error(_req: Request, exc: DataError):
        return envelope(422, "invalid_request", str(exc))

    @app.middleware("http")
    async def _version_header(request: Request, call_next):
        response = await call_next(request)
        response.headers.setdefault("X-Schema-Version", str(SCHEMA_VERSION))
        return response

    def ok(payload: dict) -> dict:
        payload["schema_version"] = SCHEMA_VERSION
        return payload

    def get_patient(state: ServiceState, patient_id: str) -> EventSequence:
        seq = state.sequences.get(patient_id)
        if seq is None:
            raise ApiError(404, "patient_not_found", f"unknown patient {patient_id!r}")
        return seq

    @app.get("/api/patients")
    def list_patients(page: int = 1, per_page: int = 20):
        state = require_state()
        if page < 1 or per_page < 1:
            raise ApiError(422, "invalid_request", "page and per_page must be >= 1")
        ids = sorted(state.sequences)
        start = (page - 1) * per_page
        chunk = ids[start:start + per_page]
        return ok({
            "page": page,
            "per_page": per_page,
            "total": len(ids),
            "patients": [{
                "patient_id": pid,
                "step_count": len(state.sequences[pid].steps),
                "event_count": state.sequences[pid].event_count(),
                "span_days": state.sequences[pid].span_days(),
            } for pid in chunk],
        })

    @app.get("/api/patients/{patient_id}")
    def get_patient_detail(patient_id: str):
        state = require_state()
        seq = get_patient(state, patient_id)
        return ok({
            "patient": _sequence_json(seq, state.vocabulary),
            "labels": sorted(state.labels.get(patient_id, frozenset())),
        })

    @app.post("/api/predict")
    def predict(req: PredictRequest):
        state = require_state()
        if (req.patient_id is None) == (req.sequence is None):
            raise ApiError(422, "invalid_request",
                           "provide exactly one of patient_id or sequence")
        if req.patient_id is not None:
            seq = get_patient(state, req.patient_id)
        else:
            seq = _sequence_from_payload(state, req.sequence)
        if req.targets:
            unknown = [t for t in req.targets if t not in state.model.target_codes]
            if unknown:
                raise ApiError(
                    422, "untrained_target",
                    "requested targets are not part of the trained model",
                    {"unknown_targets": unknown,
                     "trained_targets": list(state.model.target_codes)})
        result = predict_sequence(state.model, seq)
        payload = _prediction_json(state, result)
        if req.targets:
            wanted = set(req.targets)
            payload["probabilities"] = {c: p for c, p in payload["probabilities"].items()
                                        if c in wanted}
            payload["logits"] = {c: v for c, v in payload["logits"].items() if c in wanted}
            payload["ranked"] = [r for r in payload["ranked"] if r["code"] in wanted]
        payload["patient_id"] = seq.patient_id
        return ok(payload)

    @app.post("/api/similar")
    def similar(req: SimilarRequest):
        state = require_state()
        focal = get_patient(state, req.patient_id)
        if req.k < 1:
            raise ApiError(422, "invalid_request", "k must be >= 1")
        cohort = [state.sequences[pid] for pid in sorted(state.sequences)]
        if req.key_events:
            query = [KeyEvent(k.code, k.after_previous) for k in req.key_events]
            cohort = query_by_key_events(cohort, query, state.vocabulary)
        ranked, histogram = similar_patients(focal, cohort, state.vectors,
                                             k=max(req.k, len(cohort) or 1),
                                             n_bins=req.n_bins)
        if req.distance_range is not None:
            lo, hi = req.distance_range
            ranked = [(seq, dist) for seq, dist in ranked if lo <= dist <= hi]
        ranked = ranked[:req.k]
        return ok({
            "patients": [{
                "patient_id": seq.patient_id,
                "distance": dist,
                "step_count": len(seq.steps),
                "event_count": seq.event_count(),
                "labels": sorted(state.labels.get(seq.patient_id, frozenset())),
            } for seq, dist in ranked],
            "histogram": histogram.to_dict(),
        })

    @app.post("/api/similar/aggregate")
    def aggregate(req: AggregateRequest):
        state = require_state()
        focal = get_patient(state, req.patient_id)
        if req.n_stages < 1:
            raise ApiError(422, "invalid_request", "n_stages must be >= 1")
        selected = []
        for pid in req.selection:
            selected.append(get_patient(state, pid))
        splits, flow = split_and_aggregate(selected, focal, state.vectors, req.n_stages)
        return ok({
            "flow": flow.to_dict(),
            "splits": [{
                "patient_id": s.patient_id,
                "split_index": s.split_index,
                "history": [{"timestamp": st.timestamp, "codes": sorted(st.codes)}
                            for st in s.history],
                "outcome": [{"timestamp": st.timestamp, "codes": sorted(st.codes)}
                            for st in s.outcome],
            } for s in splits],
        })

    @app.post("/api/scenarios")
    def create_scenario(req: ScenarioCreateRequest):
        state = require_state()
        base = get_patient(state, req.base_patient_id)
        scenario = state.engine.create(base, label=req.label)
        with state._store_lock:
            state.scenarios[scenario.scenario_id] = scenario
        _append_log(state, {"event": "create", "scenario_id": scenario.scenario_id,
                            "base_patient_id": req.base_patient_id, "label": req.label})
        return ok({"scenario": _scenario_json(state, scenario)})

    @app.post("/api/scenarios/{scenario_id}/edits")
    def edit_scenario(scenario_id: str, payload: dict):
        state = require_state()
        with state.scenario_lock(scenario_id):
            scenario = state.scenarios.get(scenario_id)
            if scenario is None:
                raise ApiError(404, "scenario_not_found", f"unknown scenario {scenario_id!r}")
            op = edit_from_dict(payload)
            updated = state.engine.apply_edit(scenario, op)
            state.scenarios[scenario_id] = updated
        _append_log(state, {"event": "edit", "scenario_id": scenario_id,
                            "op": edit_to_dict(op)})
        return ok({"scenario": _scenario_json(state, updated)})

    @app.get("/api/scenarios")
    def list_scenarios(base: Optional[str] = None):
        state = require_state()
        with state._store_lock:
            scenarios = [s for s in state.scenarios.values()
                         if base is None or s.base_patient_id == base]
        scenarios.sort(key=lambda s: s.scenario_id)
        payload = {"scenarios": [_scenario_json(state, s) for s in scenarios]}
        if scenarios:
            rows = compare_scenarios(scenarios)
            payload["comparison"] = {
                "scenario_ids": [s.scenario_id for s in scenarios],
                "rows": [{
                    "target": r.target,
                    "probabilities": list(r.probabilities),
                    "deltas": list(r.deltas),
                    "ranks": list(r.ranks),
                } for r in rows],
            }
        return ok(payload)

    @app.post("/api/significance")
    def significance(req: SignificanceRequest):
        state = require_state()
        get_patient(state, req.patient_id)  # anchors the similar population
        targets = req.targets or list(state.model.target_codes)
        unknown = [t for t in targets if t not in state.model.target_codes]
        if unknown:
            raise ApiError(422, "untrained_target",
                           "requested targets are not part of the trained model",
                           {"unknown_targets": unknown})
        if req.selection is not None:
            wanted = set(req.selection)
            cohort = [s for s in state.samples
                      if s.history.patient_id in wanted and s.history.steps]
        else:
            cohort = [s for s in state.samples if s.history.steps]
        if not cohort:
            raise ApiError(422, "invalid_request", "no cohort patients selected")
        treatments = list(state.vocabulary.treatment_codes())
        if not treatments:
            raise ApiError(422, "invalid_request", "the vocabulary has no treatments")
        n_groups = req.n_groups or len(treatments)
        if not (1 <= n_groups <= len(treatments)):
            raise ApiError(422, "invalid_request",
                           f"n_groups must be in [1, {len(treatments)}]")
        groups = cluster_treatments(treatments, state.vectors, n_groups)
        matrix = significance_matrix(cohort, groups, targets, state.model, req.mode)
        return ok({
            "targets": targets,
            "groups": [list(g) for g in groups],
            "mode": req.mode,
            "cells": [[_cell_json(c) for c in row] for row in matrix],
        })

    @app.get("/api/diseases/{code}")
    def disease(code: str):
        state = require_state()
        return ok({"disease": state.descriptions.lookup(code).to_dict()})

    return app


def _cell_json(cell) -> dict:
    def stats_json(stats):
        if stats is None:
            return None
        return {"n": stats.n, "mean": _clean_float(stats.mean), "ci95": _clean_float(stats.ci95)}

    return {
        "treatment_group": list(cell.treatment_group),
        "target": cell.target,
        "with": stats_json(cell.with_stats),
        "without": stats_json(cell.without_stats),
        "p_value": _clean_float(cell.p_value),
        "significant": cell.significant,
        "insufficient": cell.insufficient,
    }


def _sequence_from_payload(state: ServiceState, payload: SequencePayload) -> EventSequence:
    from .data import Step

    unknown = sorted({code for _, codes in payload.steps for code in codes
                      if code not in state.vocabulary})
    if unknown:
        raise ApiError(422, "unknown_code", "sequence names codes outside the vocabulary",
                       {"unknown_codes": unknown})
    try:
        steps = tuple(Step(float(t), frozenset(codes)) for t, codes in payload.steps)
        return EventSequence(payload.patient_id, steps, float(payload.prediction_time))
    except DataError as exc:
        raise ApiError(422, "invalid_sequence", str(exc)) from exc


def serve(config: ServiceConfig):
    """Blocking entry point used by the CLI ``serve`` subcommand."""
    import uvicorn

    state = build_state_from_config(config)
    app = create_app(state)
    if config.ui_path and Path(config.ui_path).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=config.ui_path, html=True), name="ui")
    uvicorn.run(app, host=config.bind_address, port=config.port, log_level="info")
