"""Stateless JSON-over-HTTP facade.

Exposes design generation, evaluation and transformation to the browser
explorer and to scripts.  Design solves answer synchronously (they are
sub-second at these dimensions); simulation studies run as jobs that are
polled via /v1/jobs/{id}.

Determinism: request seeds default to a fixed constant, solvers are
seeded, and job ids are content hashes of the request body, so identical
requests yield identical responses byte-for-byte across restarts.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from doseopt._version import __version__
from doseopt.certificates import BoundReport, chebyshev_alternation_check, verify_c_optimality, verify_d_optimality
from doseopt.designs import ContinuousDesign
from doseopt.documents import DesignDocument, parse_model, round_design
from doseopt.errors import ComputationError, ValidationError
from doseopt.evaluation import evaluate_design
from doseopt.local import LocalDesignProblem, rescale_design, solve_local
from doseopt.doptimal import solve_d_optimal
from doseopt.maximin import MaximinProblem, solve_maximin
from doseopt.models import DISCRIMINATION_EDGES, Model, Theta
from doseopt.optim import OptimizerConfig
from doseopt.simulate import ExactDesign, SimSpec, builtin_designs, report_rows, simulate_fit

DEFAULT_SEED = 0

app = FastAPI(title="doseopt service", version=__version__)
app.add_middleware(
    CORSMiddleware,
    allow_origins=[os.environ.get("EXPLORER_ORIGIN", "*")],
    allow_methods=["*"],
    allow_headers=["*"],
)


# ---------------------------------------------------------------------------
# request schemas
# ---------------------------------------------------------------------------

class ThetaIn(BaseModel):
    a: float = Field(1.0, gt=0)
    b: float = Field(..., gt=0)
    c: float = Field(0.0, ge=0.0, le=1.0)
    d: float = Field(1.0, ge=1.0)

    def to_theta(self) -> Theta:
        return Theta(a=self.a, b=self.b, c=self.c, d=self.d)


class ConfigIn(BaseModel):
    seed: int = DEFAULT_SEED
    restarts: int | None = Field(None, ge=1)

    def to_config(self, default_restarts: int) -> OptimizerConfig:
        return OptimizerConfig(seed=self.seed, restarts=self.restarts or default_restarts)


class DesignIn(BaseModel):
    points: list[float]
    weights: list[float]
    space_upper: float = Field(..., gt=0)

    def to_design(self) -> ContinuousDesign:
        return ContinuousDesign(tuple(self.points), tuple(self.weights), self.space_upper)


class LocalRequest(BaseModel):
    model: str
    theta: ThetaIn
    target: str | None = None
    T: float = Field(..., gt=0)
    config: ConfigIn = ConfigIn()


class MaximinRequest(BaseModel):
    theta: ThetaIn
    T: float = Field(..., gt=0)
    config: ConfigIn = ConfigIn()


class DOptimalRequest(BaseModel):
    model: str
    theta: ThetaIn
    T: float = Field(..., gt=0)
    config: ConfigIn = ConfigIn()


class EvaluateRequest(BaseModel):
    design: DesignIn
    theta: ThetaIn
    requests: list[str] = ["pairs", "d", "params"]
    config: ConfigIn = ConfigIn()


class TransformTarget(BaseModel):
    b: float = Field(..., gt=0)
    d: float = Field(1.0, gt=0)
    T: float | None = Field(None, gt=0)


class TransformSource(BaseModel):
    b: float = Field(..., gt=0)
    d: float = Field(1.0, gt=0)
    T: float = Field(..., gt=0)


class TransformRequest(BaseModel):
    design: DesignIn
    source: TransformSource = Field(..., alias="from")
    to: TransformTarget

    model_config = {"populate_by_name": True}


class ExactDesignIn(BaseModel):
    name: str | None = None
    doses: list[float]
    counts: list[int]


class SimulateRequest(BaseModel):
    true_model: str
    true_theta: dict[str, float]
    sigma: float = Field(..., gt=0)
    reps: int = Field(..., ge=1)
    seed: int = DEFAULT_SEED
    fit_models: list[str]
    designs: list[str | ExactDesignIn]


# ---------------------------------------------------------------------------
# error mapping
# ---------------------------------------------------------------------------

@app.exception_handler(RequestValidationError)
async def _validation_handler(request: Request, exc: RequestValidationError):
    first = exc.errors()[0] if exc.errors() else {}
    loc = [str(part) for part in first.get("loc", []) if part != "body"]
    return JSONResponse(
        status_code=400,
        content={
            "code": "validation_error",
            "message": first.get("msg", "invalid request"),
            "field": ".".join(loc) or None,
        },
    )


@app.exception_handler(ValidationError)
async def _domain_validation_handler(request: Request, exc: ValidationError):
    return JSONResponse(
        status_code=400,
        content={"code": "validation_error", "message": str(exc), "field": None},
    )


@app.exception_handler(ComputationError)
async def _solver_handler(request: Request, exc: ComputationError):
    return JSONResponse(
        status_code=422,
        content={"code": "solver_failure", "message": str(exc), "field": None},
    )


def _bound_payload(report: BoundReport) -> dict:
    return {
        "passed": report.passed,
        "max_value": report.max_value,
        "arg_max": report.arg_max,
        "threshold": report.threshold,
        "criterion_value": report.criterion_value,
    }


# ---------------------------------------------------------------------------
# endpoints
# ---------------------------------------------------------------------------

@app.get("/v1/models")
def models_metadata():
    edges = [
        {"parent": parent.value, "child": child.value, "parameter": name, "null_value": value}
        for (parent, child), (name, value) in DISCRIMINATION_EDGES.items()
    ]
    return {
        "models": [
            {
                "model": model.value,
                "label": label,
                "parameters": list(model.param_names),
                "constraints": {
                    "a": "a > 0", "b": "b > 0", "c": "0 <= c <= 1", "d": "d >= 1",
                },
            }
            for model, label in [
                (Model.CONSTANT, "2.1"), (Model.EXP, "2.2"), (Model.EXP_POW, "2.3"),
                (Model.EXP_SAT, "2.4"), (Model.FULL, "2.5"),
            ]
        ],
        "nesting": edges,
    }


@app.post("/v1/designs/local")
def local_design(req: LocalRequest):
    model = parse_model(req.model)
    theta = req.theta.to_theta().restrict_to(model)
    target = req.target
    if target is None:
        target = {"exp-pow": "d", "exp-sat": "c"}.get(model.value)
        if target is None:
            raise ValidationError("target is required for the full model")
    config = req.config.to_config(default_restarts=20)
    design = solve_local(LocalDesignProblem(model, theta, target, req.T), config)
    doc = DesignDocument(
        model=model, theta=theta, design=design,
        criterion=f"local-e:{target}",
        config={"seed": config.seed, "restarts": config.restarts},
    )
    return {
        "document": doc.to_jsonable(),
        "certificates": {
            "c_optimality": _bound_payload(verify_c_optimality(design, model, theta, target)),
            "alternation": chebyshev_alternation_check(design.points, model, theta, req.T),
        },
    }


@app.post("/v1/designs/maximin")
def maximin_design(req: MaximinRequest):
    theta = req.theta.to_theta()
    config = req.config.to_config(default_restarts=14)
    design, report, growth = solve_maximin(MaximinProblem(theta, req.T), config)
    doc = DesignDocument(
        model=Model.FULL, theta=theta, design=design,
        criterion="maximin-discrimination",
        config={"seed": config.seed, "restarts": config.restarts},
    )
    return {
        "document": doc.to_jsonable(),
        "efficiencies": report.to_jsonable(),
        "criterion_value": report.min_pair_efficiency(),
        "support_trace": [[n, value] for n, value in growth.criterion_trace],
    }


@app.post("/v1/designs/doptimal")
def d_optimal_design(req: DOptimalRequest):
    model = parse_model(req.model)
    theta = req.theta.to_theta().restrict_to(model)
    config = req.config.to_config(default_restarts=12)
    design = solve_d_optimal(model, theta, req.T, config)
    doc = DesignDocument(
        model=model, theta=theta, design=design, criterion="d-optimal",
        config={"seed": config.seed, "restarts": config.restarts},
    )
    return {
        "document": doc.to_jsonable(),
        "bound_report": _bound_payload(verify_d_optimality(design, model, theta)),
    }


@app.post("/v1/designs/evaluate")
def evaluate(req: EvaluateRequest):
    design = req.design.to_design()
    config = req.config.to_config(default_restarts=20)
    report = evaluate_design(design, req.theta.to_theta(), tuple(req.requests), config)
    payload = report.to_jsonable()
    if "pairs" in req.requests:
        # the maximin criterion needs all four pairs; a design that cannot
        # support one of them scores the singular sentinel
        payload["criterion_value"] = (
            report.min_pair_efficiency() if len(report.pair_effs) == 4 else 0.0
        )
    return payload


@app.post("/v1/designs/transform")
def transform(req: TransformRequest):
    design = req.design.to_design()
    src = (req.source.b, req.source.d, req.source.T)
    t_to = req.to.T
    if t_to is None:
        t_to = ((req.source.b / req.to.b) * req.source.T**req.source.d) ** (1.0 / req.to.d)
    out = rescale_design(design, src, (req.to.b, req.to.d, t_to))
    doc = DesignDocument(
        model=Model.FULL,
        theta=Theta(a=1.0, b=req.to.b, c=0.0, d=req.to.d),
        design=out,
        criterion="rescaled",
        config={"from": {"b": src[0], "d": src[1], "T": src[2]}},
    )
    return {"document": doc.to_jsonable()}


# ---------------------------------------------------------------------------
# simulation jobs
# ---------------------------------------------------------------------------

_jobs: dict[str, dict] = {}
_jobs_lock = threading.Lock()


def _run_simulation(job_id: str, req: SimulateRequest) -> None:
    try:
        named = builtin_designs()
        designs: dict[str, ExactDesign] = {}
        for i, token in enumerate(req.designs):
            if isinstance(token, str):
                if token not in named:
                    raise ValidationError(f"unknown design {token!r}")
                designs[token] = named[token]
            else:
                designs[token.name or f"design-{i}"] = ExactDesign(
                    tuple(token.doses), tuple(token.counts)
                )
        true_model = parse_model(req.true_model)
        results = {}
        for fit_token in req.fit_models:
            fit_model = parse_model(fit_token)
            spec = SimSpec(
                true_model=true_model,
                true_theta=Theta(**req.true_theta),
                sigma=req.sigma,
                reps=req.reps,
                seed=req.seed,
                fit_model=fit_model,
            )
            for name, design in designs.items():
                results[f"{name}:{fit_model.value}"] = simulate_fit(design, spec, name)
        rows = report_rows(results)
        with _jobs_lock:
            _jobs[job_id] = {"status": "done", "result": rows}
    except Exception as exc:  # report failures through the job, not the log
        with _jobs_lock:
            _jobs[job_id] = {"status": "failed", "error": str(exc)}


@app.post("/v1/simulate")
def submit_simulation(req: SimulateRequest):
    body = json.dumps(req.model_dump(), sort_keys=True)
    job_id = hashlib.sha256(body.encode()).hexdigest()[:16]
    with _jobs_lock:
        existing = _jobs.get(job_id)
        if existing is None:
            _jobs[job_id] = {"status": "running"}
    if existing is None:
        thread = threading.Thread(target=_run_simulation, args=(job_id, req), daemon=True)
        thread.start()
    return {"job_id": job_id}


@app.get("/v1/jobs/{job_id}")
def job_status(job_id: str):
    with _jobs_lock:
        job = _jobs.get(job_id)
    if job is None:
        return JSONResponse(
            status_code=404,
            content={"code": "unknown_job", "message": f"no job {job_id!r}", "field": None},
        )
    return job
