"""Command-line interface.

Subcommands mirror the library: generate locally optimal, maximin and
D-optimal designs, evaluate or transform existing design documents,
round to integer allocations, run simulation studies and serve the HTTP
API.  Documents travel as JSON on stdin/stdout; exit code 0 means
success, 2 a validation problem and 3 a solver failure.
"""

from __future__ import annotations

import json
import sys

import click

from doseopt.designs import ContinuousDesign
from doseopt.documents import DesignDocument, parse_model, round_design
from doseopt.errors import ComputationError, ValidationError
from doseopt.evaluation import evaluate_design
from doseopt.local import LocalDesignProblem, rescale_design, solve_local
from doseopt.doptimal import solve_d_optimal
from doseopt.maximin import MaximinProblem, solve_maximin
from doseopt.models import Model, Theta
from doseopt.optim import OptimizerConfig
from doseopt.simulate import (
    ExactDesign,
    SimSpec,
    builtin_designs,
    report_rows,
    simulate_fit,
    write_report_csv,
    write_report_json,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3


def _theta_options(require_b: bool = True):
    def wrap(fn):
        fn = click.option("--a", type=float, default=1.0, show_default=True,
                          help="Response scale.")(fn)
        fn = click.option("--b", type=float, required=require_b, help="Decay rate.")(fn)
        fn = click.option("--c", type=float, default=0.0, show_default=True,
                          help="Saturation fraction.")(fn)
        fn = click.option("--d", type=float, default=1.0, show_default=True,
                          help="Dose power.")(fn)
        return fn
    return wrap


def _config_options(fn):
    fn = click.option("--seed", type=int, default=0, envvar="DOSEOPT_SEED",
                      show_default=True, help="Random seed (env: DOSEOPT_SEED).")(fn)
    fn = click.option("--restarts", type=int, default=None,
                      help="Multi-start budget override.")(fn)
    return fn


def _make_config(seed: int, restarts: int | None, default_restarts: int = 20) -> OptimizerConfig:
    return OptimizerConfig(seed=seed, restarts=restarts or default_restarts)


def _echo_json(payload) -> None:
    click.echo(json.dumps(payload, indent=2))


def _read_document(path: str) -> DesignDocument:
    text = sys.stdin.read() if path == "-" else open(path, "r", encoding="utf-8").read()
    return DesignDocument.from_json(text)


@click.group()
def cli():
    """Optimal discriminating designs for nested dose-response models."""


@cli.command()
@click.option("--model", "model_token", required=True,
              help="Parent model: 2.3, 2.4 or 2.5 (or exp-pow/exp-sat/full).")
@click.option("--target", type=click.Choice(["c", "d"]), default=None,
              help="Discrimination parameter (inferred when unambiguous).")
@click.option("--T", "space_upper", type=float, required=True, help="Dose interval upper end.")
@_theta_options()
@_config_options
def local(model_token, target, space_upper, a, b, c, d, seed, restarts):
    """Locally optimal discriminating design (Chebyshev support)."""
    model = parse_model(model_token)
    if target is None:
        if model is Model.EXP_POW:
            target = "d"
        elif model is Model.EXP_SAT:
            target = "c"
        else:
            raise ValidationError("--target is required for the full model")
    theta = Theta(a=a, b=b, c=c, d=d).restrict_to(model)
    config = _make_config(seed, restarts)
    problem = LocalDesignProblem(model, theta, target, space_upper)
    design = solve_local(problem, config)
    doc = DesignDocument(
        model=model, theta=theta, design=design,
        criterion=f"local-e:{target}",
        config={"seed": seed, "restarts": config.restarts},
    )
    click.echo(doc.to_json(), nl=False)


@cli.command()
@click.option("--T", "space_upper", type=float, required=True)
@_theta_options()
@_config_options
def maximin(space_upper, a, b, c, d, seed, restarts):
    """Maximin optimal discriminating design over the four model pairs."""
    theta = Theta(a=a, b=b, c=c, d=d)
    config = _make_config(seed, restarts, default_restarts=14)
    problem = MaximinProblem(theta, space_upper)
    design, report, growth = solve_maximin(problem, config)
    doc = DesignDocument(
        model=Model.FULL, theta=theta, design=design,
        criterion="maximin-discrimination",
        config={"seed": seed, "restarts": config.restarts},
    )
    payload = {
        "document": doc.to_jsonable(),
        "efficiencies": report.to_jsonable(),
        "criterion_value": report.min_pair_efficiency(),
        "support_trace": [[n, value] for n, value in growth.criterion_trace],
    }
    _echo_json(payload)


@cli.command()
@click.option("--model", "model_token", required=True)
@click.option("--T", "space_upper", type=float, required=True)
@_theta_options()
@_config_options
def doptimal(model_token, space_upper, a, b, c, d, seed, restarts):
    """Locally D-optimal design for one model."""
    model = parse_model(model_token)
    theta = Theta(a=a, b=b, c=c, d=d).restrict_to(model)
    config = _make_config(seed, restarts, default_restarts=12)
    design = solve_d_optimal(model, theta, space_upper, config)
    doc = DesignDocument(
        model=model, theta=theta, design=design, criterion="d-optimal",
        config={"seed": seed, "restarts": config.restarts},
    )
    click.echo(doc.to_json(), nl=False)


@cli.command()
@click.option("--design", "design_path", required=True,
              help="Design document file ('-' for stdin).")
@click.option("--pairs", "want_pairs", is_flag=True, help="Discrimination efficiencies.")
@click.option("--d-eff", "want_d", is_flag=True, help="D-efficiencies.")
@click.option("--param-eff", "want_params", is_flag=True, help="Per-parameter efficiencies.")
@click.option("--a", type=float, default=None, help="Override nominal a.")
@click.option("--b", type=float, default=None, help="Override nominal b.")
@click.option("--c", type=float, default=None, help="Override nominal c.")
@click.option("--d", type=float, default=None, help="Override nominal d.")
@_config_options
def evaluate(design_path, want_pairs, want_d, want_params, a, b, c, d, seed, restarts):
    """Efficiency report for a design document (all sections by default)."""
    doc = _read_document(design_path)
    requests = tuple(
        name
        for flag, name in [(want_pairs, "pairs"), (want_d, "d"), (want_params, "params")]
        if flag
    ) or ("pairs", "d", "params")
    overrides = {k: v for k, v in [("a", a), ("b", b), ("c", c), ("d", d)] if v is not None}
    theta = doc.theta.replace(**overrides)
    config = _make_config(seed, restarts)
    report = evaluate_design(doc.design, theta, requests, config)
    _echo_json(report.to_jsonable())


@cli.command()
@click.option("--design", "design_path", required=True)
@click.option("--to-b", type=float, default=None, help="Target decay rate.")
@click.option("--to-d", type=float, default=None, help="Target dose power.")
@click.option("--to-T", "to_space", type=float, default=None,
              help="Target interval end (derived from --to-b/--to-d when omitted).")
def transform(design_path, to_b, to_d, to_space):
    """Rescale an optimal design to another (b, d, T) configuration."""
    doc = _read_document(design_path)
    if doc.theta.b is None:
        raise ValidationError("document theta has no rate b; cannot rescale")
    b_from = doc.theta.b
    d_from = doc.theta.d if doc.theta.d is not None else 1.0
    t_from = doc.space_upper
    b_to = to_b if to_b is not None else b_from
    d_to = to_d if to_d is not None else d_from
    if to_space is None:
        to_space = ((b_from / b_to) * t_from**d_from) ** (1.0 / d_to)
    design = rescale_design(doc.design, (b_from, d_from, t_from), (b_to, d_to, to_space))
    theta = doc.theta.replace(b=b_to, **({"d": d_to} if doc.theta.d is not None else {}))
    out = DesignDocument(
        model=doc.model, theta=theta, design=design,
        criterion=doc.criterion,
        config={**doc.config, "rescaled_from": {"b": b_from, "d": d_from, "T": t_from}},
    )
    click.echo(out.to_json(), nl=False)


@cli.command(name="round")
@click.option("--design", "design_path", required=True)
@click.option("--N", "n_total", type=int, required=True, help="Total observations.")
def round_cmd(design_path, n_total):
    """Round a continuous design to an integer allocation."""
    doc = _read_document(design_path)
    exact = round_design(doc.design, n_total)
    _echo_json({
        "doses": list(exact.doses),
        "counts": list(exact.counts),
        "N": exact.total,
    })


@cli.command()
@click.option("--spec", "spec_path", required=True, help="Simulation spec JSON file.")
@click.option("--csv", "as_csv", is_flag=True, help="Emit CSV instead of JSON.")
def simulate(spec_path, as_csv):
    """Run a Monte-Carlo simulation study from a spec file.

    The spec file holds true_model, true_theta, sigma, reps, seed, one or
    more fit_models and a list of designs (built-in names like "xi_mm" or
    inline {doses, counts} objects).
    """
    with open(spec_path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    try:
        true_model = parse_model(raw["true_model"])
        true_theta = Theta(**{k: float(v) for k, v in raw["true_theta"].items()})
        fit_tokens = raw.get("fit_models") or [raw["fit_model"]]
        design_tokens = raw["designs"]
    except KeyError as exc:
        raise ValidationError(f"simulation spec is missing {exc}") from exc

    named = builtin_designs()
    designs: dict[str, ExactDesign] = {}
    for i, token in enumerate(design_tokens):
        if isinstance(token, str):
            if token not in named:
                raise ValidationError(
                    f"unknown design {token!r}; built-ins are {sorted(named)}"
                )
            designs[token] = named[token]
        else:
            designs[token.get("name", f"design-{i}")] = ExactDesign(
                tuple(float(x) for x in token["doses"]),
                tuple(int(x) for x in token["counts"]),
            )

    results = {}
    for fit_token in fit_tokens:
        fit_model = parse_model(fit_token)
        spec = SimSpec(
            true_model=true_model,
            true_theta=true_theta,
            sigma=float(raw["sigma"]),
            reps=int(raw["reps"]),
            seed=int(raw.get("seed", 0)),
            fit_model=fit_model,
        )
        for name, design in designs.items():
            results[f"{name}:{fit_model.value}"] = simulate_fit(design, spec, name)
    rows = report_rows(results)
    if as_csv:
        write_report_csv(rows, sys.stdout)
    else:
        write_report_json(rows, sys.stdout)


@cli.command()
@click.option("--port", type=int, default=8000, envvar="PORT", show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
def serve(port, host):
    """Start the JSON-over-HTTP service."""
    import uvicorn

    from doseopt.service import app

    uvicorn.run(app, host=host, port=port)


def main(argv=None) -> int:
    """Entry point returning the process exit code."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return EXIT_OK
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return EXIT_VALIDATION
    except click.Abort:
        return EXIT_VALIDATION
    except ValidationError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_VALIDATION
    except ComputationError as exc:
        click.echo(f"solver failure: {exc}", err=True)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
