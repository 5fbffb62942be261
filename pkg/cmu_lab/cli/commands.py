"""Command-line interface: gen, run, sweep, slope and verify."""

import sys
from typing import Any, Optional, Sequence

import click
from pydantic import ValidationError

from ..app import setup_logging
from ..config import get_settings
from ..core.accounting import validate_instance
from ..core.dependencies import (
    get_experiment_service,
    get_simulation_service,
    get_verification_service,
    reset_container,
)
from ..core.models import dump_instance, load_instance
from ..exceptions import ConfigurationError, LabError, VerificationFailed
from ..services.costs import CostKind, CostModel
from ..services.engine import dump_trace
from ..services.generators import (
    GeneratorFamily,
    generate_instance,
    parse_generator_spec,
)
from ..services.harness import (
    ROLE_SIMULATION,
    load_experiment_config,
    replication_seed,
    write_rows_csv,
)
from ..services.policies import (
    PolicyConfig,
    PolicyKind,
    check_compatible,
    resolve_preemption,
)
from .console import checks_table, err_console, report_check, report_error

LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]


def _model(cls: Any, **fields: Any) -> Any:
    try:
        return cls(**fields)
    except ValidationError as e:
        first = e.errors()[0]
        loc = ".".join(str(part) for part in first["loc"]) or cls.__name__
        raise ConfigurationError(f"{loc}: {first['msg']}") from e


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option(
    "--log-level",
    type=click.Choice(LOG_LEVELS, case_sensitive=False),
    default=None,
    help="Log level for diagnostics on stderr (default: settings, WARNING).",
)
def cli(log_level: Optional[str]) -> None:
    """Empirical cmu-rule scheduling laboratory."""
    settings = get_settings()
    if log_level is not None:
        monitoring = settings.monitoring.model_copy(
            update={"log_level": log_level.upper()}
        )
        settings = settings.model_copy(update={"monitoring": monitoring})
    setup_logging(settings)
    reset_container(settings)


@cli.command()
@click.option(
    "--family",
    type=click.Choice([f.value for f in GeneratorFamily]),
    default=GeneratorFamily.UNIFORM_BAND.value,
    show_default=True,
)
@click.option("--n", "n", type=int, default=20, show_default=True)
@click.option("--t-scale", type=int, default=2000, show_default=True)
@click.option("--epsilon", type=float, default=0.0, show_default=True)
@click.option("--shape", type=float, default=0.7, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--which-side", type=click.Choice(["1", "2"]), default="1")
@click.option("--service", type=click.Choice(["det", "geo"]), default="det")
@click.option("--rate", "rates", type=float, multiple=True, help="Rate per job.")
@click.option("--out", type=click.Path(dir_okay=False), default="-")
def gen(
    family: str,
    n: int,
    t_scale: int,
    epsilon: float,
    shape: float,
    seed: int,
    which_side: str,
    service: str,
    rates: Sequence[float],
    out: str,
) -> None:
    """Write a generated instance as JSON."""
    spec = parse_generator_spec(
        {
            "family": family,
            "n": n,
            "t_scale": t_scale,
            "epsilon": epsilon,
            "pareto_shape": shape,
            "seed": seed,
            "which_side": int(which_side),
            "rates": list(rates) or None,
            "service": service,
        }
    )
    inst = validate_instance(generate_instance(spec))
    with click.open_file(out, "w", encoding="utf-8") as fh:
        dump_instance(inst, fh)


@cli.command()
@click.option("--instance", "instance_path", required=True, type=click.Path())
@click.option(
    "--policy",
    "policies",
    type=click.Choice([k.value for k in PolicyKind]),
    multiple=True,
    default=[PolicyKind.PREEMPT_THEN_NONPREEMPT.value],
    show_default=True,
)
@click.option("--reps", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default="-")
@click.option("--kappa", type=float, default=None, help="Preemption constant.")
@click.option("--ts-override", type=click.IntRange(min=0), default=None)
@click.option(
    "--cost-model",
    type=click.Choice([k.value for k in CostKind]),
    default=CostKind.BERNOULLI.value,
    show_default=True,
)
@click.option("--sigma", type=float, default=1.0, show_default=True)
@click.option("--threads", type=click.IntRange(min=1), default=None)
@click.option(
    "--trace-dump",
    type=click.Path(dir_okay=False),
    default=None,
    help="NDJSON audit of the first replication of the first policy.",
)
def run(
    instance_path: str,
    policies: Sequence[str],
    reps: int,
    seed: int,
    out: str,
    kappa: Optional[float],
    ts_override: Optional[int],
    cost_model: str,
    sigma: float,
    threads: Optional[int],
    trace_dump: Optional[str],
) -> None:
    """Simulate policies on one instance file and write the regret table."""
    settings = get_settings()
    inst = validate_instance(
        load_instance(instance_path), kappa or settings.simulation.default_kappa
    )
    model = _model(CostModel, kind=cost_model, sigma=sigma)
    configs = [
        _model(PolicyConfig, kind=p, kappa=kappa, t_s=ts_override) for p in policies
    ]
    for cfg in configs:
        check_compatible(cfg.kind, inst)
        resolve_preemption(cfg, inst, settings.simulation.default_kappa)

    rows = get_experiment_service().run_instance(
        inst, configs, model, reps, seed, threads
    )
    with click.open_file(out, "w", encoding="utf-8") as fh:
        write_rows_csv(rows, fh)

    if trace_dump is not None or settings.simulation.trace_dump:
        target = trace_dump or "trace.ndjson"
        trace = get_simulation_service().simulate(
            inst,
            model,
            configs[0],
            replication_seed(seed, 0, 0, ROLE_SIMULATION),
            record=True,
        )
        count = dump_trace(trace, target)
        err_console.print(f"wrote {count} slot records to {target}")


@cli.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out", type=click.Path(dir_okay=False), default="-")
@click.option("--threads", type=click.IntRange(min=1), default=None)
def sweep(config_path: str, out: str, threads: Optional[int]) -> None:
    """Run an experiment config and write the aggregated CSV table."""
    cfg = load_experiment_config(config_path)
    rows = get_experiment_service().run(cfg, threads)
    with click.open_file(out, "w", encoding="utf-8") as fh:
        write_rows_csv(rows, fh)


@cli.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--policy", default=None, help="Policy label (default: ptn).")
@click.option("--out", type=click.Path(dir_okay=False), default="-")
@click.option("--threads", type=click.IntRange(min=1), default=None)
def slope(
    config_path: str, policy: Optional[str], out: str, threads: Optional[int]
) -> None:
    """Fit the log-log slope of mean regret along the sweep axis."""
    cfg = load_experiment_config(config_path)
    fit = get_experiment_service().slope(cfg, policy, threads)
    with click.open_file(out, "w", encoding="utf-8") as fh:
        fh.write(fit.model_dump_json() + "\n")


@cli.command()
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True)
@click.option(
    "--coverage-reps", type=click.IntRange(min=1), default=2000, show_default=True
)
def verify(seed: int, coverage_reps: int) -> None:
    """Run the oracle suite; exit code 2 when any check fails."""
    try:
        results = get_verification_service().run(
            seed=seed, coverage_reps=coverage_reps, on_result=report_check
        )
    except VerificationFailed as e:
        err_console.print(checks_table(e.results))
        raise
    err_console.print(checks_table(results))


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI and map failures to exit codes."""
    args = list(argv) if argv is not None else sys.argv[1:]
    try:
        rv = cli.main(args=args, prog_name="cmu-lab", standalone_mode=False)
    except VerificationFailed as e:
        report_error("verification failed", str(e))
        return 2
    except click.ClickException as e:
        e.show()
        return 1
    except click.Abort:
        report_error("error", "aborted")
        return 1
    except LabError as e:
        report_error("error", str(e))
        return 1
    return rv if isinstance(rv, int) else 0


def run_cli() -> None:
    sys.exit(main())
