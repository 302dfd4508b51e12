import argparse

from rich.console import Console
from rich.table import Table

from ..core.exceptions import NumericalError
from ..schemas.config import RunConfig
from ..services.gradcheck import CHECKS, run_gradcheck

NAME = "gradcheck"


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(NAME, help="verify every backward pass against finite differences")
    parser.add_argument("--ops", nargs="+", choices=sorted(CHECKS), default=None, help="subset of checks to run")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, config: RunConfig) -> int:
    reports = run_gradcheck(config.gradcheck.eps, config.gradcheck.tol, config.seed, args.ops)

    table = Table(title=f"Gradient checks (eps={config.gradcheck.eps:g}, tol={config.gradcheck.tol:g})")
    table.add_column("op")
    table.add_column("max rel err", justify="right")
    table.add_column("components", justify="right")
    table.add_column("status")
    for report in reports:
        status = "[green]pass[/green]" if report.passed else "[red]FAIL[/red]"
        table.add_row(report.op_name, f"{report.max_rel_err:.3e}", str(report.param_count), status)
    Console().print(table)

    failed = [report.op_name for report in reports if not report.passed]
    if failed:
        raise NumericalError(f"gradient check failed for: {', '.join(failed)}")
    return 0
