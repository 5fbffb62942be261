"""Diagnostic output on standard error."""

from typing import Sequence

from rich.console import Console
from rich.markup import escape
from rich.table import Table

from ..services.verification import CheckResult

err_console = Console(stderr=True, highlight=False)


def report_error(kind: str, message: str) -> None:
    err_console.print(f"[bold red]{kind}:[/bold red] {escape(message)}")


def report_check(result: CheckResult) -> None:
    status = "[green]PASS[/green]" if result.passed else "[red]FAIL[/red]"
    err_console.print(
        f"{status} {result.name} ({result.cases} cases): {escape(result.detail)}"
    )


def checks_table(results: Sequence[CheckResult]) -> Table:
    table = Table(title="Verification summary")
    table.add_column("check")
    table.add_column("cases", justify="right")
    table.add_column("result")
    table.add_column("detail")
    for r in results:
        table.add_row(
            r.name,
            str(r.cases),
            "[green]pass[/green]" if r.passed else "[red]fail[/red]",
            escape(r.detail),
        )
    return table
