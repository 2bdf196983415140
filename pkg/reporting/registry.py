import json
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

from common.config import CONFIG
from reporting.reporter import RunRecord, read_record


@dataclass
class RegistryEntry:
    run_dir: Path
    record: Optional[RunRecord] = None
    partial: bool = False
    problem: Optional[str] = None


def list_runs(root: Path) -> Tuple[List[RegistryEntry], List[str]]:
    """
    Scan `root` for run directories.

    A run whose record is missing, still `running`, or truncated is listed as
    partial. Record files that cannot be read at all are reported as problems
    and skipped.

    Returns:
        (entries sorted by directory name, problems)
    """
    entries: List[RegistryEntry] = []
    problems: List[str] = []
    if not root.is_dir():
        return entries, problems
    for run_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        path = run_dir / CONFIG['files']['record']
        if not path.exists():
            if (run_dir / CONFIG['files']['config']).exists():
                entries.append(RegistryEntry(run_dir, partial=True, problem="no run record"))
            continue
        try:
            record = read_record(path)
        except (json.JSONDecodeError, UnicodeDecodeError) as e:
            entries.append(RegistryEntry(run_dir, partial=True, problem=f"truncated record: {e}"))
            continue
        except (OSError, TypeError, AttributeError) as e:
            problems.append(f"{path}: {type(e).__name__}: {e}")
            continue
        entries.append(RegistryEntry(run_dir, record=record, partial=not record.complete))
    return entries, problems


def print_runs(entries: List[RegistryEntry], problems: List[str]) -> None:
    from rich.console import Console
    from rich.table import Table
    from rich import box

    console = Console()
    table = Table(title="[bold yellow]Runs[/bold yellow]", box=box.ROUNDED)
    for column in ('Run', 'Kind', 'Seed', 'Status', 'Finished', 'Checks'):
        table.add_column(column, style="cyan" if column == 'Run' else None)
    for entry in entries:
        record = entry.record
        if record is None:
            table.add_row(entry.run_dir.name, '?', '?', '[yellow]partial[/yellow]', '', entry.problem or '')
            continue
        status = '[yellow]partial[/yellow]' if entry.partial else (
            '[green]passed[/green]' if record.passed else f"[red]{record.status}[/red]")
        failed = [name for name, ok in record.checks.items() if not ok]
        checks = f"{len(record.checks) - len(failed)}/{len(record.checks)}" + (f" (failed: {', '.join(failed)})" if failed else '')
        table.add_row(entry.run_dir.name, record.kind, str(record.seed), status, record.finished or '', checks)
    console.print(table)
    for problem in problems:
        console.print(f"[red]unreadable record[/red] {problem}")
