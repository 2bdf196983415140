try:
    from rich.console import Console
    from rich.panel import Panel
    from rich.table import Table
    from rich import box
    RICH_AVAILABLE = True
except ImportError:
    RICH_AVAILABLE = False

COMMANDS = {
    'validate': 'Checks the medium (ellipticity, periodicity, stationarity, drift bound), the KPP reaction and the kernel.',
    'simulate': 'Solves one initial datum to time T; observation table, snapshots and the supersolution check.',
    'speed': 'Spreading speeds from passage-time ladders and front speeds from half-space data, per direction.',
    'wulff': 'Wulff shape from speeds in all directions, plus hair-trigger, strong-Wulff and passage-table diagnostics.',
    'vlin': 'Virtual-linearity sandwich of the KPP solution between time-shifted surrogate solutions.',
    'homogenize': 'Epsilon sweep of the mixed-zone measure against the slices G + t S.',
    'list': 'Lists the runs under the output root; partial runs are flagged.',
}

OPTIONS = {
    '-c, --config': 'YAML run configuration (required for every command but list).',
    '--seed': 'Unsigned 64-bit seed overriding run.seed.',
    '-o, --out': 'Output root (default: $KPPLAB_OUTPUT, else ./output).',
    '--threads': 'Worker threads (default: physical cores).',
    '--emit-snapshots': 'Comma-separated times at which simulate dumps fields.',
    '-v, --verbose': 'Enable verbose (DEBUG level) logging.',
    '-q, --quiet': 'Suppress console output except for warnings/errors.',
    '--timestamp-format': 'Timestamp format for console output.',
    '--help-command': 'Show the experiment keys of one command.',
}


def show_help():
    """Displays the main help message for the tool."""
    if not RICH_AVAILABLE:
        print("usage: run_workflow.py <command> --config <file.yaml> [options]")
        print("commands: " + ", ".join(COMMANDS))
        return

    console = Console()
    console.print(Panel("[bold green]KPPLab[/bold green] - Reaction-Diffusion Homogenization Laboratory", expand=False))

    usage = Table.grid(padding=1)
    usage.add_row("[bold cyan]Usage:", "python run_workflow.py <command> --config <file.yaml> [options]")
    console.print(usage)

    # Commands
    cmd_table = Table(title="[bold yellow]Commands[/bold yellow]", box=box.ROUNDED)
    cmd_table.add_column("Command", style="cyan", no_wrap=True)
    cmd_table.add_column("Description")
    for cmd, desc in COMMANDS.items():
        cmd_table.add_row(cmd, desc)
    console.print(cmd_table)

    # Options
    opt_table = Table(title="[bold blue]Options[/bold blue]", box=box.SIMPLE)
    opt_table.add_column("Option", style="cyan", no_wrap=True)
    opt_table.add_column("Description")
    for opt, desc in OPTIONS.items():
        opt_table.add_row(opt, desc)
    console.print(opt_table)

    example_panel = Panel("""
[bold]Check a checkerboard medium:[/bold]
validate --config configs/checkerboard.yaml --seed 7

[bold]Classical speed in d = 1:[/bold]
speed --config configs/speed_1d.yaml

[bold]Field snapshots:[/bold]
simulate --config configs/ball.yaml --emit-snapshots 1,5,10

[bold]Homogenization sweep on 8 threads:[/bold]
homogenize --config configs/sweep.yaml --threads 8 --out ./runs

[bold]Wulff ball in the plane, 32 directions:[/bold]
wulff --config configs/wulff_2d.yaml --threads 8

[bold]Exit status:[/bold]
0 all checks passed, 1 some check failed, 2 error (JSON on stdout)
    """, title="[bold magenta]Example Workflows[/bold magenta]", border_style="magenta")
    console.print(example_panel)


def show_command_help(command: str):
    """Experiment keys of one command with their defaults."""
    from common.run_config import EXPERIMENTS

    console = Console()
    console.print(f"[bold cyan]{command}[/bold cyan]: {COMMANDS.get(command, '')}")
    schema = EXPERIMENTS.get(command)
    if not schema:
        console.print("No experiment keys.")
        return
    table = Table(title="[bold yellow]experiment section[/bold yellow]", box=box.SIMPLE)
    table.add_column("Key", style="cyan", no_wrap=True)
    table.add_column("Type")
    table.add_column("Default")
    for key, spec in schema.items():
        default = 'required' if spec.default is None and not spec.optional else repr(spec.default)
        table.add_row(key, spec.type, default)
    console.print(table)
