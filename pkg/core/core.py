import argparse
import json
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from common.config import CONFIG
from common.errors import ConfigError, KPPLabError
from common.help_ui import show_command_help, show_help
from common.logger import Logger
from common.run_config import load_config, serialize_config
from common.utils import default_threads, ensure_dir
from reporting.registry import list_runs, print_runs
from reporting.reporter import fail_record, finish_record, start_record, write_record, write_summary

# Import run functions from all modules
from medium.validator import run as validate_run
from solver.simulate import run as simulate_run
from wulff.speed import run as speed_run
from wulff.shape import run as wulff_run
from experiments.virtual_linearity import run as vlin_run
from experiments.homogenization import run as homogenize_run

COMMAND_MAP = {
    'validate': validate_run,
    'simulate': simulate_run,
    'speed': speed_run,
    'wulff': wulff_run,
    'vlin': vlin_run,
    'homogenize': homogenize_run,
}

EXIT_OK, EXIT_CHECKS_FAILED, EXIT_ERROR = 0, 1, 2


def _seed(value: str) -> int:
    seed = int(value, 0)
    if not 0 <= seed < 2 ** 64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {value}")
    return seed


def _times(value: str) -> List[float]:
    try:
        times = [float(v) for v in value.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated times, got '{value}'")
    if any(t < 0 for t in times):
        raise argparse.ArgumentTypeError("snapshot times must be nonnegative")
    return sorted(set(times))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="KPPLab: reaction-diffusion homogenization laboratory", add_help=False)
    parser.add_argument('command', nargs='?', help='Command to run.')

    # Core arguments
    parser.add_argument('-c', '--config', type=Path, help='YAML run configuration.')
    parser.add_argument('--seed', type=_seed, help='Seed overriding run.seed in the config.')
    parser.add_argument('-o', '--out', type=Path, help=f"Output root (default: ${CONFIG['output_env']} or ./output).")
    parser.add_argument('--threads', type=int, help='Worker threads (default: physical cores).')
    parser.add_argument('--emit-snapshots', type=_times, help='Comma-separated times at which simulate dumps fields.')

    # Logging
    parser.add_argument('-v', '--verbose', action='store_true', help='Enable verbose (DEBUG level) logging.')
    parser.add_argument('-q', '--quiet', action='store_true', help='Suppress console output except for warnings and errors.')
    parser.add_argument('--timestamp-format', default='%H:%M:%S', help='Timestamp format for console output (default: %%H:%%M:%%S)')

    # Help options
    parser.add_argument('-h', '--help', action='store_true', help='Show the main help message and exit.')
    parser.add_argument('--help-command', choices=list(COMMAND_MAP) + ['list'], help='Show the experiment keys of a command.')
    return parser


def output_root(cli_out: Optional[Path], config_out: Optional[str] = None) -> Path:
    if cli_out is not None:
        return cli_out
    if config_out:
        return Path(config_out)
    env = os.environ.get(CONFIG['output_env'])
    return Path(env) if env else Path(CONFIG['default_output'])


def error_payload(e: BaseException) -> Dict[str, Any]:
    details = e.details() if isinstance(e, KPPLabError) else []
    return {'error': type(e).__name__, 'message': str(e), 'details': details}


def emit_error(e: BaseException) -> int:
    print(json.dumps(error_payload(e), sort_keys=True))
    return EXIT_ERROR


def run_command(args: argparse.Namespace) -> int:
    """Parse the config, run one command in its run directory and record the outcome."""
    if args.config is None:
        return emit_error(ConfigError([('--config', f"required for '{args.command}'")]))
    if not args.config.exists():
        return emit_error(ConfigError([('--config', f"file not found: {args.config}")]))
    try:
        run_config = load_config(args.config, {'kind': args.command, 'seed': args.seed})
    except KPPLabError as e:
        return emit_error(e)

    digest = run_config.digest()
    run_dir = output_root(args.out, run_config.out) / f"{run_config.kind}-{digest[:CONFIG['hash_length']]}"
    ensure_dir(run_dir)
    (run_dir / CONFIG['files']['config']).write_text(serialize_config(run_config))
    logger = Logger(log_dir=run_dir, verbose=args.verbose, quiet=args.quiet, timestamp_format=args.timestamp_format)
    args.threads = args.threads or default_threads()

    record = start_record(run_config.kind, digest, run_config.seed)
    write_record(record, run_dir)
    workflow_data = {'run_config': run_config, 'run_dir': run_dir, 'config_hash': digest}
    logger.command(f"{run_config.kind} (config {digest[:CONFIG['hash_length']]}, seed {run_config.seed}, {args.threads} threads)")
    try:
        with logger.phase(run_config.kind):
            result = COMMAND_MAP[run_config.kind](args=args, config=CONFIG, logger=logger, workflow_data=workflow_data)
        if result is None:
            raise KPPLabError(f"Command '{run_config.kind}' failed to return data.")
    except Exception as e:
        logger.error(f"Run failed during '{run_config.kind}': {type(e).__name__}: {e}")
        fail_record(record, error_payload(e))
        write_record(record, run_dir)
        write_summary(record, run_dir)
        logger.close()
        return emit_error(e)

    finish_record(record, run_dir, result)
    write_record(record, run_dir)
    write_summary(record, run_dir)
    failed = [name for name, ok in record.checks.items() if not ok]
    if failed:
        logger.warning(f"{run_config.kind}: {len(failed)} check(s) failed: {', '.join(failed)}")
    else:
        logger.success(f"{run_config.kind}: all {len(record.checks)} checks passed; results in {run_dir}")
    logger.close()
    return EXIT_CHECKS_FAILED if failed else EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    # Handle help requests
    if args.help or (argv is None and len(sys.argv) == 1) or (argv is not None and not argv):
        show_help()
        return EXIT_OK
    if args.help_command:
        show_command_help(args.help_command)
        return EXIT_OK

    if args.command == 'list':
        entries, problems = list_runs(output_root(args.out))
        print_runs(entries, problems)
        return EXIT_OK
    if args.command not in COMMAND_MAP:
        return emit_error(ConfigError([('command', f"unknown command '{args.command}' "
                                                   f"(valid: {', '.join(list(COMMAND_MAP) + ['list'])})")]))
    return run_command(args)


if __name__ == "__main__":
    sys.exit(main())
