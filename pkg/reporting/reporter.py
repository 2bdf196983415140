import json
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional

from common.config import CONFIG
from common.utils import ensure_dir, format_number, json_serializer

STATUSES = ('running', 'passed', 'failed', 'error')


@dataclass
class RunRecord:
    """
    What a run did: written as `running` before the command starts and
    rewritten with the outcome when it ends. Wall times live only here.
    """
    kind: str
    config_hash: str
    seed: int
    started: str
    finished: Optional[str] = None
    status: str = 'running'
    artifacts: List[str] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)
    checks: Dict[str, bool] = field(default_factory=dict)
    error: Optional[Dict[str, Any]] = None
    schema_version: int = CONFIG['schema_version']

    @property
    def complete(self) -> bool:
        return self.finished is not None and self.status != 'running'

    @property
    def passed(self) -> bool:
        return self.status == 'passed'

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> 'RunRecord':
        known = set(cls.__dataclass_fields__)
        return cls(**{key: value for key, value in payload.items() if key in known})


def now() -> str:
    return datetime.now().isoformat(timespec='seconds')


def start_record(kind: str, digest: str, seed: int) -> RunRecord:
    return RunRecord(kind=kind, config_hash=digest, seed=seed, started=now())


def finish_record(record: RunRecord, run_dir: Path, result: Dict[str, Any]) -> RunRecord:
    """Fold a command's result dict (summary, checks, artifacts) into the record."""
    record.finished = now()
    record.summary = result.get('summary', {})
    record.checks = {name: bool(ok) for name, ok in result.get('checks', {}).items()}
    record.artifacts = sorted(_relative(Path(p), run_dir) for p in result.get('artifacts', []))
    record.status = 'passed' if all(record.checks.values()) else 'failed'
    return record


def fail_record(record: RunRecord, error: Dict[str, Any]) -> RunRecord:
    record.finished = now()
    record.status = 'error'
    record.error = error
    return record


def _relative(path: Path, root: Path) -> str:
    try:
        return str(path.relative_to(root))
    except ValueError:
        return str(path)


def write_record(record: RunRecord, run_dir: Path) -> Path:
    ensure_dir(run_dir)
    path = run_dir / CONFIG['files']['record']
    tmp = path.with_suffix('.json.tmp')
    with tmp.open('w') as f:
        json.dump(record.to_dict(), f, indent=2, sort_keys=True, default=json_serializer)
        f.write("\n")
    tmp.replace(path)
    return path


def read_record(path: Path) -> RunRecord:
    with path.open('r') as f:
        return RunRecord.from_dict(json.load(f))


def generate_summary_text(record: RunRecord) -> str:
    """Human-readable summary; holds no wall-clock data."""
    lines = [
        "╔" + "═" * 78 + "╗",
        f"║ {'KPPLab Run Summary':^76} ║",
        f"║ {'Kind: ' + record.kind:<76} ║",
        f"║ {'Config: ' + record.config_hash[:CONFIG['hash_length']] + '   Seed: ' + str(record.seed):<76} ║",
        "╚" + "═" * 78 + "╝",
        "",
        "--- Summary ---",
        "",
    ]
    for key in sorted(record.summary):
        lines.append(f"  • {key:<28}: {_render(record.summary[key])}")
    if record.checks:
        lines += ["", "--- Checks ---", ""]
        for name in sorted(record.checks):
            lines.append(f"  • {name:<40}: {'pass' if record.checks[name] else 'FAIL'}")
    if record.error:
        lines += ["", "--- Error ---", "", f"  • {record.error.get('error')}: {record.error.get('message')}"]
    lines += ["", "--- Artifacts ---", ""]
    lines += [f"  • {path}" for path in record.artifacts]
    lines.append("")
    return "\n".join(lines)


def _render(value: Any) -> str:
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_render(v) for v in value) + "]"
    if isinstance(value, dict):
        return "{" + ", ".join(f"{k}: {_render(v)}" for k, v in sorted(value.items())) + "}"
    return format_number(value) or 'none'


def write_summary(record: RunRecord, run_dir: Path) -> Path:
    path = run_dir / CONFIG['files']['summary']
    path.write_text(generate_summary_text(record))
    return path
