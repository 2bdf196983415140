import csv
import hashlib
import json
import math
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Sequence

import numpy as np
import psutil

from common.config import CONFIG


def ensure_dir(path: Path) -> None:
    """Ensure a directory exists, creating it if necessary."""
    path.mkdir(parents=True, exist_ok=True)


def default_threads() -> int:
    """Worker count used when --threads is not given: one per physical core."""
    configured = CONFIG['performance']['max_workers']
    if configured:
        return int(configured)
    return psutil.cpu_count(logical=False) or psutil.cpu_count() or 1


def json_serializer(obj):
    """`default=` hook for json.dump covering the numpy and pathlib values runs produce."""
    if isinstance(obj, set):
        return sorted(list(obj))
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if hasattr(obj, 'to_dict'):
        return obj.to_dict()
    return str(obj)


def canonical_json(payload: Any) -> str:
    return json.dumps(payload, sort_keys=True, separators=(',', ':'), default=json_serializer)


def config_hash(payload: Dict) -> str:
    """SHA-256 of the canonical (sorted-key) JSON form of a validated config."""
    return hashlib.sha256(canonical_json(payload).encode('utf-8')).hexdigest()


def format_number(value: Any) -> str:
    """
    Full round-trip decimal form for numbers; everything else via str().

    Args:
        value: Scalar to format

    Returns:
        repr() of floats (shortest string that reads back bit-exactly), plain ints,
        'nan'/'inf' spelled out, other values as str()
    """
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return 'nan'
        if math.isinf(value):
            return 'inf' if value > 0 else '-inf'
        return repr(value)
    if value is None:
        return ''
    return str(value)


def provenance(config_digest: str, seed: int) -> Dict[str, Any]:
    return {
        'config_hash': config_digest,
        'seed': int(seed),
        'schema_version': CONFIG['schema_version'],
    }


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]], meta: Dict[str, Any]) -> Path:
    """
    Write a CSV artifact whose first line is a '#' comment carrying provenance.

    Args:
        path: Destination file
        header: Column names
        rows: Row values, formatted with format_number
        meta: Provenance fields (config_hash, seed, schema_version)

    Returns:
        The written path
    """
    ensure_dir(path.parent)
    with path.open('w', newline='') as f:
        f.write("# " + " ".join(f"{key}={meta[key]}" for key in sorted(meta)) + "\n")
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([format_number(value) for value in row])
    return path


def read_csv(path: Path) -> Dict[str, Any]:
    """Inverse of write_csv: returns {'meta': {...}, 'header': [...], 'rows': [[str, ...], ...]}."""
    with path.open('r', newline='') as f:
        first = f.readline()
        meta = {}
        if first.startswith('#'):
            for token in first[1:].split():
                key, _, value = token.partition('=')
                meta[key] = value
        else:
            f.seek(0)
        reader = csv.reader(f)
        header = next(reader, [])
        rows = [row for row in reader]
    return {'meta': meta, 'header': header, 'rows': rows}


def write_json(path: Path, payload: Dict[str, Any], meta: Optional[Dict[str, Any]] = None) -> Path:
    """Write a JSON artifact with sorted keys; provenance fields are merged at the top level."""
    ensure_dir(path.parent)
    document = dict(payload)
    if meta:
        document.update(meta)
    with path.open('w') as f:
        json.dump(document, f, indent=2, sort_keys=True, default=json_serializer)
        f.write("\n")
    return path
