from pathlib import Path
from typing import Any, Dict, Tuple

import numpy as np

from common.utils import read_csv, write_csv, write_json
from solver.grid import Field, Grid


def write_snapshot(u: Field, directory: Path, stem: str, meta: Dict[str, Any]) -> Tuple[Path, Path]:
    """
    Dump a field as CSV (cell index per axis, coordinates, u) plus a JSON sidecar.

    Args:
        u: Field to dump
        directory: Output directory
        stem: File name without extension
        meta: Provenance (config_hash, seed, schema_version)

    Returns:
        (csv_path, json_path)
    """
    grid = u.grid
    names = ['i', 'j'][:grid.d]
    coords = ['x', 'y'][:grid.d]
    index = np.indices(grid.shape).reshape(grid.d, -1).T
    points = grid.points().reshape(-1, grid.d)
    values = u.values.reshape(-1)
    rows = ([*idx, *pt, val] for idx, pt, val in zip(index.tolist(), points.tolist(), values.tolist()))
    csv_path = write_csv(directory / f"{stem}.csv", names + coords + ['u'], rows, meta)
    sidecar = {
        'grid': {'d': grid.d, 'h': grid.h, 'origin': list(grid.origin), 'extents': list(grid.extents)},
        'time': u.time,
        'exterior': u.exterior,
    }
    json_path = write_json(directory / f"{stem}.json", sidecar, meta)
    return csv_path, json_path


def read_snapshot(csv_path: Path, sidecar: Dict[str, Any]) -> Field:
    geometry = sidecar['grid']
    grid = Grid(d=geometry['d'], h=geometry['h'], origin=tuple(geometry['origin']), extents=tuple(geometry['extents']))
    table = read_csv(csv_path)
    values = np.array([float(row[-1]) for row in table['rows']]).reshape(grid.shape)
    return Field(grid=grid, values=values, time=float(sidecar['time']), exterior=float(sidecar['exterior']))
