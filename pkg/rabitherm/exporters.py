"""
CSV and JSON writers. Numbers carry 17 significant digits, LF line endings.
"""

import hashlib
import json
import logging
from pathlib import Path
from typing import Dict, Iterable, Optional

import numpy as np
import pandas as pd

from rabitherm import __version__
from rabitherm.models import QfiCurve

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'


def curve_frame(curve: QfiCurve, omega_f: float = 1.0) -> pd.DataFrame:
    """T,F_total,F_s1,F_bb,F_bd,F_dd in units of omega_f; absent components are left empty"""
    columns = {'T': curve.temperatures / omega_f, 'F_total': curve.total * omega_f ** 2}
    for name in ('s1', 'bb', 'bd', 'dd'):
        values = getattr(curve, f'comp_{name}')
        columns[f'F_{name}'] = values * omega_f ** 2 if values is not None else np.nan
    return pd.DataFrame(columns, columns=['T', 'F_total', 'F_s1', 'F_bb', 'F_bd', 'F_dd'])


def write_csv(frame: pd.DataFrame, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    logger.debug(f"Wrote {len(frame)} rows to {path}")
    return path


def sha256_digest(path) -> str:
    digest = hashlib.sha256()
    with Path(path).open('rb') as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b''):
            digest.update(chunk)
    return digest.hexdigest()


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    if hasattr(value, 'value') and hasattr(value, 'name'):
        return value.value
    if isinstance(value, Path):
        return str(value)
    return value


def write_json(document: dict, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', encoding='utf-8', newline='\n') as handle:
        json.dump(_jsonable(document), handle, indent=2, sort_keys=True)
        handle.write('\n')
    return path


def write_manifest(out_dir, command: str, config: dict, files: Iterable[Path],
                   extra: Optional[Dict] = None) -> Path:
    """manifest.json: command, resolved config, version and file digests"""
    out_dir = Path(out_dir)
    manifest = {
        'command': command,
        'version': __version__,
        'config': config,
        'files': {Path(f).name: sha256_digest(f) for f in files},
    }
    if extra:
        manifest.update(extra)
    return write_json(manifest, out_dir / 'manifest.json')
