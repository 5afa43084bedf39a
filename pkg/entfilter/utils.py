"""
Utility functions: seed streams, worker pool, tabular output and atomic
file writes.
"""

import io
import json
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Mapping, Optional, TypeVar, Union
import numpy as np
import pandas as pd

T = TypeVar('T')
R = TypeVar('R')

CSV_FLOAT_FORMAT = '%.12g'


def task_rng(master_seed: int, index: int) -> np.random.Generator:
    """
    Generator for task `index` of a run seeded with `master_seed`.

    Streams depend only on (master_seed, index), never on execution order.
    """
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), int(index)]))


def task_seed(master_seed: int, index: int) -> int:
    """64-bit integer seed derived from (master_seed, index)."""
    state = np.random.SeedSequence([int(master_seed), int(index)]).generate_state(2, np.uint32)
    return int(state[0]) << 32 | int(state[1])


def resolve_threads(threads: int) -> int:
    """0 means one worker per CPU."""
    if threads < 0:
        raise ValueError(f"threads must be non-negative, got {threads}")
    if threads == 0:
        return os.cpu_count() or 1
    return threads


def parallel_map(fn: Callable[[T], R], items: Iterable[T], threads: int = 1) -> List[R]:
    """
    Map fn over items, preserving input order.

    threads=1 runs inline; threads=0 uses every CPU.
    """
    items = list(items)
    workers = resolve_threads(threads)
    if workers == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


def manifest_header(manifest: Mapping[str, Any]) -> str:
    """'# key=value' comment lines for CSV payloads."""
    return ''.join(f"# {key}={value}\n" for key, value in manifest.items())


def frame_to_csv(df: pd.DataFrame, manifest: Optional[Mapping[str, Any]] = None) -> str:
    """CSV text with 12 significant digits and an optional manifest header."""
    buffer = io.StringIO()
    if manifest:
        buffer.write(manifest_header(manifest))
    df.to_csv(buffer, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator='\n')
    return buffer.getvalue()


def to_json_text(payload: Any) -> str:
    """Stable JSON rendering (sorted keys, 2-space indent)."""
    return json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + '\n'


def _json_default(obj: Any) -> Any:
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"Object of type {type(obj).__name__} is not JSON serializable")


def atomic_write(path: Union[str, Path], text: str) -> Path:
    """
    Write text so the file is either complete or absent.

    Writes to a temporary file in the target directory, then renames.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix='.tmp')
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='') as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def read_csv_payload(path: Union[str, Path]) -> pd.DataFrame:
    """Read a CSV written by frame_to_csv, skipping manifest comments."""
    return pd.read_csv(path, comment='#')


def read_manifest_header(path: Union[str, Path]) -> Dict[str, str]:
    """Parse the '# key=value' lines at the top of a CSV payload."""
    out = {}
    with open(path, encoding='utf-8') as handle:
        for line in handle:
            if not line.startswith('# '):
                break
            key, _, value = line[2:].rstrip('\n').partition('=')
            out[key] = value
    return out
