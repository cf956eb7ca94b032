"""
Utility functions for configuration and result files.
"""
import os
import json
import logging
from pathlib import Path
from typing import Dict, Any, Optional, Union

import yaml

logger = logging.getLogger(__name__)

REQUIRED_SECTIONS = ['grid', 'groundstate', 'solver', 'symbols', 'operators', 'lab', 'tasks', 'logging']

REQUIRED_KEYS = {
    'grid': ['dim', 'points', 'radius'],
    'groundstate': ['tol', 'max_iter'],
    'solver': ['q', 'tol', 'max_iter', 'neumann_tol', 'neumann_max_terms', 'c0_factor'],
    'symbols': ['rel_tol', 'calibration_samples'],
    'operators': ['seed', 'trials'],
    'lab': ['seed', 'workers'],
    'tasks': ['max_retries'],
    'logging': ['level', 'dir'],
}


def expand_env_in_obj(obj: Any) -> Any:
    """Recursively expand ${VAR} placeholders with environment values (empty if unset)."""
    if isinstance(obj, dict):
        return {k: expand_env_in_obj(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [expand_env_in_obj(v) for v in obj]
    if isinstance(obj, str):
        parts = []
        i = 0
        while i < len(obj):
            start = obj.find('${', i)
            if start == -1:
                parts.append(obj[i:])
                break
            parts.append(obj[i:start])
            end = obj.find('}', start)
            if end == -1:
                # malformed, keep rest
                parts.append(obj[start:])
                break
            parts.append(os.getenv(obj[start + 2:end], ''))
            i = end + 1
        return ''.join(parts)
    return obj


def load_config(path: Union[str, Path] = 'config.yaml') -> Dict[str, Any]:
    """Load a YAML (or JSON) configuration file with env placeholders expanded."""
    with open(path, 'r') as f:
        config = yaml.safe_load(f) or {}
    if not isinstance(config, dict):
        raise ValueError(f"Config file {path} must contain a mapping")
    return expand_env_in_obj(config)


def validate_config(config: Dict[str, Any]) -> bool:
    """Validate configuration."""
    for section in REQUIRED_SECTIONS:
        if section not in config:
            logger.error(f"Missing config section: {section}")
            return False
        for key in REQUIRED_KEYS[section]:
            if key not in config[section]:
                logger.error(f"Missing {section} setting: {key}")
                return False

    grid = config['grid']
    if grid['dim'] not in (1, 3):
        logger.error(f"grid.dim must be 1 or 3, got {grid['dim']}")
        return False
    points = int(grid['points'])
    if points < 256 or points & (points - 1):
        logger.error(f"grid.points must be a power of two >= 256, got {points}")
        return False
    if float(grid['radius']) <= 0:
        logger.error("grid.radius must be positive")
        return False

    if int(config['lab']['workers']) < 1:
        logger.error("lab.workers must be at least 1")
        return False

    return True


def merge_overrides(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    """Return a copy of base with non-None overrides applied (keys normalized to underscores)."""
    merged = dict(base)
    for key, value in overrides.items():
        if value is not None:
            merged[key.replace('-', '_')] = value
    return merged


def ensure_parent(path: Union[str, Path]) -> Path:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    return path


def write_json(path: Union[str, Path], payload: Any) -> Path:
    """Write JSON; floats use shortest round-trip repr (at most 17 significant digits)."""
    path = ensure_parent(path)
    with open(path, 'w') as f:
        json.dump(payload, f, indent=2)
    logger.info(f"Wrote {path}")
    return path


def read_json(path: Union[str, Path]) -> Any:
    with open(path, 'r') as f:
        return json.load(f)


def format_result(result: Dict[str, Any], limit: Optional[int] = None) -> str:
    """Format a result mapping for logging."""
    try:
        text = json.dumps(result, indent=2, default=str)
    except (TypeError, ValueError):
        text = str(result)
    if limit is not None and len(text) > limit:
        return text[:limit - 3] + '...'
    return text
