"""
Experiment orchestration: convergence-rate studies over c ladders, symbol sweeps,
result emission (CSV, JSON, run manifest) and manifest replay.
"""
import logging
import platform
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import scipy
from pydantic import BaseModel, Field

from . import __version__
from .errors import InsufficientLadder
from .operators import calibrate_resolvent_constants, probe_fields
from .solver import SolveConfig, SolveReport, SolverContext
from .symbols import BoundReport, DecayConstants, default_decay_constants, sweep
from .task_executor import TaskExecutor
from .task_manager import TaskManager
from .utils import ensure_parent, read_json, write_json

logger = logging.getLogger(__name__)

CSV_COLUMNS = ['c', 's', 'p', 'N', 'q', 'norm_h1', 'norm_w1q', 'norm_max', 'iters', 'residual', 'converged']
MIN_CONVERGED = 4
PASS = 'pass'
FAIL = 'fail'


class RateEntry(BaseModel):
    """One rung of the ladder; norms are of w = u_c - u_inf and absent when the solve failed."""

    c: float
    s: float
    p: float
    N: int
    q: float
    norm_h1: Optional[float] = None
    norm_w1q: Optional[float] = None
    norm_max: Optional[float] = None
    iters: Optional[int] = None
    residual: Optional[float] = None
    converged: bool = False
    requested_c: Optional[float] = None
    attempts: List[float] = Field(default_factory=list)
    error: Optional[str] = None


class RateStudy(BaseModel):
    config: Dict[str, Any]
    c_values: List[float]
    entries: List[RateEntry]
    fitted_slope: float
    expected_exponent: float
    tolerance: float
    verdict: str
    excluded: List[float] = Field(default_factory=list)

    @property
    def converged(self) -> List[RateEntry]:
        return [e for e in self.entries if e.converged]

    @property
    def norms(self) -> List[float]:
        return [e.norm_max for e in self.converged]


class RunManifest(BaseModel):
    command: str
    version: str = __version__
    config: Dict[str, Any]
    solve_config: Dict[str, Any]
    grid: Dict[str, Any]
    seed: int
    c_values: List[float] = Field(default_factory=list)
    auto_c0: bool = False
    workers: int = 1
    decay_constants: Optional[Dict[str, float]] = None
    resolvent_constants: Optional[Dict[str, float]] = None
    excluded: List[float] = Field(default_factory=list)
    outputs: Dict[str, str] = Field(default_factory=dict)
    environment: Dict[str, str] = Field(default_factory=dict)
    started_at: str
    finished_at: Optional[str] = None


def environment_info() -> Dict[str, str]:
    return {
        'python': platform.python_version(),
        'numpy': np.__version__,
        'scipy': scipy.__version__,
        'pandas': pd.__version__,
        'machine': platform.machine(),
    }


def expected_exponent(s: float, p: float) -> float:
    """-2s^2/(1-s) when p <= 2, else -2s/(1-s)."""
    if p <= 2:
        return -2.0 * s * s / (1.0 - s)
    return -2.0 * s / (1.0 - s)


def fit_slope(c_values: Sequence[float], norms: Sequence[float]) -> float:
    """Least-squares slope of log(norm) against log(c)."""
    if len(c_values) != len(norms) or len(c_values) < 2:
        raise ValueError("need at least two (c, norm) pairs of equal length")
    slope, _ = np.polyfit(np.log(np.asarray(c_values, dtype=float)), np.log(np.asarray(norms, dtype=float)), 1)
    return float(slope)


def rate_verdict(slope: float, s: float, p: float, tolerance: float = 0.15, slack: float = 0.5) -> str:
    """Two-sided relative tolerance for p > 2; for p <= 2 the rate only needs to be at least as fast."""
    expected = expected_exponent(s, p)
    if p > 2:
        ok = abs(slope - expected) <= tolerance * abs(expected)
    else:
        ok = slope <= expected + slack
    return PASS if ok else FAIL


def _check_ladder(c_values: Sequence[float]) -> List[float]:
    ladder = [float(c) for c in c_values]
    if len(ladder) < MIN_CONVERGED:
        raise ValueError(f"a rate study needs at least {MIN_CONVERGED} c values, got {len(ladder)}")
    if any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise ValueError(f"c values must be strictly increasing: {ladder}")
    return ladder


def _entry(task: Dict, base: SolveConfig) -> RateEntry:
    common = dict(s=base.params.s, p=base.p, N=base.dim, q=base.q, requested_c=task['c'],
                  attempts=list(task['attempts']))
    report: Optional[SolveReport] = task['result']
    if task['status'] != 'completed' or report is None or not report.accepted:
        error = task['error'] if report is None else f"residual {report.residual:.3e} above gate"
        return RateEntry(c=task['config'].c, converged=False, error=error, **common)
    return RateEntry(
        c=report.c, norm_h1=report.norms['h1'], norm_w1q=report.norms['w1q'], norm_max=report.norms['max'],
        iters=report.iterations, residual=report.residual, converged=True, **common,
    )


def run_rate_study(base_config: SolveConfig, c_values: Sequence[float], config: Optional[Dict[str, Any]] = None,
                   workers: int = 1, auto_c0: bool = False,
                   context: Optional[SolverContext] = None) -> RateStudy:
    """Solve at every c concurrently and fit the decay rate of ||u_c - u_inf||."""
    ladder = _check_ladder(c_values)
    config = config or {'tasks': {'max_retries': 3}, 'solver': {'c0_factor': 1.5}}
    context = context if context is not None else SolverContext.build(base_config)

    manager = TaskManager(config, TaskExecutor(context), workers=workers, auto_c0=auto_c0)
    for c in ladder:
        manager.create_task(base_config.with_c(c))
    entries = [_entry(task, base_config) for task in manager.run()]

    converged, excluded, seen = [], [], set()
    for entry in entries:
        # auto_c0 retries can land two rungs on the same c
        if entry.converged and entry.c not in seen:
            seen.add(entry.c)
            converged.append(entry)
        else:
            excluded.append(entry.requested_c)
            if entry.converged:
                entry.converged = False
                entry.error = f"duplicate of c={entry.c}"
            logger.warning(f"Excluding c={entry.requested_c} from the fit: {entry.error}")

    if len(converged) < MIN_CONVERGED:
        raise InsufficientLadder(f"only {len(converged)} of {len(ladder)} c values converged; need {MIN_CONVERGED}")

    converged.sort(key=lambda e: e.c)
    s, p = base_config.params.s, base_config.p
    slope = fit_slope([e.c for e in converged], [e.norm_max for e in converged])
    study = RateStudy(
        config=base_config.model_dump(exclude={'params': {'c'}}),
        c_values=ladder,
        entries=entries,
        fitted_slope=slope,
        expected_exponent=expected_exponent(s, p),
        tolerance=0.15 if p > 2 else 0.5,
        verdict=rate_verdict(slope, s, p),
        excluded=excluded,
    )
    logger.info(f"Rate study s={s}, p={p}, N={base_config.dim}: slope={slope:.4f} "
                f"(expected {study.expected_exponent:.4f}) -> {study.verdict}")
    return study


def run_symbol_sweep(s_values: Iterable[float] = (0.6, 0.75, 0.9), c_values: Iterable[float] = (2.0, 10.0, 100.0),
                     xi_min: float = 1e-3, xi_max: float = 1e6, samples: int = 2000,
                     constants: Optional[DecayConstants] = None,
                     rel_tol: float = 1e-12) -> Tuple[pd.DataFrame, Dict[str, BoundReport]]:
    table, reports = sweep(s_values, c_values, xi_min, xi_max, samples, constants, rel_tol)
    for name, report in reports.items():
        level = logging.INFO if report.ok else logging.ERROR
        logger.log(level, f"{name}: {report.violations} violation(s) in {report.samples} samples, "
                          f"worst slack {report.worst_slack:.3e}")
    return table, reports


def study_frame(study: RateStudy) -> pd.DataFrame:
    return pd.DataFrame([e.model_dump(include=set(CSV_COLUMNS)) for e in study.entries], columns=CSV_COLUMNS)


def write_csv(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    path = ensure_parent(path)
    frame.to_csv(path, index=False, float_format='%.17g')
    logger.info(f"Wrote {path}")
    return path


def make_manifest(command: str, config: Dict[str, Any], base_config: SolveConfig,
                  c_values: Sequence[float] = (), auto_c0: bool = False, workers: int = 1,
                  resolvent: bool = True) -> RunManifest:
    """Manifest with the calibration constants the run depends on."""
    manifest = RunManifest(
        command=command,
        config=config,
        solve_config=base_config.model_dump(),
        grid=base_config.grid.to_dict(),
        seed=base_config.seed,
        c_values=[float(c) for c in c_values],
        auto_c0=auto_c0,
        workers=workers,
        decay_constants=default_decay_constants().model_dump(),
        environment=environment_info(),
        started_at=datetime.now().isoformat(),
    )
    if resolvent and c_values:
        operators_cfg = config.get('operators', {})
        fields = probe_fields(base_config.grid, int(operators_cfg.get('trials', 8)),
                              int(operators_cfg.get('seed', base_config.seed)))
        constants = calibrate_resolvent_constants(base_config.grid, base_config.params.s, base_config.q,
                                                  c_values, fields)
        manifest = manifest.model_copy(update={'resolvent_constants': constants.model_dump()})
    return manifest


def emit(result: Union[RateStudy, SolveReport], prefix: Union[str, Path],
         manifest: Optional[RunManifest] = None) -> Dict[str, Path]:
    """Write <prefix>.json (and <prefix>.csv for a study) plus <prefix>.manifest.json."""
    prefix = str(prefix)
    paths: Dict[str, Path] = {}
    if isinstance(result, RateStudy):
        paths['csv'] = write_csv(study_frame(result), f"{prefix}.csv")
        paths['json'] = write_json(f"{prefix}.json", result.model_dump())
        if manifest is not None:
            manifest = manifest.model_copy(update={'excluded': list(result.excluded)})
    elif isinstance(result, SolveReport):
        paths['json'] = write_json(f"{prefix}.json", result.to_dict())
    else:
        raise TypeError(f"cannot emit {type(result).__name__}")

    if manifest is not None:
        outputs = {key: str(path) for key, path in paths.items()}
        manifest = manifest.model_copy(update={'outputs': outputs, 'finished_at': datetime.now().isoformat()})
        paths['manifest'] = write_json(f"{prefix}.manifest.json", manifest.model_dump())
    return paths


def load_study(path: Union[str, Path]) -> RateStudy:
    return RateStudy.model_validate(read_json(path))


def load_manifest(path: Union[str, Path]) -> RunManifest:
    return RunManifest.model_validate(read_json(path))


def replay_manifest(manifest: Union[RunManifest, str, Path]) -> RateStudy:
    """Re-run the rate study a manifest describes."""
    if not isinstance(manifest, RunManifest):
        manifest = load_manifest(manifest)
    if manifest.command != 'rates':
        raise ValueError(f"only rate-study manifests can be replayed, got {manifest.command!r}")
    base = SolveConfig.model_validate(manifest.solve_config)
    logger.info(f"Replaying {manifest.command} over c={manifest.c_values} (version {manifest.version})")
    return run_rate_study(base, manifest.c_values, manifest.config, workers=manifest.workers,
                          auto_c0=manifest.auto_c0)


def max_relative_deviation(a: RateStudy, b: RateStudy) -> float:
    """Largest relative difference between the norms of entries present in both studies."""
    left = {e.c: e for e in a.converged}
    worst = 0.0
    for entry in b.converged:
        other = left.get(entry.c)
        if other is None:
            return float('inf')
        for name in ('norm_h1', 'norm_w1q', 'norm_max'):
            x, y = getattr(other, name), getattr(entry, name)
            worst = max(worst, abs(x - y) / abs(x))
    return worst
