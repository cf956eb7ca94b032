"""
Command handlers and logging setup for the command-line front-end.
"""
import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

from pydantic import ValidationError

from . import __version__
from .errors import (BoundViolation, DimMismatch, GridMismatch, InsufficientLadder, NoContraction, NoConvergence,
                     QMismatch, SingularA, SupportOverflow)
from .groundstate import petviashvili, sobolev_critical_exponent
from .identities import ExistenceRegime, ScalingMap, existence_report, pohozaev, relative_pohozaev
from .radial import RadialGrid
from .lab import (emit, load_study, make_manifest, max_relative_deviation, replay_manifest, run_rate_study,
                  run_symbol_sweep, write_csv)
from .solver import SolveConfig, SolveReport, SolverContext, solve, solve_with_auto_c0
from .symbols import SymbolParams, calibrate_decay_constants
from .utils import format_result, load_config, merge_overrides, read_json, validate_config, write_json

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

DOMAIN_ERRORS = (NoContraction, NoConvergence, SingularA, InsufficientLadder, BoundViolation)
INPUT_ERRORS = (ValidationError, QMismatch, DimMismatch, GridMismatch, SupportOverflow, KeyError, ValueError)


def configure_logging(command: str, config: Dict[str, Any]):
    """File log per command under the configured directory plus the console."""
    settings = config.get('logging', {})
    log_dir = settings.get('dir') or 'logs'
    os.makedirs(log_dir, exist_ok=True)
    logging.basicConfig(
        level=getattr(logging, str(settings.get('level', 'INFO')).upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler(os.path.join(log_dir, f'{command}.log')),
            logging.StreamHandler()
        ],
        force=True
    )


def defaults_from_config(config: Dict[str, Any], command: str) -> Dict[str, Any]:
    """Flatten config.yaml into flag-named options."""
    grid, solver, lab = config['grid'], config['solver'], config['lab']
    symbols = config['symbols']
    defaults = {
        'dim': grid['dim'], 'K': grid['points'], 'R': grid['radius'],
        'q': solver['q'], 'tol': solver['tol'], 'max_iter': solver['max_iter'],
        'neumann_tol': solver['neumann_tol'], 'neumann_max_terms': solver['neumann_max_terms'],
        'c0_factor': solver['c0_factor'], 'lipschitz_pairs': solver.get('lipschitz_pairs', 20),
        'gs_tol': config['groundstate']['tol'], 'gs_max_iter': config['groundstate']['max_iter'],
        'seed': lab['seed'], 'workers': lab['workers'], 'max_retries': config['tasks']['max_retries'],
        'auto_c0': False,
        's_list': symbols.get('s_values', [0.6, 0.75, 0.9]),
        'c_list': symbols.get('c_values', [2.0, 10.0, 100.0]) if command == 'symbols' else None,
        'samples': symbols.get('samples', 2000),
        'xi_min': symbols.get('xi_min', 1e-3), 'xi_max': symbols.get('xi_max', 1e6),
        'rel_tol': symbols['rel_tol'],
    }
    if command == 'groundstate':
        defaults['tol'] = config['groundstate']['tol']
        defaults['max_iter'] = config['groundstate']['max_iter']
    return defaults


def parse_float_list(value: Any) -> Optional[List[float]]:
    if value is None:
        return None
    if isinstance(value, str):
        return [float(v) for v in value.split(',') if v.strip()]
    return [float(v) for v in value]


def resolve_options(config: Dict[str, Any], command: str, file_options: Optional[Dict[str, Any]],
                    cli_options: Dict[str, Any]) -> Dict[str, Any]:
    """Flag > --config file > config.yaml."""
    options = defaults_from_config(config, command)
    if file_options:
        options = merge_overrides(options, file_options)
    options = merge_overrides(options, cli_options)
    for key in ('c_list', 's_list'):
        options[key] = parse_float_list(options.get(key))
    return options


def require(options: Dict[str, Any], *names: str):
    missing = [name for name in names if options.get(name) is None]
    if missing:
        raise KeyError(f"missing required option(s): {', '.join('--' + n.replace('_', '-') for n in missing)}")


def solve_config_from_options(options: Dict[str, Any], c: Optional[float] = None) -> SolveConfig:
    return SolveConfig(
        params=SymbolParams(s=float(options['s']), c=float(c if c is not None else options['c'])),
        p=float(options['p']), q=float(options['q']), dim=int(options['dim']),
        points=int(options['K']), radius=float(options['R']), delta=options.get('delta'),
        tol=float(options['tol']), max_iter=int(options['max_iter']),
        neumann_tol=float(options['neumann_tol']), neumann_max_terms=int(options['neumann_max_terms']),
        groundstate_tol=float(options['gs_tol']), groundstate_max_iter=int(options['gs_max_iter']),
        lipschitz_pairs=int(options['lipschitz_pairs']), seed=int(options['seed']),
    )


def cmd_symbols(options: Dict[str, Any], config: Dict[str, Any]) -> int:
    constants = calibrate_decay_constants(samples=int(config['symbols']['calibration_samples']))
    table, reports = run_symbol_sweep(options['s_list'], options['c_list'], float(options['xi_min']),
                                      float(options['xi_max']), int(options['samples']), constants,
                                      float(options['rel_tol']))
    if options.get('out'):
        write_csv(table, options['out'])
    ok = True
    for name, report in reports.items():
        ok = ok and report.ok
        print(f"{name}: {'ok' if report.ok else 'VIOLATED'} samples={report.samples} "
              f"violations={report.violations} worst_slack={report.worst_slack:.3e}")
    print(f"C0={constants.c0:.17g} C1={constants.c1:.17g} ratio1={constants.ratio1:.17g}")
    return EXIT_OK if ok else EXIT_FAILED


def cmd_groundstate(options: Dict[str, Any], config: Dict[str, Any]) -> int:
    require(options, 'p')
    grid = RadialGrid(int(options['dim']), int(options['K']), float(options['R']))
    state = petviashvili(float(options['p']), grid, tol=float(options['tol']), max_iter=int(options['max_iter']))
    if options.get('out'):
        certificate = {k: v for k, v in state.to_dict().items() if k != 'field'}
        write_json(options['out'], {**state.field.to_dict(), **certificate})
    print(f"residual={state.residual:.6e}")
    return EXIT_OK


def cmd_solve(options: Dict[str, Any], config: Dict[str, Any]) -> int:
    require(options, 'p', 's', 'c')
    solve_config = solve_config_from_options(options)
    context = SolverContext.build(solve_config)
    if options.get('auto_c0'):
        report = solve_with_auto_c0(solve_config, context, factor=float(options['c0_factor']),
                                    max_steps=int(options['max_retries']))
    else:
        report = solve(solve_config, context)
    if options.get('out'):
        prefix = str(options['out'])
        prefix = prefix[:-5] if prefix.endswith('.json') else prefix
        manifest = make_manifest('solve', config, solve_config, resolvent=False)
        emit(report, prefix, manifest)
    print(f"c={report.c:.6g} iterations={report.iterations} residual={report.residual:.6e} "
          f"norm={report.norms['max']:.6e} lipschitz={report.lipschitz_probe}")
    return EXIT_OK if report.accepted else EXIT_FAILED


def cmd_rates(options: Dict[str, Any], config: Dict[str, Any]) -> int:
    require(options, 'p', 's', 'c_list', 'out')
    ladder = options['c_list']
    base = solve_config_from_options(options, c=ladder[0])
    run_config = merge_overrides(config, {'tasks': {'max_retries': int(options['max_retries'])},
                                          'solver': {**config['solver'], 'c0_factor': options['c0_factor']}})
    workers = int(options['workers'])
    manifest = make_manifest('rates', run_config, base, ladder, bool(options.get('auto_c0')), workers)
    study = run_rate_study(base, ladder, run_config, workers=workers, auto_c0=bool(options.get('auto_c0')))
    emit(study, options['out'], manifest)
    print(f"slope={study.fitted_slope:.6f} expected={study.expected_exponent:.6f} verdict={study.verdict}")
    return EXIT_OK if study.verdict == 'pass' else EXIT_FAILED


def cmd_pohozaev(options: Dict[str, Any], config: Dict[str, Any]) -> int:
    require(options, 'input')
    report = SolveReport.from_dict(read_json(options['input']))
    params = report.config.params
    value = pohozaev(report.u_c, report.config.p, params)
    relative = relative_pohozaev(report.u_c, report.config.p, params)
    print(f"pohozaev={value:.6e} relative={relative:.6e}")
    return EXIT_OK if relative <= 1e-4 else EXIT_FAILED


def cmd_classify(options: Dict[str, Any], config: Dict[str, Any]) -> int:
    require(options, 'p', 's', 'c')
    s, c, p, dim = float(options['s']), float(options['c']), float(options['p']), int(options['dim'])
    if options.get('m') is not None or options.get('mu') is not None:
        require(options, 'm', 'mu')
        params = SymbolParams.general(s=s, c=c, m=float(options['m']), mu=float(options['mu']))
    else:
        params = SymbolParams(s=s, c=c)
    report = existence_report(p, params, dim)
    print(format_result(report.model_dump(mode='json')))
    if report.regime != ExistenceRegime.NONEXISTENCE:
        return EXIT_OK

    if p >= sobolev_critical_exponent(dim):
        print(f"obstruction={report.obstruction:.6e} kappa={report.kappa:.6e} (no solve: p is not below "
              f"{sobolev_critical_exponent(dim):g})")
        return EXIT_OK

    # consistency witness, not a proof: the construction must fail here
    normalized_c = ScalingMap.from_symbol_params(params, p).normalized_c(c)
    solve_options = {**options, 'c': normalized_c}
    try:
        attempt = solve(solve_config_from_options(solve_options))
    except NoContraction as e:
        print(f"NoContraction at c={normalized_c:.6g}: {e}")
        print(f"obstruction={report.obstruction:.6e} kappa={report.kappa:.6e}")
        return EXIT_OK
    print(f"solve unexpectedly converged at c={normalized_c:.6g} with residual={attempt.residual:.3e}")
    return EXIT_FAILED


def cmd_replay(options: Dict[str, Any], config: Dict[str, Any]) -> int:
    require(options, 'manifest')
    manifest_path = Path(options['manifest'])
    study = replay_manifest(manifest_path)
    manifest = read_json(manifest_path)
    recorded_path = manifest.get('outputs', {}).get('json')
    if not recorded_path:
        print("manifest records no study output to compare against")
        return EXIT_FAILED
    deviation = max_relative_deviation(load_study(recorded_path), study)
    print(f"slope={study.fitted_slope:.6f} max_relative_deviation={deviation:.3e}")
    return EXIT_OK if deviation <= 1e-12 else EXIT_FAILED


COMMANDS: Dict[str, Callable[[Dict[str, Any], Dict[str, Any]], int]] = {
    'symbols': cmd_symbols,
    'groundstate': cmd_groundstate,
    'solve': cmd_solve,
    'rates': cmd_rates,
    'pohozaev': cmd_pohozaev,
    'classify': cmd_classify,
    'replay': cmd_replay,
}


def _grid_flags(parser: argparse.ArgumentParser):
    parser.add_argument('--dim', type=int, choices=[1, 3], help='Space dimension N')
    parser.add_argument('--K', type=int, help='Grid points (power of two)')
    parser.add_argument('--R', type=float, help='Truncation radius')


def _solve_flags(parser: argparse.ArgumentParser, with_c: bool = True):
    _grid_flags(parser)
    parser.add_argument('--p', type=float, help='Nonlinearity exponent')
    parser.add_argument('--s', type=float, help='Fractional power s in (1/2, 1)')
    if with_c:
        parser.add_argument('--c', type=float, help='Speed of light c')
    parser.add_argument('--q', type=float, help='Lebesgue index q > N')
    parser.add_argument('--delta', type=float, help='Ball radius (default min(0.5, |u_inf|_H1 / 2))')
    parser.add_argument('--tol', type=float, help='Fixed-point step tolerance')
    parser.add_argument('--auto-c0', action='store_true', default=None, help='Walk c upward on NoContraction')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='Radial spectral solver for pseudorelativistic Schrodinger equations')
    parser.add_argument('--version', action='version', version=__version__)
    parser.add_argument('--base-config', default='config.yaml', help='Defaults file (default: config.yaml)')
    sub = parser.add_subparsers(dest='command', required=True)

    symbols = sub.add_parser('symbols', help='Symbol bound sweeps')
    symbols.add_argument('action', choices=['check'])
    symbols.add_argument('--s', '--s-list', dest='s_list', help='Comma-separated s values')
    symbols.add_argument('--c', '--c-list', dest='c_list', help='Comma-separated c values')
    symbols.add_argument('--xi-min', type=float, help='Smallest xi sample')
    symbols.add_argument('--xi-max', type=float, help='Largest xi sample')
    symbols.add_argument('--samples', type=int, help='Log-spaced xi samples per (s, c)')
    symbols.add_argument('--out', help='CSV path for the sweep table')

    groundstate = sub.add_parser('groundstate', help='Ground state of the limit equation')
    _grid_flags(groundstate)
    groundstate.add_argument('--p', type=float, help='Nonlinearity exponent')
    groundstate.add_argument('--tol', type=float, help='Petviashvili tolerance')
    groundstate.add_argument('--out', help='Field JSON path')

    solve_parser = sub.add_parser('solve', help='Construct u_c = u_inf + w at one c')
    _solve_flags(solve_parser)
    solve_parser.add_argument('--out', help='Report JSON path')

    rates = sub.add_parser('rates', help='Convergence-rate study over a c ladder')
    _solve_flags(rates, with_c=False)
    rates.add_argument('--c-list', help='Comma-separated ascending c values')
    rates.add_argument('--workers', type=int, help='Concurrent solves')
    rates.add_argument('--out', help='Output prefix')

    poh = sub.add_parser('pohozaev', help='Pohozaev functional of a solve report')
    poh.add_argument('--input', help='Report JSON from solve')

    classify = sub.add_parser('classify', help='Existence regime of a parameter set')
    _solve_flags(classify)
    classify.add_argument('--m', type=float, help='Mass (general parameters)')
    classify.add_argument('--mu', type=float, help='Shift (general parameters)')

    replay = sub.add_parser('replay', help='Re-run a rate study from its manifest')
    replay.add_argument('--manifest', help='Manifest JSON path')

    for subparser in sub.choices.values():
        subparser.add_argument('--config', help='JSON/YAML file of flag values')

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        config = load_config(args.base_config)
    except (OSError, ValueError) as e:
        print(f"Error: cannot read {args.base_config}: {e}", file=sys.stderr)
        return EXIT_USAGE
    if not validate_config(config):
        print(f"Error: invalid configuration in {args.base_config}", file=sys.stderr)
        return EXIT_USAGE

    configure_logging(args.command, config)

    cli_options = {k: v for k, v in vars(args).items() if k not in ('command', 'config', 'base_config', 'action')}
    try:
        file_options = load_config(args.config) if args.config else None
        options = resolve_options(config, args.command, file_options, cli_options)
    except (OSError, ValueError) as e:
        logger.error(f"Invalid options: {e}")
        return EXIT_USAGE

    logger.info(f"Running {args.command} with {format_result(options, limit=2000)}")
    try:
        return COMMANDS[args.command](options, config)
    except DOMAIN_ERRORS as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"{type(e).__name__}: {e}")
        return EXIT_FAILED
    except INPUT_ERRORS as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_USAGE
