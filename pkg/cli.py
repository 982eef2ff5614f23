#!/usr/bin/env python3
"""
Command-line front end: mỗi subcommand chạy một phép tính, ghi report
JSON (luôn có) và CSV (kết quả dạng bảng) vào thư mục output.

Exit code: 0 thành công, 2 khi một invariant / ceiling bị bác bỏ, 1 khi lỗi.
"""

import argparse
import sys
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from config.settings import (
    APP_NAME, APP_VERSION, CACHE_DIR, DEFAULT_SEED, HAAGERUP_ITERS, HAAGERUP_STARTS,
    HAAGERUP_TRIALS, METRIC_STARTS, METRIC_TOL, OP_NORM_TOL, REPORT_DIR, SPHERE_CACHE_ENABLED,
    WRITE_PARQUET,
)
from database.report_store import ReportStore, build_report
from database.sphere_store import SphereStore
from freeprod.blocks import bound_frame, cross_validate_group, free_product_bound_scan
from freeprod.cells import verify_partition
from freeprod.components import calibrated, component_from_cyclic
from freeprod.words import get_free_product
from groups.geometry import four_point_delta, growth_exponent
from groups.models import make_model
from groups.spheres import ball_sizes, sphere
from processors.filtration import (
    FilteredVector, check_growth_inequalities, dirac_bands, smoothing, truncation_budget,
)
from processors.haagerup import (
    growth_obstruction, known_ceiling, reports_frame, scan, z2_bound_sequence, z2_witness,
)
from processors.qmetric import metric_table, parse_state
from utils.errors import InvalidParameterError, InvariantViolation, QMetricError
from utils.logger import get_logger, log_banner

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FALSIFIED = 2

Result = Tuple[Optional[List[Dict]], Optional[Dict], bool]


@dataclass
class RunConfig:
    """Mọi tham số thực sự được dùng; được ghi nguyên vào report"""
    command: str
    model: Optional[str] = None
    k: Optional[int] = None
    m: Optional[int] = None
    n: Optional[int] = None
    radius: Optional[int] = None
    p_max: Optional[int] = None
    max_degree: Optional[int] = None
    degree: Optional[int] = None
    K: Optional[int] = None
    R: Optional[int] = None
    N: List[int] = field(default_factory=list)
    C: Optional[float] = None
    eps: Optional[float] = None
    tol: Optional[float] = None
    trials: Optional[int] = None
    starts: Optional[int] = None
    iters: Optional[int] = None
    seed: int = DEFAULT_SEED
    mode: Optional[str] = None
    strategy: Optional[str] = None
    states: List[str] = field(default_factory=list)
    components: List[int] = field(default_factory=list)
    numeric: bool = False
    sequence: Optional[int] = None
    output_dir: str = REPORT_DIR
    cache_dir: Optional[str] = CACHE_DIR
    parquet: bool = WRITE_PARQUET

    def to_dict(self) -> Dict:
        return asdict(self)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InvalidParameterError(message)


def _int_list(text: str) -> List[int]:
    try:
        return [int(x) for x in text.split(',') if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog=APP_NAME, description='Quantum metrics on filtered group and free-product algebras')
    parser.add_argument('--version', action='version', version=f"{APP_NAME} {APP_VERSION}")
    parser.add_argument('--output-dir', default=REPORT_DIR, help='Report directory')
    parser.add_argument('--no-cache', action='store_true', help='Do not read or write the sphere cache')
    parser.add_argument('--parquet', action='store_true', default=WRITE_PARQUET,
                        help='Also write tabular results as parquet')
    parser.add_argument('--seed', type=int, default=DEFAULT_SEED)
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('spheres', help='Sphere and ball sizes')
    p.add_argument('--model', required=True)
    p.add_argument('--radius', type=int, required=True)

    p = sub.add_parser('growth', help='Growth exponent and polynomial-growth obstruction')
    p.add_argument('--model', required=True)
    p.add_argument('--p-max', type=int, required=True)

    p = sub.add_parser('delta', help='Four-point hyperbolicity constant on a ball')
    p.add_argument('--model', required=True)
    p.add_argument('--radius', type=int, required=True)
    p.add_argument('--mode', choices=['exhaustive', 'sampled'], default='exhaustive')
    p.add_argument('--trials', type=int, default=100000)

    p = sub.add_parser('haagerup-scan', help='Best block ratios over all admissible triples')
    p.add_argument('--model', required=True)
    p.add_argument('--max', dest='max_degree', type=int, required=True)
    p.add_argument('--strategy', choices=['random', 'alternating', 'combined'], default='combined')
    p.add_argument('--starts', type=int, default=HAAGERUP_STARTS)
    p.add_argument('--iters', type=int, default=HAAGERUP_ITERS)
    p.add_argument('--trials', type=int, default=HAAGERUP_TRIALS)
    p.add_argument('--tol', type=float, default=OP_NORM_TOL)

    p = sub.add_parser('z2-witness', help='Exact Z^2 counterexample to a uniform constant')
    p.add_argument('--k', type=int, required=True)
    p.add_argument('--n', type=int, required=True)
    p.add_argument('--numeric', action='store_true', help='Cross-check against the float block')
    p.add_argument('--sequence', type=int, default=None,
                   help='Also tabulate the (k, k^2) bounds for k = 2..SEQUENCE')

    p = sub.add_parser('inequalities', help='Growth inequalities for random elements')
    p.add_argument('--model', required=True)
    p.add_argument('--degree', type=int, default=3, help='Support radius of the random elements')
    p.add_argument('--R', type=int, default=6, help='Truncation radius')
    p.add_argument('--c', dest='C', type=float, default=None, help='Haagerup constant (default: known ceiling)')
    p.add_argument('--trials', type=int, default=10)
    p.add_argument('--tol', type=float, default=OP_NORM_TOL)

    p = sub.add_parser('smoothing', help='Band identity and smoothing bound for random elements')
    p.add_argument('--model', required=True)
    p.add_argument('--degree', type=int, default=3)
    p.add_argument('--R', type=int, default=8)
    p.add_argument('--N', type=_int_list, default=[0, 1, 2])
    p.add_argument('--c', dest='C', type=float, default=None)
    p.add_argument('--trials', type=int, default=5)
    p.add_argument('--tol', type=float, default=OP_NORM_TOL)

    p = sub.add_parser('budget', help='Truncation budget (N, K) for a target epsilon')
    p.add_argument('--eps', type=float, required=True)
    p.add_argument('--c', dest='C', type=float, required=True)

    p = sub.add_parser('freeprod-check', help='Free product cells and the sqrt(5)*C bound')
    p.add_argument('--components', type=_int_list, default=[2, 2],
                   help='Orders of the two cyclic components, e.g. 3,2')
    p.add_argument('--max', dest='max_degree', type=int, default=3)
    p.add_argument('--trials', type=int, default=20)
    p.add_argument('--starts', type=int, default=3)
    p.add_argument('--iters', type=int, default=HAAGERUP_ITERS)

    p = sub.add_parser('cross-validate', help='Free product Z/2 * Z/2 against dihedral-infinity')
    p.add_argument('--max', dest='max_degree', type=int, default=4)

    p = sub.add_parser('metric', help='Metric table between states')
    p.add_argument('--model', required=True)
    p.add_argument('--state', dest='states', action='append', required=True,
                   help="'trace', 'vector:<form>|<form>' or 'character:<angle>,...' (repeatable)")
    p.add_argument('--K', type=int, required=True)
    p.add_argument('--R', type=int, required=True)
    p.add_argument('--c', dest='C', type=float, default=None)
    p.add_argument('--starts', type=int, default=METRIC_STARTS)
    p.add_argument('--tol', type=float, default=METRIC_TOL)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    values = {name: getattr(args, name) for name in RunConfig.__dataclass_fields__ if hasattr(args, name)}
    values['output_dir'] = args.output_dir
    values['cache_dir'] = None if args.no_cache or not SPHERE_CACHE_ENABLED else CACHE_DIR
    for name in ('N', 'states', 'components'):
        if values.get(name) is None:
            values[name] = []
    return RunConfig(**values)


# ----------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------
def _store(config: RunConfig) -> Optional[SphereStore]:
    return SphereStore(config.cache_dir) if config.cache_dir else None


def _ceiling(config: RunConfig, model) -> float:
    if config.C is not None:
        return config.C
    ceiling = known_ceiling(model)
    if ceiling is None:
        raise InvalidParameterError(f"{model.name} has no known constant; pass --c")
    config.C = ceiling
    return ceiling


def run_spheres(config: RunConfig) -> Result:
    model = make_model(config.model)
    store = _store(config)
    sizes = ball_sizes(model, config.radius, store=store)
    rows = [
        {'k': k, 'sphere_size': len(sphere(model, k, store=store)), 'ball_size': sizes[k]}
        for k in range(config.radius + 1)
    ]
    return rows, {'model': model.name, 'fingerprint': model.fingerprint}, False


def run_growth(config: RunConfig) -> Result:
    model = make_model(config.model)
    store = _store(config)
    report = growth_exponent(model, config.p_max, store=store)
    summary = {
        'model': model.name,
        'fit_range': list(report.fit_range),
        'loglog_slope': report.loglog_slope,
        'loglog_residual': report.loglog_residual,
        'semilog_slope': report.semilog_slope,
        'semilog_residual': report.semilog_residual,
        'classification': report.classification,
    }
    rows = [{'p': p, 'ball_size': s} for p, s in enumerate(report.sizes)]
    if model.amenable:
        obstruction = growth_obstruction(model, config.p_max, store=store)
        summary.update({'obstruction': obstruction.verdict, 'obstruction_factor': obstruction.factor})
        for row, ratio in zip(rows, obstruction.ratios):
            row['ratio'] = ratio
    return rows, summary, False


def run_delta(config: RunConfig) -> Result:
    model = make_model(config.model)
    estimate = four_point_delta(model, config.radius, mode=config.mode,
                                trials=config.trials, seed=config.seed)
    summary = estimate.to_record(model)
    summary['model'] = model.name
    return None, summary, False


def run_haagerup_scan(config: RunConfig) -> Result:
    model = make_model(config.model)
    reports = scan(model, config.max_degree, strategy=config.strategy, starts=config.starts,
                   iters=config.iters, trials=config.trials, seed=config.seed, tol=config.tol)
    rows = reports_frame(reports).to_dict(orient='records')
    worst = max(reports, key=lambda r: r.ratio)
    exceeded = [r.triple for r in reports if r.exceeds_ceiling()]
    summary = {
        'model': model.name,
        'max_ratio': worst.ratio,
        'argmax': list(worst.triple),
        'ceiling': known_ceiling(model),
        'exceeded': [list(t) for t in exceeded],
    }
    return rows, summary, bool(exceeded)


def run_z2_witness(config: RunConfig) -> Result:
    witness = z2_witness(config.k, config.n, numeric_check=config.numeric)
    summary = {
        'k': witness.k,
        'n': witness.n,
        'm': witness.m,
        'ratio_bound': witness.ratio_bound,
        'ratio_bound_squared': str(witness.bound_squared),
        'verified': witness.verified,
        'verification': witness.verification,
    }
    rows = None
    if config.sequence:
        sequence = z2_bound_sequence(range(2, config.sequence + 1))
        rows = [
            {'k': w.k, 'n': w.n, 'ratio_bound': w.ratio_bound, 'verified': w.verified}
            for w in sequence
        ]
    return rows, summary, not witness.verified


def _random_elements(model, degree: int, count: int, seed: int) -> List[FilteredVector]:
    rng = np.random.default_rng(seed)
    return [FilteredVector.random(model, degree, rng) for _ in range(count)]


def run_inequalities(config: RunConfig) -> Result:
    model = make_model(config.model)
    C = _ceiling(config, model)
    rows, falsified = [], False
    for sample, f in enumerate(_random_elements(model, config.degree, config.trials, config.seed)):
        report = check_growth_inequalities(model, f, C, config.R, tol=config.tol, seed=config.seed)
        falsified |= not report.all_hold
        for record in report.to_frame().to_dict(orient='records'):
            record['sample'] = sample
            rows.append(record)
    summary = {
        'model': model.name,
        'C': C,
        'violations': sum(1 for r in rows if not r['holds']),
        'min_margin': min(r['margin'] for r in rows) if rows else None,
    }
    return rows, summary, falsified


def run_smoothing(config: RunConfig) -> Result:
    model = make_model(config.model)
    rows, falsified = [], False
    for sample, f in enumerate(_random_elements(model, config.degree, config.trials, config.seed)):
        bands = dirac_bands(model, f, config.R, block_norms=False, tol=config.tol, seed=config.seed)
        falsified |= not bands.identity_holds
        for N in config.N:
            report = smoothing(model, f, N, config.R, C=config.C, tol=config.tol, seed=config.seed)
            falsified |= not report.holds or report.identity_deviation != 0.0
            rows.append({
                'sample': sample,
                'N': N,
                'norm': report.norm,
                'bound': report.bound,
                'phi_norm': report.phi_norm,
                'commutator_upper': report.commutator_upper,
                'identity_deviation': report.identity_deviation,
                'band_identity_deviation': bands.identity_deviation,
                'holds': report.holds,
            })
    return rows, {'model': model.name, 'radius': config.R}, falsified


def run_budget(config: RunConfig) -> Result:
    budget = truncation_budget(config.eps, config.C)
    return None, {'eps': budget.eps, 'C': budget.C, 'N': budget.N, 'K': budget.K}, False


def run_freeprod_check(config: RunConfig) -> Result:
    if len(config.components) != 2:
        raise InvalidParameterError(f"--components needs two cyclic orders, got {config.components}")
    A1 = calibrated(component_from_cyclic(config.components[0]), seed=config.seed)
    A2 = A1 if config.components[1] == config.components[0] else \
        calibrated(component_from_cyclic(config.components[1]), seed=config.seed)
    reports = free_product_bound_scan(A1, A2, config.max_degree, trials=config.trials, seed=config.seed,
                                      starts=config.starts, iters=config.iters)
    fp = get_free_product(A1, A2)

    partition_failures = []
    checked = 0
    top = config.max_degree
    for m in range(1, top + 1):
        for k in range(top + 1):
            for n in range(top + 1):
                if abs(m - n) > k or abs(n - k) > m:
                    continue
                checked += 1
                result = verify_partition(fp, m, k, n)
                if not result.ok:
                    partition_failures.append({'m': m, 'k': k, 'n': n, 'failures': result.failures[:5]})

    failed = [r for r in reports if not r.holds]
    summary = {
        'algebra': fp.name,
        'component_constants': [A1.constant, A2.constant],
        'ceiling': reports[0].ceiling if reports else None,
        'max_ratio': max((r.ratio for r in reports), default=0.0),
        'min_margin': min((r.margin for r in reports), default=None),
        'partitions_checked': checked,
        'partition_failures': partition_failures,
    }
    rows = bound_frame(reports).to_dict(orient='records')
    return rows, summary, bool(failed or partition_failures)


def run_cross_validate(config: RunConfig) -> Result:
    top = config.max_degree
    reports = [
        cross_validate_group(m, k, n, seed=config.seed)
        for k in range(top + 1) for m in range(top + 1) for n in range(top + 1)
    ]
    rows = [r.to_record() for r in reports]
    mismatches = [r for r in reports if not r.equal]
    summary = {'triples': len(reports), 'mismatches': len(mismatches)}
    return rows, summary, bool(mismatches)


def run_metric(config: RunConfig) -> Result:
    model = make_model(config.model)
    states = [parse_state(model, text) for text in config.states]
    table = metric_table(model, states, config.K, config.R, tol=config.tol, seed=config.seed,
                         C=config.C, starts=config.starts)
    rows = table.to_frame().to_dict(orient='records')
    summary = {
        'model': model.name,
        'labels': table.labels,
        'values': table.values,
        'zero_diagonal': table.zero_diagonal,
        'symmetry_defect': table.symmetry_defect,
        'triangle_violations': [list(v) for v in table.triangle_violations],
    }
    return rows, summary, not table.consistent


COMMANDS = {
    'spheres': run_spheres,
    'growth': run_growth,
    'delta': run_delta,
    'haagerup-scan': run_haagerup_scan,
    'z2-witness': run_z2_witness,
    'inequalities': run_inequalities,
    'smoothing': run_smoothing,
    'budget': run_budget,
    'freeprod-check': run_freeprod_check,
    'cross-validate': run_cross_validate,
    'metric': run_metric,
}


def run(argv: Optional[List[str]] = None) -> int:
    """
    Parse argv, chạy command và ghi report

    Args:
        argv: Danh sách argument (mặc định sys.argv[1:])

    Returns:
        Exit code
    """
    try:
        args = build_parser().parse_args(argv)
        config = config_from_args(args)
    except InvalidParameterError as e:
        logger.error(f"Usage error: {e}")
        return EXIT_ERROR

    log_banner(logger, f"{APP_NAME} {APP_VERSION}: {config.command}")

    try:
        rows, summary, falsified = COMMANDS[config.command](config)
    except InvariantViolation as e:
        logger.error(f"Invariant falsified: {e}")
        return EXIT_FALSIFIED
    except QMetricError as e:
        logger.error(f"{config.command} failed: {e}")
        return EXIT_ERROR
    except Exception as e:
        logger.error(f"Unexpected error in {config.command}: {e}", exc_info=True)
        return EXIT_ERROR

    report = build_report(config.command, config.to_dict(), rows=rows, summary=summary, falsified=falsified)
    try:
        ReportStore(config.output_dir, write_parquet=config.parquet).save(report)
    except (QMetricError, OSError) as e:
        logger.error(f"Could not save report: {e}")
        return EXIT_ERROR

    if falsified:
        logger.warning(f"{config.command}: a checked invariant was falsified")
        return EXIT_FALSIFIED
    logger.info(f"{config.command}: done")
    return EXIT_OK


def main() -> int:
    return run(sys.argv[1:])


if __name__ == "__main__":
    exit_code = main()
    sys.exit(exit_code)
