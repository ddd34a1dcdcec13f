"""Command-line driver: ``lipreg <subcommand> [options]``.

Usage errors exit with status 2, solver failures with status 1 and a JSON
diagnostic on stderr. ``experiment`` exits 3 when its loss-gap check fails.
Every run writes a manifest of its resolved parameters and timings.
"""

import argparse
import csv
import io
import json
import logging
import platform
import sys
import time
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .baseline import NwModel, nw_tune_bandwidth
from .core import (DatasetError, LabeledDataset, dataset_to_dict, load_dataset, save_dataset,
                   squared_loss)
from .extension import ExtensionError, extend_one_point
from .graphs import GraphError, build_graph
from .laplace import LaplaceError
from .pipeline import PipelineConfig, config_dict, evaluate, run_experiment
from .robokin import KinematicsError, generate_dataset
from .selection import cross_validate, default_candidates, srm_select
from .smoothing import SmoothingInfeasibleError, smooth, smooth_auto

logger = logging.getLogger(__name__)

EXIT_SOLVER = 1
EXIT_USAGE = 2
EXIT_CHECK = 3


class UsageError(Exception):
    pass


class Run:
    """Collects the manifest of one invocation."""

    def __init__(self, args):
        self.args = args
        self.manifest = {
            'subcommand': args.command,
            'version': __version__,
            'python': platform.python_version(),
            'numpy': np.__version__,
            'parameters': {k: v for k, v in sorted(vars(args).items())
                           if k not in ('func',)},
            'inputs': {},
            'outputs': {},
            'timings': {},
            'status': 'ok',
        }
        self._t0 = time.perf_counter()

    def input(self, name, path):
        self.manifest['inputs'][name] = str(path)

    def output(self, name, path):
        self.manifest['outputs'][name] = str(path)

    def time(self, name, seconds):
        self.manifest['timings'][name] = seconds

    def emit(self, payload, path=None):
        """Write ``payload`` as JSON to ``path``, or to stdout with ``--stdout``."""
        text = json.dumps(payload, indent=2, sort_keys=True) + '\n'
        if self.args.stdout or path is None:
            sys.stdout.write(text)
        if path is not None and not self.args.stdout:
            Path(path).write_text(text)
            self.output('result', path)

    def finish(self, default_path=None):
        self.manifest['timings']['total'] = time.perf_counter() - self._t0
        path = self.args.manifest or default_path
        text = json.dumps(self.manifest, indent=2, sort_keys=True, default=_jsonable) + '\n'
        if path is None:
            sys.stderr.write(text)
        else:
            Path(path).write_text(text)


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return str(obj)


def _load(path, what):
    if path is None:
        raise UsageError(f'--{what} is required')
    if not Path(path).exists():
        raise UsageError(f'{what} file not found: {path}')
    try:
        return load_dataset(path)
    except (DatasetError, ValueError) as exc:
        raise UsageError(f'cannot read {what} {path}: {exc}') from None


def _parse_queries(spec, a):
    """Queries from a dataset file, a JSON array file, or inline ``1,2;3,4``."""
    if spec is None:
        raise UsageError('--query is required')
    p = Path(spec)
    if p.exists():
        if p.suffix.lower() == '.json':
            obj = json.loads(p.read_text())
            Q = np.asarray(obj['X'] if isinstance(obj, dict) else obj, dtype=np.float64)
        else:
            Q = load_dataset(p).X
    else:
        try:
            Q = np.array([[float(v) for v in row.split(',')] for row in spec.split(';')])
        except ValueError:
            raise UsageError(f'cannot parse --query {spec!r}') from None
    Q = np.atleast_2d(Q)
    if Q.shape[1] != a:
        raise UsageError(f'queries have dimension {Q.shape[1]}, model expects {a}')
    return Q


def _positive(name, value):
    if value is not None and not value > 0:
        raise UsageError(f'--{name} must be positive')


def _check_eps(eps):
    if not 0 < eps < 0.5:
        raise UsageError(f'--epsilon must lie in (0, 1/2), got {eps}')


def _graph(data, policy, run, dump=None):
    try:
        graph = build_graph(data, 1.0, policy)
    except (GraphError, ValueError) as exc:
        raise UsageError(f'bad --graph {policy!r}: {exc}') from None
    if dump:
        Path(dump).write_text(graph.to_json())
        run.output('graph', dump)
    return graph


def cmd_generate(args, run):
    if args.n < 1 or args.test_n < 0:
        raise UsageError('--n must be >= 1 and --test-n >= 0')
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    train, meta = generate_dataset(args.n, args.seed, half_range=args.half_range)
    save_dataset(train, out / 'train.json')
    run.output('train', out / 'train.json')
    metadata = {'train': meta}
    if args.test_n:
        test, tmeta = generate_dataset(args.test_n, args.seed + 1_000_003,
                                       half_range=args.half_range)
        save_dataset(test, out / 'test.json')
        run.output('test', out / 'test.json')
        metadata['test'] = tmeta
    (out / 'metadata.json').write_text(json.dumps(metadata, indent=2, sort_keys=True) + '\n')
    run.output('metadata', out / 'metadata.json')
    run.time('generate', time.perf_counter() - t0)
    if args.stdout:
        run.emit(metadata)
    return 0, out / 'manifest.json'


def cmd_smooth(args, run):
    _check_eps(args.epsilon)
    _positive('lipschitz', args.lipschitz)
    _positive('phi0', args.phi0)
    if args.output is None and not args.stdout:
        raise UsageError('give --output or --stdout')
    data = _load(args.input, 'input')
    run.input('input', args.input)
    graph = _graph(data, args.graph, run, args.dump_graph)
    kw = dict(c1=args.c1, c2=args.c2, max_iterations=args.max_iterations)
    t0 = time.perf_counter()
    if args.phi0 is not None:
        res = smooth(data, graph, args.epsilon, args.phi0, L=args.lipschitz,
                     early_stop=args.early_stop, **kw)
    else:
        res = smooth_auto(data, graph, args.epsilon, L=args.lipschitz, **kw)
    run.time('smooth', time.perf_counter() - t0)
    smoothed = data.with_labels(res.smoothed_labels)
    report = dict(res.report(), lipschitz=args.lipschitz, graph=args.graph, edges=graph.m)
    run.manifest['report'] = report
    if args.stdout:
        run.emit({'dataset': dataset_to_dict(smoothed), 'report': report})
    else:
        save_dataset(smoothed, args.output)
        run.output('smoothed', args.output)
    if args.report:
        Path(args.report).write_text(json.dumps(report, indent=2, sort_keys=True) + '\n')
        run.output('report', args.report)
    return 0, None if args.output is None else f'{args.output}.manifest.json'


def cmd_predict(args, run):
    _check_eps(args.epsilon)
    _positive('lipschitz', args.lipschitz)
    model = _load(args.model, 'model')
    run.input('model', args.model)
    Q = _parse_queries(args.query, model.a)
    t0 = time.perf_counter()
    results = [extend_one_point(model, args.lipschitz, q, args.epsilon, check=not args.no_check)
               for q in Q]
    run.time('predict', time.perf_counter() - t0)
    payload = {
        'predictions': [{'x': q.tolist(), 'y_star': r.y_star.tolist(),
                         'max_slack': r.max_slack, 'iterations': r.iterations}
                        for q, r in zip(Q, results)],
        'lipschitz': args.lipschitz,
        'epsilon': args.epsilon,
    }
    run.emit(payload, args.output)
    return 0, None if args.output is None else f'{args.output}.manifest.json'


def _candidates(args, data):
    if args.candidates:
        try:
            Ls = [float(v) for v in args.candidates.split(',')]
        except ValueError:
            raise UsageError(f'cannot parse --candidates {args.candidates!r}') from None
        if not Ls or min(Ls) <= 0:
            raise UsageError('--candidates must be positive')
        return np.array(Ls)
    return default_candidates(data, args.graph)


def cmd_tune(args, run):
    _check_eps(args.epsilon)
    _positive('C', args.C)
    data = _load(args.input, 'input')
    run.input('input', args.input)
    _graph(data, args.graph, run, args.dump_graph)
    Ls = _candidates(args, data)
    kw = dict(c1=args.c1, c2=args.c2, max_iterations=args.max_iterations)
    t0 = time.perf_counter()
    if args.method == 'srm':
        prof = srm_select(data, Ls, args.epsilon, args.C, args.graph, **kw)
        payload = {'method': 'srm', 'C': args.C, 'candidate_Ls': prof.candidate_Ls.tolist(),
                   'risks': prof.risks.tolist(), 'squared_risks': prof.squared_risks.tolist(),
                   'bounds': prof.bounds.tolist(), 'objective': prof.objective.tolist(),
                   'chosen_L': prof.chosen_L, 'failed': prof.failed}
        rows = zip(prof.candidate_Ls, prof.risks, prof.bounds, prof.objective)
        header = ['L', 'risk', 'bound', 'objective']
    else:
        if not 2 <= args.folds <= data.n:
            raise UsageError(f'--folds must lie in [2, {data.n}]')
        cv = cross_validate(data, Ls, args.folds, args.epsilon, args.graph, args.seed, **kw)
        payload = {'method': 'cv', 'folds': args.folds, 'candidate_Ls': cv.candidate_Ls.tolist(),
                   'fold_losses': cv.fold_losses.tolist(), 'mean_losses': cv.mean_losses.tolist(),
                   'chosen_L': cv.chosen_L}
        rows = zip(cv.candidate_Ls, cv.mean_losses)
        header = ['L', 'mean_validation_loss']
    run.time('tune', time.perf_counter() - t0)
    if args.csv:
        with open(args.csv, 'w', newline='') as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows([repr(float(v)) for v in row] for row in rows)
        run.output('csv', args.csv)
    run.emit(payload, args.output)
    return 0, None if args.output is None else f'{args.output}.manifest.json'


def cmd_baseline(args, run):
    train = _load(args.train, 'train')
    run.input('train', args.train)
    _positive('bandwidth', args.bandwidth)
    if (args.test is None) == (args.query is None):
        raise UsageError('give exactly one of --test and --query')
    test = _load(args.test, 'test') if args.test else None
    Q = test.X if test is not None else _parse_queries(args.query, train.a)
    t0 = time.perf_counter()
    if args.bandwidth is not None:
        h = args.bandwidth
    else:
        if not 2 <= args.folds <= train.n:
            raise UsageError(f'--folds must lie in [2, {train.n}]')
        h, _ = nw_tune_bandwidth(train, args.folds, seed=args.seed)
    pred = NwModel(train, h).predict(Q)
    run.time('baseline', time.perf_counter() - t0)
    payload = {'bandwidth': h, 'predictions': pred.tolist()}
    if test is not None:
        run.input('test', args.test)
        payload['squared_loss'] = squared_loss(pred, test.Y).empirical_risk
    run.emit(payload, args.output)
    return 0, None if args.output is None else f'{args.output}.manifest.json'


def _pipeline_config(args):
    return PipelineConfig(epsilon=args.epsilon, graph_policy=args.graph, L=args.lipschitz,
                          cv_folds=args.folds, max_iterations=args.max_iterations,
                          predict_epsilon=args.predict_epsilon, seed=args.seed,
                          c1=args.c1, c2=args.c2)


def cmd_evaluate(args, run):
    _check_eps(args.epsilon)
    _check_eps(args.predict_epsilon)
    _positive('lipschitz', args.lipschitz)
    train, test = _load(args.train, 'train'), _load(args.test, 'test')
    if train.a != test.a or train.b != test.b:
        raise UsageError('train and test dimensions differ')
    run.input('train', args.train)
    run.input('test', args.test)
    cfg = _pipeline_config(args)
    run.manifest['config'] = config_dict(cfg)
    ev = evaluate(train, test, cfg)
    for k, v in ev.timings.items():
        run.time(k, v)
    payload = {'mwu_loss': ev.mwu_loss, 'nw_loss': ev.nw_loss, 'L': ev.L,
               'bandwidth': ev.bandwidth, 'smoothing': ev.smoothing,
               'mwu_predictions': ev.mwu_predictions.tolist(),
               'nw_predictions': ev.nw_predictions.tolist()}
    run.emit(payload, args.output)
    return 0, None if args.output is None else f'{args.output}.manifest.json'


TABLE_COLUMNS = ['n_train', 'n_test', 'mwu_loss', 'nw_loss', 'ratio', 'L', 'bandwidth',
                 'distortion', 'smoothing_iterations', 'generation_failures',
                 'reference_mwu', 'reference_nw']


def _table_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator='\n')
    w.writerow(TABLE_COLUMNS)
    for r in rows:
        w.writerow(['' if r[c] is None else repr(r[c]) for c in TABLE_COLUMNS])
    return buf.getvalue()


def cmd_experiment(args, run):
    _check_eps(args.epsilon)
    _check_eps(args.predict_epsilon)
    try:
        sizes = [int(s) for s in args.sizes.split(',')]
    except ValueError:
        raise UsageError(f'cannot parse --sizes {args.sizes!r}') from None
    if min(sizes) < 2 or args.test_n < 1:
        raise UsageError('training sizes must be >= 2 and --test-n >= 1')
    cfg = _pipeline_config(args)
    run.manifest['config'] = config_dict(cfg)
    res = run_experiment(sizes, args.test_n, cfg, half_range=args.half_range,
                         gap_size=args.gap_size, gap_ratio=args.gap_ratio)
    for n, t in res.timings.items():
        run.time(f'n={n}', t)
    payload = {'rows': res.rows, 'gap_ok': res.gap_ok, 'monotone_ok': res.monotone_ok,
               'gap_size': args.gap_size, 'gap_ratio': args.gap_ratio}
    out = None
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / 'results.csv').write_text(_table_csv(res.rows))
        run.output('table_csv', out / 'results.csv')
        run.emit(payload, out / 'results.json')
    else:
        run.emit(payload)
    run.manifest['gap_ok'] = res.gap_ok
    run.manifest['monotone_ok'] = res.monotone_ok
    return (0 if res.passed else EXIT_CHECK), None if out is None else out / 'manifest.json'


def _global_flags(p, suppress):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument('--epsilon', type=float, default=d(0.1), help='precision in (0, 1/2)')
    p.add_argument('--seed', type=int, default=d(0))
    p.add_argument('--threads', type=int, default=d(1), help='BLAS thread limit')
    p.add_argument('--stdout', action='store_true', default=d(False),
                   help='write the JSON result to stdout instead of files')
    p.add_argument('--manifest', default=d(None), help='where to write the run manifest')
    p.add_argument('-v', '--verbose', action='count', default=d(0))


def _solver_flags(p):
    p.add_argument('--graph', default='knn:16', help='complete | knn:K | spanner:EPS')
    p.add_argument('--c1', type=float, default=8.0, help='iteration-count constant')
    p.add_argument('--c2', type=float, default=1.0 / 8.0, help='step-size constant')
    p.add_argument('--max-iterations', type=int, default=None)


def build_parser():
    parser = argparse.ArgumentParser(prog='lipreg', description=__doc__.splitlines()[0])
    _global_flags(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('generate-data', parents=[common], help='robot-arm transfer data')
    p.add_argument('--n', type=int, required=True)
    p.add_argument('--test-n', type=int, default=100)
    p.add_argument('--out', required=True)
    p.add_argument('--half-range', type=float, default=np.pi,
                   help='expert angles are uniform on (-H, H]')
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser('smooth', parents=[common], help='make labels L-Lipschitz')
    p.add_argument('--input', required=True)
    p.add_argument('--lipschitz', type=float, required=True)
    p.add_argument('--output')
    p.add_argument('--report')
    p.add_argument('--phi0', type=float, help='fixed distortion budget (default: search)')
    p.add_argument('--early-stop', action='store_true')
    p.add_argument('--dump-graph')
    _solver_flags(p)
    p.set_defaults(func=cmd_smooth)

    p = sub.add_parser('predict', parents=[common], help='extend a smoothed labelling')
    p.add_argument('--model', required=True)
    p.add_argument('--lipschitz', type=float, required=True)
    p.add_argument('--query', required=True, help='file or inline "1,2;3,4"')
    p.add_argument('--output')
    p.add_argument('--no-check', action='store_true', help='skip the slack check')
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser('tune', parents=[common], help='choose L')
    p.add_argument('--input', required=True)
    p.add_argument('--method', choices=('srm', 'cv'), default='cv')
    p.add_argument('--candidates', help='comma-separated L values')
    p.add_argument('--folds', type=int, default=5)
    p.add_argument('--C', type=float, default=1.0, help='bound constant for srm')
    p.add_argument('--output')
    p.add_argument('--csv')
    p.add_argument('--dump-graph')
    _solver_flags(p)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser('baseline-nw', parents=[common], help='Nadaraya-Watson baseline')
    p.add_argument('--train', required=True)
    p.add_argument('--test')
    p.add_argument('--query')
    p.add_argument('--bandwidth', type=float)
    p.add_argument('--folds', type=int, default=5)
    p.add_argument('--output')
    p.set_defaults(func=cmd_baseline)

    for name, func, help_ in (('evaluate', cmd_evaluate, 'score both learners on a test set'),
                              ('experiment', cmd_experiment, 'loss versus training size')):
        p = sub.add_parser(name, parents=[common], help=help_)
        if name == 'evaluate':
            p.add_argument('--train', required=True)
            p.add_argument('--test', required=True)
            p.add_argument('--output')
        else:
            p.add_argument('--sizes', default='100,1000,10000')
            p.add_argument('--test-n', type=int, default=100)
            p.add_argument('--out')
            p.add_argument('--half-range', type=float, default=np.pi)
            p.add_argument('--gap-size', type=int, default=1000)
            p.add_argument('--gap-ratio', type=float, default=0.2)
        p.add_argument('--lipschitz', type=float, help='fixed L (default: cross-validate)')
        p.add_argument('--folds', type=int, default=5)
        p.add_argument('--predict-epsilon', type=float, default=0.1)
        _solver_flags(p)
        p.set_defaults(func=func, max_iterations=400)
    return parser


SOLVER_ERRORS = (SmoothingInfeasibleError, ExtensionError, LaplaceError, KinematicsError,
                 RuntimeError, np.linalg.LinAlgError)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format='%(levelname)s %(name)s: %(message)s')
    if args.threads < 1:
        parser.error('--threads must be at least 1')
    run = Run(args)
    default_manifest = None
    try:
        with threadpool_limits(limits=args.threads):
            code, default_manifest = args.func(args, run)
    except (UsageError, DatasetError, GraphError) as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f'{parser.prog}: error: {exc}\n')
        return EXIT_USAGE
    except SOLVER_ERRORS as exc:
        diag = {'error': type(exc).__name__, 'message': str(exc)}
        for attr in ('phi0', 'violation', 'distortion', 'certified', 'iterations',
                     'worst_slack', 'worst_index', 'residual'):
            if hasattr(exc, attr):
                diag[attr] = getattr(exc, attr)
        sys.stderr.write(json.dumps(diag, default=_jsonable) + '\n')
        run.manifest['status'] = 'error'
        run.manifest['diagnostic'] = diag
        run.finish(args.manifest)
        return EXIT_SOLVER
    run.finish(default_manifest)
    return code


if __name__ == '__main__':
    sys.exit(main())
