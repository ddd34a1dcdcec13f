import json

import numpy as np
import pytest

from lipreg.cli import main
from lipreg.core import LabeledDataset, load_dataset, save_dataset


@pytest.fixture
def spike(tmp_path):
    p = tmp_path / 'spike.json'
    save_dataset(LabeledDataset.from_arrays([[0.0], [1.0], [2.0]], [[0.0], [10.0], [0.0]]), p)
    return p


def test_smooth_feasible_is_identity(tmp_path):
    src = tmp_path / 'd.json'
    save_dataset(LabeledDataset.from_arrays([[0.0], [1.0]], [[0.0], [0.5]]), src)
    out = tmp_path / 's.json'
    assert main(['smooth', '--input', str(src), '--lipschitz', '1', '--output', str(out)]) == 0
    assert out.read_text() == src.read_text()
    assert json.loads((tmp_path / 's.json.manifest.json').read_text())['subcommand'] == 'smooth'


def test_smooth_report_and_graph_dump(tmp_path, spike):
    out, rep, g = tmp_path / 's.json', tmp_path / 'r.json', tmp_path / 'g.json'
    man = tmp_path / 'm.json'
    code = main(['--epsilon', '0.1', '--manifest', str(man), 'smooth', '--input', str(spike),
                 '--lipschitz', '1', '--graph', 'complete', '--output', str(out),
                 '--report', str(rep), '--dump-graph', str(g)])
    assert code == 0
    report = json.loads(rep.read_text())
    assert 54 <= report['phi0_used'] <= 59.4
    assert report['max_edge_violation'] <= 1.1
    assert json.loads(g.read_text())['edges'] == [[0, 1], [0, 2], [1, 2]]
    manifest = json.loads(man.read_text())
    assert manifest['parameters']['epsilon'] == 0.1 and 'total' in manifest['timings']
    assert load_dataset(out).n == 3


def test_predict_training_point(capsys, spike):
    assert main(['predict', '--model', str(spike), '--lipschitz', '20', '--query', '1',
                 '--stdout', '--manifest', '/dev/null']) == 0
    out = json.loads(capsys.readouterr().out)
    assert out['predictions'][0]['y_star'] == [10.0]


def test_predict_infeasible_exit_1(capsys, spike):
    code = main(['predict', '--model', str(spike), '--lipschitz', '1', '--query', '0.5',
                 '--stdout', '--manifest', '/dev/null'])
    assert code == 1
    diag = json.loads(capsys.readouterr().err.splitlines()[0])
    assert diag['error'] == 'ExtensionInfeasibleError' and diag['worst_slack'] > 1


@pytest.mark.parametrize('argv', [
    ['smooth', '--input', 'missing.json', '--lipschitz', '1', '--stdout'],
    ['--epsilon', '0.9', 'predict', '--model', 'SPIKE', '--lipschitz', '1', '--query', '1'],
    ['baseline-nw', '--train', 'SPIKE', '--stdout'],
    ['predict', '--model', 'SPIKE', '--lipschitz', '1', '--query', '1,2'],
    ['smooth', '--input', 'SPIKE', '--lipschitz', '1'],
])
def test_usage_errors_exit_2(argv, spike, capsys):
    argv = [str(spike) if a == 'SPIKE' else a for a in argv]
    assert main(argv) == 2
    assert 'usage:' in capsys.readouterr().err


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as info:
        main(['smooth', '--bogus'])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 2


def test_tune_srm_and_csv(tmp_path, capsys):
    X = np.linspace(0, 10, 12)[:, None]
    src = tmp_path / 'lin.json'
    save_dataset(LabeledDataset.from_arrays(X, 2 * X), src)
    csv_path = tmp_path / 'p.csv'
    assert main(['tune', '--input', str(src), '--method', 'srm', '--candidates', '0.5,2,8',
                 '--graph', 'complete', '--csv', str(csv_path), '--stdout',
                 '--manifest', '/dev/null']) == 0
    assert json.loads(capsys.readouterr().out)['chosen_L'] == 2.0
    assert csv_path.read_text().splitlines()[0] == 'L,risk,bound,objective'


def test_baseline_and_generate(tmp_path, capsys):
    assert main(['generate-data', '--n', '6', '--test-n', '3', '--seed', '2',
                 '--out', str(tmp_path / 'g')]) == 0
    for name in ('train.json', 'test.json', 'metadata.json', 'manifest.json'):
        assert (tmp_path / 'g' / name).exists()
    assert main(['baseline-nw', '--train', str(tmp_path / 'g' / 'train.json'), '--test',
                 str(tmp_path / 'g' / 'test.json'), '--folds', '3', '--stdout',
                 '--manifest', '/dev/null']) == 0
    out = json.loads(capsys.readouterr().out)
    assert out['squared_loss'] >= 0 and len(out['predictions']) == 3


def test_evaluate_fixed_L(tmp_path, capsys):
    main(['generate-data', '--n', '25', '--test-n', '5', '--out', str(tmp_path / 'g')])
    capsys.readouterr()
    assert main(['evaluate', '--train', str(tmp_path / 'g' / 'train.json'), '--test',
                 str(tmp_path / 'g' / 'test.json'), '--lipschitz', '1.5', '--graph', 'knn:4',
                 '--max-iterations', '50', '--stdout', '--manifest', '/dev/null']) == 0
    out = json.loads(capsys.readouterr().out)
    assert out['L'] == 1.5 and np.isfinite(out['mwu_loss']) and np.isfinite(out['nw_loss'])


def test_experiment_outputs_deterministic(tmp_path):
    argv = ['--seed', '3', 'experiment', '--sizes', '20,40', '--test-n', '8',
            '--graph', 'knn:4', '--lipschitz', '1.0', '--max-iterations', '60']
    codes = [main(argv + ['--out', str(tmp_path / f'run{k}')]) for k in range(2)]
    assert codes[0] == codes[1] and codes[0] in (0, 3)
    for name in ('results.csv', 'results.json'):
        assert (tmp_path / 'run0' / name).read_bytes() == (tmp_path / 'run1' / name).read_bytes()
    rows = json.loads((tmp_path / 'run0' / 'results.json').read_text())['rows']
    assert [r['n_train'] for r in rows] == [20, 40]
    assert 'timings' in json.loads((tmp_path / 'run0' / 'manifest.json').read_text())
