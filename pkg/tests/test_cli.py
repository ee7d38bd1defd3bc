import csv
import json

import pytest
import yaml

from vdplate.cli import main, plain

GRID1D = dict(dimension=1, extents=[1.0], n_nodes=[17])


def write_config(tmp_path, name='c.yaml', **blocks):
    raw = dict(grid=dict(GRID1D))
    raw.update(blocks)
    p = tmp_path/name
    p.write_text(yaml.safe_dump(raw))
    return str(p)


def rows(path):
    with open(path, newline='') as fp:
        return list(csv.DictReader(fp))


def run(tmp_path, subcommand, cfg, *extra):
    out = tmp_path/'out'
    status = main([subcommand, '--config', cfg, '--out', str(out), *extra])
    return status, out


def test_simulate_zero_data(tmp_path):
    cfg = write_config(tmp_path, initial_data=[dict(family='zero')], dynamics=dict(T=0.05, dt=0.01))
    status, out = run(tmp_path, 'simulate', cfg)
    assert status == 0
    energy = rows(out/'energy.csv')
    assert len(energy) == 6
    assert all(float(r['E']) == 0 for r in energy)
    assert len(rows(out/'boundary.csv')) == 6

    manifest = json.loads((out/'manifest.json').read_text())
    assert manifest['subcommand'] == 'simulate' and manifest['status'] == 'ok'
    assert manifest['config']['grid']['n_nodes'] == [17]
    assert set(manifest['versions']) == {'vdplate', 'numpy', 'scipy', 'visidata'}
    assert any(o.endswith('energy.csv') for o in manifest['outputs'])
    assert manifest['resources']['max_rss_bytes'] > 0
    # T = 0.05 is far below the minimal observation time
    assert manifest['warnings']

    record = json.loads((out/'simulation.json').read_text())
    assert record['steps'] == 5 and record['E0'] == 0


def test_simulate_writes_snapshots_and_json(tmp_path):
    cfg = write_config(tmp_path, dynamics=dict(T=0.02, dt=0.005, snapshot_stride=2),
                       output=dict(formats=['csv', 'json']))
    status, out = run(tmp_path, 'simulate', cfg)
    assert status == 0
    index = json.loads((out/'snapshots'/'index.json').read_text())
    assert index['count'] == 3
    assert (out/'energy.json').exists()


def test_identical_runs_are_bit_identical(tmp_path):
    cfg = write_config(tmp_path, initial_data=[dict(family='random')], dynamics=dict(T=0.05, dt=0.005, gamma=1.0), seed=3)
    main(['simulate', '--config', cfg, '--out', str(tmp_path/'a')])
    main(['simulate', '--config', cfg, '--out', str(tmp_path/'b')])
    for name in ('energy.csv', 'boundary.csv'):
        assert (tmp_path/'a'/name).read_bytes() == (tmp_path/'b'/name).read_bytes()


def test_seed_override_changes_random_data(tmp_path):
    cfg = write_config(tmp_path, initial_data=[dict(family='random')], dynamics=dict(T=0.01, dt=0.005))
    main(['simulate', '--config', cfg, '--out', str(tmp_path/'a')])
    main(['simulate', '--config', cfg, '--out', str(tmp_path/'b'), '--seed', '17'])
    assert (tmp_path/'a'/'energy.csv').read_bytes() != (tmp_path/'b'/'energy.csv').read_bytes()
    assert json.loads((tmp_path/'b'/'manifest.json').read_text())['seed'] == 17


def test_observability_table(tmp_path, options):
    cfg = write_config(tmp_path, grid=dict(dimension=1, extents=[1.0], n_nodes=[33]),
                       initial_data=[dict(family='eigenmodes', count=3)],
                       experiment=dict(gammas=[0.0, 1.0, 4.0]))
    status, out = run(tmp_path, 'observability', cfg, '--threads', '2')
    assert status == 0
    table = rows(out/'observability.csv')
    assert len(table) == 9
    assert sorted({float(r['gamma']) for r in table}) == [0.0, 1.0, 4.0]
    constants = json.loads((out/'constants.json').read_text())
    assert len(constants['C_obs']) == 3


def test_missing_grid_block(tmp_path, capsys):
    p = tmp_path/'bad.yaml'
    p.write_text(yaml.safe_dump(dict(density=dict(rho0=1.0))))
    assert main(['simulate', '--config', str(p), '--out', str(tmp_path/'out')]) == 1
    assert 'grid' in capsys.readouterr().err


def test_experiment_error_exits_nonzero(tmp_path, capsys):
    cfg = write_config(tmp_path, experiment=dict(true_rho1=2.0, bounds=[2.5, 3.0]),
                       density=dict(rho0=1.0, inclusion=dict(interval=[0.25, 0.5])),
                       dynamics=dict(T=0.3, dt=0.005))
    status, out = run(tmp_path, 'invert-density', cfg)
    assert status == 1
    assert 'range' in capsys.readouterr().err
    manifest = json.loads((out/'manifest.json').read_text())
    assert manifest['status'] == 'error' and manifest['error']


def test_spectrum_against_beam(tmp_path):
    cfg = write_config(tmp_path, grid=dict(dimension=1, extents=[1.0], n_nodes=[65]), experiment=dict(k=3))
    status, out = run(tmp_path, 'spectrum', cfg)
    assert status == 0
    table = rows(out/'spectrum.csv')
    assert [int(r['k']) for r in table] == [1, 2, 3]
    assert float(table[0]['rel_error']) < 0.02


def test_resolvent_table(tmp_path):
    cfg = write_config(tmp_path, experiment=dict(lambdas=[1.0, 10.0], gammas=[0.0, 2.0]))
    status, out = run(tmp_path, 'resolvent', cfg)
    assert status == 0
    table = rows(out/'resolvent.csv')
    assert len(table) == 4
    assert all(float(r['resolvent_bound']) <= 1 + 1e-9 for r in table)


def test_multiplier_levels(tmp_path):
    cfg = write_config(tmp_path, dynamics=dict(T=0.05, dt=0.005), experiment=dict(refinements=2))
    status, out = run(tmp_path, 'multiplier', cfg)
    assert status == 0
    table = rows(out/'multiplier.csv')
    assert [r['label'] for r in table] == ['level 0', 'level 1']
    assert float(table[1]['h']) == pytest.approx(float(table[0]['h'])/2)


def test_stability_tables(tmp_path):
    cfg = write_config(tmp_path, density=dict(rho0=1.0, inclusion=dict(interval=[0.25, 0.5])),
                       dynamics=dict(T=0.2, dt=0.005), experiment=dict(contrasts=[0.1, 0.2], gammas=[0.0, 1.0]))
    status, out = run(tmp_path, 'stability', cfg)
    assert status == 0
    table = rows(out/'stability.csv')
    assert len(table) == 4
    assert [float(r['rho_diff_inf']) for r in table] == pytest.approx([0.1, 0.1, 0.2, 0.2])
    assert len(rows(out/'initial_estimates.csv')) == 2
    estimates = json.loads((out/'integral_estimates.json').read_text())
    assert all(e['ok'] for e in estimates)


def test_invert_density(tmp_path):
    cfg = write_config(tmp_path, density=dict(rho0=1.0, inclusion=dict(interval=[0.25, 0.5])),
                       dynamics=dict(T=0.3, dt=0.005, gamma=1.0),
                       experiment=dict(true_rho1=2.0, bounds=[1.0, 3.0]))
    status, out = run(tmp_path, 'invert-density', cfg)
    assert status == 0
    summary = json.loads((out/'density_reconstruction.json').read_text())
    assert summary['results'][0]['rho1_hat'] == pytest.approx(2.0, abs=1e-3)
    misfit = rows(out/'misfit_noise_0.csv')
    assert [r['stage'] for r in misfit[:9]] == ['sample']*9


def test_invert_initial_with_fine_data(tmp_path):
    cfg = write_config(tmp_path, dynamics=dict(T=0.1, dt=0.0025, gamma=0.5),
                       experiment=dict(k=3, true_coefficients=[0.0, 1.0]))
    status, out = run(tmp_path, 'invert-initial', cfg, '--fine-data')
    assert status == 0
    table = rows(out/'coefficients.csv')
    assert [int(r['j']) for r in table] == [1, 2, 3]
    c = [float(r['coefficient']) for r in table]
    assert c[1] == pytest.approx(1.0, abs=0.3)
    assert abs(c[1]) > max(abs(c[0]), abs(c[2]))
    assert json.loads((out/'manifest.json').read_text())['config']['fine_data'] is True


def test_plain_json_values():
    import numpy as np
    assert plain(dict(a=np.float64(1.5), b=np.arange(2), c=(float('inf'),))) == dict(a=1.5, b=[0, 1], c=['inf'])
