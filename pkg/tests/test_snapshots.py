import json

import numpy as np
import pytest

from vdplate import simulate, write_snapshot, read_snapshot, write_snapshots, read_snapshots, State, SNAPSHOT_MAGIC
from vdplate.errors import FieldShapeError


def test_snapshot_file(tmp_path, grid2d):
    rng = np.random.default_rng(0)
    state = State(u=rng.standard_normal(grid2d.size), v=rng.standard_normal(grid2d.size), t=0.125)
    p = tmp_path/'one.bin'
    write_snapshot(p, grid2d, state)
    raw = p.read_bytes()
    assert raw[:4] == SNAPSHOT_MAGIC
    assert len(raw) == 24 + 16*grid2d.size
    header, back = read_snapshot(p)
    assert header == dict(dimension=2, n_nodes=[13, 13], t=0.125)
    assert np.array_equal(back.u, state.u) and np.array_equal(back.v, state.v)


def test_corrupt_snapshots(tmp_path, grid1d):
    p = tmp_path/'bad.bin'
    p.write_bytes(b'NOPE' + bytes(40))
    with pytest.raises(FieldShapeError):
        read_snapshot(p)

    write_snapshot(p, grid1d, State(u=grid1d.zeros(), v=grid1d.zeros()))
    p.write_bytes(p.read_bytes()[:-8])
    with pytest.raises(FieldShapeError):
        read_snapshot(p)


def test_trajectory_directory(tmp_path, op1d, rho1d, mode1):
    result = simulate(op1d, rho1d, 0.5, mode1, T=0.05, dt=0.005, snapshot_stride=2)
    index_path = write_snapshots(tmp_path/'snaps', op1d.grid, result.snapshots, 2, result.dt)
    index = json.loads((tmp_path/'snaps'/'index.json').read_text())
    assert str(index_path).endswith('index.json')
    assert index['count'] == 6
    assert [f['step'] for f in index['files']] == [0, 2, 4, 6, 8, 10]
    assert index['n_nodes'] == [33]

    index, states = read_snapshots(tmp_path/'snaps')
    assert len(states) == 6
    assert np.allclose(states[-1].u, result.final.u)
    assert states[-1].t == pytest.approx(0.05)
