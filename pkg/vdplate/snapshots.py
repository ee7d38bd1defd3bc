'''
Flat binary snapshot files and their JSON index.

Each snapshot is a little-endian header (magic, dimension, node counts,
time) followed by u and then v as float64 over all nodes in row-major order.
'''

import json

import numpy as np

from visidata import vd, Path

from .errors import FieldShapeError
from .evolution import State

__all__ = ['SNAPSHOT_MAGIC', 'write_snapshot', 'read_snapshot', 'write_snapshots', 'read_snapshots']

SNAPSHOT_MAGIC = b'VDPS'

header_dtype = np.dtype([('magic', 'S4'), ('dimension', '<u4'), ('nx', '<u4'), ('ny', '<u4'), ('t', '<f8')])


def write_snapshot(p, grid, state):
    p = Path(p)
    hdr = np.zeros(1, dtype=header_dtype)
    nx, ny = (list(grid.n_nodes) + [1])[:2]
    hdr[0] = (SNAPSHOT_MAGIC, grid.dimension, nx, ny, state.t)
    with p.open_bytes(mode='wb') as fp:
        fp.write(hdr.tobytes())
        fp.write(np.asarray(state.u, dtype='<f8').tobytes())
        fp.write(np.asarray(state.v, dtype='<f8').tobytes())


def read_snapshot(p):
    'Return (header dict, State).'
    with Path(p).open_bytes() as fp:
        buf = fp.read()
    hdr = np.frombuffer(buf[:header_dtype.itemsize], dtype=header_dtype)[0]
    if hdr['magic'] != SNAPSHOT_MAGIC:
        raise FieldShapeError('%s is not a snapshot file' % p)
    n = int(hdr['nx'])*int(hdr['ny'])
    data = np.frombuffer(buf[header_dtype.itemsize:], dtype='<f8')
    if len(data) != 2*n:
        raise FieldShapeError('%s holds %d values, header says %d nodes' % (p, len(data), n))
    header = dict(dimension=int(hdr['dimension']),
                  n_nodes=[int(hdr['nx'])] + ([int(hdr['ny'])] if hdr['dimension'] == 2 else []),
                  t=float(hdr['t']))
    return header, State(u=data[:n].copy(), v=data[n:].copy(), t=header['t'])


def write_snapshots(outdir, grid, snapshots, stride, dt):
    'Write every snapshot plus index.json; returns the index path.'
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    files = []
    for i, state in enumerate(snapshots):
        fn = 'snap_%06d.bin' % (i*stride)
        write_snapshot(outdir/fn, grid, state)
        files.append(dict(file=fn, step=i*stride, t=state.t))
    index = dict(grid.describe(), stride=stride, dt=dt, count=len(files), files=files)
    with (outdir/'index.json').open_text(mode='w') as fp:
        json.dump(index, fp, indent=2)
    vd.status('wrote %d snapshots to %s' % (len(files), outdir))
    return outdir/'index.json'


def read_snapshots(outdir):
    'Return (index dict, list of States) in step order.'
    outdir = Path(outdir)
    with (outdir/'index.json').open_text() as fp:
        index = json.load(fp)
    states = [read_snapshot(outdir/entry['file'])[1] for entry in index['files']]
    return index, states
