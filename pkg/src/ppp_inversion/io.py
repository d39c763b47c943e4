"""CSV and JSON exchange formats.

* point patterns: ``realization_id,point_id,dim_0,...,dim_{d-1}``
* labeled samples: ``realization_id,component_id,dim_0,...,dim_{d-1}``
* mixtures: ``{"dim": d, "components": [{"w", "mean", "cov"}]}``

Floats are written with ``repr`` so files round-trip exactly.
"""
import csv
import json
from pathlib import Path

import numpy as np

from .decomposition_sampler import LabeledPattern
from .errors import InvalidArgumentError
from .mixture_fit import GaussianMixture
from .point_process import PointPattern


def _header(first, second, dim):
    return [first, second] + [f"dim_{j}" for j in range(dim)]


def _dim_from_header(header, second):
    if len(header) < 3 or header[0] != "realization_id" or header[1] != second:
        raise InvalidArgumentError(f"unexpected CSV header {header}")
    return len(header) - 2


def _open_for_write(path):
    path = Path(path)
    try:
        return path.open("w", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def write_patterns(patterns, path, dim=None):
    patterns = list(patterns)
    if dim is None:
        if not patterns:
            raise InvalidArgumentError("dim is required when there are no patterns")
        dim = patterns[0].dim
    with _open_for_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_header("realization_id", "point_id", dim))
        for r, p in enumerate(patterns):
            for i, x in enumerate(p.points):
                w.writerow([r, i] + [repr(float(v)) for v in x])


def read_patterns(path, n_realizations=None):
    """Read a pattern CSV; realizations with no rows come back empty."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    dim = _dim_from_header(rows[0], "point_id")
    by_id = {}
    for row in rows[1:]:
        by_id.setdefault(int(row[0]), []).append([float(v) for v in row[2:]])
    n = n_realizations if n_realizations is not None else (max(by_id) + 1 if by_id else 0)
    return [PointPattern(dim, np.array(by_id[r]) if r in by_id else None) for r in range(n)]


def write_samples(labeled, path, dim=None):
    """Write one or more labeled realizations (a LabeledPattern or a list)."""
    items = [labeled] if isinstance(labeled, LabeledPattern) else list(labeled)
    if dim is None:
        if not items:
            raise InvalidArgumentError("dim is required when there are no realizations")
        dim = items[0].pattern.dim
    with _open_for_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_header("realization_id", "component_id", dim))
        for r, lp in enumerate(items):
            for k, x in zip(lp.labels, lp.pattern.points):
                w.writerow([r, int(k)] + [repr(float(v)) for v in x])


def read_samples(path, n_realizations=None):
    """Inverse of ``write_samples``; always returns a list of LabeledPattern."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    dim = _dim_from_header(rows[0], "component_id")
    pts, labs = {}, {}
    for row in rows[1:]:
        r = int(row[0])
        pts.setdefault(r, []).append([float(v) for v in row[2:]])
        labs.setdefault(r, []).append(int(row[1]))
    n = n_realizations if n_realizations is not None else (max(pts) + 1 if pts else 1)
    out = []
    for r in range(n):
        if r in pts:
            out.append(LabeledPattern(PointPattern(dim, np.array(pts[r])), labs[r]))
        else:
            out.append(LabeledPattern(PointPattern(dim), []))
    return out


def write_json(obj, path):
    with _open_for_write(path) as fh:
        json.dump(obj, fh, indent=2, sort_keys=False, allow_nan=True)
        fh.write("\n")


def write_mixture(mixture, path):
    write_json(mixture.to_dict(), path)


def read_mixture(path):
    with Path(path).open() as fh:
        return GaussianMixture.from_dict(json.load(fh))
