import json

import numpy as np
import pytest

from ppp_inversion.decomposition_sampler import LabeledPattern, SamplerConfig, sample_posterior_ppp
from ppp_inversion.io import (read_mixture, read_patterns, read_samples, write_mixture,
                              write_patterns, write_samples)
from ppp_inversion.mixture_fit import GaussianComponent, GaussianMixture
from ppp_inversion.point_process import PointPattern

MIX = GaussianMixture([GaussianComponent(1 / 3, [0.1, -0.2], [[0.5, 0.1], [0.1, 0.25]]),
                       GaussianComponent(2 / 3, [1.0, 1.0], np.eye(2) * 0.1)])


def test_empty_samples_header_only(tmp_path):
    path = tmp_path / "s.csv"
    write_samples(LabeledPattern(PointPattern(2), []), path)
    assert path.read_text() == "realization_id,component_id,dim_0,dim_1\n"


def test_seven_points_eight_lines(tmp_path):
    rng = np.random.default_rng(0)
    lp = LabeledPattern(PointPattern(3, rng.random((7, 3))), [0, 1, 1, 0, 2, 2, 2])
    path = tmp_path / "s.csv"
    write_samples(lp, path)
    assert len(path.read_text().splitlines()) == 8


def test_samples_round_trip_exact(tmp_path):
    runs = [sample_posterior_ppp(MIX, SamplerConfig(gamma=50.0, seed=s)) for s in range(3)]
    path = tmp_path / "s.csv"
    write_samples(runs, path)
    back = read_samples(path, n_realizations=3)
    assert all(a == b for a, b in zip(runs, back))


def test_patterns_round_trip_with_empty(tmp_path):
    pats = [PointPattern(2, [[0.1, 0.2]]), PointPattern(2), PointPattern(2, [[1 / 3, 2 / 3]])]
    path = tmp_path / "p.csv"
    write_patterns(pats, path)
    assert read_patterns(path, 3) == pats


def test_mixture_round_trip_exact(tmp_path):
    path = tmp_path / "m.json"
    write_mixture(MIX, path)
    back = read_mixture(path)
    assert back.to_dict() == MIX.to_dict()
    assert set(json.loads(path.read_text())) == {"dim", "components"}


def test_write_error_names_path(tmp_path):
    bad = tmp_path / "missing" / "s.csv"
    with pytest.raises(OSError, match="missing"):
        write_samples(LabeledPattern(PointPattern(1), []), bad)
