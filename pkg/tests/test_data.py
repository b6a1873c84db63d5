import hashlib

import numpy as np
import psutil
import pytest
from scipy.special import expit

from causalpool import Dataset, DataError, ConfigError, DgpSpec, GroundTruth
from causalpool import generate_synthetic, load_csv, save_csv
from causalpool.data import _generate_rows


def digest(data):
    h = hashlib.sha256()
    for arr in (data.x, data.t, data.y):
        h.update(arr.tobytes())
    return h.hexdigest()


class TestDatasetInvariants:
    def test_row_mismatch_rejected(self):
        with pytest.raises(DataError, match="row mismatch"):
            Dataset(x=np.zeros((3, 2)), t=np.array([0.0, 1.0]), y=np.zeros(3))

    def test_non_finite_rejected(self):
        x = np.zeros((3, 1))
        x[1, 0] = np.nan
        with pytest.raises(DataError, match="non-finite"):
            Dataset(x=x, t=np.array([0.0, 1.0, 0.0]), y=np.zeros(3))

    def test_discrete_treatment_must_be_binary(self):
        with pytest.raises(DataError, match="values in"):
            Dataset(x=np.zeros((2, 1)), t=np.array([0.0, 0.5]), y=np.zeros(2))

    def test_single_valued_discrete_treatment_rejected(self):
        with pytest.raises(DataError, match="degenerate treatment"):
            Dataset(x=np.zeros((3, 1)), t=np.ones(3), y=np.zeros(3))

    def test_continuous_treatment_allowed(self):
        d = Dataset(
            x=np.zeros((3, 1)),
            t=np.array([0.2, 1.4, -0.5]),
            y=np.zeros(3),
            discrete_treatment=False,
        )
        assert d.n == 3 and d.d == 1

    def test_arrays_are_immutable(self):
        data, _ = generate_synthetic(DgpSpec(n=10, d=2, seed=0))
        with pytest.raises(ValueError):
            data.x[0, 0] = 5.0


class TestDgpSpecValidation:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"n": 1, "d": 2},
            {"n": 100, "d": 0},
            {"n": 100, "d": 2, "noise_sd": -0.1},
            {"n": 100, "d": 2, "unobserved_confounding": -1.0},
            {"n": 100, "d": 2, "outcome_kind": "cubic"},
        ],
    )
    def test_invalid_spec_rejected(self, kwargs):
        with pytest.raises(ConfigError):
            DgpSpec(**kwargs)


class TestGenerator:
    def test_same_seed_bit_identical(self):
        spec = DgpSpec(n=500, d=4, seed=9)
        a, _ = generate_synthetic(spec)
        b, _ = generate_synthetic(spec)
        assert digest(a) == digest(b)

    def test_different_seed_differs(self):
        a, _ = generate_synthetic(DgpSpec(n=500, d=4, seed=9))
        b, _ = generate_synthetic(DgpSpec(n=500, d=4, seed=10))
        assert digest(a) != digest(b)

    def test_consistency_exact(self):
        data, truth = generate_synthetic(DgpSpec(n=2000, d=3, seed=1))
        treated = data.t == 1.0
        assert np.array_equal(data.y[treated], truth.y1[treated])
        assert np.array_equal(data.y[~treated], truth.y0[~treated])

    def test_noiseless_effect_identity(self):
        # with zero noise, y - y0 on treated rows is exactly 1 + 0.5*x0
        data, truth = generate_synthetic(DgpSpec(n=2000, d=2, noise_sd=0.0, seed=2))
        treated = data.t == 1.0
        lift = data.y[treated] - truth.y0[treated]
        assert np.array_equal(lift, truth.tau[treated])
        expected = 1.0 + 0.5 * data.x[treated, 0]
        assert np.allclose(lift, expected, rtol=0.0, atol=1e-12)

    def test_tau_identity_and_true_ate(self):
        _, truth = generate_synthetic(DgpSpec(n=1000, d=2, seed=3))
        assert np.array_equal(truth.tau, truth.y1 - truth.y0)
        assert truth.true_ate == truth.tau.mean()

    def test_zero_effect_kind(self):
        data, truth = generate_synthetic(
            DgpSpec(n=1000, d=2, outcome_kind="zero_effect", seed=4)
        )
        assert np.all(truth.tau == 0.0)
        assert truth.true_ate == 0.0
        assert np.array_equal(truth.y0, truth.y1)

    def test_linear_kind_constant_effect(self):
        _, truth = generate_synthetic(DgpSpec(n=1000, d=2, outcome_kind="linear", seed=4))
        assert np.allclose(truth.tau, 1.0, atol=1e-12)

    def test_mean_tau_near_analytic_limit(self):
        # E[1 + 0.5*X0] = 1 for standard normal X0
        _, truth = generate_synthetic(DgpSpec(n=100_000, d=1, seed=5))
        assert abs(truth.tau.mean() - 1.0) < 0.02

    def test_sutva_perturbing_one_row_stream(self):
        # swapping one row's id for a fresh stream leaves every other row intact
        spec = DgpSpec(n=200, d=3, seed=6)
        ids = np.arange(200, dtype=np.uint64)
        base = _generate_rows(spec, ids)
        ids_perturbed = ids.copy()
        ids_perturbed[37] = 10_000
        pert = _generate_rows(spec, ids_perturbed)
        others = np.arange(200) != 37
        for a, b in zip(base, pert):
            assert np.array_equal(a[others], b[others])
        assert not np.array_equal(base[0][37], pert[0][37])

    def test_subset_reproducibility(self):
        # the first rows of a longer table equal the shorter table exactly
        short, _ = generate_synthetic(DgpSpec(n=100, d=3, seed=7))
        long, _ = generate_synthetic(DgpSpec(n=250, d=3, seed=7))
        assert np.array_equal(short.x, long.x[:100])
        assert np.array_equal(short.t, long.t[:100])
        assert np.array_equal(short.y, long.y[:100])

    def test_overlap_propensities_interior(self):
        data, _ = generate_synthetic(DgpSpec(n=5000, d=1, confounding_strength=2.0, seed=8))
        p = expit(2.0 * data.x[:, 0])
        assert p.min() > 0.0 and p.max() < 1.0

    def test_unobserved_confounder_changes_assignment_only_via_u(self):
        base, truth0 = generate_synthetic(DgpSpec(n=3000, d=2, seed=12))
        conf, trutht = generate_synthetic(
            DgpSpec(n=3000, d=2, seed=12, unobserved_confounding=1.5)
        )
        # observed covariates share the same draws; outcomes shift through U
        assert np.array_equal(base.x, conf.x)
        assert not np.array_equal(base.y, conf.y)
        assert not np.array_equal(base.t, conf.t)

    def test_treatment_marginal_rate(self):
        # P(T=1) = E[expit(X0)] = 1/2 by symmetry
        data, _ = generate_synthetic(DgpSpec(n=50_000, d=1, seed=13))
        assert abs(data.t.mean() - 0.5) < 0.01

    @pytest.mark.slow
    def test_paper_scale_shapes(self):
        if psutil.virtual_memory().available < 9 * 2**30:
            pytest.skip("needs ~9 GiB free for the 1e6 x 500 matrix")
        data, truth = generate_synthetic(DgpSpec(n=1_000_000, d=500, seed=123))
        assert data.x.shape == (1_000_000, 500)
        assert data.t.shape == (1_000_000,)
        assert data.y.shape == (1_000_000,)


class TestGroundTruthValidation:
    def test_tau_must_match(self):
        with pytest.raises(DataError, match="tau"):
            GroundTruth(
                y0=np.zeros(3), y1=np.ones(3), tau=np.zeros(3), true_ate=0.0
            )

    def test_true_ate_must_match(self):
        with pytest.raises(DataError, match="true_ate"):
            GroundTruth(y0=np.zeros(3), y1=np.ones(3), tau=np.ones(3), true_ate=0.5)


class TestCsvRoundTrip:
    def test_save_load_round_trip(self, tmp_path):
        data, truth = generate_synthetic(DgpSpec(n=50, d=3, seed=21))
        path = tmp_path / "data.csv"
        save_csv(data, path, ground_truth=truth)
        loaded = load_csv(path, "t", "y", ["x0", "x1", "x2"])
        assert np.array_equal(loaded.x, data.x)
        assert np.array_equal(loaded.t, data.t)
        assert np.array_equal(loaded.y, data.y)

    def test_ground_truth_columns_prefixed(self, tmp_path):
        data, truth = generate_synthetic(DgpSpec(n=10, d=1, seed=22))
        path = tmp_path / "data.csv"
        save_csv(data, path, ground_truth=truth)
        header = path.read_text().splitlines()[0].split(",")
        assert header == ["x0", "t", "y", "__gt_y0", "__gt_y1", "__gt_tau"]

    def test_deterministic_bytes(self, tmp_path):
        data, truth = generate_synthetic(DgpSpec(n=50, d=2, seed=23))
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        save_csv(data, p1, ground_truth=truth)
        save_csv(data, p2, ground_truth=truth)
        assert p1.read_bytes() == p2.read_bytes()

    def test_three_row_file(self, tmp_path):
        path = tmp_path / "tiny.csv"
        path.write_text("a,b,t,y\n1,2,0,3.5\n2,1,1,4.5\n0,0,1,2.0\n")
        data = load_csv(path, "t", "y", ["a", "b"])
        assert data.n == 3 and data.d == 2
        assert data.feature_names == ("a", "b")

    def test_missing_column(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("a,t,y\n1,0,2\n2,1,3\n")
        with pytest.raises(DataError, match="missing column 'b'"):
            load_csv(path, "t", "y", ["a", "b"])

    def test_non_numeric_cell_names_location(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,t,y\n1,0,2\noops,1,3\n")
        with pytest.raises(DataError, match=r"row 1, column 'a'"):
            load_csv(path, "t", "y", ["a"])

    def test_degenerate_treatment_column(self, tmp_path):
        path = tmp_path / "deg.csv"
        path.write_text("a,t,y\n1,0,2\n2,0,3\n")
        with pytest.raises(DataError, match="degenerate treatment"):
            load_csv(path, "t", "y", ["a"])

    def test_non_binary_treatment_with_discrete_flag(self, tmp_path):
        path = tmp_path / "nb.csv"
        path.write_text("a,t,y\n1,0.3,2\n2,1,3\n")
        with pytest.raises(DataError, match="discrete treatment"):
            load_csv(path, "t", "y", ["a"])
