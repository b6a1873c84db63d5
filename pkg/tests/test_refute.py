import numpy as np
import pytest

from causalpool import (
    ConfigError,
    DgpSpec,
    DmlSpec,
    Executor,
    HyperParams,
    LearnerSpec,
    NuisancePredictions,
    estimate,
    generate_synthetic,
    make_folds,
    overlap_diagnostic,
    placebo_treatment,
    random_common_cause,
    subset_refuter,
)


def linear_spec(seed=0):
    return DmlSpec(
        y_spec=LearnerSpec("ridge", HyperParams(ridge_lambda=1e-3)),
        t_spec=LearnerSpec("logistic"),
        k=4,
        seed=seed,
    )


@pytest.fixture(scope="module")
def confounded():
    data, truth = generate_synthetic(DgpSpec(n=6000, d=3, seed=5))
    return data, truth


class TestPlaceboTreatment:
    def test_effect_vanishes_under_permutation(self, confounded, seq_executor):
        data, truth = confounded
        report = placebo_treatment(data, linear_spec(5), seq_executor, n_runs=5, seed=1)
        assert report.passed
        assert abs(report.refuted_ate) < 0.1
        assert abs(report.original_ate - truth.true_ate) < 0.2
        assert report.n_runs == 5 and len(report.detail) == 5

    def test_zero_effect_data_passes(self, seq_executor):
        data, _ = generate_synthetic(
            DgpSpec(n=4000, d=2, outcome_kind="zero_effect", seed=6)
        )
        report = placebo_treatment(data, linear_spec(6), seq_executor, n_runs=3, seed=2)
        assert report.passed

    def test_zero_runs_rejected(self, confounded, seq_executor):
        data, _ = confounded
        with pytest.raises(ConfigError, match="n_runs"):
            placebo_treatment(data, linear_spec(5), seq_executor, n_runs=0, seed=0)

    def test_deterministic_given_seed(self, confounded, seq_executor):
        data, _ = confounded
        a = placebo_treatment(data, linear_spec(5), seq_executor, n_runs=3, seed=9)
        b = placebo_treatment(data, linear_spec(5), seq_executor, n_runs=3, seed=9)
        assert a == b

    def test_replications_run_as_tasks(self, confounded):
        data, _ = confounded
        with Executor(2) as ex:
            before = ex.counters.tasks_submitted
            placebo_treatment(data, linear_spec(5), ex, n_runs=4, seed=0)
            # 4 replication tasks on top of the original estimate's tasks
            assert ex.counters.tasks_submitted - before >= 4


class TestRandomCommonCause:
    def test_irrelevant_covariate_does_not_move_estimate(self, confounded, seq_executor):
        data, _ = confounded
        report = random_common_cause(data, linear_spec(5), seq_executor, n_runs=4, seed=3)
        assert report.passed
        drift = abs(report.refuted_ate - report.original_ate)
        assert drift <= max(0.05 * abs(report.original_ate), 2 * report.refuted_se)

    def test_d_grows_by_one_per_run(self, confounded, seq_executor):
        data, _ = confounded
        report = random_common_cause(data, linear_spec(5), seq_executor, n_runs=3, seed=4)
        assert all(entry["d"] == data.d + 1 for entry in report.detail)

    def test_hidden_confounding_still_reports(self, seq_executor):
        data, _ = generate_synthetic(
            DgpSpec(n=4000, d=2, seed=7, unobserved_confounding=1.5)
        )
        report = random_common_cause(data, linear_spec(7), seq_executor, n_runs=3, seed=5)
        assert isinstance(report.passed, bool)
        assert np.isfinite(report.refuted_ate)


class TestSubsetRefuter:
    def test_full_fraction_reproduces_original_exactly(self, confounded, seq_executor):
        data, _ = confounded
        report = subset_refuter(
            data, linear_spec(5), seq_executor, frac=1.0, n_runs=2, seed=6
        )
        assert report.refuted_ate == report.original_ate
        assert report.passed

    def test_half_fraction_passes(self, confounded, seq_executor):
        data, _ = confounded
        report = subset_refuter(
            data, linear_spec(5), seq_executor, frac=0.5, n_runs=5, seed=7
        )
        assert report.passed
        assert all(entry["n_rows"] == 3000 for entry in report.detail)

    @pytest.mark.parametrize("frac", [0.0, -0.5, 1.5])
    def test_invalid_fraction_rejected(self, confounded, seq_executor, frac):
        data, _ = confounded
        with pytest.raises(ConfigError, match="frac"):
            subset_refuter(data, linear_spec(5), seq_executor, frac=frac, n_runs=2, seed=0)


class TestOverlapDiagnostic:
    def make_nuisance(self, t_hat):
        t_hat = np.asarray(t_hat, dtype=np.float64)
        plan = make_folds(t_hat.shape[0], 2, seed=0)
        return NuisancePredictions(
            y_hat=np.zeros(t_hat.shape[0]), t_hat=t_hat, fold_plan=plan
        )

    def test_fair_coin_rarely_flagged(self, seq_executor):
        rng = np.random.default_rng(8)
        n = 5000
        x = rng.normal(size=(n, 2))
        t = (rng.random(n) < 0.5).astype(float)
        y = rng.normal(size=n)
        from causalpool import Dataset, crossfit_predict

        data = Dataset(x=x, t=t, y=y)
        plan = make_folds(n, 4, seed=0)
        nuis = crossfit_predict(
            data, LearnerSpec("ridge"), LearnerSpec("logistic"), plan, seq_executor
        )
        report = overlap_diagnostic(nuis, eta=0.05)
        assert report.frac_flagged < 0.01
        assert 0.3 < report.p_min and report.p_max < 0.7

    def test_strong_confounding_flags_many(self):
        # expit(5 * X0) puts sizable mass outside [0.05, 0.95]:
        # P(|X0| > 0.589) ~ 0.556 for standard normal X0
        from scipy.special import expit

        rng = np.random.default_rng(9)
        p = expit(5.0 * rng.normal(size=20_000))
        report = overlap_diagnostic(self.make_nuisance(p), eta=0.05)
        assert report.frac_flagged > 0.4

    def test_eta_zero_counts_only_exact_boundary(self):
        report = overlap_diagnostic(self.make_nuisance([0.0, 0.2, 1.0, 0.5]), eta=0.0)
        assert report.frac_flagged == 0.5
        assert report.p_min == 0.0 and report.p_max == 1.0

    def test_monotone_in_eta(self):
        rng = np.random.default_rng(10)
        p = rng.random(1000)
        nuis = self.make_nuisance(p)
        fracs = [overlap_diagnostic(nuis, eta).frac_flagged for eta in (0.0, 0.02, 0.1, 0.3)]
        assert all(a <= b for a, b in zip(fracs, fracs[1:]))

    def test_eta_bounds(self):
        with pytest.raises(ConfigError, match="eta"):
            overlap_diagnostic(self.make_nuisance([0.5, 0.5]), eta=0.5)


class TestReportSerialization:
    def test_report_round_trips_to_dict(self, confounded, seq_executor):
        data, _ = confounded
        report = placebo_treatment(data, linear_spec(5), seq_executor, n_runs=2, seed=0)
        payload = report.to_dict()
        assert payload["test_name"] == "placebo_treatment"
        assert len(payload["detail"]) == 2
        overlap = overlap_diagnostic(
            TestOverlapDiagnostic().make_nuisance([0.5, 0.4]), eta=0.05
        )
        assert set(overlap.to_dict()) == {"p_min", "p_max", "frac_flagged", "eta"}
