import numpy as np
import pytest

from causalpool import (
    ConfigError,
    DgpSpec,
    DmlSpec,
    Executor,
    HyperParams,
    LearnerSpec,
    ParamGrid,
    estimate,
    generate_synthetic,
    grid_search,
    resolve_tuned,
)
from causalpool.folds import make_folds
from causalpool.learners import fit, predict
from causalpool.seeding import derive_seed


def ridge(lam):
    return LearnerSpec("ridge", HyperParams(ridge_lambda=lam))


@pytest.fixture()
def informative_data():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(200, 2))
    y = x @ np.array([2.0, -1.0])
    return x, y


class TestParamGrid:
    def test_empty_candidates_rejected(self):
        with pytest.raises(ConfigError, match="empty"):
            ParamGrid(candidates=())

    def test_mixed_task_types_rejected(self):
        with pytest.raises(ConfigError, match="regressors or all"):
            ParamGrid(candidates=(ridge(0.0), LearnerSpec("logistic")))


class TestGridSearch:
    def test_single_candidate_returned(self, informative_data, seq_executor):
        x, y = informative_data
        grid = ParamGrid(candidates=(ridge(1.0),), cv_k=3, seed=0)
        result = grid_search(x, y, grid, seq_executor)
        assert result.best == ridge(1.0)
        assert len(result.scores) == 1

    def test_unregularized_wins_on_noiseless_linear_data(
        self, informative_data, seq_executor
    ):
        x, y = informative_data
        grid = ParamGrid(candidates=(ridge(1e6), ridge(0.0)), cv_k=4, seed=0)
        result = grid_search(x, y, grid, seq_executor)
        assert result.best == ridge(0.0)
        assert result.scores[0][1] < result.scores[-1][1]

    def test_tie_goes_to_first_candidate(self, informative_data, seq_executor):
        x, y = informative_data
        a, b = ridge(0.5), ridge(0.5)
        grid = ParamGrid(candidates=(a, b), cv_k=3, seed=0)
        result = grid_search(x, y, grid, seq_executor)
        assert result.best is a

    def test_task_count_is_candidates_times_folds(self, informative_data):
        x, y = informative_data
        grid = ParamGrid(candidates=(ridge(0.0), ridge(1.0), ridge(2.0)), cv_k=4, seed=0)
        with Executor(1) as ex:
            grid_search(x, y, grid, ex)
            assert ex.counters.tasks_submitted == 12
            assert ex.counters.tasks_completed == 12

    def test_scores_match_sequential_recomputation(self, informative_data, seq_executor):
        x, y = informative_data
        rng = np.random.default_rng(1)
        y_noisy = y + rng.normal(size=y.shape[0])
        cands = (ridge(0.0), ridge(10.0))
        grid = ParamGrid(candidates=cands, cv_k=3, seed=5)
        result = grid_search(x, y_noisy, grid, seq_executor)
        plan = make_folds(x.shape[0], 3, seed=5)
        for ci, cand in enumerate(cands):
            total, count = 0.0, 0
            for j in range(plan.k):
                test = plan.assignment == j
                model = fit(cand, x[~test], y_noisy[~test], derive_seed(5, ci, j))
                err = predict(model, x[test]) - y_noisy[test]
                total += float(err @ err)
                count += int(test.sum())
            expected = total / x.shape[0]
            got = dict((id(s), v) for s, v in result.scores)[id(cand)]
            assert got == expected

    def test_dominated_candidate_never_changes_best(self, informative_data, seq_executor):
        x, y = informative_data
        rng = np.random.default_rng(2)
        y_noisy = y + 0.1 * rng.normal(size=y.shape[0])
        base = ParamGrid(candidates=(ridge(1e-3), ridge(1.0)), cv_k=3, seed=0)
        best_before = grid_search(x, y_noisy, base, seq_executor).best
        extended = ParamGrid(
            candidates=(ridge(1e-3), ridge(1.0), ridge(1e9)), cv_k=3, seed=0
        )
        best_after = grid_search(x, y_noisy, extended, seq_executor).best
        assert best_before == best_after

    def test_worker_invariance(self, informative_data):
        x, y = informative_data
        grid = ParamGrid(candidates=(ridge(0.0), ridge(1.0)), cv_k=3, seed=3)
        with Executor(1) as ex1:
            r1 = grid_search(x, y, grid, ex1)
        with Executor(2) as ex2:
            r2 = grid_search(x, y, grid, ex2)
        assert [s for _, s in r1.scores] == [s for _, s in r2.scores]

    def test_fold_range_error_on_tiny_data(self, seq_executor):
        grid = ParamGrid(candidates=(ridge(0.0),), cv_k=5, seed=0)
        with pytest.raises(ConfigError, match="fold count"):
            grid_search(np.zeros((2, 1)), np.zeros(2), grid, seq_executor)


class TestResolveTuned:
    def test_plain_spec_is_identity(self, informative_data, seq_executor):
        x, y = informative_data
        spec = ridge(0.7)
        assert resolve_tuned(spec, x, y, seq_executor) is spec

    def test_grid_resolves_to_best(self, informative_data, seq_executor):
        x, y = informative_data
        grid = ParamGrid(candidates=(ridge(1e6), ridge(0.0)), cv_k=3, seed=0)
        assert resolve_tuned(grid, x, y, seq_executor) == ridge(0.0)

    def test_rejects_other_types(self, informative_data, seq_executor):
        x, y = informative_data
        with pytest.raises(ConfigError, match="LearnerSpec or ParamGrid"):
            resolve_tuned("ridge", x, y, seq_executor)

    def test_estimate_accepts_grids(self, seq_executor):
        data, truth = generate_synthetic(DgpSpec(n=4000, d=2, seed=13))
        y_grid = ParamGrid(candidates=(ridge(1e6), ridge(1e-3)), cv_k=3, seed=1)
        spec = DmlSpec(y_spec=y_grid, t_spec=LearnerSpec("logistic"), k=4, seed=13)
        est = estimate(data, spec, seq_executor)
        assert abs(est.ate - truth.true_ate) < 5 * est.ate_se
