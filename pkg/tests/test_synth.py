"""Generators: analytic moments, determinism, ground truth, the oracle."""

import numpy as np
import pytest

from causalpred import (
    EstimatorConfig,
    LaggedVariable,
    PredictionTask,
    estimate_cmi,
    forward_cmi,
    gen_fixed_model,
    gen_gam_member,
    gen_synergetic_member,
    knn_predict,
    minimal_error_oracle,
    optimal_subsets,
    shuffle_test,
    split_learn_test,
    standardize_panel,
    valid_target_times,
)
from causalpred.core import PredictorSet

TASK = PredictionTask(target=0, h=1, tau_max=2)


class TestFixedModel:
    def test_target_variance_matches_analytic_value(self):
        # Var(Y) = 4c^2 + b^2 + sigma^2 = 4.89 for the default parameters
        panel, _ = gen_fixed_model(100000, seed=5)
        assert panel.values[:, 0].var() == pytest.approx(4.89, rel=0.02)

    def test_driver_columns_standard_normal(self):
        panel, _ = gen_fixed_model(10000, seed=6)
        for j in range(3, 10):
            col = panel.values[:, j]
            assert abs(col.mean()) < 0.02
            assert abs(col.var() - 1.0) < 0.05

    def test_bit_identical_reruns(self):
        a, _ = gen_fixed_model(500, seed=7)
        b, _ = gen_fixed_model(500, seed=7)
        np.testing.assert_array_equal(a.values, b.values)

    def test_ground_truth_drivers(self):
        _, truth = gen_fixed_model(100, seed=0)
        assert truth.true_drivers == frozenset(
            LaggedVariable(j, 1) for j in range(3, 10)
        )
        assert truth.synergetic_drivers == frozenset(
            LaggedVariable(j, 1) for j in range(7, 10)
        )

    def test_noise_streams_uncorrelated(self):
        panel, _ = gen_fixed_model(100000, seed=8)
        w_and_z = panel.values[:, 3:]
        corr = np.corrcoef(w_and_z.T)
        off_diag = corr[~np.eye(7, dtype=bool)]
        assert np.abs(off_diag).max() < 0.01

    def test_joint_synergy_dwarfs_single_factors(self):
        panel, _ = gen_fixed_model(10000, seed=9)
        std, _, _ = standardize_panel(panel)
        times = valid_target_times(std, TASK)
        y = std.values[np.asarray(times), 0][:, None]

        def col(lv):
            from causalpred import design_matrix

            x, _, _ = design_matrix(std, [lv], TASK, times)
            return x

        triple = np.hstack([col(LaggedVariable(j, 1)) for j in (7, 8, 9)])
        joint = estimate_cmi(triple, y, None, 10).value
        singles = [estimate_cmi(col(LaggedVariable(j, 1)), y, None, 10).value
                   for j in (7, 8, 9)]
        assert joint >= 3.0 * max(singles)


class TestSynergeticEnsemble:
    def test_ground_truth_sizes(self):
        for seed in range(20):
            _, truth = gen_synergetic_member(10, 300, seed)
            assert len(truth.true_drivers) == 8
            assert len(truth.synergetic_drivers) == 3
            assert all(v.var != 0 for v in truth.true_drivers)
            vars_used = [v.var for v in truth.true_drivers]
            assert len(set(vars_used)) == 8  # distinct driving processes

    def test_default_parameters(self):
        _, truth = gen_synergetic_member(10, 300, 0)
        assert truth.model_params == {"a": 0.4, "b": 2.0, "c": 0.4}

    def test_rejects_small_n(self):
        with pytest.raises(ValueError, match="N >= 9"):
            gen_synergetic_member(8, 300, 0)

    def test_determinism_and_seed_separation(self):
        a, ta = gen_synergetic_member(10, 400, seed=3)
        b, tb = gen_synergetic_member(10, 400, seed=3)
        np.testing.assert_array_equal(a.values, b.values)
        assert ta == tb
        # same structure, different noise
        c, tc = gen_synergetic_member(10, 400, seed=4, structure_seed=3)
        assert tc.true_drivers == ta.true_drivers
        assert not np.array_equal(c.values, a.values)

    def test_synergy_switch_off(self):
        # with b = 0 the product factors carry no joint information
        panel, truth = gen_synergetic_member(10, 2000, seed=11, b=0.0)
        std, _, _ = standardize_panel(panel)
        times = valid_target_times(std, TASK)
        y = std.values[np.asarray(times), 0][:, None]
        from causalpred import design_matrix

        syn = sorted(truth.synergetic_drivers)
        x, _, _ = design_matrix(std, syn, TASK, times)
        res = shuffle_test(x, y, None, k=10, m=50, alpha=0.05, rng_seed=11)
        assert not res.significant

    def test_members_stay_bounded(self):
        for seed in range(30):
            panel, _ = gen_synergetic_member(10, 625, seed)
            assert np.isfinite(panel.values).all()
            assert np.abs(panel.values).max() < 1e3


class TestGamEnsemble:
    def test_stability_rule_enforced(self):
        for seed in range(20):
            panel, truth = gen_gam_member(4, 600, seed)
            vals = panel.values
            assert np.isfinite(vals).all()
            half = vals.shape[0] // 2
            v1 = vals[:half].var(axis=0)
            v2 = vals[half:].var(axis=0)
            ratio = np.maximum(v1, v2) / np.minimum(v1, v2)
            assert np.all(ratio <= 3.0)

    def test_determinism(self):
        a, ta = gen_gam_member(4, 500, seed=2)
        b, tb = gen_gam_member(4, 500, seed=2)
        np.testing.assert_array_equal(a.values, b.values)
        assert ta == tb

    def test_target_is_most_driven_variable(self):
        _, truth = gen_gam_member(4, 500, seed=3)
        assert 0 <= truth.target < 4
        assert len(truth.true_drivers) == 2
        assert truth.synergetic_drivers == frozenset()

    def test_quadratic_dependence_detectable_without_correlation(self):
        # y = x^2 + noise: zero linear correlation, clear kNN MI signal
        rng = np.random.default_rng(21)
        x = rng.normal(size=2000)
        y = x**2 + rng.normal(size=2000)
        assert abs(np.corrcoef(x, y)[0, 1]) < 0.06
        res = shuffle_test(x[:, None], y[:, None], None, k=10, m=50,
                           alpha=0.05, rng_seed=21)
        assert res.significant
        assert res.observed > 2 * res.threshold


class TestMinimalErrorOracle:
    @staticmethod
    def split(seed, t_learn=400, t_test=100):
        panel, truth = gen_fixed_model(t_learn + t_test, seed)
        std, _, _ = standardize_panel(panel, stats_rows=range(t_learn))
        learn, test = split_learn_test(std, t_learn, TASK)
        return learn, test, truth

    def test_full_driver_set_is_single_subset(self):
        learn, test, truth = self.split(seed=4)
        oracle = minimal_error_oracle(learn, test, truth, TASK, k=10)
        assert set(oracle) == set(range(1, 8))
        full = knn_predict(learn, test, sorted(truth.true_drivers), TASK, 10,
                           valid_target_times(test, TASK))
        assert oracle[7] == pytest.approx(full.srmse)

    def test_oracle_bounds_causal_scheme_choices(self):
        # any subset of true drivers a scheme picks cannot beat the oracle
        learn, test, truth = self.split(seed=5)
        oracle = minimal_error_oracle(learn, test, truth, TASK, k=10)
        est = EstimatorConfig(k_algo=50, k_cmi_mmi=10)
        drivers = PredictorSet(tuple(sorted(truth.true_drivers)),
                               tuple([1.0] * 7))
        times = valid_target_times(test, TASK)
        opt = optimal_subsets(learn, TASK, est, drivers)
        fwd = forward_cmi(learn, TASK, est, drivers.variables, 7)
        for p in range(1, 8):
            for preds in (opt.set_at(p), fwd.set_at(p)):
                srmse = knn_predict(learn, test, preds, TASK, 10, times).srmse
                assert oracle[p] <= srmse + 1e-12

    def test_product_triple_attains_oracle_at_three(self):
        hits = 0
        for seed in range(8):
            learn, test, truth = self.split(seed=100 + seed)
            oracle = minimal_error_oracle(learn, test, truth, TASK, k=10)
            triple = sorted(truth.synergetic_drivers)
            srmse = knn_predict(learn, test, triple, TASK, 10,
                                valid_target_times(test, TASK)).srmse
            hits += oracle[3] == pytest.approx(srmse)
        assert hits >= 5  # majority of members
