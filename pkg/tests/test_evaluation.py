"""ROC/AUC, calibration, and the experiment harness."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from neuralfp import (
    BankConfig,
    ConfigError,
    DetectorConfig,
    ExperimentConfig,
    InsufficientDataError,
    Rule,
    auc,
    calibrate_threshold,
    detect,
    roc_curve,
    run_experiment,
)
from neuralfp.evaluation import _BankArrays, _score_rows, build_class_banks, load_class_data


def pair_count_auc(clean, attacked):
    """O(n^2) Mann-Whitney oracle: P(attacked > clean) + half P(equal)."""
    clean = np.asarray(clean, dtype=np.float64)
    attacked = np.asarray(attacked, dtype=np.float64)
    wins = ties = 0
    for a in attacked:
        for c in clean:
            if a > c:
                wins += 1
            elif a == c:
                ties += 1
    return (wins + 0.5 * ties) / (clean.size * attacked.size)


def scores_with_ties(rng, n_clean, n_attacked):
    """Mixed continuous and coarsely rounded scores so exact ties occur."""
    clean = rng.standard_normal(n_clean)
    attacked = rng.standard_normal(n_attacked) + rng.uniform(0.0, 1.5)
    coarse = rng.random(n_clean) < 0.5
    clean = np.where(coarse, np.round(clean), clean)
    coarse = rng.random(n_attacked) < 0.5
    attacked = np.where(coarse, np.round(attacked), attacked)
    return clean, attacked


class TestRocCurve:
    def test_perfect_separation(self):
        curve = roc_curve([0.0, 0.0], [1.0, 1.0])
        assert (0.0, 1.0) in {(f, t) for f, t, _ in curve.points}
        assert auc(curve) == 1.0

    def test_indistinguishable_scores(self):
        scores = [0.1, 0.5, 0.9, 0.3]
        curve = roc_curve(scores, scores)
        assert auc(curve) == pytest.approx(0.5, abs=1e-15)

    def test_hand_counted_four_pairs(self):
        # Pairs: (0,0.5)+ (0,1.5)+ (1,0.5)- (1,1.5)+ -> 3/4.
        curve = roc_curve([0.0, 1.0], [0.5, 1.5])
        assert auc(curve) == pytest.approx(0.75, abs=1e-15)

    def test_endpoints_and_monotonicity(self):
        rng = np.random.default_rng(5)
        clean, attacked = scores_with_ties(rng, 37, 53)
        curve = roc_curve(clean, attacked)
        assert curve.fpr[0] == curve.tpr[0] == 0.0
        assert curve.fpr[-1] == curve.tpr[-1] == 1.0
        assert np.all(np.diff(curve.fpr) >= 0)
        assert np.all(np.diff(curve.tpr) >= 0)
        assert np.all(np.diff(curve.thresholds) <= 0)

    def test_empty_inputs_rejected(self):
        with pytest.raises(InsufficientDataError):
            roc_curve([], [1.0])
        with pytest.raises(InsufficientDataError):
            roc_curve([1.0], [])

    def test_nan_rejected(self):
        with pytest.raises(ConfigError):
            roc_curve([np.nan], [1.0])


class TestAucOracle:
    def test_matches_pair_counting_with_ties(self):
        rng = np.random.default_rng(123)
        for _ in range(100):
            clean, attacked = scores_with_ties(
                rng, int(rng.integers(2, 120)), int(rng.integers(2, 120))
            )
            got = auc(roc_curve(clean, attacked))
            assert abs(got - pair_count_auc(clean, attacked)) <= 1e-12


class TestCalibrateThreshold:
    def test_order_statistic_by_hand(self):
        scores = list(range(1, 101))
        assert calibrate_threshold(scores, 0.05) == 95.0
        above = sum(s > 95 for s in scores)
        assert above / 100 <= 0.05

    def test_all_equal_scores(self):
        assert calibrate_threshold([3.25] * 17, 0.01) == 3.25

    def test_target_bounds(self):
        with pytest.raises(ConfigError):
            calibrate_threshold([1.0, 2.0], 0.0)
        with pytest.raises(ConfigError):
            calibrate_threshold([1.0, 2.0], 1.0)

    def test_empty_rejected(self):
        with pytest.raises(InsufficientDataError):
            calibrate_threshold([], 0.05)

    @settings(max_examples=60, deadline=None)
    @given(
        seed=st.integers(0, 2**32 - 1),
        n=st.integers(1, 150),
        target=st.sampled_from([0.01, 0.02, 0.05, 0.1, 0.25, 0.5]),
    )
    def test_smallest_feasible_threshold(self, seed, n, target):
        # Sweep oracle: the returned threshold satisfies the FPR bound and
        # every smaller candidate score value violates it.
        rng = np.random.default_rng(seed)
        scores = rng.standard_normal(n)
        if rng.random() < 0.5:
            scores = np.round(scores * 2) / 2  # force ties
        threshold = calibrate_threshold(scores, target)
        assert (scores > threshold).mean() <= target
        for value in np.unique(scores):
            if value < threshold:
                assert (scores > value).mean() > target


class TestScoreRowsMatchesDetect:
    def test_harness_and_detect_agree(self, small_data_dir):
        config = ExperimentConfig(
            bank=BankConfig(
                fingerprint_size=20, num_candidates=2_000,
                effect_threshold=1.0, master_seed=5,
            ),
            k_values=(4, 9),
            target_fprs=(0.05,),
            n_seeds=1,
            base_seed=77,
        )
        data = [load_class_data(small_data_dir, 0)]
        bank = build_class_banks(data, config)[0]
        arrays = _BankArrays(bank)
        rows = data[0].clean_test.values[:10]

        def rng_for_row(row):
            return np.random.default_rng([77, 0, row])

        scores = _score_rows(
            rows, arrays, (Rule.LIKELIHOOD_RATIO, Rule.VOTE, Rule.ANOMALY),
            (4, 9), rng_for_row,
        )
        for row in range(10):
            for k in (4, 9):
                for rule in (Rule.LIKELIHOOD_RATIO, Rule.VOTE, Rule.ANOMALY):
                    verdict = detect(
                        rows[row],
                        bank,
                        DetectorConfig(rule=rule, n_fingerprints=k, threshold=0.0),
                        np.random.default_rng([77, 0, row]),
                    )
                    assert scores[(rule, k)][row] == verdict.attack_score


@pytest.fixture(scope="module")
def tiny_report(small_data_dir):
    config = ExperimentConfig(
        bank=BankConfig(
            fingerprint_size=20, num_candidates=2_000,
            effect_threshold=1.0, master_seed=5,
        ),
        rules=(Rule.LIKELIHOOD_RATIO, Rule.VOTE, Rule.ANOMALY),
        k_values=(2, 6),
        target_fprs=(0.02, 0.05),
        n_seeds=2,
        base_seed=99,
    )
    return config, run_experiment(small_data_dir, config)


class TestRunExperiment:
    def test_cell_grid_is_complete(self, tiny_report):
        config, report = tiny_report
        assert report.class_ids == (0, 1)
        expected = len(config.rules) * len(config.k_values) * 2 * config.n_seeds
        assert len(report.cells) == expected
        for cell in report.cells:
            assert 0.0 <= cell.auc <= 1.0
            for op in cell.operating_points:
                assert 0.0 <= op.tpr <= 1.0
                assert 0.0 <= op.fpr <= 1.0

    def test_aggregates_are_cell_means(self, tiny_report):
        config, report = tiny_report
        for rule in config.rules:
            for k in config.k_values:
                group = [c for c in report.cells if c.rule is rule and c.k == k]
                agg = report.aggregate(rule, k)
                assert agg.auc_mean == pytest.approx(
                    np.mean([c.auc for c in group]), rel=1e-12
                )
                for target in config.target_fprs:
                    assert agg.point(target).tpr_mean == pytest.approx(
                        np.mean([c.point(target).tpr for c in group]), rel=1e-12
                    )

    def test_signal_is_detected_in_small_world(self, tiny_report):
        config, report = tiny_report
        agg = report.aggregate(Rule.LIKELIHOOD_RATIO, 6)
        assert agg.auc_mean > 0.9

    def test_rerun_is_identical(self, small_data_dir, tiny_report):
        config, report = tiny_report
        again = run_experiment(small_data_dir, config)
        assert again.to_dict() == report.to_dict()

    def test_report_dict_round_trips_to_json(self, tiny_report):
        import json

        _, report = tiny_report
        doc = json.loads(json.dumps(report.to_dict()))
        assert doc["n_seeds"] == report.n_seeds
        assert len(doc["cells"]) == len(report.cells)

    def test_missing_quadruple_rejected(self, tmp_path, small_data_dir):
        import shutil

        broken = tmp_path / "broken"
        broken.mkdir()
        for path in small_data_dir.iterdir():
            shutil.copy(path, broken / path.name)
        (broken / "class1_attacked_test.nfat").unlink()
        config = ExperimentConfig(
            bank=BankConfig(fingerprint_size=5, num_candidates=10, master_seed=0),
            k_values=(2,), n_seeds=1,
        )
        with pytest.raises(Exception, match="missing table"):
            run_experiment(broken, config)
