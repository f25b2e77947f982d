import json
import random
from fractions import Fraction

import pytest

from oracles import (
    accuracy_ref,
    f1_ref,
    mean_ref,
    per_class_f1_ref,
    precision_at_k_ref,
    recall_at_k_ref,
)
from pcrqa.dataset import Necessity
from pcrqa.metrics import (
    CrossValidationError,
    EvalSample,
    MetricsReport,
    classification_metrics,
    corpus_average,
    cross_validate,
    evaluate_samples,
    f1_at_k,
    precision_at_k,
    recall_at_k,
    render_table,
)

N, U = Necessity.NECESSARY, Necessity.UNNECESSARY


def _random_instance(rng):
    labels = [f"t{i}" for i in range(12)]
    true = set(rng.sample(labels, rng.randint(1, 6)))
    predicted = rng.sample(labels, rng.randint(0, 10))
    k = rng.choice((1, 2, 3, 5, 10))
    return true, predicted, k


class TestPrecisionAtK:
    def test_examples(self):
        assert precision_at_k({"java", "performance"}, ["java", "python", "c"], 3) == pytest.approx(1 / 3)
        assert precision_at_k({"a", "b", "c"}, ["a", "b", "c"], 3) == 1.0
        assert precision_at_k({"a"}, ["x", "y"], 2) == 0.0


class TestRecallAtK:
    def test_small_true_set_divides_by_k(self):
        assert recall_at_k({"a", "b"}, ["a", "x", "y"], 3) == pytest.approx(1 / 3)

    def test_large_true_set_divides_by_true_size(self):
        assert recall_at_k({"a", "b", "c", "d", "e"}, ["a", "b", "x"], 3) == pytest.approx(2 / 5)

    def test_full_recall(self):
        assert recall_at_k({"a", "b", "c"}, ["a", "b", "c"], 3) == 1.0

    def test_empty_true_set_errors(self):
        with pytest.raises(ValueError):
            recall_at_k(set(), ["a"], 3)

    def test_conventional_flag(self):
        assert recall_at_k({"a", "b"}, ["a", "x", "y"], 3, conventional=True) == pytest.approx(1 / 2)


class TestF1AtK:
    def test_examples(self):
        assert f1_at_k(1 / 3, 1 / 3) == pytest.approx(1 / 3)
        assert f1_at_k(0.0, 0.0) == 0.0
        assert f1_at_k(1.0, 1.0) == 1.0

    def test_bounds(self):
        rng = random.Random(2)
        for _ in range(500):
            p, r = rng.random(), rng.random()
            f1 = f1_at_k(p, r)
            assert 0.0 <= f1 <= 1.0
            assert f1 <= 2 * min(p, r) / (p + r + 1e-12) + 1e-9


class TestCorpusAverage:
    def test_examples(self):
        assert corpus_average([1.0, 0.0]) == 0.5
        assert corpus_average([0.25]) == 0.25
        with pytest.raises(ValueError):
            corpus_average([])

    def test_matches_fraction_oracle(self):
        rng = random.Random(3)
        values = [Fraction(rng.randint(0, 1000), rng.randint(1, 1000)) for _ in range(1000)]
        expected = mean_ref(values)
        assert abs(corpus_average([float(v) for v in values]) - float(expected)) <= 1e-12


class TestClassificationMetrics:
    def test_all_correct(self):
        out = classification_metrics([N, U, N], [N, U, N])
        assert out == {"accuracy": 1.0, "f1_necessary": 1.0, "f1_unnecessary": 1.0}

    def test_all_flipped_balanced(self):
        out = classification_metrics([N, N, U, U], [U, U, N, N])
        assert out["accuracy"] == 0.0

    def test_confusion_matrix_example(self):
        out = classification_metrics([N, N, U, U], [N, U, U, U])
        assert out["accuracy"] == pytest.approx(0.75)
        assert out["f1_necessary"] == pytest.approx(2 / 3)
        assert out["f1_unnecessary"] == pytest.approx(0.8)

    def test_absent_class_zero(self):
        out = classification_metrics([N, N], [N, N])
        assert out["f1_unnecessary"] == 0.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            classification_metrics([N], [N, U])

    def test_matches_oracle_on_random_labelings(self):
        rng = random.Random(4)
        for _ in range(200):
            n = rng.randint(1, 30)
            gold = [rng.choice((N, U)) for _ in range(n)]
            pred = [rng.choice((N, U)) for _ in range(n)]
            out = classification_metrics(gold, pred)
            assert abs(out["accuracy"] - float(accuracy_ref(gold, pred))) <= 1e-12
            assert abs(out["f1_necessary"] - float(per_class_f1_ref(gold, pred, N))) <= 1e-12
            assert abs(out["f1_unnecessary"] - float(per_class_f1_ref(gold, pred, U))) <= 1e-12


class TestOracleEquivalence:
    def test_thousand_random_instances_per_metric(self):
        rng = random.Random(5)
        for _ in range(1000):
            true, predicted, k = _random_instance(rng)
            p_ref = precision_at_k_ref(true, predicted, k)
            r_ref = recall_at_k_ref(true, predicted, k)
            assert abs(precision_at_k(true, predicted, k) - float(p_ref)) <= 1e-12
            assert abs(recall_at_k(true, predicted, k) - float(r_ref)) <= 1e-12
            assert abs(f1_at_k(float(p_ref), float(r_ref)) - float(f1_ref(p_ref, r_ref))) <= 1e-12


class TestEvaluateSamples:
    def _samples(self, rng, n=25):
        labels = [f"t{i}" for i in range(9)]
        out = []
        for _ in range(n):
            out.append(
                EvalSample(
                    true_tags=frozenset(rng.sample(labels, rng.randint(1, 4))),
                    predicted_tags=tuple(rng.sample(labels, rng.randint(0, 9))),
                    gold_necessity=rng.choice((N, U)),
                    predicted_necessity=rng.choice((N, U)),
                )
            )
        return out

    def test_permutation_invariance(self):
        rng = random.Random(6)
        samples = self._samples(rng)
        report_a = evaluate_samples(samples)
        shuffled = samples[:]
        rng.shuffle(shuffled)
        report_b = evaluate_samples(shuffled)
        assert report_a.to_payload() == report_b.to_payload()

    def test_values_in_range_and_k_set(self):
        samples = self._samples(random.Random(7))
        report = evaluate_samples(samples, k_set=(3, 5, 10))
        assert set(report.per_k) == {3, 5, 10}
        for vals in report.per_k.values():
            for v in vals.values():
                assert 0.0 <= v <= 1.0
        assert report.n_requests == len(samples)

    def test_payload_round_trip(self):
        report = evaluate_samples(self._samples(random.Random(8)), fold_id=4)
        again = MetricsReport.from_payload(json.loads(json.dumps(report.to_payload())))
        assert again.to_payload() == report.to_payload()

    def test_render_table_contains_rows(self):
        report = evaluate_samples(self._samples(random.Random(9)))
        table = render_table(report)
        assert "@3" in table and "accuracy" in table


class TestCrossValidate:
    def _fold_report(self, value, n=10, fold_id=None):
        return MetricsReport(
            per_k={3: {"precision": value, "recall": value, "f1": value}},
            accuracy=value, f1_necessary=value, f1_unnecessary=value,
            n_requests=n, fold_id=fold_id,
        )

    def test_count_contract(self):
        splits = [(list(range(8)), [8], [9])] * 10
        reports, mean = cross_validate(splits, lambda fid, s: self._fold_report(0.5, fold_id=fid))
        assert len(reports) == 10
        assert mean.fold_id is None
        assert mean.n_requests == 100

    def test_mean_of_identical_folds(self):
        reports, mean = cross_validate(
            [([0], [1], [2])] * 2, lambda fid, s: self._fold_report(0.7, fold_id=fid)
        )
        assert mean.accuracy == pytest.approx(0.7)
        assert mean.per_k[3]["f1"] == pytest.approx(0.7)

    def test_external_resummation_oracle(self):
        rng = random.Random(10)
        reports, mean = cross_validate(
            [([0], [1], [2])] * 10,
            lambda fid, s: self._fold_report(rng.random(), fold_id=fid),
        )
        payloads = [json.loads(json.dumps(r.to_payload())) for r in reports]
        external = sum(p["accuracy"] for p in payloads) / len(payloads)
        assert abs(mean.accuracy - external) <= 1e-12
        external_f1 = sum(p["per_k"]["3"]["f1"] for p in payloads) / len(payloads)
        assert abs(mean.per_k[3]["f1"] - external_f1) <= 1e-12

    def test_failing_fold_names_fold_and_preserves_partials(self):
        def runner(fid, split):
            if fid == 2:
                raise RuntimeError("boom")
            return self._fold_report(0.5, fold_id=fid)

        with pytest.raises(CrossValidationError) as exc_info:
            cross_validate([([0], [1], [2])] * 4, runner)
        assert exc_info.value.fold_id == 2
        assert len(exc_info.value.partial) == 2
