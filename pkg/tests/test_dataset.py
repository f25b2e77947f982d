import random

import pytest

from conftest import FIXTURE_DROPPED_IDS, FIXTURE_RARE_TAGS, FIXTURE_THETA
from pcrqa.dataset import (
    Necessity,
    ReviewRequest,
    TagNormalizeError,
    corpus_stats,
    filter_rare_tags,
    label_necessity,
    load_corpus,
    normalize_tag,
    request_from_record,
    request_to_record,
    save_corpus,
    split_folds,
)


def _req(i, tags, score=0):
    return ReviewRequest(
        id=i, title=f"t{i}", text="body", code_snippets=(), tags=tuple(tags),
        score=score, necessity=label_necessity(score),
    )


class TestNecessity:
    def test_boundary(self):
        assert label_necessity(4, 4) is Necessity.NECESSARY
        assert label_necessity(3, 4) is Necessity.UNNECESSARY

    def test_degenerate_threshold(self):
        assert label_necessity(0, 0) is Necessity.NECESSARY

    def test_monotone_in_score(self):
        rng = random.Random(3)
        for _ in range(300):
            threshold = rng.randint(0, 10)
            score = rng.randint(-10, 20)
            low = label_necessity(score, threshold)
            high = label_necessity(score + rng.randint(0, 10), threshold)
            if low is Necessity.NECESSARY:
                assert high is Necessity.NECESSARY


class TestNormalizeTag:
    def test_hyphen(self):
        assert normalize_tag("object-oriented") == ["object", "oriented"]

    def test_single_word(self):
        assert normalize_tag("java") == ["java"]

    def test_version_tag(self):
        assert normalize_tag("python3.x") == ["python", "3", "x"]

    def test_plus_and_digits(self):
        assert normalize_tag("c++11") == ["c", "11"]

    def test_error_on_empty_normalization(self):
        with pytest.raises(TagNormalizeError):
            normalize_tag("++")
        with pytest.raises(TagNormalizeError):
            normalize_tag("")

    def test_idempotent_on_own_output(self):
        rng = random.Random(5)
        alphabet = "abc12.-+xz"
        for _ in range(300):
            surface = "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 12)))
            try:
                words = normalize_tag(surface)
            except TagNormalizeError:
                continue
            assert normalize_tag(" ".join(words)) == words


class TestFilterRareTags:
    def test_boundary_below_threshold_removed(self):
        corpus = [_req(i, ["common", "rare"]) for i in range(2)] + [
            _req(i + 10, ["common"]) for i in range(1)
        ]
        filtered, vocab = filter_rare_tags(corpus, theta=3)
        assert "rare" not in vocab
        assert "common" in vocab
        assert vocab.entries["common"]["frequency"] == 3

    def test_frequency_exactly_theta_survives(self):
        corpus = [_req(i, ["edge"]) for i in range(3)]
        _, vocab = filter_rare_tags(corpus, theta=3)
        assert vocab.entries["edge"]["frequency"] == 3

    def test_noop_when_all_frequent(self):
        corpus = [_req(i, ["a", "b"]) for i in range(5)]
        filtered, vocab = filter_rare_tags(corpus, theta=3)
        assert filtered == corpus
        assert set(vocab.entries) == {"a", "b"}

    def test_tagless_requests_dropped(self):
        corpus = [_req(1, ["only-rare"]), _req(2, ["kept"]), _req(3, ["kept"])]
        filtered, vocab = filter_rare_tags(corpus, theta=2)
        assert [r.id for r in filtered] == [2, 3]
        assert set(vocab.entries) == {"kept"}

    def test_empty_corpus(self):
        filtered, vocab = filter_rare_tags([], theta=3)
        assert filtered == [] and len(vocab) == 0

    def test_surviving_min_frequency_at_least_theta(self):
        rng = random.Random(11)
        tags = [f"t{i}" for i in range(8)]
        corpus = [
            _req(i, rng.sample(tags, rng.randint(1, 3))) for i in range(40)
        ]
        theta = 5
        filtered, vocab = filter_rare_tags(corpus, theta)
        assert all(e["frequency"] >= theta for e in vocab.entries.values())
        # recount on the filtered corpus agrees with the stored frequencies
        counts = {}
        for req in filtered:
            for tag in req.tags:
                counts[tag] = counts.get(tag, 0) + 1
        assert counts == {t: e["frequency"] for t, e in vocab.entries.items()}


class TestSplitFolds:
    def test_ten_items_ten_folds(self):
        splits = split_folds(10, folds=10, seed=1)
        assert len(splits) == 10
        for train, val, test in splits:
            assert len(test) == 1
            assert len(train) + len(val) + len(test) == 10

    def test_deterministic_for_seed(self):
        assert split_folds(57, 10, seed=9) == split_folds(57, 10, seed=9)
        assert split_folds(57, 10, seed=9) != split_folds(57, 10, seed=10)

    def test_test_sets_partition_corpus(self):
        splits = split_folds(103, 10, seed=2)
        seen = []
        for _, _, test in splits:
            seen.extend(test)
        assert sorted(seen) == list(range(103))
        for train, val, test in splits:
            assert set(train) | set(val) | set(test) == set(range(103))
            assert not (set(train) & set(val))
            assert not (set(train) & set(test))
            assert not (set(val) & set(test))

    def test_ratios_near_8_1_1(self):
        splits = split_folds(10000, 10, seed=0)
        train, val, test = splits[0]
        assert abs(len(train) / 10000 - 0.8) < 0.02
        assert abs(len(val) / 10000 - 0.1) < 0.02
        assert abs(len(test) / 10000 - 0.1) < 0.02

    def test_published_corpus_counts_are_8_1_1_within_rounding(self):
        train, val, test = 61688, 6855, 7616
        total = train + val + test
        assert abs(train / total - 0.8) < 0.015
        assert abs(val / total - 0.1) < 0.015
        assert abs(test / total - 0.1) < 0.015

    def test_errors(self):
        with pytest.raises(ValueError):
            split_folds(5, folds=10)
        with pytest.raises(ValueError):
            split_folds(10, folds=1)


class TestFixtureCorpus:
    def test_counts_and_rare_tags(self, fixture_corpus):
        corpus, vocab = fixture_corpus
        assert len(corpus) == 48
        assert set(vocab.entries) == {"c++", "java", "object-oriented", "performance", "python", "python-3.x"}
        assert FIXTURE_RARE_TAGS.isdisjoint(vocab.entries)
        assert {r.id for r in corpus}.isdisjoint(FIXTURE_DROPPED_IDS)
        assert vocab.entries["object-oriented"]["frequency"] == FIXTURE_THETA

    def test_boundary_necessity(self, fixture_corpus):
        corpus, _ = fixture_corpus
        by_id = {r.id: r for r in corpus}
        assert by_id[1].score == 4 and by_id[1].necessity is Necessity.NECESSARY
        assert by_id[2].score == 3 and by_id[2].necessity is Necessity.UNNECESSARY
        for req in corpus:
            expected = Necessity.NECESSARY if req.score >= 4 else Necessity.UNNECESSARY
            assert req.necessity is expected

    def test_max_words_alternative_mask_count(self, fixture_corpus):
        _, vocab = fixture_corpus
        # python-3.x decomposes into three words; nothing longer in the fixture
        assert vocab.max_words() == 3

    def test_stats_invariant(self, fixture_corpus):
        corpus, vocab = fixture_corpus
        splits = split_folds(len(corpus), 4, seed=0)
        stats = corpus_stats(corpus, splits[0], vocab)
        assert stats.n_labels_train <= stats.n_labels_total
        assert stats.n_train + stats.n_val + stats.n_test == len(corpus)


class TestSerialization:
    def test_round_trip(self, tmp_path, fixture_corpus):
        corpus, _ = fixture_corpus
        path = tmp_path / "corpus.ndjson"
        save_corpus(corpus, path)
        assert load_corpus(path) == corpus

    def test_record_round_trip(self):
        req = _req(3, ["java", "c++"], score=7)
        assert request_from_record(request_to_record(req)) == req
