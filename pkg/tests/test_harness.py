import hashlib
from pathlib import Path

import numpy as np
import pytest

from lidkit import dsp, harness, submission as sub
from lidkit.errors import InvalidPlan, InvalidSpec

TRAIN_LANGS = ["alpha", "bravo", "charlie"]


def tiny_counts():
    return {
        "train": {lang: 8 for lang in TRAIN_LANGS},
        "test": {lang: 4 for lang in TRAIN_LANGS},
        "reference": {"delta": 3, "echo": 3},
        "zr_test": {"delta": 4, "echo": 4},
    }


def all_specs():
    return harness.default_training_specs() + harness.default_zero_resource_specs()


def corpus_digest(corpus_dir: Path) -> str:
    h = hashlib.sha256()
    for path in sorted(corpus_dir.rglob("*")):
        if path.is_file():
            h.update(path.name.encode())
            h.update(path.read_bytes())
    return h.hexdigest()


FAST_CONFIG = {"train.epochs": "3", "train.batch_size": "8", "train.learn_rate": "0.06"}


class TestSynthesis:
    def test_one_second_request_gives_16k_samples(self):
        spec = harness.default_training_specs()[0]
        samples = harness.synth_utterance(spec, 1.0, np.random.default_rng(0))
        assert abs(samples.size - 16000) <= 160
        assert np.max(np.abs(samples)) <= 1.0

    def test_disjoint_bands_separate_in_filterbank_space(self):
        specs = harness.default_training_specs()
        means = []
        for i, spec in enumerate(specs):
            rows = []
            for k in range(3):
                rng = np.random.default_rng([i, k])
                wave = dsp.Waveform(harness.synth_utterance(spec, 1.5, rng))
                rows.append(dsp.extract_filterbanks(wave).frames.mean(axis=0))
            means.append(np.mean(rows, axis=0))
        argmaxes = [int(np.argmax(m)) for m in means]
        assert len(set(argmaxes)) == len(specs)

    def test_invalid_spec_rejected(self):
        bad = harness.SyntheticLanguageSpec("x", (9000.0,), (100.0,))
        with pytest.raises(InvalidSpec):
            bad.validate()
        with pytest.raises(InvalidSpec):
            harness.SyntheticLanguageSpec("", (500.0,), (100.0,)).validate()

    def test_identity_channel_is_identity(self):
        rng = np.random.default_rng(1)
        samples = rng.standard_normal(4000)
        out = harness.apply_channel(samples, harness.ChannelSpec(), rng)
        assert np.array_equal(out, samples)

    def test_lowpass_removes_high_band_energy(self):
        t = np.arange(16000) / 16000.0
        high = np.sin(2 * np.pi * 6000 * t)
        low = np.sin(2 * np.pi * 500 * t)
        channel = harness.ChannelSpec(cutoff_hz=2000.0)
        rng = np.random.default_rng(2)
        hp = harness.apply_channel(high, channel, rng)
        lp = harness.apply_channel(low, channel, rng)
        assert np.mean(hp**2) < 0.01 * np.mean(high**2)
        assert np.mean(lp**2) > 0.5 * np.mean(low**2)


class TestCorpus:
    def test_same_seed_byte_identical(self, tmp_path):
        counts = tiny_counts()
        harness.generate_corpus(all_specs(), counts, seed=5, out_dir=tmp_path / "a")
        harness.generate_corpus(all_specs(), counts, seed=5, out_dir=tmp_path / "b")
        assert corpus_digest(tmp_path / "a") == corpus_digest(tmp_path / "b")

    def test_parallel_generation_matches_serial(self, tmp_path):
        counts = {"train": {lang: 3 for lang in TRAIN_LANGS}}
        harness.generate_corpus(all_specs()[:3], counts, seed=9, out_dir=tmp_path / "serial")
        harness.generate_corpus(
            all_specs()[:3], counts, seed=9, out_dir=tmp_path / "parallel", jobs=4
        )
        assert corpus_digest(tmp_path / "serial") == corpus_digest(tmp_path / "parallel")

    def test_different_seed_differs(self, tmp_path):
        counts = {"train": {lang: 2 for lang in TRAIN_LANGS}}
        harness.generate_corpus(all_specs()[:3], counts, seed=5, out_dir=tmp_path / "a")
        harness.generate_corpus(all_specs()[:3], counts, seed=6, out_dir=tmp_path / "b")
        assert corpus_digest(tmp_path / "a") != corpus_digest(tmp_path / "b")

    def test_manifest_and_keys_written(self, tmp_path):
        entries = harness.generate_corpus(all_specs(), tiny_counts(), 1, tmp_path)
        assert (tmp_path / "manifest.txt").exists()
        key = sub.read_key_file(tmp_path / "key_train.txt")
        assert key.language_list == TRAIN_LANGS
        train_ids = {e.utt_id for e in entries if e.split == "train"}
        assert set(key.entries) == train_ids
        again = harness.read_manifest(tmp_path)
        assert again == entries


class TestPlan:
    def test_zero_resource_overlap_rejected(self, tmp_path):
        harness.generate_corpus(all_specs(), tiny_counts(), 1, tmp_path)
        plan = harness.ExperimentPlan(
            task=harness.ZERO_RESOURCE,
            train_languages=TRAIN_LANGS,
            zero_languages=["alpha", "delta"],
        )
        with pytest.raises(InvalidPlan):
            plan.validate(harness.read_manifest(tmp_path))

    def test_duplicate_utt_across_splits_rejected(self):
        entries = [
            harness.ManifestEntry("u1", "alpha", "wav/u1.wav", "train"),
            harness.ManifestEntry("u1", "alpha", "wav/u1.wav", "test"),
        ]
        plan = harness.ExperimentPlan(task=harness.SHORT_UTTERANCE, train_languages=["alpha"])
        with pytest.raises(InvalidPlan):
            plan.validate(entries)

    def test_unknown_task_rejected(self):
        plan = harness.ExperimentPlan(task="mystery", train_languages=TRAIN_LANGS)
        with pytest.raises(InvalidPlan):
            plan.validate([])


@pytest.fixture(scope="module")
def small_corpus(tmp_path_factory):
    corpus = tmp_path_factory.mktemp("corpus")
    counts = {
        "train": {lang: 16 for lang in TRAIN_LANGS},
        "test": {lang: 6 for lang in TRAIN_LANGS},
        "reference": {"delta": 4, "echo": 4},
        "zr_test": {"delta": 6, "echo": 6},
    }
    harness.generate_corpus(all_specs(), counts, seed=11, out_dir=corpus)
    return corpus


class TestRunTask:
    def test_identity_channel_equals_short_utterance(self, small_corpus, tmp_path):
        short_plan = harness.ExperimentPlan(
            task=harness.SHORT_UTTERANCE, train_languages=TRAIN_LANGS, seed=11
        )
        short = harness.run_task(short_plan, small_corpus, tmp_path / "s", FAST_CONFIG)
        matched_plan = harness.ExperimentPlan(
            task=harness.CROSS_CHANNEL,
            train_languages=TRAIN_LANGS,
            seed=11,
            channel=harness.ChannelSpec(),
        )
        matched = harness.run_task(
            matched_plan, small_corpus, tmp_path / "m", FAST_CONFIG, params=short.params
        )
        assert abs(matched.report.cavg - short.report.cavg) <= 1e-12
        assert abs(matched.report.eer - short.report.eer) <= 1e-12
        assert matched.score_path.read_text().splitlines() == [
            line for line in short.score_path.read_text().splitlines()
        ]

    def test_zero_resource_runs_and_writes_outputs(self, small_corpus, tmp_path):
        plan = harness.ExperimentPlan(
            task=harness.ZERO_RESOURCE,
            train_languages=TRAIN_LANGS,
            zero_languages=["delta", "echo"],
            seed=11,
        )
        result = harness.run_task(plan, small_corpus, tmp_path, FAST_CONFIG)
        assert result.score_path.exists()
        assert result.report_path.exists()
        assert result.det_path.exists()
        key = sub.read_key_file(small_corpus / "key_zr_test.txt")
        records = sub.read_score_file(result.score_path, key.language_list)
        assert len(records) == len(key.entries)
        assert 0.0 <= result.report.cavg <= 1.0

    def test_report_file_matches_report(self, small_corpus, tmp_path):
        plan = harness.ExperimentPlan(
            task=harness.SHORT_UTTERANCE, train_languages=TRAIN_LANGS, seed=3
        )
        result = harness.run_task(plan, small_corpus, tmp_path, FAST_CONFIG)
        text = result.report_path.read_text()
        first = text.splitlines()[0].split()
        assert first[0] == "cavg"
        assert float(first[1]) == pytest.approx(result.report.cavg, abs=1e-9)
