"""Synthetic corpus generator and end-to-end experiment driver.

Real multilingual speech cannot ship with the toolkit, so the harness
fabricates "languages" as spectral-profile classes: band-shaped noise plus
harmonic tone bursts whose energy follows the language's band profile.
That is enough to exercise every pipeline stage at desk scale; absolute
numbers from the synthetic corpus say nothing about real speech.

Generation is deterministic per seed. Every utterance derives its own RNG
from (seed, split, language, index), so regeneration or parallel
generation can never change the output.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import backend as backend_mod
from . import config as cfgmod
from . import dsp, metrics, net, submission
from .errors import (
    AllFramesRemoved,
    InvalidPlan,
    InvalidSpec,
    TooFewFrames,
    TooShort,
)

log = logging.getLogger(__name__)

SAMPLE_RATE = 16000

SHORT_UTTERANCE = "short_utterance"
CROSS_CHANNEL = "cross_channel"
ZERO_RESOURCE = "zero_resource"
TASKS = (SHORT_UTTERANCE, CROSS_CHANNEL, ZERO_RESOURCE)


@dataclass(frozen=True)
class ChannelSpec:
    """Channel simulation: optional FIR low-pass plus additive noise."""

    cutoff_hz: float | None = None
    snr_db: float | None = None
    num_taps: int = 101

    @property
    def is_identity(self) -> bool:
        return self.cutoff_hz is None and self.snr_db is None


@dataclass(frozen=True)
class SyntheticLanguageSpec:
    """Recipe for one synthetic language: where its energy lives."""

    language_id: str
    band_centers_hz: tuple[float, ...]
    bandwidths_hz: tuple[float, ...]
    pitch_range_hz: tuple[float, float] = (90.0, 200.0)
    length_range_s: tuple[float, float] = (1.4, 2.2)
    noise_level: float = 0.002

    def validate(self):
        if not self.language_id or any(c.isspace() for c in self.language_id):
            raise InvalidSpec(f"bad language id {self.language_id!r}")
        if len(self.band_centers_hz) != len(self.bandwidths_hz) or not self.band_centers_hz:
            raise InvalidSpec(f"{self.language_id}: band centers/widths must pair up")
        for center in self.band_centers_hz:
            if not 0.0 < center < 8000.0:
                raise InvalidSpec(f"{self.language_id}: band center {center} outside (0, 8000)")
        if any(bw <= 0 for bw in self.bandwidths_hz):
            raise InvalidSpec(f"{self.language_id}: bandwidths must be positive")
        lo, hi = self.length_range_s
        if not 0.0 < lo <= hi:
            raise InvalidSpec(f"{self.language_id}: bad length range {self.length_range_s}")
        if not 0.0 < self.pitch_range_hz[0] <= self.pitch_range_hz[1]:
            raise InvalidSpec(f"{self.language_id}: bad pitch range")


def default_training_specs() -> list[SyntheticLanguageSpec]:
    """Three well-separated spectral classes for closed-set experiments."""
    return [
        SyntheticLanguageSpec("alpha", (500.0, 1150.0), (160.0, 220.0)),
        SyntheticLanguageSpec("bravo", (2300.0, 3300.0), (260.0, 320.0)),
        SyntheticLanguageSpec("charlie", (4600.0, 6100.0), (380.0, 450.0)),
    ]


def default_zero_resource_specs() -> list[SyntheticLanguageSpec]:
    """Two spectral classes disjoint from the training trio."""
    return [
        SyntheticLanguageSpec("delta", (900.0, 2700.0), (200.0, 300.0)),
        SyntheticLanguageSpec("echo", (3900.0, 5200.0), (300.0, 380.0)),
    ]


# ---------------------------------------------------------------------------
# signal synthesis

def _band_profile(freqs: np.ndarray, spec: SyntheticLanguageSpec) -> np.ndarray:
    profile = np.zeros_like(freqs)
    for center, width in zip(spec.band_centers_hz, spec.bandwidths_hz):
        profile += np.exp(-(((freqs - center) / width) ** 2))
    return profile


def synth_utterance(
    spec: SyntheticLanguageSpec, duration_s: float, rng: np.random.Generator
) -> np.ndarray:
    """One utterance: band-shaped noise under harmonic tone bursts."""
    spec.validate()
    n = max(int(round(duration_s * SAMPLE_RATE)), SAMPLE_RATE // 10)
    freqs = np.fft.rfftfreq(n, 1.0 / SAMPLE_RATE)
    profile = _band_profile(freqs, spec)

    shaped = np.fft.irfft(np.fft.rfft(rng.standard_normal(n)) * profile, n)
    rms = np.sqrt(np.mean(shaped**2))
    shaped = shaped / max(rms, 1e-12) * 0.05

    bursts = np.zeros(n)
    num_bursts = max(2, int(round(duration_s * 4)))
    for _ in range(num_bursts):
        length = int(rng.uniform(0.20, 0.32) * SAMPLE_RATE)
        length = min(length, n)
        start = int(rng.uniform(0, max(n - length, 1)))
        f0 = rng.uniform(*spec.pitch_range_hz)
        t = np.arange(length) / SAMPLE_RATE
        tone = np.zeros(length)
        k = 1
        while k * f0 < 7600.0:
            amp = profile[np.searchsorted(freqs, k * f0)] / np.sqrt(k)
            if amp > 1e-4:
                tone += amp * np.sin(2 * np.pi * k * f0 * t + rng.uniform(0, 2 * np.pi))
            k += 1
        tone_rms = np.sqrt(np.mean(tone**2))
        if tone_rms > 0:
            tone = tone / tone_rms * 0.25
        bursts[start : start + length] += np.hanning(length) * tone

    signal = bursts + shaped + rng.standard_normal(n) * spec.noise_level
    peak = np.max(np.abs(signal))
    return signal / peak * 0.5 if peak > 0 else signal


def apply_channel(
    samples: np.ndarray, channel: ChannelSpec, rng: np.random.Generator
) -> np.ndarray:
    """Pass a signal through the simulated channel (identity when unset)."""
    out = np.asarray(samples, dtype=np.float64)
    if channel.cutoff_hz is not None:
        taps = channel.num_taps
        m = np.arange(taps) - (taps - 1) / 2.0
        h = np.sinc(2.0 * channel.cutoff_hz / SAMPLE_RATE * m) * np.hamming(taps)
        h /= h.sum()
        out = np.convolve(out, h, mode="same")
    if channel.snr_db is not None:
        power = np.mean(out**2)
        noise_power = power / (10.0 ** (channel.snr_db / 10.0))
        out = out + rng.standard_normal(out.size) * np.sqrt(noise_power)
    return out


# ---------------------------------------------------------------------------
# corpus generation

@dataclass(frozen=True)
class ManifestEntry:
    utt_id: str
    language: str
    path: str  # relative to the corpus directory
    split: str


def write_manifest(entries: list[ManifestEntry]) -> str:
    lines = [f"{e.utt_id} {e.language} {e.path} {e.split}" for e in entries]
    return "\n".join(lines) + ("\n" if lines else "")


def parse_manifest(text: str) -> list[ManifestEntry]:
    entries = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) != 4:
            raise InvalidPlan(f"bad manifest line: {raw!r}")
        entries.append(ManifestEntry(*tokens))
    return entries


def read_manifest(corpus_dir) -> list[ManifestEntry]:
    with open(Path(corpus_dir) / "manifest.txt", "r", encoding="utf-8") as fh:
        return parse_manifest(fh.read())


def _synth_job(spec: SyntheticLanguageSpec, seed_key) -> np.ndarray:
    rng = np.random.default_rng(seed_key)
    duration = rng.uniform(*spec.length_range_s)
    return synth_utterance(spec, duration, rng)


def generate_corpus(
    specs: list[SyntheticLanguageSpec],
    counts: dict[str, dict[str, int]],
    seed: int,
    out_dir,
    jobs: int = 1,
) -> list[ManifestEntry]:
    """Synthesize WAVs plus manifest and per-split trial keys.

    ``counts`` maps split name -> {language id -> utterance count}. Each
    utterance draws from its own RNG keyed by (seed, split, language,
    index), so output is deterministic for a given (specs, counts, seed)
    and independent of ``jobs``.
    """
    if len(specs) < 2:
        raise InvalidSpec("need at least 2 language specs")
    for spec in specs:
        spec.validate()
    by_id = {spec.language_id: spec for spec in specs}
    out_dir = Path(out_dir)
    (out_dir / "wav").mkdir(parents=True, exist_ok=True)

    jobs_list = []  # (spec, seed_key, utt_id, relpath, split)
    for split_idx, split in enumerate(sorted(counts)):
        lang_counts = counts[split]
        key_langs = [s.language_id for s in specs if s.language_id in lang_counts]
        for lang_idx, lang in enumerate(key_langs):
            num = lang_counts[lang]
            if num < 1:
                raise InvalidSpec(f"count for {lang!r}/{split!r} must be >= 1")
            for i in range(num):
                utt_id = f"{lang}-{split}-{i:04d}"
                jobs_list.append(
                    (by_id[lang], [seed, split_idx, lang_idx, i], utt_id, f"wav/{utt_id}.wav", split)
                )

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rendered = list(pool.map(lambda j: _synth_job(j[0], j[1]), jobs_list))
    else:
        rendered = [_synth_job(spec, key) for spec, key, *_ in jobs_list]

    entries: list[ManifestEntry] = []
    for (spec, _, utt_id, rel, split), samples in zip(jobs_list, rendered):
        dsp.write_wav(out_dir / rel, dsp.Waveform(samples, SAMPLE_RATE))
        entries.append(ManifestEntry(utt_id, spec.language_id, rel, split))

    for split in sorted(counts):
        key_langs = [s.language_id for s in specs if s.language_id in counts[split]]
        key_entries = {e.utt_id: e.language for e in entries if e.split == split}
        key = submission.TrialKey(key_langs, key_entries)
        with open(out_dir / f"key_{split}.txt", "w", encoding="utf-8") as fh:
            fh.write(submission.write_key(key))
    with open(out_dir / "manifest.txt", "w", encoding="utf-8") as fh:
        fh.write(write_manifest(entries))
    return entries


# ---------------------------------------------------------------------------
# experiment plan and driver

@dataclass
class ExperimentPlan:
    task: str
    train_languages: list[str]
    zero_languages: list[str] = field(default_factory=list)
    train_split: str = "train"
    test_split: str = "test"
    reference_split: str = "reference"
    zero_test_split: str = "zr_test"
    seed: int = 0
    channel: ChannelSpec = field(default_factory=ChannelSpec)

    def validate(self, entries: list[ManifestEntry]) -> None:
        if self.task not in TASKS:
            raise InvalidPlan(f"unknown task {self.task!r}")
        splits_by_utt: dict[str, set[str]] = {}
        for e in entries:
            splits_by_utt.setdefault(e.utt_id, set()).add(e.split)
        clashes = [u for u, s in splits_by_utt.items() if len(s) > 1]
        if clashes:
            raise InvalidPlan(f"utterance {clashes[0]!r} appears in multiple splits")
        if self.task == ZERO_RESOURCE:
            overlap = set(self.zero_languages) & set(self.train_languages)
            if overlap:
                raise InvalidPlan(
                    f"zero-resource languages overlap training set: {sorted(overlap)}"
                )
            if not self.zero_languages:
                raise InvalidPlan("zero-resource task needs zero_languages")


DEFAULT_CONFIG: dict[str, str] = {
    "net.frame_dim": "16",
    "net.stats_dim": "24",
    "net.embed_dim": "16",
    "train.epochs": "8",
    "train.batch_size": "8",
    "train.learn_rate": "0.06",
    "crop.seconds": "1.0",
}


def _cfg(config: dict[str, str] | None) -> dict[str, str]:
    merged = dict(DEFAULT_CONFIG)
    if config:
        merged.update(config)
    return merged


def _load_features(corpus_dir, entry, fcfg, vcfg, transform=None):
    wave = dsp.read_wav(Path(corpus_dir) / entry.path, fcfg.sample_rate)
    if transform is not None:
        wave = dsp.Waveform(transform(wave.samples), wave.sample_rate)
    return dsp.features_from_waveform(wave, fcfg, vcfg)


def train_network(
    corpus_dir,
    entries: list[ManifestEntry],
    languages: list[str],
    config: dict[str, str] | None = None,
    seed: int = 0,
) -> net.NetworkParams:
    """Train a classifier over ``languages`` on the given manifest entries.

    Label order follows ``languages``. Emits one 'step loss' log line per
    SGD step. Utterances the front end rejects are skipped with a warning.
    """
    cfg = _cfg(config)
    fcfg = dsp.FeatureConfig.from_config(cfg)
    vcfg = dsp.VadConfig.from_config(cfg)
    label_of = {lang: i for i, lang in enumerate(languages)}
    dataset = []
    for entry in entries:
        if entry.language not in label_of:
            continue
        try:
            feats = _load_features(corpus_dir, entry, fcfg, vcfg)
        except (TooShort, AllFramesRemoved) as exc:
            log.warning("training: skipping %s (%s)", entry.utt_id, exc)
            continue
        dataset.append((feats, label_of[entry.language]))
    if not dataset:
        raise InvalidPlan("no usable training utterances")
    params = net.init_network(
        num_classes=len(languages),
        seed=[seed, 1],
        feat_dim=fcfg.num_filters,
        frame_dim=cfgmod.get_int(cfg, "net.frame_dim", 16),
        stats_dim=cfgmod.get_int(cfg, "net.stats_dim", 24),
        embed_dim=cfgmod.get_int(cfg, "net.embed_dim", 16),
    )
    need = net.min_input_frames(params)
    usable = [(f, label) for f, label in dataset if f.num_frames >= need]
    if len(usable) < len(dataset):
        log.warning("training: dropped %d utterance(s) under %d frames",
                    len(dataset) - len(usable), need)
    if not usable:
        raise InvalidPlan("no usable training utterances")
    dataset = usable
    hyper = net.TrainConfig(learn_rate=cfgmod.get_float(cfg, "train.learn_rate", 0.06))
    epochs = cfgmod.get_int(cfg, "train.epochs", 8)
    batch_size = cfgmod.get_int(cfg, "train.batch_size", 8)
    rng = np.random.default_rng([seed, 2])
    step = 0
    for _ in range(epochs):
        order = rng.permutation(len(dataset))
        for lo in range(0, len(order), batch_size):
            batch = [dataset[i] for i in order[lo : lo + batch_size]]
            params, loss = net.train_step(params, batch, hyper)
            step += 1
            log.info("step %d loss %.6f", step, loss)
    return params


def _crop_center(samples: np.ndarray, seconds: float) -> np.ndarray:
    want = int(round(seconds * SAMPLE_RATE))
    if samples.size <= want:
        return samples
    start = (samples.size - want) // 2
    return samples[start : start + want]


@dataclass
class TaskResult:
    report: metrics.EvalReport
    score_path: Path
    report_path: Path
    det_path: Path
    params: net.NetworkParams


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def run_task(
    plan: ExperimentPlan,
    corpus_dir,
    out_dir,
    config: dict[str, str] | None = None,
    params: net.NetworkParams | None = None,
) -> TaskResult:
    """Run one task end to end: train (unless given a model), score, evaluate.

    Failed utterances become -inf score rows; the run itself never aborts
    on a bad segment. Outputs land in ``out_dir`` as scores_<task>.txt,
    report_<task>.txt, and det_<task>.txt.
    """
    cfg = _cfg(config)
    corpus_dir = Path(corpus_dir)
    out_dir = Path(out_dir)
    entries = read_manifest(corpus_dir)
    plan.validate(entries)
    fcfg = dsp.FeatureConfig.from_config(cfg)
    vcfg = dsp.VadConfig.from_config(cfg)
    if params is None:
        train_entries = [e for e in entries if e.split == plan.train_split]
        params = train_network(
            corpus_dir, train_entries, plan.train_languages, cfg, plan.seed
        )

    if plan.task in (SHORT_UTTERANCE, CROSS_CHANNEL):
        key = submission.read_key_file(corpus_dir / f"key_{plan.test_split}.txt")
        languages = key.language_list
        try:
            subset = [plan.train_languages.index(lang) for lang in languages]
        except ValueError:
            raise InvalidPlan(
                f"test key languages {languages} not all in training set "
                f"{plan.train_languages}"
            ) from None
        crop_s = cfgmod.get_float(cfg, "crop.seconds", 1.0)
        test_entries = [e for e in entries if e.split == plan.test_split]
        records = []
        for i, entry in enumerate(test_entries):
            rng = np.random.default_rng([plan.seed, 3, i])

            def transform(samples, _rng=rng):
                if plan.task == CROSS_CHANNEL:
                    samples = apply_channel(samples, plan.channel, _rng)
                return _crop_center(samples, crop_s)

            try:
                feats = _load_features(corpus_dir, entry, fcfg, vcfg, transform)
            except (TooShort, AllFramesRemoved) as exc:
                log.warning("scoring: %s scored -inf (%s)", entry.utt_id, exc)
                records.append(
                    submission.ScoreRecord(entry.utt_id, np.full(len(languages), -np.inf))
                )
                continue
            scores = backend_mod.score_closed_set(params, feats, subset)
            records.append(submission.ScoreRecord(entry.utt_id, scores))
    else:
        key = submission.read_key_file(corpus_dir / f"key_{plan.zero_test_split}.txt")
        languages = key.language_list
        if set(languages) != set(plan.zero_languages):
            raise InvalidPlan(
                f"zero-resource key languages {languages} != plan {plan.zero_languages}"
            )
        references: dict[str, list] = {lang: [] for lang in languages}
        for entry in entries:
            if entry.split != plan.reference_split or entry.language not in references:
                continue
            try:
                references[entry.language].append(
                    _load_features(corpus_dir, entry, fcfg, vcfg)
                )
            except (TooShort, AllFramesRemoved) as exc:
                log.warning("enrollment: skipping %s (%s)", entry.utt_id, exc)
        models = backend_mod.enroll_languages(params, references)
        records = []
        for entry in entries:
            if entry.split != plan.zero_test_split:
                continue
            try:
                feats = _load_features(corpus_dir, entry, fcfg, vcfg)
            except (TooShort, AllFramesRemoved) as exc:
                log.warning("scoring: %s scored -inf (%s)", entry.utt_id, exc)
                records.append(
                    submission.ScoreRecord(entry.utt_id, np.full(len(languages), -np.inf))
                )
                continue
            records.append(
                submission.ScoreRecord(
                    entry.utt_id, backend_mod.score_zero_resource(models, feats, params)
                )
            )

    fill = submission.fill_missing(records, key)
    if fill.num_filled:
        log.warning("%d lost trial(s) filled with -inf", fill.num_filled)
    eval_config = metrics.EvalConfig.for_key(
        key,
        p_target=cfgmod.get_float(cfg, "eval.p_target", metrics.DEFAULT_P_TARGET),
        threshold_policy=cfgmod.get_str(cfg, "eval.policy", metrics.MIN_SWEEP),
        threshold=cfgmod.get_float(cfg, "eval.threshold", 0.0),
    )
    report = metrics.compute_cavg(fill.records, key, eval_config)

    score_path = out_dir / f"scores_{plan.task}.txt"
    report_path = out_dir / f"report_{plan.task}.txt"
    det_path = out_dir / f"det_{plan.task}.txt"
    _write_text(score_path, submission.write_scores(fill.records))
    _write_text(report_path, metrics.report_text(report))
    _write_text(det_path, metrics.det_text(report.det_points))
    return TaskResult(report, score_path, report_path, det_path, params)


def desk_counts(
    train_per_lang: int = 100,
    dev_per_lang: int = 10,
    test_per_lang: int = 40,
    reference_per_lang: int = 10,
    zero_test_per_lang: int = 60,
) -> dict[str, dict[str, int]]:
    """Default split sizes for the desk-scale corpus (3 training + 2 unseen)."""
    train_langs = [s.language_id for s in default_training_specs()]
    zero_langs = [s.language_id for s in default_zero_resource_specs()]
    return {
        "train": {lang: train_per_lang for lang in train_langs},
        "dev": {lang: dev_per_lang for lang in train_langs},
        "test": {lang: test_per_lang for lang in train_langs},
        "reference": {lang: reference_per_lang for lang in zero_langs},
        "zr_test": {lang: zero_test_per_lang for lang in zero_langs},
    }
