"""Command-line entry point.

One binary, subcommand style:

    lidkit generate  --out corpus/ --seed 7
    lidkit train     --corpus corpus/ --languages alpha,bravo,charlie --out model.bin
    lidkit extract   --model model.bin --corpus corpus/ --split test --out xvec.txt
    lidkit enroll    --model model.bin --refs refs.txt --out enrolled.txt
    lidkit score     --model model.bin --corpus corpus/ --split test --key key.txt --out scores.txt
    lidkit validate  --scores scores.txt --key key.txt
    lidkit evaluate  --scores scores.txt --key key.txt

Config values come from an optional flat key-value file (--config) with
command-line overrides via repeated --set key=value (last one wins).
Every text output starts with a reproducibility stamp comment (config
hash plus seed). Exit codes: 0 success, 1 usage error, 2 data/validation
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import backend as backend_mod
from . import config as cfgmod
from . import dsp, harness, metrics, net, submission
from .errors import LidkitError, NonFiniteLoss

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="lidkit", description="language identification toolkit")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    parser.add_argument("--jobs", type=int, default=1, help="parallelism bound (advisory)")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key-value config file")
    common.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override one config value (repeatable, last wins)",
    )
    common.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("generate", parents=[common], help="synthesize a test corpus")
    p.add_argument("--out", required=True, help="corpus output directory")

    p = sub.add_parser("train", parents=[common], help="train the embedding network")
    p.add_argument("--corpus", required=True)
    p.add_argument("--split", default="train")
    p.add_argument("--languages", required=True, help="comma-separated label order")
    p.add_argument("--out", required=True, help="model file to write")

    p = sub.add_parser("extract", parents=[common], help="extract x-vectors")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("enroll", parents=[common], help="enroll reference languages")
    p.add_argument("--model", required=True)
    p.add_argument("--refs", required=True, help="manifest of 'language wav-path' lines")
    p.add_argument("--out", required=True)

    p = sub.add_parser("score", parents=[common], help="score a test split")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--key", required=True, help="trial key fixing the language order")
    p.add_argument("--mode", choices=["closed", "zero"], default="closed")
    p.add_argument("--enrolled", help="enrolled models file (zero mode)")
    p.add_argument("--languages", help="training label order (closed mode)")
    p.add_argument("--out", required=True)

    p = sub.add_parser("validate", parents=[common], help="validate a score file")
    p.add_argument("--scores", required=True)
    p.add_argument("--key", required=True)
    p.add_argument("--out", help="write the -inf-filled score file here")

    p = sub.add_parser("evaluate", parents=[common], help="evaluate a score file")
    p.add_argument("--scores", required=True)
    p.add_argument("--key", required=True)
    p.add_argument("--policy", choices=[metrics.MIN_SWEEP, metrics.FIXED],
                   default=metrics.MIN_SWEEP)
    p.add_argument("--threshold", type=float, default=0.0)
    p.add_argument("--p-target", type=float, default=metrics.DEFAULT_P_TARGET)
    p.add_argument("--report", help="write the flat key-value report here")
    p.add_argument("--det", help="write DET points here")
    return parser


def _gather_config(args) -> dict[str, str]:
    cfg: dict[str, str] = {}
    if getattr(args, "config", None):
        cfg.update(cfgmod.load_config(args.config))
    for item in getattr(args, "overrides", []):
        if "=" not in item:
            raise _UsageError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        cfg[key.strip()] = value.strip()
    return cfg


def _stamp(cfg: dict[str, str], seed: int) -> str:
    return f"# stamp config={cfgmod.config_hash(cfg, seed)} seed={seed}\n"


def _write_output(path, text: str, stamp: str = "") -> None:
    """Write atomically; never leave a partial file behind on failure."""
    path = Path(path)
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    try:
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(stamp)
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        tmp.unlink(missing_ok=True)
        raise


# ---------------------------------------------------------------------------
# subcommands

def _cmd_generate(args, cfg):
    specs = harness.default_training_specs() + harness.default_zero_resource_specs()
    counts = harness.desk_counts(
        train_per_lang=cfgmod.get_int(cfg, "counts.train", 100),
        dev_per_lang=cfgmod.get_int(cfg, "counts.dev", 10),
        test_per_lang=cfgmod.get_int(cfg, "counts.test", 40),
        reference_per_lang=cfgmod.get_int(cfg, "counts.reference", 10),
        zero_test_per_lang=cfgmod.get_int(cfg, "counts.zr_test", 60),
    )
    harness.generate_corpus(specs, counts, args.seed, args.out, jobs=max(args.jobs, 1))
    print(f"corpus written to {args.out}")
    return EXIT_OK


def _cmd_train(args, cfg):
    languages = [tok for tok in args.languages.split(",") if tok]
    entries = [e for e in harness.read_manifest(args.corpus) if e.split == args.split]
    params = harness.train_network(args.corpus, entries, languages, cfg, args.seed)
    blob = net.save_params(params)
    path = Path(args.out)
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    try:
        tmp.write_bytes(blob)
        os.replace(tmp, path)
    except BaseException:
        tmp.unlink(missing_ok=True)
        raise
    print(f"model written to {args.out}")
    return EXIT_OK


def _load_model(path) -> net.NetworkParams:
    with open(path, "rb") as fh:
        return net.load_params(fh.read())


def _split_features(args, cfg):
    fcfg = dsp.FeatureConfig.from_config(cfg)
    vcfg = dsp.VadConfig.from_config(cfg)
    entries = [e for e in harness.read_manifest(args.corpus) if e.split == args.split]
    for entry in entries:
        try:
            feats = dsp.features_from_wav(Path(args.corpus) / entry.path, fcfg, vcfg)
        except LidkitError as exc:
            print(f"warning: {entry.utt_id}: {exc}", file=sys.stderr)
            feats = None
        yield entry, feats


def _cmd_extract(args, cfg):
    params = _load_model(args.model)
    lines = []
    for entry, feats in _split_features(args, cfg):
        if feats is None:
            continue
        xvec = net.extract_xvector(params, feats, entry.utt_id)
        lines.append(entry.utt_id + " " + " ".join(f"{v:.9g}" for v in xvec.values))
    _write_output(args.out, "\n".join(lines) + "\n", _stamp(cfg, args.seed))
    print(f"{len(lines)} x-vectors written to {args.out}")
    return EXIT_OK


def _cmd_enroll(args, cfg):
    params = _load_model(args.model)
    fcfg = dsp.FeatureConfig.from_config(cfg)
    vcfg = dsp.VadConfig.from_config(cfg)
    references: dict[str, list] = {}
    with open(args.refs, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            language, wav_path = line.split(None, 1)
            references.setdefault(language, [])
            try:
                references[language].append(dsp.features_from_wav(wav_path, fcfg, vcfg))
            except LidkitError as exc:
                print(f"warning: {wav_path}: {exc}", file=sys.stderr)
    models = backend_mod.enroll_languages(params, references)
    _write_output(args.out, backend_mod.write_models(models), _stamp(cfg, args.seed))
    print(f"enrolled {len(models.language_ids)} languages to {args.out}")
    return EXIT_OK


def _cmd_score(args, cfg):
    params = _load_model(args.model)
    key = submission.read_key_file(args.key)
    records = []
    if args.mode == "closed":
        train_order = (
            [tok for tok in args.languages.split(",") if tok]
            if args.languages
            else key.language_list
        )
        try:
            subset = [train_order.index(lang) for lang in key.language_list]
        except ValueError as exc:
            raise _UsageError(f"key language missing from --languages: {exc}")
        for entry, feats in _split_features(args, cfg):
            if feats is None:
                scores = np.full(key.num_languages, -np.inf)
            else:
                scores = backend_mod.score_closed_set(params, feats, subset)
            records.append(submission.ScoreRecord(entry.utt_id, scores))
    else:
        if not args.enrolled:
            raise _UsageError("zero mode requires --enrolled")
        with open(args.enrolled, "r", encoding="utf-8") as fh:
            models = backend_mod.parse_models(fh.read())
        order = [models.language_ids.index(lang) for lang in key.language_list]
        for entry, feats in _split_features(args, cfg):
            if feats is None:
                scores = np.full(key.num_languages, -np.inf)
            else:
                scores = backend_mod.score_zero_resource(models, feats, params)[order]
            records.append(submission.ScoreRecord(entry.utt_id, scores))
    _write_output(args.out, submission.write_scores(records), _stamp(cfg, args.seed))
    print(f"{len(records)} segments scored to {args.out}")
    return EXIT_OK


def _cmd_validate(args, cfg):
    key = submission.read_key_file(args.key)
    records = submission.read_score_file(args.scores, key.language_list)
    fill = submission.fill_missing(records, key)
    for seg in fill.dropped_ids:
        print(f"warning: segment {seg!r} not in key, dropped", file=sys.stderr)
    if fill.num_filled:
        noun = "trial" if fill.num_filled == 1 else "trials"
        print(f"warning: {fill.num_filled} lost {noun} filled with -inf", file=sys.stderr)
    if args.out:
        _write_output(args.out, submission.write_scores(fill.records), _stamp(cfg, args.seed))
    print(f"{len(fill.records)} segments valid against {key.num_languages} languages")
    return EXIT_OK


def _cmd_evaluate(args, cfg):
    key = submission.read_key_file(args.key)
    records = submission.read_score_file(args.scores, key.language_list)
    fill = submission.fill_missing(records, key)
    if fill.num_filled:
        noun = "trial" if fill.num_filled == 1 else "trials"
        print(f"warning: {fill.num_filled} lost {noun} filled with -inf", file=sys.stderr)
    # both policies are always reported; --policy picks the headline number
    reports = {}
    for policy in (metrics.FIXED, metrics.MIN_SWEEP):
        eval_config = metrics.EvalConfig.for_key(
            key, p_target=args.p_target, threshold_policy=policy, threshold=args.threshold
        )
        reports[policy] = metrics.compute_cavg(fill.records, key, eval_config)
    report = reports[args.policy]
    print(f"Cavg {report.cavg:.4f}")
    print(f"EER% {report.eer * 100:.2f}")
    fixed = reports[metrics.FIXED]
    swept = reports[metrics.MIN_SWEEP]
    print(f"Cavg[fixed threshold={args.threshold:g}] {fixed.cavg:.4f}")
    print(f"Cavg[min_sweep threshold={swept.threshold_used:g}] {swept.cavg:.4f}")
    if args.report:
        _write_output(args.report, metrics.report_text(report), _stamp(cfg, args.seed))
    if args.det:
        _write_output(args.det, metrics.det_text(report.det_points), _stamp(cfg, args.seed))
    return EXIT_OK


_COMMANDS = {
    "generate": _cmd_generate,
    "train": _cmd_train,
    "extract": _cmd_extract,
    "enroll": _cmd_enroll,
    "score": _cmd_score,
    "validate": _cmd_validate,
    "evaluate": _cmd_evaluate,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = _gather_config(args)
        # numerical failures surface as exit code 3 with one diagnostic line;
        # elementwise warnings along the way would only duplicate that
        with np.errstate(all="ignore"):
            return _COMMANDS[args.command](args, cfg)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NonFiniteLoss as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (LidkitError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
