"""Command-line entry point wiring the library for offline use and experiment
reproduction. Exit codes: 0 success, 1 domain error, 2 usage error."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np


def _print_config(args: argparse.Namespace) -> None:
    resolved = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    if getattr(args, "json", False):
        print(json.dumps({"resolved_config": resolved}), file=sys.stderr)
    else:
        print("resolved config:", json.dumps(resolved))


def _load_series(path: str):
    from .datasets import load_labeled_series

    return load_labeled_series(path)


def _policy_from_file(path: str):
    from .policy import load_policy

    return load_policy(path)


def cmd_gen_synthetic(args) -> int:
    from .datasets import SyntheticConfig, generate_synthetic, save_labeled_series

    cfg = SyntheticConfig(
        n_classes=args.classes,
        samples_per_class=args.samples,
        channels=args.channels,
        window_length=args.window_length,
        noise_sigma=args.noise,
        seed=args.seed,
    )
    series = generate_synthetic(cfg)
    save_labeled_series(series, args.out)
    summary = {"out": args.out, "timesteps": series.length, "classes": series.class_names}
    print(json.dumps(summary) if args.json else f"wrote {args.out}: {series.length} "
          f"timesteps, {len(series.class_names)} classes")
    return 0


def cmd_gen_corpus(args) -> int:
    from .corpus import (
        LLMClientConfig,
        generate_corpus_via_llm,
        save_corpus,
        templated_corpus,
    )

    if args.classes:
        names = [c.strip() for c in args.classes.split(",") if c.strip()]
    elif args.from_dataset:
        names = _load_series(args.from_dataset).class_names
    else:
        raise ValueError("one of --classes or --from-dataset is required")
    if args.endpoint:
        client = LLMClientConfig(
            endpoint=args.endpoint, model=args.model, api_key_env=args.api_key_env
        )
        corpus = generate_corpus_via_llm(names, args.n, client, args.out)
    else:
        corpus = templated_corpus(names, args.n)
        save_corpus(corpus, args.out)
    msg = {"out": args.out, "activities": len(corpus.activities), "per_class": args.n}
    print(json.dumps(msg) if args.json else f"wrote {args.out}: "
          f"{len(corpus.activities)} activities x {args.n} descriptions")
    return 0


def cmd_train(args) -> int:
    from .corpus import FallbackTextEncoder, load_corpus, validate_corpus
    from .datasets import few_shot_subsample, make_windows, split
    from .imuclip import TrainConfig, save_checkpoint, train
    from .sanitizer import build_library, save_library

    series = _load_series(args.dataset)
    corpus = load_corpus(args.corpus)
    errors = validate_corpus(corpus, series.class_names)
    missing = [e for e in errors if e.startswith("no descriptions")]
    if missing:
        raise ValueError("; ".join(missing))
    windows = make_windows(series, args.window_length, args.overlap)
    train_set, _ = split(windows, args.split_ratio, args.seed)
    if args.sensitive:
        sensitive_names = [c.strip() for c in args.sensitive.split(",")]
        sensitive = {series.class_names.index(c) for c in sensitive_names}
        train_set = few_shot_subsample(train_set, sensitive, args.shots, args.seed)
    cfg = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        lr_imu=args.lr,
        lr_text_projection=args.lr_text,
        temperature=args.temperature,
        seed=args.seed,
    )
    encoder = FallbackTextEncoder(seed=args.encoder_seed)
    checkpoint = train(train_set, corpus, cfg, encoder, series.class_names)
    save_checkpoint(checkpoint, args.out)
    if args.library_out:
        library = build_library(
            train_set,
            [series.class_names[i] for i in sorted({w.label for w in train_set})],
            series.class_names,
            normalizer=checkpoint.normalizer,
        )
        save_library(library, args.library_out)
    final_loss = checkpoint.train_loss_history[-1]
    msg = {"out": args.out, "final_loss": final_loss, "train_windows": len(train_set)}
    print(json.dumps(msg) if args.json else
          f"wrote {args.out}: trained on {len(train_set)} windows, final loss {final_loss:.4f}")
    return 0


def cmd_classify(args) -> int:
    from .corpus import encoder_from_id, load_corpus
    from .datasets import IMUWindow
    from .imuclip import classify, load_checkpoint

    checkpoint = load_checkpoint(args.checkpoint)
    corpus = load_corpus(args.corpus)
    encoder = encoder_from_id(checkpoint.text_encoder_id)
    window_json = json.loads(Path(args.window).read_text(encoding="utf-8"))
    window = IMUWindow(data=np.asarray(window_json["data"], dtype=np.float64))
    candidates = (
        [c.strip() for c in args.candidates.split(",")]
        if args.candidates
        else [c for c in checkpoint.class_names if c in corpus.activities]
    )
    label, ranking = classify(window, checkpoint, candidates, corpus, encoder)
    payload = {"top1": label, "ranking": [[n, s] for n, s in ranking.entries]}
    print(json.dumps(payload) if args.json else
          "\n".join(f"{n}\t{s:.4f}" for n, s in ranking.entries))
    return 0


def cmd_sanitize(args) -> int:
    from .corpus import encoder_from_id, load_corpus
    from .datasets import make_windows, save_labeled_series, LabeledSeries
    from .imuclip import load_checkpoint
    from .policy import PolicyStore
    from .sanitizer import load_library, result_to_wire, sanitize_stream

    checkpoint = load_checkpoint(args.checkpoint)
    corpus = load_corpus(args.corpus)
    encoder = encoder_from_id(checkpoint.text_encoder_id)
    library = load_library(args.library)
    policy = _policy_from_file(args.policy)
    store = PolicyStore(policy, checkpoint.class_names)
    series = _load_series(args.dataset)
    windows = make_windows(series, checkpoint.hyperparams.window_length, args.overlap)

    results = list(
        sanitize_stream(
            windows, checkpoint, store, corpus, library, encoder,
            seed=args.seed, unlisted_as_black=args.unlisted_as_black,
        )
    )
    if args.out_results:
        with open(args.out_results, "w", encoding="utf-8") as fh:
            for r in results:
                fh.write(json.dumps(result_to_wire(r)) + "\n")
    if args.out_dataset:
        name_to_id = {n: i for i, n in enumerate(series.class_names)}
        data = np.concatenate([r.output.data for r in results], axis=0)
        labels = np.concatenate(
            [
                np.full(
                    r.output.data.shape[0],
                    name_to_id[r.replacement_class]
                    if r.replacement_class is not None
                    else (r.output.label if r.output.label is not None
                          else name_to_id[r.detected_top1]),
                    dtype=np.int64,
                )
                for r in results
            ]
        )
        out_series = LabeledSeries(
            name=series.name + "-sanitized",
            channels=series.channels,
            data=data,
            labels=labels,
            class_names=series.class_names,
        )
        save_labeled_series(out_series, args.out_dataset)
    replaced = sum(1 for r in results if r.replacement_class is not None)
    msg = {"windows": len(results), "replaced": replaced}
    print(json.dumps(msg) if args.json else
          f"sanitized {len(results)} windows, {replaced} replaced")
    return 0


def _desk_config(args):
    from .evaluation import DeskScaleConfig

    return DeskScaleConfig(
        imuclip_epochs=args.imuclip_epochs,
        adversary_epochs=args.adversary_epochs,
        shots=args.shots,
    )


def _seeds(args) -> tuple[int, ...]:
    return tuple(int(s) for s in args.seeds.split(","))


def cmd_eval(args) -> int:
    from .evaluation import (
        description_ablation,
        few_shot_curve,
        run_dynamic_experiment,
        run_transform_experiment,
    )

    series = _load_series(args.dataset)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    desk = _desk_config(args)
    seeds = _seeds(args)

    if args.suite == "table3":
        policy = _policy_from_file(args.policy)
        res = run_transform_experiment(
            series, policy, k_list=tuple(int(k) for k in args.ks.split(",")),
            seeds=seeds, desk=desk,
        )
        for seed, cell in res["seeds"].items():
            cell["before"].save(out_dir / f"table3_seed{seed}_before.json")
            for k, report in cell["after"].items():
                report.save(out_dir / f"table3_seed{seed}_k{k}.json")
        summary = {
            "experiment": "table3",
            "black_after": {
                seed: {k: cell["after"][k].groups["black"] for k in cell["after"]}
                for seed, cell in res["seeds"].items()
            },
        }
    elif args.suite == "table2":
        policy = _policy_from_file(args.policy)
        override = frozenset(c.strip() for c in args.override_gray.split(","))
        res = run_dynamic_experiment(series, policy, override, seeds=seeds, desk=desk)
        (out_dir / "table2.json").write_text(json.dumps(res, indent=2, default=str) + "\n")
        summary = {
            "experiment": "table2",
            "ours": {s: r["ours_replacement_f1"] for s, r in res["seeds"].items()},
            "rae": {s: r.get("rae_replacement_f1") for s, r in res["seeds"].items()},
        }
    elif args.suite == "fewshot":
        held_out = (
            tuple(c.strip() for c in args.held_out.split(",")) if args.held_out else None
        )
        res = few_shot_curve(
            series,
            ks=tuple(int(k) for k in args.ks.split(",")),
            seeds=seeds,
            held_out_classes=held_out,
            desk=desk,
            out_csv=str(out_dir / "fewshot_curve.csv"),
        )
        (out_dir / "fewshot.json").write_text(json.dumps(res, indent=2) + "\n")
        summary = {"experiment": "fewshot", "ks": res["ks"], "mean_f1": res["mean_f1"]}
    else:  # ablation
        held_out = (
            tuple(c.strip() for c in args.held_out.split(",")) if args.held_out else None
        )
        res = description_ablation(
            series,
            n_desc=tuple(int(n) for n in args.n_desc.split(",")),
            k=args.shots,
            seeds=seeds,
            held_out_classes=held_out,
            desk=desk,
        )
        (out_dir / "ablation.json").write_text(json.dumps(res, indent=2) + "\n")
        summary = {
            "experiment": "ablation",
            "n_desc": res["n_desc"],
            "spearman_per_seed": res["spearman_per_seed"],
        }
    print(json.dumps(summary) if args.json else f"wrote reports to {out_dir}: "
          + json.dumps(summary))
    return 0


def cmd_serve(args) -> int:
    from .gateway import GatewayConfig, serve

    config = GatewayConfig(
        checkpoint_path=args.checkpoint,
        corpus_path=args.corpus,
        library_path=args.library,
        policy_path=args.policy,
        host=args.host,
        port=args.port,
        unlisted_as_black=args.unlisted_as_black,
        seed=args.seed,
        log_level=args.log_level,
    )
    serve(config)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="privimu",
        description="Privacy-preserving IMU sensing: train, classify, sanitize, "
                    "evaluate, and serve.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--json", action="store_true", help="machine-parseable stdout only")

    p = sub.add_parser("gen-synthetic", help="write a synthetic dataset file")
    p.add_argument("--classes", type=int, default=6)
    p.add_argument("--samples", type=int, default=500, help="windows per class")
    p.add_argument("--channels", type=int, default=6)
    p.add_argument("--window-length", type=int, default=32)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_gen_synthetic)

    p = sub.add_parser("gen-corpus", help="write an activity-description corpus")
    p.add_argument("--classes", help="comma-separated activity names")
    p.add_argument("--from-dataset", help="take activity names from a dataset file")
    p.add_argument("--n", type=int, default=25, help="descriptions per class")
    p.add_argument("--out", required=True)
    p.add_argument("--endpoint", help="LLM endpoint URL (offline tool); omit for templated")
    p.add_argument("--model", default="gpt-4")
    p.add_argument("--api-key-env", default="PRIVIMU_API_KEY")
    common(p)
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("train", help="train the aligner and write a checkpoint")
    p.add_argument("--dataset", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--library-out", help="also write an exemplar library")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--lr-text", type=float, default=1e-3)
    p.add_argument("--temperature", type=float, default=0.07)
    p.add_argument("--window-length", type=int, default=32)
    p.add_argument("--overlap", type=float, default=0.5)
    p.add_argument("--split-ratio", type=float, default=0.8)
    p.add_argument("--sensitive", help="comma-separated sensitive class names (k-shot)")
    p.add_argument("--shots", type=int, default=64)
    p.add_argument("--encoder-seed", type=int, default=0)
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("classify", help="rank classes for one window file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--window", required=True, help="window JSON file")
    p.add_argument("--candidates", help="comma-separated candidate classes")
    common(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("sanitize", help="sanitize a dataset under a policy")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--policy", required=True)
    p.add_argument("--library", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out-dataset")
    p.add_argument("--out-results", help="JSONL sanitization results")
    p.add_argument("--overlap", type=float, default=0.0,
                   help="windowing overlap for the input stream")
    p.add_argument("--unlisted-as-black", action="store_true")
    common(p)
    p.set_defaults(func=cmd_sanitize)

    p = sub.add_parser("eval", help="run an experiment suite")
    p.add_argument("suite", choices=["table3", "table2", "fewshot", "ablation"])
    p.add_argument("--dataset", required=True)
    p.add_argument("--policy", help="policy file (table3/table2)")
    p.add_argument("--override-gray", help="comma-separated override gray classes (table2)")
    p.add_argument("--out", required=True, help="report output directory")
    p.add_argument("--seeds", default="1,2,3")
    p.add_argument("--ks", default="8,32,64")
    p.add_argument("--n-desc", default="1,25,50,75,100")
    p.add_argument("--held-out", help="comma-separated held-out classes (fewshot/ablation)")
    p.add_argument("--shots", type=int, default=64)
    p.add_argument("--imuclip-epochs", type=int, default=50)
    p.add_argument("--adversary-epochs", type=int, default=50)
    common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="run the gateway service")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--library", required=True)
    p.add_argument("--policy", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8787)
    p.add_argument("--unlisted-as-black", action="store_true")
    p.add_argument("--log-level", default="info")
    common(p)
    p.set_defaults(func=cmd_serve)

    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    _print_config(args)
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
