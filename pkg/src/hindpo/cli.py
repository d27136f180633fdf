"""Command-line pipeline: forge -> train -> eval, plus gradcheck and demo.

All subcommands read an optional JSON config file (flags override file
values) and write only inside the chosen output directory. Given the same
inputs, seed and config, every subcommand produces byte-identical output
files. Config schema, with defaults:

    {
      "corpus": null,              # JSONL articles; null = bundled toy corpus
      "out_dir": "out",
      "seed": 0,
      "order": "algorithm1",       # or "section4"
      "split": {"train": 0.75, "val": 0.05, "test": 0.2},
      "noise_std": 0.01,           # base-policy init noise
      "loss": {"beta": 0.6, "epsilon": 0.05, "mode": "hin_dpo",
               "finesse_samples": 5, "finesse_temperature": 0.9,
               "finesse_max_len": 16, "scale_cap": 20.0,
               "normalize_variance": true},
      "train": {"epochs_per_stage": 10, "learning_rate": 1e-4,
                "batch_size": 2, "refresh_reference_per_stage": true},
      "eval": {"max_len": 24, "temperature": 0.0}
    }
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import corpora, dataforge, evalharness, trainer
from .dataforge import DEFAULT_SPLIT, STAGE_ORDERS
from .losses import MODES, LossConfig, LossExample
from .policy import EOS, BigramPolicy, Vocabulary
from .trainer import TOY_LEARNING_RATE, TrainConfig

GRADCHECK_TOLERANCE = 1e-5


@dataclass
class RunConfig:
    corpus: str | None = None
    out_dir: str = "out"
    seed: int = 0
    order: str = "algorithm1"
    split: tuple[float, float, float] = DEFAULT_SPLIT
    noise_std: float = 0.01
    loss: LossConfig = field(default_factory=LossConfig)
    epochs_per_stage: int = 10
    learning_rate: float = 1e-4
    batch_size: int = 2
    refresh_reference_per_stage: bool = True
    eval_max_len: int = 24
    eval_temperature: float = 0.0

    def __post_init__(self) -> None:
        if abs(sum(self.split) - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1, got %r" % (self.split,))
        if self.order not in STAGE_ORDERS:
            raise ValueError("order must be one of %s" % sorted(STAGE_ORDERS))

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        known = {"corpus", "out_dir", "seed", "order", "split", "noise_std", "loss", "train", "eval"}
        unknown = set(data) - known
        if unknown:
            raise ValueError("unknown config keys: %s" % sorted(unknown))
        split = data.get("split", {})
        if isinstance(split, dict):
            split = (
                split.get("train", DEFAULT_SPLIT[0]),
                split.get("val", DEFAULT_SPLIT[1]),
                split.get("test", DEFAULT_SPLIT[2]),
            )
        train = data.get("train", {})
        eval_cfg = data.get("eval", {})
        return cls(
            corpus=data.get("corpus"),
            out_dir=data.get("out_dir", "out"),
            seed=data.get("seed", 0),
            order=data.get("order", "algorithm1"),
            split=tuple(split) if data.get("split") else DEFAULT_SPLIT,
            noise_std=data.get("noise_std", 0.01),
            loss=LossConfig(**data.get("loss", {})),
            epochs_per_stage=train.get("epochs_per_stage", 10),
            learning_rate=train.get("learning_rate", 1e-4),
            batch_size=train.get("batch_size", 2),
            refresh_reference_per_stage=train.get("refresh_reference_per_stage", True),
            eval_max_len=eval_cfg.get("max_len", 24),
            eval_temperature=eval_cfg.get("temperature", 0.0),
        )

    def train_config(self, mode: str) -> TrainConfig:
        return TrainConfig(
            epochs_per_stage=self.epochs_per_stage,
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            seed=self.seed,
            refresh_reference_per_stage=self.refresh_reference_per_stage,
            loss=replace(self.loss, mode=mode),
        )


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig.from_file(args.config) if args.config else RunConfig()
    if args.out is not None:
        config.out_dir = args.out
    if args.seed is not None:
        config.seed = args.seed
    if getattr(args, "order", None) is not None:
        config.order = args.order
    if getattr(args, "corpus", None) is not None:
        config.corpus = args.corpus
    if getattr(args, "mode", None) is not None:
        config.loss = replace(config.loss, mode=args.mode)
    if getattr(args, "toy_preset", False):
        config.learning_rate = TOY_LEARNING_RATE
    config.__post_init__()
    return config


def _load_corpus(config: RunConfig, out_dir: Path) -> list[dataforge.ArticleRecord]:
    if config.corpus:
        return dataforge.load_articles(config.corpus)
    articles = corpora.toy_corpus()
    dataforge.dump_articles(articles, out_dir / "toy_articles.jsonl")
    return articles


def _run_forge(config: RunConfig) -> Path:
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    articles = _load_corpus(config, out_dir)
    result = dataforge.forge(
        articles, order=config.order, split=config.split, seed=config.seed
    )
    return dataforge.emit_forge(result, out_dir)


def _base_policy(config: RunConfig, out_dir: Path) -> BigramPolicy:
    base_path = out_dir / "policy_base.json"
    if base_path.exists():
        return BigramPolicy.load(base_path)
    manifest = dataforge.read_manifest(out_dir)
    pairs = dataforge.load_curriculum(out_dir).all_pairs()
    for entry in (manifest["val"], manifest["test"]):
        pairs.extend(dataforge.load_pairs(out_dir / entry["file"]))
    vocab = trainer.vocab_from_pairs(pairs)
    base = BigramPolicy.new(vocab, seed=config.seed, noise_std=config.noise_std)
    base.save(base_path)
    return base


def _run_train(config: RunConfig, mode: str) -> tuple[Path, Path]:
    out_dir = Path(config.out_dir)
    curriculum = dataforge.load_curriculum(out_dir)
    base = _base_policy(config, out_dir)
    trained, log = trainer.train(curriculum, base.copy(), config.train_config(mode))
    policy_path = trained.save(out_dir / ("policy_%s.json" % mode))
    log_path = log.save(out_dir / ("trainlog_%s.jsonl" % mode))
    return policy_path, log_path


def _run_eval(config: RunConfig) -> str:
    out_dir = Path(config.out_dir)
    manifest = dataforge.read_manifest(out_dir)
    test_pairs = dataforge.load_pairs(out_dir / manifest["test"]["file"])
    seen: dict[str, tuple[str, str]] = {}
    for pair in test_pairs:
        seen.setdefault(pair.article_id, (pair.prompt, pair.preferred))
    prompts = [seen[a][0] for a in sorted(seen)]
    references = [seen[a][1] for a in sorted(seen)]
    reports = []
    for name in evalharness.CONFIG_ORDER:
        path = out_dir / ("policy_%s.json" % name)
        if name == "base":
            policy = _base_policy(config, out_dir)
        elif path.exists():
            policy = BigramPolicy.load(path)
        else:
            continue
        generated = evalharness.generate(
            policy,
            prompts,
            max_len=config.eval_max_len,
            temperature=config.eval_temperature,
            seed=config.seed,
        )
        reports.append(evalharness.evaluate(generated, references, name))
    text = evalharness.report_table(reports, json_path=out_dir / "report.json")
    (out_dir / "report.txt").write_text(text, encoding="utf-8")
    return text


def _gradcheck_fixture(config: RunConfig) -> tuple[BigramPolicy, BigramPolicy, list[LossExample]]:
    rng = np.random.default_rng(config.seed)
    vocab = Vocabulary.from_tokens(["q0", "q1", "w0", "w1", "w2"])
    policy = BigramPolicy(vocab, rng.normal(0.0, 1.0, (len(vocab), len(vocab))))
    reference = BigramPolicy(vocab, rng.normal(0.0, 1.0, (len(vocab), len(vocab)))).snapshot()
    words = ["w0", "w1", "w2"]
    examples = []
    for _ in range(3):
        prompt = ["q%d" % rng.integers(2)]
        preferred = [words[rng.integers(3)] for _ in range(int(rng.integers(1, 4)))] + [EOS]
        rejected = [words[rng.integers(3)] for _ in range(int(rng.integers(1, 4)))] + [EOS]
        examples.append(
            LossExample(
                prompt=prompt,
                preferred=preferred,
                rejected=rejected,
                preferred_actuality=float(rng.uniform(0, 1)),
                rejected_actuality=float(rng.uniform(0, 1)),
                effective_variance=float(rng.uniform(0, 1)),
            )
        )
    return policy, reference, examples


def _run_gradcheck(config: RunConfig, mode: str, tolerance: float) -> tuple[float, Path]:
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    policy, reference, examples = _gradcheck_fixture(config)
    error = trainer.gradcheck(policy, examples, replace(config.loss, mode=mode), reference)
    report_path = out_dir / ("gradcheck_%s.json" % mode)
    report_path.write_text(
        json.dumps(
            {
                "mode": mode,
                "max_relative_error": error,
                "tolerance": tolerance,
                "passed": error < tolerance,
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    return error, report_path


def cmd_forge(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    manifest_path = _run_forge(config)
    manifest = dataforge.read_manifest(config.out_dir)
    stages = " -> ".join(entry["bucket"] for entry in manifest["stages"])
    print("forged %s (stages: %s)" % (manifest_path, stages))
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    mode = config.loss.mode
    policy_path, log_path = _run_train(config, mode)
    print("trained %s -> %s (log: %s)" % (mode, policy_path, log_path))
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    print(_run_eval(config), end="")
    return 0


def cmd_gradcheck(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    mode = config.loss.mode
    error, report_path = _run_gradcheck(config, mode, args.tolerance)
    status = "OK" if error < args.tolerance else "FAIL"
    print("gradcheck %s: max relative error %.3e (%s; report: %s)" % (mode, error, status, report_path))
    return 0 if error < args.tolerance else 1


def cmd_demo(args: argparse.Namespace) -> int:
    """Full pipeline on the bundled toy corpus: forge, train all modes, eval."""
    config = _resolve_config(args)
    if not getattr(args, "full_rate", False):
        config.learning_rate = TOY_LEARNING_RATE
    manifest_path = _run_forge(config)
    print("forged %s" % manifest_path)
    for mode in MODES:
        policy_path, _ = _run_train(config, mode)
        print("trained %s -> %s" % (mode, policy_path))
    print(_run_eval(config), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hindpo",
        description="Preference-optimization pipeline: dataset forging, curriculum training, evaluation.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (flags override file values)")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--out", help="output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    forge = sub.add_parser("forge", parents=[common], help="build curriculum files from a corpus")
    forge.add_argument("--corpus", help="input articles (JSONL); omit to use the bundled toy corpus")
    forge.add_argument("--order", choices=sorted(STAGE_ORDERS), help="stage order")
    forge.set_defaults(handler=cmd_forge)

    train = sub.add_parser("train", parents=[common], help="train one loss mode on forged stages")
    train.add_argument("--mode", choices=MODES, help="loss mode to train")
    train.add_argument("--toy-preset", action="store_true", help="use the toy learning rate (%s)" % TOY_LEARNING_RATE)
    train.set_defaults(handler=cmd_train)

    eval_cmd = sub.add_parser("eval", parents=[common], help="score trained policies on the test split")
    eval_cmd.set_defaults(handler=cmd_eval)

    gradcheck = sub.add_parser("gradcheck", parents=[common], help="finite-difference check of the loss gradient")
    gradcheck.add_argument("--mode", choices=MODES, help="loss mode to check")
    gradcheck.add_argument("--tolerance", type=float, default=GRADCHECK_TOLERANCE)
    gradcheck.set_defaults(handler=cmd_gradcheck)

    demo = sub.add_parser("demo", parents=[common], help="full pipeline on the bundled toy corpus")
    demo.add_argument("--order", choices=sorted(STAGE_ORDERS), help="stage order")
    demo.add_argument("--full-rate", action="store_true", help="keep the configured learning rate instead of the toy preset")
    demo.set_defaults(handler=cmd_demo)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except Exception as exc:  # surfaced as a clean diagnostic, not a traceback
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
