# End to end in one script: forge the toy corpus, train every loss mode
# through the curriculum, and print the comparison table.

from hindpo import (
    BigramPolicy,
    LossConfig,
    TrainConfig,
    evaluate,
    generate,
    report_table,
    toy_corpus,
    train,
    vocab_from_pairs,
)
from hindpo.dataforge import forge
from hindpo.trainer import TOY_LEARNING_RATE, encode_pairs, preference_stats

SEED = 7

result = forge(toy_corpus(), seed=SEED)
pairs = result.curriculum.all_pairs() + result.val_pairs + result.test_pairs
vocab = vocab_from_pairs(pairs)
base = BigramPolicy.new(vocab, seed=SEED, noise_std=0.01)
print("vocabulary: %d tokens; stages: %s" % (
    len(vocab), [(name, len(p)) for name, p in result.curriculum.stages]))

held_out = {}
for pair in result.test_pairs:
    held_out.setdefault(pair.article_id, (pair.prompt, pair.preferred))
prompts = [held_out[a][0] for a in sorted(held_out)]
references = [held_out[a][1] for a in sorted(held_out)]

reports = [evaluate(generate(base, prompts, seed=SEED), references, "base")]
for mode in ("dpo", "dpo_act", "dpo_fin", "hin_dpo"):
    config = TrainConfig(
        epochs_per_stage=10,
        learning_rate=TOY_LEARNING_RATE,
        batch_size=2,
        seed=SEED,
        loss=LossConfig(mode=mode),
    )
    trained, log = train(result.curriculum, base.copy(), config)
    margin, accuracy = preference_stats(
        trained, base.snapshot(), encode_pairs(result.curriculum.all_pairs()), config.loss.beta
    )
    print("%-8s  %d steps  final margin %6.2f  preference accuracy %.2f"
          % (mode, len(log.records), margin, accuracy))
    reports.append(evaluate(generate(trained, prompts, seed=SEED), references, mode))

print()
print(report_table(reports))
print("sample generation (hin_dpo):")
trained_hin, _ = train(
    result.curriculum,
    base.copy(),
    TrainConfig(epochs_per_stage=10, learning_rate=TOY_LEARNING_RATE,
                batch_size=2, seed=SEED, loss=LossConfig(mode="hin_dpo")),
)
print(" ", generate(trained_hin, prompts[:1], seed=SEED)[0])
