"""Evaluate trained models at input sizes they never saw."""
from logavgexp.trainer import (SyntheticTask, TinyModel, TrainConfig, evaluate_robustness,
                               generate_dataset, make_pool_spec, train)

task = SyntheticTask()
data = generate_dataset(task, 2000)
held_out = generate_dataset(task, 1000, stream=1)
sizes = [2, 4, 6, 8, 12, 16]

models = {}
for kind in ("avg", "max", "lae"):
    models[kind], _ = train(TinyModel.init(task, make_pool_spec(kind, task)), data, TrainConfig(epochs=15))

for transform in ("zoom", "crop_or_pad_zero", "crop_or_pad_normal"):
    print(transform)
    for kind, m in models.items():
        acc = evaluate_robustness(m, held_out, transform, sizes)
        print(f"  {kind:4}", " ".join(f"{s}:{a:.2f}" for s, a in acc.items()))
