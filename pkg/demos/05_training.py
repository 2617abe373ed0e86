"""Train the tiny model with avg, max and LAE pooling on the synthetic task."""
from logavgexp.trainer import SyntheticTask, TinyModel, TrainConfig, generate_dataset, make_pool_spec, train

task = SyntheticTask()  # 4 classes, one planted pattern per 8x8 map
data = generate_dataset(task, 2000, stream=0)
held_out = generate_dataset(task, 1000, stream=1)
cfg = TrainConfig(epochs=15)

for kind, t0 in [("avg", None), ("max", None), ("lae", 4.0), ("lae", 1.0)]:
    spec = make_pool_spec(kind, task, t0 or 4.0, mode="shared")
    model, records = train(TinyModel.init(task, spec), data, cfg, held_out)
    first, last = records[0], records[-1]
    label = kind if t0 is None else f"lae t0={t0:g}"
    print(f"{label:10} epoch-1 loss {first.train_loss:.3f}  final acc {last.eval_accuracy:.3f}"
          f"  t={model.temperatures().round(3)}")
