"""Command-line front end.  Every command writes CSV.

Line zero of each CSV is a ``# schema=<name>/v<k>`` comment; the header
row follows any further comment lines.  Exit codes: 0 success, 1 a
tolerance/assertion failure, 2 usage error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import sys

import numpy as np

from . import grad as G
from .pooling import (
    PoolKind,
    PoolSpec,
    TemperatureMode,
    TemperatureParam,
    pool_avg,
    pool_gated,
    pool_lae,
    pool_max,
    pool_mixed,
)
from .precision import DEFAULT_T_GRID, default_sweep_windows, lae_precision_sweep
from .tensor import PrecisionTag
from .trainer import (
    SyntheticTask,
    TinyModel,
    TrainConfig,
    Transform,
    evaluate_robustness,
    generate_dataset,
    make_pool_spec,
    train,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3

FIG1_X = np.array([[-1.0, 0.0], [1.4, 1.6]])
FIG1_X_SWAPPED = np.array([[-1.0, 0.0], [1.6, 1.4]])
FIG1_HEADER = ["operator", "param", "value", "grad_00", "grad_01", "grad_10", "grad_11"]
GRADCHECK_TS = (0.25, 1.0, 4.0, 16.0)

N_TRAIN, N_EVAL = 2000, 1000


class UsageError(Exception):
    pass


def fmt(x: float) -> str:
    return f"{x:.10g}"


@contextlib.contextmanager
def _open_out(path):
    if path in (None, "-"):
        yield sys.stdout
        return
    buf = io.StringIO()
    yield buf
    # write only once the whole report exists, so failures leave no partial file
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def _writer(fh, schema: str, comments=()):
    fh.write(f"# schema={schema}\n")
    for c in comments:
        fh.write(f"# {c}\n")
    return csv.writer(fh, lineterminator="\n")


def _float_list(text: str):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")
    return vals


def _int_list(text: str):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of integers: {text!r}")


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not v > 0 or not np.isfinite(v):
        raise argparse.ArgumentTypeError(f"must be a finite number > 0, got {text!r}")
    return v


# -- fig1 ---------------------------------------------------------------------------


def fig1_rows():
    """Pooled values and 2x2 gradients for the example matrix and its row-swapped twin."""
    rows = []
    for swapped, X in ((False, FIG1_X), (True, FIG1_X_SWAPPED)):
        z = X.reshape(-1)
        entries = [
            ("max", "-", pool_max(z), G.max_backward(z)),
            ("avg", "-", pool_avg(z), G.avg_backward(z)),
            ("mixed", "alpha=0.5", pool_mixed(z, 0.5), G.mixed_backward(z, 0.5)[0]),
        ]
        for t in (0.5, 1.0, 2.0):
            entries.append(("lae", f"t={t:g}", pool_lae(z, t), G.lae_backward_input(z, t)))
        for op, param, value, g in entries:
            if swapped:
                param = "swapped" if param == "-" else param + ";swapped"
            rows.append([op, param, fmt(value)] + [fmt(v) for v in g])
    return rows


def cmd_fig1(args) -> int:
    with _open_out(args.out) as fh:
        w = _writer(fh, "fig1/v1", [
            "X=[[-1,0],[1.4,1.6]]",
            "X_swapped=[[-1,0],[1.6,1.4]] (rows tagged ';swapped')",
        ])
        w.writerow(FIG1_HEADER)
        w.writerows(fig1_rows())
    return EXIT_OK


# -- gradcheck ----------------------------------------------------------------------


def _rel_err(a, b) -> float:
    a, b = np.atleast_1d(a), np.atleast_1d(b)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-12))


def gradcheck_cases(seed: int = 0, cases: int = 200, h: float = 1e-5):
    """Analytic vs central-difference gradients on random windows.

    Yields ``(operator, param, worst relative error)`` for each group.
    Windows have length 2..64 with entries in [-5, 5].
    """
    if cases < 1:
        raise ValueError("need at least one case")
    rng = np.random.default_rng(seed)

    def windows():
        for _ in range(cases):
            yield rng.uniform(-5, 5, size=int(rng.integers(2, 65)))

    for t in GRADCHECK_TS:
        worst_z = worst_t = 0.0
        for z in windows():
            fd = G.finite_diff_oracle(lambda v: pool_lae(v, t), z, h, relative=True)
            worst_z = max(worst_z, _rel_err(G.lae_backward_input(z, t), fd))
            s = np.log(t)
            fd_t = G.finite_diff_oracle(lambda v: pool_lae(z, np.exp(v[0])), [s], h, relative=True)
            worst_t = max(worst_t, _rel_err(G.lae_backward_logt(z, t), fd_t))
        yield "lae", f"t={t:g}", worst_z
        yield "lae_logt", f"t={t:g}", worst_t

    worst_a = worst_pa = 0.0
    for z in windows():
        pre = rng.normal(0, 2)
        alpha = float(1 / (1 + np.exp(-pre)))
        d_z, d_pre = G.mixed_backward(z, alpha)
        fd = G.finite_diff_oracle(lambda v: pool_mixed(v, alpha), z, h, relative=True)
        worst_a = max(worst_a, _rel_err(d_z, fd))
        fd_p = G.finite_diff_oracle(
            lambda v: pool_mixed(z, float(1 / (1 + np.exp(-v[0])))), [pre], h, relative=True)
        worst_pa = max(worst_pa, _rel_err(d_pre, fd_p))
    yield "mixed", "d_z", worst_a
    yield "mixed", "d_pre_alpha", worst_pa

    worst_gz = worst_gw = 0.0
    for z in windows():
        w = rng.normal(0, 1 / np.sqrt(z.size), size=z.size)
        d_z, d_w = G.gated_backward(z, w)
        fd = G.finite_diff_oracle(lambda v: pool_gated(v, w), z, h, relative=True)
        fd_w = G.finite_diff_oracle(lambda v: pool_gated(z, v), w, h, relative=True)
        worst_gz = max(worst_gz, _rel_err(d_z, fd))
        worst_gw = max(worst_gw, _rel_err(d_w, fd_w))
    yield "gated", "d_z", worst_gz
    yield "gated", "d_w", worst_gw


def cmd_gradcheck(args) -> int:
    if args.cases < 1:
        raise UsageError("--cases must be >= 1")
    failed = False
    with _open_out(args.out) as fh:
        w = _writer(fh, "gradcheck/v1", [f"seed={args.seed} cases={args.cases}"])
        w.writerow(["operator", "param", "cases", "max_rel_err", "tolerance", "pass"])
        for op, param, err in gradcheck_cases(args.seed, args.cases):
            ok = err <= args.tol
            failed |= not ok
            w.writerow([op, param, args.cases, fmt(err), fmt(args.tol), int(ok)])
    return EXIT_FAIL if failed else EXIT_OK


# -- precision sweep ----------------------------------------------------------------


SWEEP_HEADER = [
    "t", "precision",
    "forward_median", "forward_max",
    "grad_input_median", "grad_input_max",
    "grad_signal_median", "grad_signal_max",
    "grad_logt_median", "grad_logt_max",
]


def cmd_precision_sweep(args) -> int:
    if not args.t_grid:
        raise UsageError("--t-grid is empty")
    if not args.precisions:
        raise UsageError("--precisions is empty")
    try:
        precisions = [PrecisionTag(p) for p in args.precisions]
    except ValueError as exc:
        raise UsageError(str(exc))
    windows = default_sweep_windows(args.windows, args.window_size, args.seed)
    rows = lae_precision_sweep(windows, args.t_grid, precisions)
    with _open_out(args.out) as fh:
        w = _writer(fh, "precision-sweep/v1", [
            f"windows={args.windows} size={args.window_size} seed={args.seed} "
            "relative errors vs float64"
        ])
        w.writerow(SWEEP_HEADER)
        for r in rows:
            d = r.as_dict()
            w.writerow([fmt(d["t"]), d["precision"]] + [fmt(d[k]) for k in SWEEP_HEADER[2:]])
    return EXIT_OK


# -- training -----------------------------------------------------------------------


def _task(args) -> SyntheticTask:
    return SyntheticTask(seed=args.seed)


def _config(args) -> TrainConfig:
    return TrainConfig(
        learning_rate=args.lr,
        temp_lr_multiplier=args.temp_lr_mult,
        weight_decay=args.weight_decay,
        epochs=args.epochs,
        seed=args.seed,
    )


def save_model(model: TinyModel, path: str) -> None:
    """Flat weight CSV: one ``name,i,j,value`` row per scalar parameter."""
    spec = model.pool
    meta = f"pool={spec.kind.value}"
    if spec.kind is PoolKind.LAE:
        meta += f" mode={spec.temperature.mode.value}"
    with _open_out(path) as fh:
        w = _writer(fh, "model/v1", [meta])
        w.writerow(["name", "i", "j", "value"])
        for (i, j), v in np.ndenumerate(model.weights):
            w.writerow(["weights", i, j, repr(float(v))])
        if model.bias is not None:
            for i, v in enumerate(model.bias):
                w.writerow(["bias", i, 0, repr(float(v))])
        blocks = {
            PoolKind.LAE: ("log_t", lambda: spec.temperature.log_t),
            PoolKind.MIXED: ("pre_alpha", lambda: spec.mixed.pre_alpha),
            PoolKind.GATED: ("gate_w", lambda: spec.gate.w),
        }
        if spec.kind in blocks:
            name, get = blocks[spec.kind]
            for i, v in enumerate(get()):
                w.writerow([name, i, 0, repr(float(v))])


def load_model(path: str) -> TinyModel:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    comments = [ln[1:].strip() for ln in lines if ln.startswith("#")]
    if not comments or comments[0] != "schema=model/v1":
        raise ValueError(f"{path}: not a model/v1 file")
    meta = dict(kv.split("=", 1) for kv in comments[1].split())
    params = {}
    for row in csv.DictReader(ln for ln in lines if not ln.startswith("#")):
        params.setdefault(row["name"], []).append((int(row["i"]), int(row["j"]), float(row["value"])))

    def dense(name, two_d=False):
        entries = params.get(name, [])
        if not entries:
            return None
        if two_d:
            arr = np.zeros((max(e[0] for e in entries) + 1, max(e[1] for e in entries) + 1))
            for i, j, v in entries:
                arr[i, j] = v
            return arr
        arr = np.zeros(max(e[0] for e in entries) + 1)
        for i, _, v in entries:
            arr[i] = v
        return arr

    kind = PoolKind(meta["pool"])
    if kind is PoolKind.LAE:
        spec = PoolSpec(kind, temperature=TemperatureParam(meta["mode"], dense("log_t")))
    elif kind is PoolKind.MIXED:
        spec = PoolSpec.mixed_pool(1)
        spec.mixed.pre_alpha = dense("pre_alpha")
    elif kind is PoolKind.GATED:
        spec = PoolSpec.gated_pool(1, dense("gate_w"))
    else:
        spec = PoolSpec(kind)
    return TinyModel(dense("weights", two_d=True), spec, dense("bias"))


def cmd_train(args) -> int:
    task = _task(args)
    spec = make_pool_spec(args.pool, task, args.t0, args.mode)
    model = TinyModel.init(task, spec, seed=args.seed)
    data = generate_dataset(task, N_TRAIN, 0)
    held_out = generate_dataset(task, N_EVAL, 1)
    trained, records = train(model, data, _config(args), held_out)
    n_t = len(trained.temperatures())
    with _open_out(args.out) as fh:
        w = _writer(fh, "train/v1", [f"pool={spec} seed={args.seed}"])
        w.writerow(["epoch", "train_loss", "eval_accuracy"] + [f"t_{i}" for i in range(n_t)])
        for r in records:
            w.writerow([r.epoch, fmt(r.train_loss), fmt(r.eval_accuracy)]
                       + [fmt(v) for v in r.temperatures])
    if args.save_model:
        save_model(trained, args.save_model)
    return EXIT_OK


ROBUSTNESS_POOLS = ("avg", "max", "mixed", "lae")


def pool_param_label(spec: PoolSpec) -> str:
    if spec.kind is PoolKind.LAE:
        ts = ";".join(fmt(t) for t in spec.temperature.t)
        return f"mode={spec.temperature.mode.value};t={ts}"
    if spec.kind is PoolKind.MIXED:
        return "alpha=" + ";".join(fmt(a) for a in spec.mixed.alpha)
    return "-"


def cmd_robustness(args) -> int:
    if not args.sizes:
        raise UsageError("--sizes is empty")
    if any(s < 1 for s in args.sizes):
        raise UsageError("--sizes must all be >= 1")
    task = _task(args)
    held_out = generate_dataset(task, N_EVAL, 1)
    models = []
    if args.model:
        models.append(load_model(args.model))
    else:
        data = generate_dataset(task, N_TRAIN, 0)
        for kind in ROBUSTNESS_POOLS:
            spec = make_pool_spec(kind, task, args.t0, args.mode)
            trained, _ = train(TinyModel.init(task, spec, seed=args.seed), data, _config(args))
            models.append(trained)
    with _open_out(args.out) as fh:
        w = _writer(fh, "robustness/v1", [
            f"transform={args.transform} train_size={task.height} seed={args.seed}"
        ])
        w.writerow(["pool", "param", "transform", "size", "accuracy"])
        for m in models:
            if not m.pool.size_adaptive:
                raise UsageError("gated pooling cannot be evaluated at other input sizes")
            accs = evaluate_robustness(m, held_out, args.transform, args.sizes, args.seed)
            for size, acc in accs.items():
                w.writerow([m.pool.kind.value, pool_param_label(m.pool), args.transform,
                            size, fmt(acc)])
    return EXIT_OK


# -- entry point ----------------------------------------------------------------------


def _add_train_flags(p, default_pool=None):
    p.add_argument("--t0", type=_positive_float, default=4.0, help="initial LAE temperature")
    p.add_argument("--mode", choices=[m.value for m in TemperatureMode], default="shared")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=TrainConfig.epochs)
    p.add_argument("--lr", type=float, default=TrainConfig.learning_rate)
    p.add_argument("--temp-lr-mult", type=float, default=TrainConfig.temp_lr_multiplier)
    p.add_argument("--weight-decay", type=float, default=TrainConfig.weight_decay)
    p.add_argument("--out", default="-", help="output CSV path ('-' for stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="logavgexp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fig1", help="pooled values and gradients for the 2x2 example")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_fig1)

    p = sub.add_parser("gradcheck", help="analytic gradients vs finite differences")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cases", type=int, default=200)
    p.add_argument("--tol", type=_positive_float, default=1e-5)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("precision-sweep", help="emulated half/single LAE error vs float64")
    p.add_argument("--t-grid", type=_float_list, default=list(DEFAULT_T_GRID))
    p.add_argument("--precisions", type=lambda s: [v for v in s.split(",") if v],
                   default=["half", "single"])
    p.add_argument("--windows", type=int, default=200)
    p.add_argument("--window-size", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_precision_sweep)

    p = sub.add_parser("train", help="train on the synthetic task, one row per epoch")
    p.add_argument("--pool", choices=[k.value for k in PoolKind], default="lae")
    p.add_argument("--save-model", default=None, help="write the trained weights as CSV")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("robustness", help="accuracy vs input size per pooling operator")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--model", help="weight CSV written by 'train --save-model'")
    src.add_argument("--retrain", action="store_true",
                     help="train avg/max/mixed/lae models first (default)")
    p.add_argument("--transform", choices=[t.value for t in Transform], default="zoom")
    p.add_argument("--sizes", type=_int_list, default=[2, 4, 6, 8, 10, 12, 16])
    _add_train_flags(p)
    p.set_defaults(func=cmd_robustness)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with 2 on bad flags
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except OSError as exc:
        print(f"logavgexp: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"logavgexp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
