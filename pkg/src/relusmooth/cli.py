"""Command-line interface.

Subcommands: train, attack, defend, evaluate, spectrum, region-stats, run.
Exit codes: 0 success, 1 usage/config error, 2 invariant violation.
Report commands write tab-separated records and, alongside them, rendered
figures (suppress with --no-figures).
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import data, defense, geometry, harness, nn, reports, spectral
from .attacks import ThreatModel
from .errors import ConfigError, InvariantViolation, ModelParseError

USAGE_ERROR, INVARIANT_ERROR = 1, 2


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def _vector(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise ConfigError(f"cannot parse vector {text!r}") from None


def _load_any_dataset(path):
    try:
        return data.load_dataset(path)
    except ModelParseError:
        return data.load_attacked_set(path)


def _figure_path(out: str, suffix: str) -> str:
    p = Path(out)
    return str(p.with_name(p.stem + suffix + ".png"))


def cmd_train(args):
    ds = data.generate_dataset(args.kind, args.size, args.noise, args.data_seed)
    dims = (ds.n, *[int(h) for h in args.hidden.split(",")], ds.class_count)
    net = nn.init_network(dims, seed=args.seed, biased=not args.unbiased)
    cfg = nn.SgdConfig(
        epochs=args.epochs,
        learning_rate=args.learning_rate,
        momentum=args.momentum,
        batch_size=args.batch_size,
        seed=args.seed,
        train_biases=not args.unbiased,
    )
    net = nn.train(net, ds.inputs, ds.labels, cfg)
    nn.save_model(net, args.out)
    if args.save_dataset:
        data.save_dataset(ds, args.save_dataset)
    acc = harness.accuracy(net, ds, 1)
    print(f"trained {'-'.join(str(d) for d in dims)} on {args.kind}: train accuracy {acc:.4f}")
    print(f"model written to {args.out}")
    return 0


def cmd_attack(args):
    net = nn.load_model(args.model)
    clean = data.load_dataset(args.dataset)
    tm = ThreatModel(
        args.epsilon, np.full(clean.n, args.lo), np.full(clean.n, args.hi), args.miss_k
    )
    options = {}
    if args.steps is not None:
        options["steps"] = args.steps
    aset, results = harness.attack_dataset(
        net, clean, args.attack, tm, seed=args.seed, options=options
    )
    data.save_attacked_set(aset, args.out)
    if args.results:
        rows = ["index\tlabel\tattacked\tsuccess\tlinf\tl2\tforward_calls\tgradient_calls"]
        for i, (y, res) in enumerate(zip(clean.labels, results)):
            if res is None:
                rows.append(f"{i}\t{int(y)}\t0\t0\t0\t0\t0\t0")
            else:
                rows.append(
                    f"{i}\t{int(y)}\t1\t{int(res.success)}\t{res.linf:.9g}\t{res.l2:.9g}"
                    f"\t{res.forward_calls}\t{res.gradient_calls}"
                )
        Path(args.results).write_text("\n".join(rows) + "\n", encoding="utf-8")
        print(f"per-sample results written to {args.results}")
    print(f"{args.attack}: {aset.adv_count} adversarial of {len(aset)} samples")
    print(f"attacked set written to {args.out}")
    return 0


def _defense_config(args) -> defense.DefenseConfig:
    return defense.DefenseConfig(
        radius=args.radius,
        directions=args.directions,
        sampler=args.sampler,
        aggregation=args.aggregation,
        seed=args.seed,
    )


def cmd_defend(args):
    net = nn.load_model(args.model)
    ds = _load_any_dataset(args.dataset)
    cfg = _defense_config(args)
    lines = ["index\tlabel\tprediction\tcorrect"]
    hits = 0
    for i, (x, y) in enumerate(zip(ds.inputs, ds.labels)):
        _, order = defense.post_average_predict(net, x, cfg)
        ok = int(y) in order[: args.miss_k]
        hits += ok
        lines.append(f"{i}\t{int(y)}\t{order[0]}\t{int(ok)}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"per-sample predictions written to {args.out}")
    print(
        f"defended accuracy (top-{args.miss_k}) = {hits / len(ds):.4f} "
        f"[r={cfg.radius} K={cfg.directions} sampler={cfg.sampler}]"
    )
    return 0


def cmd_evaluate(args):
    net = nn.load_model(args.model)
    clean = data.load_dataset(args.clean)
    attacked = data.load_attacked_set(args.attacked)
    tm = ThreatModel(
        args.epsilon, np.full(clean.n, args.lo), np.full(clean.n, args.hi), args.miss_k
    )
    harness.verify_attacked_set(net, clean, attacked, tm)
    cfg = _defense_config(args)
    defended = harness.DefendedModel(net, cfg, bounds=(tm.lo, tm.hi))
    row = harness.EvaluationRow(
        attack=args.attack_label,
        sampler=cfg.sampler,
        radius=cfg.radius,
        directions=cfg.directions,
        aggregation=cfg.aggregation,
        epsilon=args.epsilon,
        miss_k=args.miss_k,
        clean_top1=harness.accuracy(net, clean, 1),
        attacked_top1=harness.accuracy(net, attacked, 1),
        defended_clean_top1=harness.accuracy(defended, clean, 1),
        defended_attacked_top1=harness.accuracy(defended, attacked, 1),
        clean_topk=harness.accuracy(net, clean, args.miss_k),
        attacked_topk=harness.accuracy(net, attacked, args.miss_k),
        defended_clean_topk=harness.accuracy(defended, clean, args.miss_k),
        defended_attacked_topk=harness.accuracy(defended, attacked, args.miss_k),
        defence_rate=harness.defence_rate(defended, attacked, args.miss_k),
        adv_count=attacked.adv_count,
        seeds=f"defense={cfg.seed}",
    )
    tsv = reports.evaluation_tsv([row])
    if args.out:
        Path(args.out).write_text(tsv, encoding="utf-8")
        print(f"report written to {args.out}")
    print(reports.evaluation_table([row]), end="")
    return 0


def cmd_spectrum(args):
    net = nn.load_model(args.model)
    dec = geometry.decompose_2d(net, args.output_index)
    omegas = []
    if args.freq:
        omegas = [_vector(f) for f in args.freq]
    else:
        direction = np.array([math.cos(args.angle), math.sin(args.angle)])
        norms = np.geomspace(args.max_norm / args.grid, args.max_norm, args.grid)
        omegas = [norm * direction for norm in norms]
    rows = spectral.spectrum_decay_report(dec.terms, omegas, args.radius)
    notes = {
        "model": args.model,
        "output_index": args.output_index,
        "radius": args.radius,
        "terms": len(dec.terms),
        "multiplier_convention_ratio": spectral.alt_convention_ratio(2),
    }
    tsv = reports.decay_tsv(rows, notes)
    if args.out:
        Path(args.out).write_text(tsv, encoding="utf-8")
        print(f"decay report written to {args.out}")
        if not args.no_figures:
            from . import figures

            fig = _figure_path(args.out, "_decay")
            figures.render_decay_figure(rows, fig)
            print(f"figure written to {fig}")
    print(reports.decay_table(rows), end="")
    return 0


def cmd_region_stats(args):
    net = nn.load_model(args.model)
    x = _vector(args.point)
    dists = [d for d in geometry.exact_distances(net, x) if math.isfinite(d.distance)]
    record = {"point": args.point, "min_distance": "n/a", "median_distance": "n/a",
              "crossings": "n/a", "fluctuation": "n/a", "sectors": "n/a"}
    print(f"input x = {args.point}")
    if dists:
        values = [d.distance for d in dists]
        record["min_distance"] = f"{min(values):.9g}"
        record["median_distance"] = f"{np.median(values):.9g}"
        print(f"hyperplane distances: min = {min(values):.6g}, median = {np.median(values):.6g}")
    else:
        print("hyperplane distances: n/a (no finite-distance hidden units)")
    if args.point2:
        x2 = _vector(args.point2)
        record["crossings"] = str(geometry.crossing_count(net, x, x2))
        record["fluctuation"] = f"{geometry.fluctuation_scale(net, x, x2):.9g}"
        print(f"crossings to x2 = {args.point2}: {record['crossings']}")
        print(f"fluctuation scale: {record['fluctuation']}")
    if net.input_dim == 2 and net.is_unbiased():
        dec = geometry.decompose_2d(net, args.output_index)
        record["sectors"] = str(len(dec.terms))
        print(f"sector count: {len(dec.terms)} (dropped {dec.dropped_sectors} degenerate)")
    else:
        print("sector count: n/a (needs an unbiased 2-D network)")
    if args.out:
        cols = list(record)
        Path(args.out).write_text(
            "\t".join(cols) + "\n" + "\t".join(record[c] for c in cols) + "\n",
            encoding="utf-8",
        )
        print(f"report row written to {args.out}")
    return 0


def cmd_run(args):
    cfg = harness.load_experiment_config(args.config)
    rows = harness.run_experiment(cfg)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tsv_path = out_dir / "report.tsv"
    tsv_path.write_text(reports.evaluation_tsv(rows), encoding="utf-8")
    table = reports.evaluation_table(rows)
    (out_dir / "report.txt").write_text(table, encoding="utf-8")
    if not args.no_figures:
        from . import figures

        figures.render_sweep_figure(rows, out_dir / "defence_sweep.png")
    print(table, end="")
    print(f"report written to {tsv_path}")
    return 0


def build_parser() -> Parser:
    parser = Parser(prog="relusmooth", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model on a synthetic dataset")
    p.add_argument("--kind", default="moons", choices=data.DATASET_KINDS)
    p.add_argument("--size", type=int, default=500)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--data-seed", type=int, default=0)
    p.add_argument("--hidden", default="32", help="comma-separated hidden widths")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--learning-rate", type=float, default=0.5)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--unbiased", action="store_true")
    p.add_argument("--save-dataset", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("attack", help="build an attacked set from a clean dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--attack", required=True, choices=harness.ATTACK_NAMES)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--miss-k", type=int, default=1)
    p.add_argument("--lo", type=float, default=0.0)
    p.add_argument("--hi", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--results", default=None, help="also write per-sample result rows")
    p.set_defaults(func=cmd_attack)

    for name, fn in (("defend", cmd_defend), ("evaluate", cmd_evaluate)):
        p = sub.add_parser(name, help=f"{name} with post-averaging")
        p.add_argument("--model", required=True)
        if name == "defend":
            p.add_argument("--dataset", required=True)
        else:
            p.add_argument("--clean", required=True)
            p.add_argument("--attacked", required=True)
            p.add_argument("--epsilon", type=float, required=True)
            p.add_argument("--lo", type=float, default=0.0)
            p.add_argument("--hi", type=float, default=1.0)
            p.add_argument("--attack-label", default="external")
        p.add_argument("--radius", type=float, required=True)
        p.add_argument("--directions", type=int, default=20)
        p.add_argument("--sampler", default="random", choices=("random", "approx"))
        p.add_argument("--aggregation", default="logits", choices=("logits", "probabilities"))
        p.add_argument("--miss-k", type=int, default=1)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=None)
        p.set_defaults(func=fn)

    p = sub.add_parser("spectrum", help="decay report for a 2-D unbiased model")
    p.add_argument("--model", required=True)
    p.add_argument("--output-index", type=int, default=0)
    p.add_argument("--radius", type=float, required=True)
    p.add_argument("--freq", action="append", default=None, help="explicit frequency 'w1,w2'")
    p.add_argument("--grid", type=int, default=24)
    p.add_argument("--max-norm", type=float, default=40.0)
    p.add_argument("--angle", type=float, default=0.55)
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("region-stats", help="distances, crossings and sector count")
    p.add_argument("--model", required=True)
    p.add_argument("--point", required=True, help="input 'x1,x2,...'")
    p.add_argument("--point2", default=None)
    p.add_argument("--output-index", type=int, default=0)
    p.add_argument("--out", default=None, help="also write a machine-readable row")
    p.set_defaults(func=cmd_region_stats)

    p = sub.add_parser("run", help="full experiment from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_run)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ModelParseError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return INVARIANT_ERROR


if __name__ == "__main__":
    sys.exit(main())
