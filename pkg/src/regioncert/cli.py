"""Command line interface: train, certify, attack, oracle, report,
plot-regions.

Exit codes: 0 ok, 1 usage error, 2 data/model error, 3 consistency-gate
failure (a certified lower bound exceeding an attack upper bound).

Config precedence is CLI flags > --config file > built-in defaults; the
config file is flat ``key=value`` lines (keys match long flag names with
dashes or underscores, '#' comments allowed).
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from .attack import AttackConfig, pgd_attack
from .certify import NeighborBudget, certify_point, MISCLASSIFIED
from .data import IdxFormatError, gen_digits, gen_synthetic, load_idx
from .geometry import Box
from .mmr import MMRConfig, TrainConfig, train
from .modelio import ModelFormatError, load_model, save_model
from .network import forward
from .oracle import NoAdversarialFoundError, enumerate_patterns_oracle, grid_oracle
from .plotting import plot_regions
from .results import ResultRow, read_results, summarize, write_results

GATE_TOL = 1e-9

_CSV_DOC = """\
CSV schema: '#' summary comment lines, then a header row and one row per
point with columns
  point_index,true_label,predicted,clean_correct,status,d_B,d_D,
  lower_bound,is_exact,upper_bound,regions_explored,p,used_box
Floats use 17 significant digits; absent values are nan or inf."""


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # route argparse failures to exit code 1 instead of its default 2
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _pnorm(text):
    if text in ("inf", "Inf", "INF"):
        return math.inf
    value = float(text)
    if value not in (1.0, 2.0):
        raise argparse.ArgumentTypeError("p must be 1, 2 or inf")
    return value


def _neighbors(text):
    value = int(text)
    if not 0 <= value <= 64:
        raise argparse.ArgumentTypeError("neighbors must be in [0, 64]")
    return value


def _onoff(text):
    low = str(text).strip().lower()
    if low in ("on", "true", "1", "yes"):
        return True
    if low in ("off", "false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected on/off, got {text!r}")


def _add_data_args(sub):
    sub.add_argument("--dataset", choices=("two_gaussians", "moons", "digits"),
                     help="synthetic dataset kind")
    sub.add_argument("--n", type=int, default=200, help="synthetic sample count")
    sub.add_argument("--data-seed", type=int, default=0)
    sub.add_argument("--images", help="IDX image file")
    sub.add_argument("--labels", help="IDX label file")
    sub.add_argument("--limit", type=int, default=None,
                     help="use only the first LIMIT points")


def _load_data(args):
    if args.images or args.labels:
        if not (args.images and args.labels):
            raise UsageError("--images and --labels must be given together")
        return load_idx(args.images, args.labels, args.limit)
    if args.dataset is None:
        raise UsageError("no data source: give --dataset or --images/--labels")
    if args.dataset == "digits":
        images, y = gen_digits(args.n, args.data_seed)
        X = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    else:
        X, y = gen_synthetic(args.dataset, args.n, args.data_seed)
    if args.limit is not None:
        X, y = X[:args.limit], y[:args.limit]
    return X, y


def _box_for(args, dim):
    return Box.unit(dim) if getattr(args, "box", False) else None


def _certify_rows(net, X, y, args, with_attack):
    box = _box_for(args, X.shape[1])
    budget = NeighborBudget(max_regions=args.neighbors)
    acfg = None
    if with_attack and args.eps > 0:
        acfg = AttackConfig(eps=args.eps, p=args.pnorm, iters=args.attack_iters,
                            restarts=args.restarts, seed=args.seed)
    rows = []
    for i in range(X.shape[0]):
        cert = certify_point(net, X[i], int(y[i]), args.pnorm, box, budget,
                             point_index=i)
        upper = math.inf
        if cert.status == MISCLASSIFIED:
            upper = 0.0
        elif acfg is not None:
            res = pgd_attack(net, X[i], int(y[i]), acfg, box)
            if res.success:
                upper = res.perturbation_norm
        rows.append(ResultRow(
            point_index=i,
            true_label=int(y[i]),
            predicted=cert.predicted_class,
            clean_correct=int(cert.predicted_class == int(y[i])),
            status=cert.status,
            d_B=cert.d_B,
            d_D=cert.d_D,
            lower_bound=cert.lower_bound,
            is_exact=int(cert.is_exact),
            upper_bound=upper,
            regions_explored=cert.regions_explored,
            p=args.pnorm,
            used_box=int(box is not None),
        ))
    return rows


def _print_summary(summary):
    for key, value in summary.items():
        if isinstance(value, float):
            print(f"{key}={value:.6g}")
        else:
            print(f"{key}={value}")


def _cmd_train(args):
    X, y = _load_data(args)
    hidden = [int(h) for h in str(args.hidden).split(",") if h != ""]
    if not hidden or any(h < 1 for h in hidden):
        raise UsageError("--hidden must be a comma list of positive widths")
    tcfg = TrainConfig(epochs=args.epochs, batch_size=args.batch_size,
                       learning_rate=args.lr, seed=args.seed,
                       adversarial_mix=args.adv_mix,
                       attack_eps=args.attack_eps)
    mmr = None
    if args.mmr:
        mmr = MMRConfig(gamma_B=args.gamma_b, gamma_D=args.gamma_d,
                        lam=args.lam, p=args.pnorm)
    box = _box_for(args, X.shape[1])
    net, history = train(X, y, hidden, tcfg, mmr=mmr, box=box)
    meta = {
        "seed": args.seed, "epochs": args.epochs, "hidden": hidden,
        "mmr": bool(args.mmr),
        "gamma_B": args.gamma_b if args.mmr else None,
        "gamma_D": args.gamma_d if args.mmr else None,
        "lam": args.lam if args.mmr else None,
        "dataset": args.dataset or args.images,
    }
    save_model(args.out, net, meta)
    last = history[-1] if history else {}
    print(f"saved {args.out}  train_error={last.get('train_error', float('nan')):.4f} "
          f"loss={last.get('loss', float('nan')):.4f}")
    return 0


def _cmd_certify(args):
    net = load_model(args.model)
    X, y = _load_data(args)
    rows = _certify_rows(net, X, y, args, with_attack=args.attack)
    summary = summarize(rows, eps=args.eps)
    if args.out:
        write_results(args.out, rows, summary)
    _print_summary(summary)
    return 0


def _cmd_attack(args):
    net = load_model(args.model)
    X, y = _load_data(args)
    box = _box_for(args, X.shape[1])
    acfg = AttackConfig(eps=args.eps, p=args.pnorm, iters=args.attack_iters,
                        restarts=args.restarts, seed=args.seed)
    rows = []
    for i in range(X.shape[0]):
        pred = int(np.argmax(forward(net, X[i]).logits))
        correct = pred == int(y[i])
        if not correct:
            upper = 0.0
        else:
            res = pgd_attack(net, X[i], int(y[i]), acfg, box)
            upper = res.perturbation_norm if res.success else math.inf
        rows.append(ResultRow(
            point_index=i, true_label=int(y[i]), predicted=pred,
            clean_correct=int(correct), status="ATTACKED",
            d_B=math.nan, d_D=math.nan, lower_bound=0.0, is_exact=0,
            upper_bound=upper, regions_explored=0, p=args.pnorm,
            used_box=int(box is not None),
        ))
    summary = summarize(rows, eps=args.eps)
    if args.out:
        write_results(args.out, rows, summary)
    _print_summary(summary)
    return 0


def _cmd_oracle(args):
    net = load_model(args.model)
    X, y = _load_data(args)
    box = _box_for(args, X.shape[1])
    for i in range(X.shape[0]):
        try:
            if args.method == "grid":
                res = grid_oracle(net, X[i], args.pnorm, args.radius,
                                  args.resolution, box)
            else:
                res = enumerate_patterns_oracle(net, X[i], args.pnorm, box)
            print(f"point {i}: value={res.value:.17g} method={res.method} "
                  f"tol={res.tol:.3g}")
        except NoAdversarialFoundError:
            print(f"point {i}: no adversarial within radius")
    return 0


def _merge_report_rows(cert_rows, attack_rows):
    by_index = {r.point_index: r for r in attack_rows}
    merged = []
    for row in cert_rows:
        other = by_index.get(row.point_index)
        if other is not None and other.upper_bound < row.upper_bound:
            row.upper_bound = other.upper_bound
        merged.append(row)
    return merged


def _cmd_report(args):
    if args.certify_csv:
        cert_rows, _ = read_results(args.certify_csv)
        attack_rows = []
        if args.attack_csv:
            attack_rows, _ = read_results(args.attack_csv)
        rows = _merge_report_rows(cert_rows, attack_rows)
    else:
        if not args.model:
            raise UsageError("report needs --certify-csv or --model plus data")
        net = load_model(args.model)
        X, y = _load_data(args)
        rows = _certify_rows(net, X, y, args, with_attack=True)
    summary = summarize(rows, eps=args.eps)
    if args.out:
        write_results(args.out, rows, summary)
    _print_summary(summary)
    violations = summary.get("sandwich_violations", 0)
    if violations:
        print(f"consistency gate FAILED: {violations} row(s) with "
              f"lower_bound > upper_bound + {GATE_TOL}", file=sys.stderr)
        return 3
    return 0


def _cmd_plot_regions(args):
    net = load_model(args.model)
    anchors = None
    if args.anchors:
        with open(args.anchors) as fh:
            anchors = np.array(json.load(fh), dtype=np.float64)
    count = plot_regions(net, args.out, resolution=args.resolution,
                         lower=args.lower, upper=args.upper, anchors=anchors)
    print(f"patterns={count}")
    return 0


def build_parser():
    parser = _Parser(prog="regioncert",
                     description="Certification and robust training for "
                                 "fully connected ReLU classifiers.",
                     epilog=_CSV_DOC,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    subs = parser.add_subparsers(dest="command", required=True, metavar="command")
    named = {}

    def add(name, func, **kw):
        sub = subs.add_parser(name, **kw)
        sub.add_argument("--config", help="flat key=value settings file")
        sub.set_defaults(func=func)
        named[name] = sub
        return sub

    t = add("train", _cmd_train, help="train a model")
    _add_data_args(t)
    t.add_argument("--hidden", default="64", help="comma list of hidden widths")
    t.add_argument("--epochs", type=int, default=30)
    t.add_argument("--batch-size", type=int, default=128)
    t.add_argument("--lr", type=float, default=1e-3)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--pnorm", type=_pnorm, default=2.0)
    t.add_argument("--mmr", action="store_true", help="enable margin regularizer")
    t.add_argument("--gamma-b", type=float, default=0.2)
    t.add_argument("--gamma-d", type=float, default=0.1)
    t.add_argument("--lam", type=float, default=1.0)
    t.add_argument("--adv-mix", action="store_true",
                   help="replace half of each batch with PGD examples")
    t.add_argument("--attack-eps", type=float, default=0.1)
    t.add_argument("--box", type=_onoff, default=False,
                   help="constrain adversarial-mix attacks to [0,1]^d")
    t.add_argument("--out", required=True, help="output model JSON path")

    c = add("certify", _cmd_certify, help="certify every point of a dataset")
    _add_data_args(c)
    c.add_argument("--model", required=True)
    c.add_argument("--pnorm", type=_pnorm, default=2.0)
    c.add_argument("--box", type=_onoff, default=False)
    c.add_argument("--neighbors", type=_neighbors, default=5,
                   help="region exploration budget")
    c.add_argument("--eps", type=float, default=0.1,
                   help="radius for robust-error summaries")
    c.add_argument("--attack", type=_onoff, default=True,
                   help="also run PGD for per-point upper bounds")
    c.add_argument("--attack-iters", type=int, default=40)
    c.add_argument("--restarts", type=int, default=3)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", help="output CSV path")

    a = add("attack", _cmd_attack, help="PGD-attack every point of a dataset")
    _add_data_args(a)
    a.add_argument("--model", required=True)
    a.add_argument("--pnorm", type=_pnorm, default=2.0)
    a.add_argument("--box", type=_onoff, default=False)
    a.add_argument("--eps", type=float, default=0.1)
    a.add_argument("--attack-iters", type=int, default=40)
    a.add_argument("--restarts", type=int, default=3)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--out", help="output CSV path")

    o = add("oracle", _cmd_oracle, help="brute-force minimal perturbations "
                                        "(tiny models only)")
    _add_data_args(o)
    o.add_argument("--model", required=True)
    o.add_argument("--pnorm", type=_pnorm, default=2.0)
    o.add_argument("--method", choices=("grid", "enum"), default="enum")
    o.add_argument("--radius", type=float, default=1.0, help="grid scan radius")
    o.add_argument("--resolution", type=int, default=200)
    o.add_argument("--box", type=_onoff, default=False)

    r = add("report", _cmd_report, help="combined lower/upper bound report "
                                        "with a consistency gate")
    _add_data_args(r)
    r.add_argument("--model")
    r.add_argument("--certify-csv", help="merge an existing certify CSV")
    r.add_argument("--attack-csv", help="merge an existing attack CSV")
    r.add_argument("--pnorm", type=_pnorm, default=2.0)
    r.add_argument("--box", type=_onoff, default=False)
    r.add_argument("--neighbors", type=_neighbors, default=5)
    r.add_argument("--eps", type=float, default=0.1)
    r.add_argument("--attack-iters", type=int, default=40)
    r.add_argument("--restarts", type=int, default=3)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", help="output CSV path")

    pr = add("plot-regions", _cmd_plot_regions,
             help="rasterize linear regions of a 2D slice to a PPM image")
    pr.add_argument("--model", required=True)
    pr.add_argument("--resolution", type=int, default=200)
    pr.add_argument("--lower", type=float, default=0.0)
    pr.add_argument("--upper", type=float, default=1.0)
    pr.add_argument("--anchors", help="JSON file with three input points")
    pr.add_argument("--out", required=True, help="output PPM path")

    return parser, named


def _apply_config(parser, named, argv):
    """First parse finds --config; its key=value pairs become subcommand
    defaults, then a clean re-parse lets explicit flags win."""
    args = parser.parse_args(argv)
    path = getattr(args, "config", None)
    if not path:
        return args
    sub = named[args.command]
    actions = {act.dest: act for act in sub._actions}
    overrides = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, _, value = line.partition("=")
            dest = key.strip().replace("-", "_")
            value = value.strip()
            if dest not in actions:
                raise UsageError(f"{path}:{lineno}: unknown key {key.strip()!r}")
            action = actions[dest]
            if isinstance(action, (argparse._StoreTrueAction,
                                   argparse._StoreFalseAction)):
                overrides[dest] = _onoff(value)
            else:
                overrides[dest] = value  # string defaults get type-converted
    sub.set_defaults(**overrides)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser, named = build_parser()
    try:
        args = _apply_config(parser, named, argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except argparse.ArgumentTypeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (IdxFormatError, ModelFormatError, NoAdversarialFoundError,
            OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
