"""Command line interface: ``rbd <command> ...``.

Run ``rbd --help`` or ``rbd <command> --help`` for the options.
"""

import argparse
import sys
import time

import numpy as np

from . import io as rbdio
from .classify import evaluate, fit, repeated_error
from .core import FixedColumn, RbdConfig, SeededRandom, compress_matrix, project, rbd_decompose
from .datasets import FunctionId, gen_grid_matrix, gen_labeled_blobs
from .exceptions import RbdError
from .svd import svd_error_history, truncated_svd


def _start(text):
    kind, _, value = text.partition(":")
    try:
        if kind == "col":
            return FixedColumn(int(value))
        if kind == "seed":
            return SeededRandom(int(value))
    except ValueError:
        pass
    raise argparse.ArgumentTypeError(f"expected col:<index> or seed:<seed>, got {text!r}")


def _channels(path, fmt=None):
    data = rbdio.read_matrix(path, fmt)
    return data if isinstance(data, list) else [data]


def _config(args, n):
    d_max = n if args.dmax is None else args.dmax
    return RbdConfig(
        d_max=d_max,
        eps_r=args.eps,
        start=args.start,
        weight=rbdio.read_weight(args.weight),
        reorthogonalize=args.reorth,
        breakdown_tol=args.breakdown_tol,
    )


def cmd_compress(args):
    models = []
    for X in _channels(args.input, args.format):
        if args.rows:
            X = X.T
        models.append(rbd_decompose(X, _config(args, X.shape[1])))
    rbdio.write_model(models, args.output)
    for k, model in enumerate(models):
        tag = f"channel {k}: " if len(models) > 1 else ""
        print(f"{tag}d={model.d} E={model.residual_history[-1]:.6e} ({model.stopped_by})")
    return 0


def cmd_decompress(args):
    channels = []
    for model in rbdio.read_models(args.model):
        X = compress_matrix(model)
        channels.append(X.T if args.rows else X)
    fmt = rbdio.guess_format(args.output, args.format)
    if fmt == "ppm":
        if len(channels) != 3:
            raise RbdError(f"PPM output needs 3 models, file holds {len(channels)}")
        rbdio.write_pnm(channels, args.output)
    else:
        if len(channels) != 1:
            raise RbdError(f"{fmt} output needs 1 model, file holds {len(channels)}; use .ppm")
        rbdio.write_matrix(channels[0], args.output, fmt)
    return 0


def cmd_project(args):
    model = rbdio.read_model(args.model)
    V = rbdio.read_matrix(args.vectors, args.format)
    if isinstance(V, list):
        raise RbdError("project expects a single matrix, not a colour image")
    if V.shape[0] != model.m and V.shape[1] == model.m:
        V = V.T
    C = project(model, V)
    for col in C.T:
        print(" ".join(repr(float(x)) for x in col))
    return 0


def cmd_compare(args):
    X = _channels(args.input, args.format)[0]
    if args.rows:
        X = X.T
    K = args.dmax
    cfg = RbdConfig(d_max=K, eps_r=0.0, start=args.start, reorthogonalize=args.reorth,
                    breakdown_tol=args.breakdown_tol)
    t0 = time.perf_counter()
    model = rbd_decompose(X, cfg)
    t_rbd = time.perf_counter() - t0
    t0 = time.perf_counter()
    svd = truncated_svd(X, K)
    t_svd = time.perf_counter() - t0
    eS_fro = svd_error_history(X, K, "fro")

    R_rbd = X.copy()
    R_svd = X.copy()
    print("# d  e_R(fro)  e_S(fro)  e_R(max)  e_S(max)")
    for d in range(K):
        if d < model.d:
            R_rbd -= np.outer(model.Y[:, d], model.T[d])
        R_svd -= svd.s[d] * np.outer(svd.U[:, d], svd.V[:, d])
        print(f"{d + 1} {np.linalg.norm(R_rbd):.6e} {eS_fro[d]:.6e} "
              f"{np.abs(R_rbd).max():.6e} {np.abs(R_svd).max():.6e}")
    print(f"# time rbd {t_rbd:.6f} s, svd {t_svd:.6f} s "
          "(reference Jacobi SVD, not a performance baseline)")
    if model.d < K:
        print(f"# rbd stopped at d={model.d} ({model.stopped_by})")
    return 0


def cmd_gen(args):
    X = gen_grid_matrix(FunctionId(args.func), args.n)
    rbdio.write_matrix(X, args.output, args.format)
    return 0


def cmd_gen_blobs(args):
    X, labels = gen_labeled_blobs(args.classes, args.per_class, args.dim, args.spread, args.seed)
    rbdio.write_matrix(X, args.output, args.format)
    rbdio.write_labels(labels, args.labels or f"{args.output}.labels")
    return 0


def cmd_classify(args):
    train = _channels(args.train)[0]
    labels = rbdio.read_labels(args.labels)
    test = _channels(args.test)[0]
    test_labels = rbdio.read_labels(args.test_labels)
    cfg = _config(args, train.shape[1])
    if args.reps <= 1:
        err = evaluate(fit(train, labels, cfg), test, test_labels)
    else:
        # pool the data and redraw splits with the same per-class training quota
        X = np.hstack([train, test])
        y = np.concatenate([labels, test_labels])
        quota = int(min(np.sum(labels == c) for c in np.unique(labels)))
        err, _ = repeated_error(X, y, quota, cfg.d_max, reps=args.reps, seed=args.seed, cfg=cfg)
    print(f"{err:.6f}")
    return 0


def cmd_info(args):
    models = rbdio.read_models(args.model)
    for k, model in enumerate(models):
        if len(models) > 1:
            print(f"[model {k}]")
        weight = type(model.weight).__name__ if model.weight is not None else "external"
        print(f"m {model.m}")
        print(f"n {model.n}")
        print(f"d {model.d}")
        print(f"eps_R {model.eps_r!r}")
        print(f"weight {weight}")
        print("residual_history " + " ".join(f"{x:.6e}" for x in model.residual_history))
    return 0


def _rbd_options(p):
    p.add_argument("--dmax", type=int, default=None, help="largest basis size (default: all columns)")
    p.add_argument("--eps", type=float, default=0.0, help="error tolerance eps_R (default 0)")
    p.add_argument("--weight", default="identity", help="identity, diag:<file> or spd:<file>")
    p.add_argument("--start", type=_start, default=FixedColumn(0), help="col:<i> or seed:<s>")
    p.add_argument("--reorth", action="store_true", help="two Gram-Schmidt sweeps per vector")
    p.add_argument("--breakdown-tol", type=float, default=None,
                   help="Gram-Schmidt breakdown threshold (default: eps)")


def build_parser():
    parser = argparse.ArgumentParser(prog="rbd", description="Reduced basis decomposition toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compress", help="decompose a matrix or image into a model file")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--format", default=None, help="input format: mm, csv, pgm, ppm")
    p.add_argument("--rows", action="store_true", help="compress the row space (transpose first)")
    _rbd_options(p)
    p.set_defaults(handler=cmd_compress)

    p = sub.add_parser("decompress", help="reconstruct Y T from a model file")
    p.add_argument("model")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--format", default=None)
    p.add_argument("--rows", action="store_true", help="model was built with --rows")
    p.set_defaults(handler=cmd_decompress)

    p = sub.add_parser("project", help="print reduced coordinates Y'v of vectors")
    p.add_argument("model")
    p.add_argument("vectors")
    p.add_argument("--format", default=None)
    p.set_defaults(handler=cmd_project)

    p = sub.add_parser("compare", help="error histories of RBD and SVD for d = 1..K")
    p.add_argument("input")
    p.add_argument("--dmax", type=int, required=True)
    p.add_argument("--format", default=None)
    p.add_argument("--rows", action="store_true")
    p.add_argument("--start", type=_start, default=FixedColumn(0))
    p.add_argument("--reorth", action="store_true")
    p.add_argument("--breakdown-tol", type=float, default=None)
    p.set_defaults(handler=cmd_compare)

    p = sub.add_parser("gen", help="sample a test function on a grid")
    p.add_argument("--func", required=True, choices=[f.value for f in FunctionId])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--format", default=None)
    p.set_defaults(handler=cmd_gen)

    p = sub.add_parser("gen-blobs", help="labeled Gaussian clusters (labels go to <out>.labels)")
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--per-class", type=int, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--spread", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--labels", default=None, help="label file (default: <out>.labels)")
    p.add_argument("--format", default=None)
    p.set_defaults(handler=cmd_gen_blobs)

    p = sub.add_parser("classify", help="nearest-neighbour classification in the reduced space")
    p.add_argument("--train", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--test-labels", required=True)
    p.add_argument("--reps", type=int, default=1,
                   help="> 1: pool the data and average over random per-class splits")
    p.add_argument("--seed", type=int, default=0)
    _rbd_options(p)
    p.set_defaults(handler=cmd_classify)

    p = sub.add_parser("info", help="print model dimensions and residual history")
    p.add_argument("model")
    p.set_defaults(handler=cmd_info)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (RbdError, ValueError, OSError) as exc:
        print(f"rbd {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
