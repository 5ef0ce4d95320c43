"""Command-line entry point: ``preattack {generate,classify,bounds,oracle,eval}``.

Exit codes: 0 success, 2 usage, 3 domain error, 4 I/O error. Failures print
one ``error: code=<n> kind=<Exception> message=<...>`` line on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from . import bounds as bounds_mod
from .classifier import score, score_prefixes
from .config import ConfigError, load_experiment
from .eval_harness import parse_variants, run_experiment, write_dat, write_rows
from .graph_core import FAKE, REAL, LabeledNetwork, check_prior, ingest_network, ingest_stream, read_labels, \
    write_edges, write_labels, write_stream
from .kcdpa_sim import AlphaSpec, sample_labels, sample_stream
from .oracle import DEFAULT_CAP, exact_posterior
from .pa_tables import build_homophily_table, build_plusplus_table, build_preattack_table

log = logging.getLogger("preattack")

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN, EXIT_IO = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _prior(text: str, k: int | None) -> np.ndarray:
    vals = [float(x) for x in text.split(",")]
    return check_prior(vals if len(vals) > 1 else vals[0], k)


def _alpha_values(text: str, k: int) -> AlphaSpec:
    return AlphaSpec.from_values([float(x) for x in text.split(",")], k)


def _checkpoints(text: str | None) -> list[int] | None:
    if text is None:
        return None
    return [int(x) for x in text.split(",") if x.strip()]


def _out(path):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", newline="", encoding="utf-8"), True


def _fmt(x: float) -> str:
    return repr(float(x))


def _add_network(p, flag="--network"):
    p.add_argument(flag, nargs=2, metavar=("LABELS", "EDGES"), required=True,
                   help="preexisting labels file and E0 edges file")


def _table(args, network: LabeledNetwork, stream):
    if args.plus_plus is not None:
        return build_plusplus_table(network, _alpha_values(args.plus_plus, network.k), stream)
    if args.homophily is not None:
        return build_homophily_table(network, _alpha_values(args.homophily, network.k), stream)
    return build_preattack_table(network, args.alpha, stream)


def cmd_generate(args) -> int:
    overrides = {"seed": None if args.seed is None else str(args.seed)}
    cfg = load_experiment(args.config, overrides)
    print(cfg.to_text(), end="", file=sys.stderr)
    network, src, dst = cfg.build_network()
    prefix = args.out_prefix
    if src is not None:
        write_labels(network.label_map(), prefix + ".net-labels", network.k)
        write_edges(src, dst, prefix + ".edges")
    sim = cfg.sim_config(network)
    labels = sample_labels(sim)
    stream = sample_stream(network, labels, sim)
    write_labels(labels, prefix + ".labels", cfg.k)
    write_stream(stream, prefix + ".stream")
    return EXIT_OK


def cmd_classify(args) -> int:
    network = ingest_network(*args.table)
    if args.k is not None and args.k != network.k:
        raise ValueError(f"--k {args.k} but the labels file declares k={network.k}")
    prior = _prior(args.prior, network.k)
    stream = ingest_stream(args.stream, network)
    table = _table(args, network, stream)
    if args.dump_tables:
        table.dump(args.dump_tables)
    mode = "send_only" if args.send_only else "full"
    k = network.k
    cps = _checkpoints(args.checkpoints)
    fh, own = _out(args.out)
    try:
        fh.write(f"#preattack-posteriors v1 table={table.kind} mode={mode}\n")
        w = csv.writer(fh, lineterminator="\n")
        if k == 2:
            w.writerow(["user", "checkpoint", "posterior_fake", "log_joint_F", "log_joint_R", "n_send", "n_recv"])
        else:
            w.writerow(["user", "checkpoint"] + [f"posterior_{c}" for c in range(k)]
                       + [f"log_joint_{c}" for c in range(k)] + ["n_send", "n_recv"])

        def emit(user, cp, post, lj, ns, nr):
            if k == 2:
                w.writerow([user, cp, _fmt(post[FAKE]), _fmt(lj[FAKE]), _fmt(lj[REAL]), ns, nr])
            else:
                w.writerow([user, cp] + [_fmt(x) for x in post] + [_fmt(x) for x in lj] + [ns, nr])

        if cps is None:
            res = score(table, stream, prior, mode, threads=args.threads)
            for i, u in enumerate(res.users.tolist()):
                emit(u, "all", res.posterior[i], res.log_joint[i], int(res.n_send[i]), int(res.n_recv[i]))
        else:
            res = score_prefixes(table, stream, prior, cps, mode)
            for i, u in enumerate(res.users.tolist()):
                for ci, x in enumerate(res.checkpoints.tolist()):
                    emit(u, x, res.posterior[ci, i], res.log_joint[ci, i],
                         int(res.n_send[ci, i]), int(res.n_recv[ci, i]))
    finally:
        if own:
            fh.close()
    return EXIT_OK


def cmd_bounds(args) -> int:
    network = ingest_network(*args.network)
    prior = _prior(args.prior, 2)
    stream = ingest_stream(args.stream, network)
    alpha = _alpha_values(args.plus_plus, 2) if args.plus_plus else AlphaSpec.uniform(args.alpha, 2)
    table = build_plusplus_table(network, alpha, stream) if args.plus_plus else \
        build_preattack_table(network, args.alpha, stream)
    fh, own = _out(args.out)
    try:
        fh.write("#preattack-bounds v1\n")
        if args.max_batch:
            n, users = bounds_mod.max_batch(network, table, stream, prior, args.f_lower, args.f_upper)
            fh.write("max_batch_events,users,f_lower_min,f_upper_max\n")
            fh.write(f"{n},{users},{_fmt(args.f_lower)},{_fmt(args.f_upper)}\n")
            return EXIT_OK
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user", "p_hat", "f_lower", "f_upper", "p_wcf", "p_wcr"])
        for b in bounds_mod.compute_bounds(network, table, stream, prior,
                                           literal_wcr_alpha=args.literal_wcr_alpha):
            w.writerow([b.user, _fmt(b.p_hat), _fmt(b.f_lower), _fmt(b.f_upper),
                        _fmt(b.worst_case_posterior_F), _fmt(b.worst_case_posterior_R)])
    finally:
        if own:
            fh.close()
    return EXIT_OK


def cmd_oracle(args) -> int:
    network = ingest_network(*args.network)
    prior = _prior(args.prior, network.k)
    stream = ingest_stream(args.stream, network)
    cond = None
    if args.condition_labels:
        cond, _ = read_labels(args.condition_labels)
    exact = exact_posterior(network, stream, prior, args.user, args.alpha, cap=args.cap,
                            evidence=args.evidence, condition_labels=cond, threads=args.threads)
    out = {"format": "preattack-oracle v1", "user": args.user, "p_star": exact.p_star.tolist(),
           "enumerated_combinations": exact.enumerated_combinations}
    table = build_preattack_table(network, args.alpha, stream)
    res = score(table, stream, prior)
    idx = np.flatnonzero(res.users == np.uint64(args.user))
    if idx.size:
        post = res.posterior[idx[0]]
        out["p_hat"] = post.tolist()
        if network.k == 2:
            out["ratio"] = float(post[FAKE] / exact.p_star[FAKE])
            (b,) = bounds_mod.compute_bounds(network, table, stream, prior, users=[args.user])
            out["f_lower"], out["f_upper"] = b.f_lower, b.f_upper
    print(json.dumps(out))
    return EXIT_OK


def cmd_eval(args) -> int:
    overrides = {"seed": None if args.seed is None else str(args.seed), "checkpoints": args.checkpoints}
    cfg = load_experiment(args.config, overrides)
    variants = parse_variants(args.variants)
    if args.seeds < 1:
        raise UsageError("--seeds must be >= 1")
    print(cfg.to_text(), end="", file=sys.stderr)
    print(f"# variants={','.join(variants)} seeds={args.seeds}", file=sys.stderr)
    print("# ground truth: simulator-sampled labels", file=sys.stderr)
    curves, rows = run_experiment(cfg, variants, args.seeds, threads=args.threads)
    fh, own = _out(args.out)
    try:
        write_rows(rows, fh)
    finally:
        if own:
            fh.close()
    if args.dat:
        write_dat(curves, args.dat)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: code={EXIT_USAGE} kind=UsageError message={json.dumps(message)}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=1, help="worker threads (output is identical for any value)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="preattack", description="Classify new accounts from their first friend requests.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", parents=[common], help="simulate new-user labels and a request stream")
    g.add_argument("--config", required=True)
    g.add_argument("--out-prefix", required=True)
    g.add_argument("--seed", type=int)
    g.set_defaults(func=cmd_generate)

    c = sub.add_parser("classify", parents=[common], help="approximate posteriors for new users")
    _add_network(c, "--table")
    c.add_argument("--stream", required=True)
    c.add_argument("--prior", required=True, help="P[fake], or a k-vector")
    c.add_argument("--alpha", type=float, default=1.0)
    variant = c.add_mutually_exclusive_group()
    variant.add_argument("--plus-plus", metavar="ALPHA8", help="label-dependent alpha (2k^2 comma values)")
    variant.add_argument("--homophily", metavar="ALPHA8", help="class-rate-only table with these alphas")
    c.add_argument("--send-only", action="store_true")
    c.add_argument("--k", type=int)
    c.add_argument("--checkpoints")
    c.add_argument("--dump-tables", metavar="CSV")
    c.add_argument("--out")
    c.set_defaults(func=cmd_classify)

    b = sub.add_parser("bounds", parents=[common], help="worst-case approximation factors")
    _add_network(b)
    b.add_argument("--stream", required=True)
    b.add_argument("--prior", required=True)
    b.add_argument("--alpha", type=float, default=1.0)
    b.add_argument("--plus-plus", metavar="ALPHA8")
    b.add_argument("--literal-wcr-alpha", action="store_true",
                   help="keep the alpha term inside the E0 sum of the upper-bound send denominator")
    b.add_argument("--max-batch", action="store_true")
    b.add_argument("--f-lower", type=float, default=0.85)
    b.add_argument("--f-upper", type=float, default=1.1)
    b.add_argument("--out")
    b.set_defaults(func=cmd_bounds)

    o = sub.add_parser("oracle", parents=[common], help="brute-force exact posterior for one user")
    _add_network(o)
    o.add_argument("--stream", required=True)
    o.add_argument("--prior", required=True)
    o.add_argument("--user", type=int, required=True)
    o.add_argument("--alpha", type=float, default=1.0)
    o.add_argument("--cap", type=int, default=DEFAULT_CAP)
    o.add_argument("--evidence", choices=("target", "all"), default="target")
    o.add_argument("--condition-labels", metavar="LABELS",
                   help="fix the other new users' labels instead of summing them out")
    o.set_defaults(func=cmd_oracle)

    e = sub.add_parser("eval", parents=[common], help="AUC vs. request-count curves on simulated data")
    e.add_argument("--config", required=True)
    e.add_argument("--variants", default="all")
    e.add_argument("--seeds", type=int, default=20)
    e.add_argument("--seed", type=int, help="first seed (overrides the config)")
    e.add_argument("--checkpoints")
    e.add_argument("--out")
    e.add_argument("--dat", help="also write gnuplot-style curve blocks")
    e.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        return _fail(EXIT_USAGE, UsageError("--threads must be >= 1"))
    try:
        _check_inputs(args)
        return args.func(args)
    except UsageError as exc:
        return _fail(EXIT_USAGE, exc)
    except OSError as exc:
        return _fail(EXIT_IO, exc)
    except (ValueError, KeyError, ConfigError, RuntimeError) as exc:
        return _fail(EXIT_DOMAIN, exc)


def _check_inputs(args) -> None:
    """Fail on missing input files before any work starts."""
    paths = []
    for name in ("table", "network"):
        paths += list(getattr(args, name, None) or [])
    for name in ("stream", "condition_labels"):
        if getattr(args, name, None):
            paths.append(getattr(args, name))
    for p in paths:
        if not os.path.isfile(p):
            raise FileNotFoundError(f"no such input file: {p}")


def _fail(code: int, exc: BaseException) -> int:
    msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else str(exc)
    print(f"error: code={code} kind={type(exc).__name__} message={json.dumps(str(msg))}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
