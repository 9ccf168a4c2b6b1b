"""Command-line interface.

Exit status: 0 on success, 1 for invalid arguments, 2 for data or model errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .counts import build_count_trie, default_depth
from .estimators import fit_joint, fit_single
from .evaluation import format_table, load_config, run_experiment, sweep_lambda
from .modelio import (ModelFile, fmt_float, joint_model_file, load_model,
                      single_model_file)
from .scoring import PenaltyConfig
from .seqio import Alphabet, Sequence, infer_alphabet, load_sequence, tokenize, write_sequence
from .vlmc import kl_rate, sample

GROUP_COLORS = {None: "lightgrey", 0: "palegreen", 1: "lightskyblue", 2: "lightsalmon"}
GROUP_NAMES = {None: "context", 0: "shared", 1: "X only", 2: "Y only"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _depth(args, n, m=None) -> int:
    if args.full_depth:
        return max(0, (n if m is None else max(n, m)) - 1)
    return args.depth if args.depth is not None else default_depth(n, m)


def _alphabet(args) -> Alphabet | None:
    return Alphabet(tuple(args.alphabet.split())) if args.alphabet else None


def _emit(text: str, path) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def cmd_fit(args) -> int:
    seq, alphabet = load_sequence(args.input, _alphabet(args), args.mode)
    depth = _depth(args, len(seq))
    trie = build_count_trie(seq, depth)
    res = fit_single(trie, PenaltyConfig(args.lam), depth)
    _emit(single_model_file(alphabet, res.theta).dumps(), args.output)
    return 0


def cmd_fit_joint(args) -> int:
    alphabet = _alphabet(args)
    if alphabet is None:
        tokens = []
        for path in (args.x, args.y):
            tokens += tokenize(Path(path).read_text(encoding="utf-8"), args.mode)
        alphabet = infer_alphabet(tokens)
    x, _ = load_sequence(args.x, alphabet, args.mode)
    y, _ = load_sequence(args.y, alphabet, args.mode)
    depth = _depth(args, len(x), len(y))
    tx, ty = build_count_trie(x, depth), build_count_trie(y, depth)
    res = fit_joint(tx, ty, PenaltyConfig(args.lam), depth, keep_scores=bool(args.scores))
    _emit(joint_model_file(alphabet, res).dumps(), args.output)
    if args.scores:
        rows = [{**r, "context": alphabet.format_context(r["context"]),
                 "vx": fmt_float(r["vx"]), "vy": fmt_float(r["vy"]), "vxy": fmt_float(r["vxy"])}
                for r in res.score_table.rows()]
        Path(args.scores).write_text(json.dumps(rows, indent=1, sort_keys=True) + "\n",
                                     encoding="utf-8")
    return 0


def cmd_sample(args) -> int:
    mf = load_model(args.model)
    model = mf.source(args.source)
    data = sample(model, args.n, args.seed)
    write_sequence(args.output, Sequence(data, mf.alphabet), args.mode)
    return 0


def cmd_kl(args) -> int:
    p = load_model(args.p)
    q = load_model(args.q)
    if p.alphabet != q.alphabet:
        raise ValueError("models use different alphabets")
    value = kl_rate(p.source(args.source_p), q.source(args.source_q))
    print(f"{value:.10g}")
    return 0


def cmd_experiment(args) -> int:
    cfg = load_config(args.config)
    if args.reps is not None:
        cfg = cfg.with_(reps=args.reps)
    report = run_experiment(cfg, jobs=args.jobs, keep_replications=bool(args.csv))
    out = report.to_dict()
    if args.sweep:
        out["lambda_sweep"] = [[lam, f] for lam, f in sweep_lambda(cfg, jobs=args.jobs)]
    from .evaluation import _round
    _emit(json.dumps(_round(out), indent=2, sort_keys=True) + "\n", args.output)
    if args.csv:
        report.write_csv(args.csv, cfg.alphabet)
    if args.output not in (None, "-"):
        sys.stdout.write(report.table())
    return 0


def cmd_compare(args) -> int:
    cfg = load_config(args.config)
    if args.reps is not None:
        cfg = cfg.with_(reps=args.reps)
    report = run_experiment(cfg, jobs=args.jobs)
    sys.stdout.write(report.table())
    return 0


def model_to_dot(mf: ModelFile) -> str:
    """DOT rendering of a (joint) context tree; edges carry the prepended symbol."""
    alpha = mf.alphabet

    def node_id(ctx):
        return "n_" + "_".join(map(str, ctx)) if ctx else "root"

    leaves = {(e.context, e.group) for e in mf.entries}
    # proper suffixes of contexts
    internal = {ctx[j:] for ctx, _ in leaves for j in range(1, len(ctx) + 1)}
    lines = ["digraph context_tree {", "  rankdir=TB;", '  node [fontname="Helvetica"];']
    for ctx in sorted(internal, key=lambda c: (len(c), c)):
        label = alpha.format_context(ctx) or "ε"
        lines.append(f'  {node_id(ctx)} [label="{label}", shape=circle];')
        if ctx:
            lines.append(f'  {node_id(ctx[1:])} -> {node_id(ctx)} '
                         f'[label="{alpha.symbols[ctx[0]]}"];')
    key = [(-1 if e.group is None else e.group, len(e.context), e.context) for e in mf.entries]
    for _, e in sorted(zip(key, mf.entries), key=lambda t: t[0]):
        ctx = e.context
        leaf = f"leaf_{'s' if e.group is None else e.group}_{node_id(ctx)}"
        theta = ("undefined" if e.theta is None
                 else ", ".join(f"{p:.4f}" for p in e.theta))
        label = f"{alpha.format_context(ctx) or 'ε'}\\n[{theta}]"
        if e.group is not None:
            label += f"\\n{GROUP_NAMES[e.group]}"
        lines.append(f'  {leaf} [label="{label}", shape=box, style=filled, '
                     f'fillcolor={GROUP_COLORS[e.group]}];')
        if ctx:
            lines.append(f'  {node_id(ctx[1:])} -> {leaf} [label="{alpha.symbols[ctx[0]]}"];')
        elif internal:
            lines.append(f"  root -> {leaf} [style=dashed];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def cmd_export_dot(args) -> int:
    _emit(model_to_dot(load_model(args.model)), args.output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="jointvlmc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def estimation_flags(p):
        p.add_argument("--depth", type=int, help="maximum context length (default min(n∨m-1, 24))")
        p.add_argument("--full-depth", action="store_true", help="use depth n∨m-1")
        p.add_argument("--lambda", dest="lam", type=float, default=1.0,
                       help="penalty multiplier (1 = BIC)")
        p.add_argument("--mode", choices=("tokenized", "char"), default="tokenized")
        p.add_argument("--alphabet", help="space-separated symbols, fixing their order")
        p.add_argument("-o", "--output", help="output file (default stdout)")

    p = sub.add_parser("fit", help="fit one context tree")
    p.add_argument("-i", "--input", required=True)
    estimation_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("fit-joint", help="jointly fit two context trees")
    p.add_argument("-x", required=True)
    p.add_argument("-y", required=True)
    p.add_argument("--scores", metavar="FILE", help="also write the score table as JSON")
    estimation_flags(p)
    p.set_defaults(func=cmd_fit_joint)

    p = sub.add_parser("sample", help="sample a sequence from a model")
    p.add_argument("-m", "--model", required=True)
    p.add_argument("-n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--source", choices=("x", "y"), help="source of a joint model file")
    p.add_argument("--mode", choices=("tokenized", "char"), default="tokenized")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("kl", help="KL divergence rate between two models (bits/symbol)")
    p.add_argument("-p", required=True)
    p.add_argument("-q", required=True)
    p.add_argument("--source-p", choices=("x", "y"))
    p.add_argument("--source-q", choices=("x", "y"))
    p.set_defaults(func=cmd_kl)

    for name, func, text in (("experiment", cmd_experiment, "run a Monte-Carlo experiment"),
                             ("compare-baseline", cmd_compare, "joint vs separate table")):
        p = sub.add_parser(name, help=text)
        p.add_argument("-c", "--config", required=True,
                       help="config JSON, or 'favorable' / 'unfavorable'")
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--reps", type=int, help="override the replication count")
        if name == "experiment":
            p.add_argument("-o", "--output", help="report JSON (default stdout)")
            p.add_argument("--csv", help="per-replication log")
            p.add_argument("--sweep", action="store_true", help="add the lambda sweep")
        p.set_defaults(func=func)

    p = sub.add_parser("export-dot", help="render a model file as a DOT graph")
    p.add_argument("-m", "--model", required=True)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_export_dot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "jobs", 1) is not None and getattr(args, "jobs", 1) < 1:
            raise UsageError("--jobs must be >= 1")
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"jointvlmc {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
