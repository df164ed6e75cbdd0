"""Command-line entry point: ``python3 -m bpa <command>``.

Commands: ``align``, ``sample``, ``benchmark`` and ``normalizer``. Output is
``key = value`` text, except ``benchmark`` which writes CSV. Exit status is 0
on success and 2 when the input fails validation.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import fields

import numpy as np

from .align import AlignConfig, bpa_sample
from .bench import TrialConfig, run_benchmark
from .bingham import bingham_mode, bingham_normalizer
from .corrfile import read_correspondences
from .errors import BPAError
from .procrustes import fuse_orientation_measurements, posterior_orientation

SEED_ENV = "BPA_SEED"
EXIT_OK, EXIT_INPUT = 0, 2


def _fmt(v) -> str:
    a = np.atleast_1d(np.asarray(v, dtype=float))
    return " ".join(repr(float(x)) for x in a)


def _emit(out, pairs) -> None:
    for k, v in pairs:
        out.write(f"{k} = {v if isinstance(v, str) else _fmt(v)}\n")


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise BPAError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def cmd_align(args, out) -> None:
    corrs = read_correspondences(args.file)
    post = fuse_orientation_measurements(corrs, posterior_orientation(corrs))
    B = post.q_given_t
    q = bingham_mode(B, strict=True)
    _emit(out, [
        ("n_correspondences", str(len(corrs))),
        ("q", q),
        ("t", post.translation(q)),
        ("lambdas", B.lambdas),
        *((f"dir{i + 1}", B.dirs[:, i]) for i in range(3)),
        ("mode", bingham_mode(B)),
    ])


def cmd_sample(args, out) -> None:
    corrs = read_correspondences(args.file)
    if args.n < 1:
        raise BPAError("--n must be >= 1")
    cfg = AlignConfig(samples_per_step=args.n, seed=args.seed)
    samples = bpa_sample(corrs, cfg, np.random.default_rng(args.seed))
    _emit(out, [("n_samples", str(len(samples)))])
    for i, s in enumerate(samples):
        out.write("\n")
        _emit(out, [("sample", str(i)), ("q", s.q), ("t", s.t), ("log_weight", s.log_weight)])


def cmd_benchmark(args, out) -> None:
    overrides = {f.name: getattr(args, f.name) for f in fields(TrialConfig)
                 if getattr(args, f.name, None) is not None}
    cfg = TrialConfig(**overrides)
    curves = run_benchmark(cfg, jobs=args.jobs)
    text = curves.to_csv()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        out.write(text)
    print(f"degenerate trials excluded: {curves.n_degenerate}", file=sys.stderr)


def cmd_normalizer(args, out) -> None:
    _emit(out, [("F", bingham_normalizer(args.lambdas))])


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bpa", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("align", help="MAP pose and orientation posterior for a correspondence file")
    a.add_argument("file")
    a.set_defaults(func=cmd_align)

    s = sub.add_parser("sample", help="weighted pose samples from the posterior")
    s.add_argument("file")
    s.add_argument("--n", type=int, default=20)
    s.add_argument("--seed", type=int, default=None, help=f"default: ${SEED_ENV} or 0")
    s.set_defaults(func=cmd_sample)

    b = sub.add_parser("benchmark", help="BPA vs ICP running-min error curves as CSV")
    b.add_argument("--trials", dest="n_trials", type=int)
    b.add_argument("--iterations", type=int)
    b.add_argument("--seed", type=int, default=None, help=f"default: ${SEED_ENV} or 0")
    b.add_argument("--points", dest="n_points", type=int)
    b.add_argument("--shape", choices=("box", "cylinder", "sphere-cap", "composite"))
    b.add_argument("--position-noise", dest="position_noise_std", type=float)
    b.add_argument("--trans-std", type=float)
    b.add_argument("--rot-std", type=float)
    b.add_argument("--frame-noise-kappa", type=float)
    b.add_argument("--feature-kappa", type=float)
    b.add_argument("--correspondences", dest="n_correspondences", type=int)
    b.add_argument("--match-sigma", type=float)
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--out", help="write CSV here instead of stdout")
    b.set_defaults(func=cmd_benchmark)

    n = sub.add_parser("normalizer", help="Bingham normalizing constant F(l1, l2, l3)")
    n.add_argument("lambdas", type=float, nargs=3)
    n.set_defaults(func=cmd_normalizer)
    return p


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        if getattr(args, "seed", 0) is None:
            args.seed = _default_seed()
        args.func(args, out)
    except (BPAError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


cli_main = main
