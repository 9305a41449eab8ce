"""Command-line interface: ``lieseries <command> ...``.

Errors are reported on stderr as ``error: <kind>: <message>`` with a
nonzero exit status.  The default output directory is taken from the
``LIESERIES_OUT`` environment variable (else the current directory).
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, indexing
from .errors import LieSeriesError
from .normalform import (
    HamiltonianExpansion,
    bracket_residual,
    first_integral,
    load_model,
    normalize,
)
from .series import dumps

OUT_ENV = "LIESERIES_OUT"


class UsageError(Exception):
    kind = "usage"


def _positive(kind=float):
    def conv(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
        return v

    return conv


def _non_negative_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0: {text!r}")
    return v


def _model(args) -> HamiltonianExpansion:
    spec = args.model
    if os.path.exists(spec):
        return load_model(Path(spec).read_text(), name=Path(spec).stem)
    return analysis.parse_model(spec)


def _outdir(args) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV) or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _phi(H: HamiltonianExpansion, degree: int):
    """Phi through ``degree`` (normalization order degree - 2)."""
    if degree < 2:
        raise UsageError("first-integral degree must be >= 2")
    return first_integral(normalize(H, degree - 2))


def _meta(args, H, **extra):
    meta = {"model": H.name or args.model}
    for key in ("order", "energy", "dt", "tmax", "seed"):
        if getattr(args, key, None) is not None:
            meta[key] = getattr(args, key)
    meta.update(extra)
    return meta


# --------------------------------------------------------------------------
# commands


def cmd_tables(args) -> int:
    if args.n < 1:
        raise UsageError("n must be >= 1")
    if args.s_max < 0:
        raise UsageError("s_max must be >= 0")
    t = indexing.build_tables(args.kind, args.n, args.s_max)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["s", "J", "N"])
    for s in range(args.s_max + 1):
        w.writerow([s, t.j(args.n, s), t.n(args.n, s)])
    return 0


def cmd_index(args) -> int:
    k = tuple(args.vector)
    t = indexing.build_tables(args.kind, len(k), sum(abs(v) for v in k))
    fn = indexing.index_poly if args.kind == "poly" else indexing.index_trig
    print(fn(k, t))
    return 0


def _tables_covering(kind: str, n: int, index: int):
    s = 0
    while True:
        t = indexing.build_tables(kind, n, s)
        if t.size(n) > index:
            return t
        s = 2 * s + 1


def cmd_unindex(args) -> int:
    if args.n < 1:
        raise UsageError("n must be >= 1")
    t = _tables_covering(args.kind, args.n, args.index)
    fn = indexing.unindex_poly if args.kind == "poly" else indexing.unindex_trig
    print(" ".join(str(v) for v in fn(args.index, args.n, t)))
    return 0


def cmd_normalform(args) -> int:
    H = _model(args)
    order = args.order
    out = _outdir(args)
    result = normalize(H, order)
    phi = first_integral(result)
    (out / "Z.txt").write_text(dumps(result.Z_real()))
    (out / "chi.txt").write_text(dumps(result.chi_real()))
    (out / "Phi.txt").write_text(dumps(phi))
    rep = bracket_residual(H, phi, order)
    with open(out / "residual.csv", "w", newline="") as fh:
        fh.write(f"# model: {H.name or args.model}\n# order: {order}\n")
        fh.write(f"# band: degrees <= {rep.band_max} must vanish; scale ||Phi||_1 = {rep.scale!r}\n")
        w = csv.writer(fh)
        w.writerow(["degree", "norm", "max_abs", "in_band"])
        for r in sorted(rep.norms):
            w.writerow([r, repr(rep.norms[r]), repr(rep.max_abs[r]), int(r <= rep.band_max)])
    if not rep.band_clean(args.rtol):
        worst = max((rep.max_abs[r] for r in rep.band()), default=0.0)
        print(
            f"error: accuracy: residual {worst:.3g} in the band exceeds "
            f"{args.rtol:g} * ||Phi||",
            file=sys.stderr,
        )
        return 1
    print(f"wrote Z.txt chi.txt Phi.txt residual.csv to {out}")
    return 0


def cmd_norms(args) -> int:
    H = _model(args)
    diag = analysis.norm_sequence(_phi(H, args.order))
    path = _outdir(args) / "norms.csv"
    analysis.write_norms_csv(path, diag, _meta(args, H))
    print(f"wrote {path}")
    return 0


def cmd_levelmap(args) -> int:
    H = _model(args)
    if args.phi:
        from .series import loads

        phi = loads(Path(args.phi).read_text())
    else:
        phi = _phi(H, args.order)
    gm = analysis.level_map(phi, args.energy, args.grid, args.order, H=H)
    path = _outdir(args) / "levelmap.csv"
    analysis.write_grid_csv(path, gm, _meta(args, H))
    print(f"wrote {path}")
    return 0


def cmd_poincare(args) -> int:
    H = _model(args)
    sec = analysis.poincare_section(
        H, args.energy, args.orbits, args.tmax, args.dt, args.seed, args.threads
    )
    path = _outdir(args) / "sections.csv"
    analysis.write_sections_csv(path, sec, _meta(args, H, orbits=args.orbits))
    print(f"wrote {path}")
    return 0


def cmd_stability(args) -> int:
    H = _model(args)
    if args.rho_min > args.rho_max:
        raise UsageError("--rho-min must not exceed --rho-max")
    phi = _phi(H, args.order)
    rhos = np.geomspace(args.rho_min, args.rho_max, args.rho_steps)
    est = [analysis.stability_time(H, phi, float(r), range(2, args.order + 1)) for r in rhos]
    path = _outdir(args) / "stability.csv"
    analysis.write_stability_csv(path, est, _meta(args, H))
    print(f"wrote {path}")
    return 0


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lieseries", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def kind_arg(q):
        q.add_argument("kind", choices=["poly", "trig"])

    q = sub.add_parser("tables", help="print the J and N tables as CSV")
    kind_arg(q)
    q.add_argument("n", type=int)
    q.add_argument("s_max", type=int)
    q.set_defaults(func=cmd_tables)

    q = sub.add_parser("index", help="index of an exponent or wave vector")
    kind_arg(q)
    q.add_argument("vector", type=int, nargs="+")
    q.set_defaults(func=cmd_index)

    q = sub.add_parser("unindex", help="vector with a given index")
    kind_arg(q)
    q.add_argument("n", type=int)
    q.add_argument("index", type=_non_negative_int)
    q.set_defaults(func=cmd_unindex)

    def common(q, order_default=None, positional=False):
        if positional:
            q.add_argument("model_pos", nargs="?", metavar="model")
            q.add_argument("order_pos", nargs="?", type=_non_negative_int, metavar="order")
            q.add_argument("out_pos", nargs="?", metavar="outdir")
        q.add_argument("--model", default=None, help="henon-heiles, contopoulos:w1,w2 or a model file")
        q.add_argument("--order", type=_non_negative_int, default=None)
        q.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or .)")
        q.set_defaults(order_default=order_default)

    q = sub.add_parser("normalform", help="normal form, generating function and first integral")
    common(q, 8, positional=True)
    q.add_argument("--rtol", type=_positive(), default=1e-9)
    q.set_defaults(func=cmd_normalform)

    q = sub.add_parser("norms", help="norms of Phi and convergence criteria")
    common(q, 28)
    q.set_defaults(func=cmd_norms)

    q = sub.add_parser("levelmap", help="truncated Phi on the energy surface")
    common(q, 8)
    q.add_argument("--energy", type=_positive(), default=0.01)
    q.add_argument("--grid", type=_positive(int), default=201)
    q.add_argument("--phi", default=None, help="read Phi from a series file")
    q.set_defaults(func=cmd_levelmap)

    q = sub.add_parser("poincare", help="Poincare section x1=0, dx1/dt>0")
    common(q)
    q.add_argument("--energy", type=_positive(), default=0.01)
    q.add_argument("--orbits", type=_positive(int), default=10)
    q.add_argument("--tmax", type=_positive(), default=1000.0)
    q.add_argument("--dt", type=_positive(), default=1e-3)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--threads", type=_positive(int), default=None)
    q.set_defaults(func=cmd_poincare)

    q = sub.add_parser("stability", help="stability-time estimates over a range of radii")
    common(q, 20)
    q.add_argument("--rho-min", type=_positive(), default=0.01)
    q.add_argument("--rho-max", type=_positive(), default=0.1)
    q.add_argument("--rho-steps", type=_positive(int), default=10)
    q.set_defaults(func=cmd_stability)
    return p


def _resolve(args):
    if hasattr(args, "model_pos"):
        args.model = args.model or args.model_pos
        if args.order is None:
            args.order = args.order_pos
        args.out = args.out or args.out_pos
    if hasattr(args, "order_default"):
        args.model = args.model or "henon-heiles"
        if args.order is None:
            args.order = args.order_default
    return args


def main(argv=None) -> int:
    parser = build_parser()
    args = _resolve(parser.parse_args(argv))
    try:
        return args.func(args)
    except (LieSeriesError, UsageError) as exc:
        print(f"error: {exc.kind}: {exc}", file=sys.stderr)
    except ValueError as exc:
        print(f"error: value: {exc}", file=sys.stderr)
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
