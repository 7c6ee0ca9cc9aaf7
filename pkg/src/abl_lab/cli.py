"""Command-line interface: ``abl-lab {exact,mc,verify,uncertainty,aad,fallacy}``.

Exit codes: 0 success, 2 validation error, 3 impossible post-selection,
4 verification failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import ablengine as ae
from . import complexla as la
from . import ensemble, fallacies, protocolfile, qcore, verification

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IMPOSSIBLE = 3
EXIT_VERIFY_FAILED = 4

SEED_ENV = "ABL_LAB_SEED"

log = logging.getLogger("abl_lab")


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _dump_json(d: dict) -> str:
    return json.dumps(d, indent=2) + "\n"


def _align(rows):
    widths = [max(len(str(r[i])) for r in rows) for i in range(len(rows[0]))]
    return "\n".join("  ".join(str(c).ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows) + "\n"


def _seq_str(seq) -> str:
    return "(" + ", ".join(seq) + ")"


def _default_seed(file_seed: Optional[int]) -> int:
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise CliError(f"{SEED_ENV} must be an integer, got {env!r}", EXIT_VALIDATION) from None
    return 0 if file_seed is None else int(file_seed)


# -- commands -----------------------------------------------------------------


def cmd_exact(args) -> int:
    p = protocolfile.load_protocol(args.file)
    dist = ae.abl_distribution(p)
    total = sum(dist.values())
    if args.json:
        d = {
            "schema": 1,
            "protocol": p.describe(),
            "rows": [{"labels": list(s), "abl_probability": v} for s, v in dist.items()],
            "total": total,
        }
        _emit(_dump_json(d), args.out)
    else:
        rows = [["sequence", "abl_probability"]] + [[_seq_str(s), repr(v)] for s, v in dist.items()]
        _emit(f"protocol  {p.describe()}\n\n" + _align(rows) + f"\ntotal  {total!r}\n", args.out)
    return EXIT_OK


def cmd_mc(args) -> int:
    pf = protocolfile.load(args.file)
    p = pf.to_protocol()
    n = args.n if args.n is not None else pf.mc.get("n_trials", ensemble.DEFAULT_N)
    seed = args.seed if args.seed is not None else _default_seed(pf.mc.get("seed"))
    stats = ensemble.run_ensemble(p, n, seed, postselect=not args.no_postselect, workers=args.workers)
    text = ensemble.report_json(stats, p) if args.json else ensemble.report_text(stats, p)
    _emit(text, args.out)
    return EXIT_OK


def _write_replay(result: verification.SweepResult, seed: int, path: str) -> None:
    entries = []
    for f in result.failures:
        entry = {"check": f.check, "index": f.index, "deviation": f.deviation, "seed": seed}
        if f.protocol is not None:
            entry["protocol"] = protocol_to_file(f.protocol).dumps()
        entries.append(entry)
    Path(path).write_text(_dump_json({"schema": 1, "failures": entries}))


def protocol_to_file(p: ae.Protocol) -> protocolfile.ProtocolFile:
    """Serialise an in-memory protocol with every observable written as a matrix block."""
    specs, names = {}, []
    for k, obs in enumerate(p.observables):
        name = obs.name or f"O{k}"
        if name in specs and not np.array_equal(specs[name].matrix, obs.operator):
            name = f"{name}_{k}"
        specs[name] = protocolfile.ObservableSpec(matrix=np.array(obs.operator), labels=obs.labels)
        names.append(name)
    init = None
    if p.initial_state is not None and p.initial_state.kind == "pure":
        init = np.array(p.initial_state.vector)
    return protocolfile.ProtocolFile(
        dim=p.dim,
        observables=specs,
        pre=(names[0], p.pre_label),
        intermediates=names[1:-1],
        post=(names[-1], p.post_label),
        initial_state=init,
    )


def cmd_verify(args) -> int:
    dims = [int(x) for x in str(args.dims).split(",") if x.strip()]
    if not dims or any(d < 2 for d in dims) or args.max_n < 1 or args.instances < 0:
        raise CliError("need --dims >= 2, --max-n >= 1 and --instances >= 0", EXIT_VALIDATION)
    seed = args.seed if args.seed is not None else _default_seed(None)
    if args.instances == 0:
        log.warning("verify: --instances 0, nothing checked (vacuous pass)")
    result = verification.run_sweep(args.instances, dims, args.max_n, seed)
    summary = {
        "schema": 1,
        "instances": args.instances,
        "dims": dims,
        "max_n": args.max_n,
        "seed": seed,
        "passed": result.passed,
        "checks": [
            {
                "invariant": k,
                "tolerance": verification.TOLERANCES[k],
                "max_deviation": result.max_dev[k],
                "passed": not any(f.check == k for f in result.failures),
            }
            for k in verification.TOLERANCES
        ],
        "failures": len(result.failures),
    }
    if not result.passed:
        _write_replay(result, seed, args.replay)
        summary["replay_file"] = args.replay
    if args.json:
        _emit(_dump_json(summary), args.out)
    else:
        rows = [["invariant", "tolerance", "max_deviation", "status"]]
        rows += [[c["invariant"], f"{c['tolerance']:.0e}", f"{c['max_deviation']:.3e}", "pass" if c["passed"] else "FAIL"] for c in summary["checks"]]
        head = f"verify: {args.instances} instances, dims {dims}, n <= {args.max_n}, seed {seed}\n\n"
        tail = "\nall invariants hold\n" if result.passed else f"\n{len(result.failures)} failure(s); replay written to {args.replay}\n"
        _emit(head + _align(rows) + tail, args.out)
    return EXIT_OK if result.passed else EXIT_VERIFY_FAILED


def cmd_uncertainty(args) -> int:
    pf = protocolfile.load(args.file)
    if pf.uncertainty is None:
        raise CliError("file needs an 'uncertainty: [C, D]' entry", EXIT_VALIDATION)
    C, D = pf.observable(pf.uncertainty[0]), pf.observable(pf.uncertainty[1])
    state = pf.state()
    if state is None:
        if pf.pre is None:
            raise CliError("file needs 'initial_state' or 'pre' to fix the state", EXIT_VALIDATION)
        state = qcore.basis_state(pf.observable(pf.pre[0]), pf.pre[1])
    r = ae.robertson_check(C, D, state)
    d = {
        "schema": 1,
        "C": C.name,
        "D": D.name,
        "delta_C": r.delta_c,
        "delta_D": r.delta_d,
        "product": r.product,
        "bound": r.bound,
        "satisfied": r.satisfied,
    }
    ok = r.satisfied
    if args.sweep:
        rng = np.random.default_rng(args.seed if args.seed is not None else _default_seed(None))
        worst, violations = 0.0, 0
        for _ in range(args.sweep):
            dim = int(rng.integers(2, 7))
            Cr = qcore.observable_from_operator(verification.random_hermitian(dim, rng))
            Dr = qcore.observable_from_operator(verification.random_hermitian(dim, rng))
            st = verification.random_pure_state(dim, rng) if rng.random() < 0.5 else verification.random_mixed_state(dim, rng)
            v = verification.robertson_violation(Cr, Dr, st)
            worst = max(worst, v)
            violations += v > verification.TOLERANCES["robertson"]
        d["sweep"] = {"instances": args.sweep, "violations": int(violations), "max_violation": worst}
        ok = ok and violations == 0
    if args.json:
        _emit(_dump_json(d), args.out)
    else:
        lines = [
            f"{'Delta ' + C.name:<13}= {r.delta_c:.12g}",
            f"{'Delta ' + D.name:<13}= {r.delta_d:.12g}",
            f"product      = {r.product:.12g}",
            f"bound        = {r.bound:.12g}   (|tr([C,D] rho)| / 2)",
            f"satisfied    = {r.satisfied}",
        ]
        if args.sweep:
            s = d["sweep"]
            lines.append(f"sweep        = {s['instances']} random triples, {s['violations']} violations, max excess {s['max_violation']:.3e}")
        _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK if ok else EXIT_VERIFY_FAILED


def cmd_aad(args) -> int:
    pf = protocolfile.load(args.file)
    if pf.pre is None or pf.post is None or len(pf.intermediates) != 1:
        raise CliError("aad needs a file with pre, post and exactly one intermediate observable", EXIT_VALIDATION)
    A, B = pf.observable(pf.pre[0]), pf.observable(pf.post[0])
    C = pf.observable(pf.intermediates[0])
    report = ae.aad_compare(pf.dim, A, B, C, pf.pre[1], pf.post[1])
    if args.json:
        _emit(_dump_json(report.to_dict()), args.out)
        return EXIT_OK
    out = [f"pre-selected {report.pre}, post-selected {report.post}", "three distinct ensembles, one block each:", ""]
    for b in report.branches:
        out.append(f"ensemble {b.ensemble}")
        if b.error:
            out.append(f"  post-selected: {b.error}")
        rows = [["middle outcome", "post-selected", "p(middle, b | a)", "p(middle | a)"]]
        for lab in b.marginal_without_postselection:
            cond = "n/a" if b.conditional is None else f"{b.conditional[lab]:.6f}"
            rows.append([lab, cond, f"{b.without_postselection[lab]:.6f}", f"{b.marginal_without_postselection[lab]:.6f}"])
        out.append("  " + _align(rows).replace("\n", "\n  ").rstrip())
        out.append("")
    out.extend(f"note: {f}" for f in report.flags)
    _emit("\n".join(out) + "\n", args.out)
    return EXIT_OK


def _num(text: str):
    """Parse ``0.1`` or ``1/10``; the latter stays an exact Fraction."""
    return Fraction(text) if "/" in text else float(text)


def cmd_fallacy(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed(None)
    name = args.name
    if name == "berkson":
        params = fallacies.BerksonParams(_num(args.p_a), _num(args.p_b), args.n or 10_000)
        exact, mc = fallacies.berkson_exact(params), fallacies.berkson_mc(params, seed)
        d = {
            "schema": 1,
            "scenario": "berkson",
            "exact": exact.to_dict(),
            "mc": mc.to_dict(),
            "mc_within_3sigma": fallacies.berkson_agrees(mc, exact),
        }
    elif name == "coins":
        n = args.n if args.n is not None else fallacies.CoinParams.N
        params = fallacies.CoinParams(args.n_flips, args.darken, args.threshold, n)
        d = {
            "schema": 1,
            "scenario": "coins",
            "exact": fallacies.coin_darkening_exact(params).to_dict(),
            "mc": fallacies.coin_darkening_mc(params, seed).to_dict(),
        }
    elif name == "shutter":
        r = fallacies.shutter_mc(args.holes, args.clang_prob, args.n or 10_000, seed)
        d = {"schema": 1, "scenario": "shutter", "mc": r.to_dict()}
    else:
        r = fallacies.three_boxes_mc(args.n or 10_000, seed)
        d = {"schema": 1, "scenario": "boxes", "mc": r.to_dict()}
    d["seed"] = seed
    if args.json:
        _emit(_dump_json(d), args.out)
    else:
        _emit(_flat_text(d), args.out)
    return EXIT_OK


def _flat_text(d: dict, prefix: str = "") -> str:
    lines = []
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            lines.append(_flat_text(v, key + ".").rstrip("\n"))
        else:
            lines.append(f"{key:<40} {v}")
    return "\n".join(lines) + "\n"


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="abl-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--json", action="store_true", help="machine-readable output")
        sp.add_argument("--out", metavar="PATH", help="write the report here instead of stdout")

    sp = sub.add_parser("exact", help="ABL probability of every intermediate sequence")
    sp.add_argument("file")
    common(sp)
    sp.set_defaults(func=cmd_exact)

    sp = sub.add_parser("mc", help="Monte Carlo ensemble with pre/post-selection culling")
    sp.add_argument("file")
    sp.add_argument("--n", type=int, help="number of trials (default: file, else 10000)")
    sp.add_argument("--seed", type=int, help=f"seed (default: ${SEED_ENV}, else file, else 0)")
    sp.add_argument("--no-postselect", action="store_true", help="report N_(a seq b)/N_a without culling on b")
    sp.add_argument("--workers", type=int, default=1)
    common(sp)
    sp.set_defaults(func=cmd_mc)

    sp = sub.add_parser("verify", help="randomised invariant and oracle sweep")
    sp.add_argument("--dims", default="2,3", help="comma-separated Hilbert dimensions")
    sp.add_argument("--max-n", type=int, default=2)
    sp.add_argument("--instances", type=int, default=200)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--replay", default="verify_failure.json", help="where to write failing instances")
    common(sp)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("uncertainty", help="spreads of C and D against the commutator bound")
    sp.add_argument("file")
    sp.add_argument("--sweep", type=int, default=0, metavar="N", help="also check N random triples")
    sp.add_argument("--seed", type=int)
    common(sp)
    sp.set_defaults(func=cmd_uncertainty)

    sp = sub.add_parser("aad", help="(A,C,B), (A,A,B) and (A,B,B) as three separate ensembles")
    sp.add_argument("file")
    common(sp)
    sp.set_defaults(func=cmd_aad)

    sp = sub.add_parser("fallacy", help="classical post-selection scenarios")
    sp.add_argument("name", choices=["berkson", "coins", "shutter", "boxes"])
    sp.add_argument("--n", type=int, help="ensemble size (default 10000; 1000000 for coins)")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--p-a", default="0.1")
    sp.add_argument("--p-b", default="0.1")
    sp.add_argument("--n-flips", type=int, default=100)
    sp.add_argument("--darken", type=float, default=0.01)
    sp.add_argument("--threshold", type=float, default=0.70)
    sp.add_argument("--holes", type=int, default=10)
    sp.add_argument("--clang-prob", type=float, default=1.0)
    common(sp)
    sp.set_defaults(func=cmd_fallacy)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ae.ImpossiblePostSelection as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IMPOSSIBLE
    except (
        protocolfile.ProtocolFileError,
        ae.ProtocolError,
        qcore.InvalidObservableError,
        qcore.InvalidStateError,
        la.DimensionError,
        la.NotSelfAdjointError,
        KeyError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
