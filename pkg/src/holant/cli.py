"""Command-line entry point.

Exit status: 0 on success, 1 when a verification fails, 2 on usage or input
errors (including enumeration caps).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from . import analysis, coupling, glauber, oracle, plotting
from .graph import occupied_edges
from .model import complement, load_config
from .signatures import compute_params

EXACT_COUNT_CAP = 20


class VerificationFailed(Exception):
    pass


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


@contextmanager
def _writer(out: str | None) -> Iterator[csv.writer]:
    if out is None:
        yield csv.writer(sys.stdout)
        sys.stdout.flush()
        return
    with open(out, "w", newline="") as fh:
        yield csv.writer(fh)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _emit(out: str | None, header: Sequence[str], rows) -> None:
    with _writer(out) as w:
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def cmd_sample(args) -> int:
    loaded = load_config(args.config)
    draws = glauber.sample_batch(loaded.instance, args.samples, args.steps, args.seed)
    rows = []
    for i, cfg in enumerate(draws):
        if loaded.complemented:
            cfg = complement(cfg)
        rows.append((i, " ".join(str(e) for e in occupied_edges(cfg))))
    _emit(args.out, ["index", "edges"], rows)
    return 0


def cmd_count(args) -> int:
    loaded = load_config(args.config)
    inst = loaded.instance
    est = analysis.estimate_log_z(inst, args.eps, args.seed)
    log_z = est.log_z
    if loaded.complemented:
        log_z += math.fsum(math.log(x) for x in loaded.lambdas)
    exact = rel = ok = None
    if inst.m <= EXACT_COUNT_CAP:
        log_exact = math.log(oracle.partition_function(inst))
        if loaded.complemented:
            log_exact += math.fsum(math.log(x) for x in loaded.lambdas)
        exact = math.exp(log_exact)
        rel = abs(math.exp(log_z - log_exact) - 1)
        ok = rel <= args.eps
    header = ["log_z", "z", "eps", "samples_per_marginal", "steps_per_sample", "z_exact",
              "relative_error", "pass"]
    _emit(args.out, header, [(log_z, math.exp(log_z), args.eps, est.samples_per_marginal,
                              est.steps_per_sample, exact, rel, ok)])
    if ok is False:
        raise VerificationFailed(f"relative error {rel:.4g} exceeds eps {args.eps}")
    return 0


def cmd_verify_si(args) -> int:
    spec = json.loads(Path(args.sweep).read_text())
    rows = analysis.si_sweep(spec)
    header = ["case_id", "graph", "n", "m", "b", "lambda", "si_constant", "p_max", "bound",
              "remark_p_max_bound", "feasible_pinnings", "pass"]
    _emit(args.out, header, [(r.case_id, r.label, r.n, r.m, r.b, r.lam, r.si_constant, r.p_max,
                              r.bound, r.remark_p_max_bound, r.feasible_pinnings, r.passed)
                             for r in rows])
    if args.plot:
        plotting.plot_si_sweep(rows, args.plot)
    failed = [r for r in rows if not r.passed]
    if failed:
        r = failed[0]
        raise VerificationFailed(f"case {r.case_id} ({r.label}, b={r.b}, lambda={r.lam}): "
                                 f"{r.si_constant} > {r.bound}")
    return 0


def cmd_couple_w1(args) -> int:
    loaded = load_config(args.config)
    inst = loaded.instance
    est = coupling.estimate_w1(inst, args.vertex, args.trials, args.seed)
    from .model import shift_vertex

    lower = float(np.abs(oracle.marginals(inst) - oracle.marginals(shift_vertex(inst, args.vertex))).sum())
    header = ["vertex", "trials", "mean", "ci_half_width", "std_error", "marginal_lower_bound",
              "p_max_minus_1", "case2_fraction", "pass"]
    _emit(args.out, header, [(args.vertex, est.trials, est.mean, est.ci_half_width, est.std_error,
                              lower, est.bound, est.case2_fraction, est.passed)])
    if not est.passed:
        raise VerificationFailed(f"mean {est.mean} - 3 se exceeds P_max - 1 = {est.bound}")
    return 0


def cmd_mix_diag(args) -> int:
    prof = analysis.mixing_profile(args.family, args.sizes, args.seed)
    header = ["m", "steps_to_tv_0.1", "method", "c", "fitted", "residual", "within_2x_fit"]
    _emit(args.out, header, [(r.m, r.steps, r.method, prof.c, r.fitted, r.residual,
                              r.within_twice_fit) for r in prof.rows])
    if args.plot:
        plotting.plot_mixing_profile(prof, args.plot)
    bad = [r for r in prof.rows if r.method == "exact" and not r.within_twice_fit]
    if bad:
        raise VerificationFailed(f"m={bad[0].m}: {bad[0].steps} steps exceeds twice the fitted curve")
    return 0


def cmd_counterexample(args) -> int:
    rows = analysis.influence_row_sum_growth(args.family, args.n)
    counts = {}
    if args.family in analysis.FAMILIES:
        for n in args.n:
            counts[n] = analysis.feasible_counts(analysis.build_counterexample(args.family, n))
    ratios = dict(analysis.doubling_ratios(rows))
    header = ["family", "n", "row_sum", "doubling_ratio", "feasible_given_1", "feasible_given_0",
              "bound"]
    _emit(args.out, header, [(r.family, r.n, r.row_sum, ratios.get(r.n),
                              counts.get(r.n, (None, None))[0], counts.get(r.n, (None, None))[1],
                              r.bound) for r in rows])
    if args.plot:
        plotting.plot_row_sums(rows, args.plot)
    if args.family in analysis.FAMILIES:
        bad = [n for n, ratio in ratios.items() if ratio < 1.8]
        bad += [n for n, c in counts.items() if c != (1, n)]
        if bad:
            raise VerificationFailed(f"counterexample check failed at n={bad[0]}")
    else:
        bad = [r.n for r in rows if r.bound is not None and r.row_sum > r.bound]
        if bad:
            raise VerificationFailed(f"row sum exceeds 2 (P_max - 1) at n={bad[0]}")
    return 0


def cmd_oracle(args) -> int:
    loaded = load_config(args.config)
    inst = loaded.instance
    rows = [("Z", "", "", oracle.partition_function(inst))]
    if inst.strict:
        p = compute_params(inst)
        rows += [(name, "", "", getattr(p, name))
                 for name in ("r_max", "r_min", "lambda_max", "lambda_min", "p_max", "delta")]
    for e, q in enumerate(oracle.marginals(inst)):
        rows.append(("marginal", e, "", float(q)))
    mat = oracle.influence_matrix(inst)
    for i, e in enumerate(mat.basis):
        for j, f in enumerate(mat.basis):
            rows.append(("influence", e, f, float(mat.entries[i, j])))
    if args.all_pinnings:
        rows.append(("si_constant", "", "", oracle.spectral_independence_constant(inst).value))
    _emit(args.out, ["quantity", "i", "j", "value"], rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="holant", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw Glauber samples")
    p.add_argument("--config", required=True)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("count", help="estimate the partition function")
    p.add_argument("--config", required=True)
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("verify-si", help="spectral-independence sweep")
    p.add_argument("--sweep", required=True)
    p.add_argument("--out")
    p.add_argument("--plot")
    p.set_defaults(func=cmd_verify_si)

    p = sub.add_parser("couple-w1", help="coupling estimate of W1 against P_max - 1")
    p.add_argument("--config", required=True)
    p.add_argument("--vertex", type=int, required=True)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_couple_w1)

    p = sub.add_parser("mix-diag", help="mixing-time profile against m log m")
    p.add_argument("--family", default="random", choices=["random", "path", "cycle", "single_edge"])
    p.add_argument("--sizes", type=_ints, default=[6, 8, 10, 12, 14])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--plot")
    p.set_defaults(func=cmd_mix_diag)

    p = sub.add_parser("counterexample", help="influence growth on the path families")
    p.add_argument("--family", required=True, choices=[*analysis.FAMILIES, "b_matching_path"])
    p.add_argument("--n", type=_ints, default=[4, 6, 8, 12])
    p.add_argument("--out")
    p.add_argument("--plot")
    p.set_defaults(func=cmd_counterexample)

    p = sub.add_parser("oracle", help="dump exact Z, marginals and influence matrix")
    p.add_argument("--config", required=True)
    p.add_argument("--all-pinnings", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except VerificationFailed as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return 1
    except oracle.TooLarge as exc:
        print(f"error: {exc} (cap {exc.cap})", file=sys.stderr)
        return 2
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
