"""Command-line entry point: ``cunec generate | validate | fit``."""
from __future__ import annotations

import argparse
import csv
import sys
from collections import defaultdict
from pathlib import Path

import numpy as np

from .errors import CunecError
from .scenario import Model, load_config, run, write_csv
from .shadowing import generate_field
from .stats import DistanceMetric, fit_linear_pl, format_report, validate_generation

# Shadowing-generation targets used by ``validate``: UE/AP stds (dB) and
# correlation distances (m), plus the expected whole-field std.
TABLE_TARGETS = dict(sigma_ue_db=6.51, sigma_ap_db=5.34, dcorr_ue_m=17.2, dcorr_ap_m=5.43,
                     sigma_total_db=6.65)


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def cmd_generate(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.model is not None:
        cfg.model = Model(args.model)
    out = args.out or cfg.output
    sets = run(cfg)
    if out is None or str(out) == "-":
        write_csv(sets, sys.stdout)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", newline="") as fh:
            write_csv(sets, fh)
    return 0


def cmd_validate(args) -> int:
    t = TABLE_TARGETS
    pos = np.c_[np.arange(args.size) * args.spacing, np.zeros(args.size)]
    fields = []
    for k in range(args.runs):
        rng = np.random.default_rng(np.random.SeedSequence(args.seed, spawn_key=(k,)))
        fields.append(generate_field(pos, pos, t["sigma_ue_db"], t["sigma_ap_db"],
                                     t["dcorr_ue_m"], t["dcorr_ap_m"], rng).values_db)
    axis = np.arange(args.size) * args.spacing
    rows = validate_generation(fields, {
        "sigma_total_db": t["sigma_total_db"], "sigma_row_db": t["sigma_ue_db"],
        "sigma_col_db": t["sigma_ap_db"], "dcorr_ue_m": t["dcorr_ue_m"], "dcorr_ap_m": t["dcorr_ap_m"],
    }, axis, axis)
    print(f"{args.runs} fields of {args.size}x{args.size} at {args.spacing} m spacing")
    print(format_report(rows))
    return 0


def cmd_fit(args) -> int:
    metric = DistanceMetric(args.metric)
    col = "d_manhattan_m" if metric == DistanceMetric.MANHATTAN else "d_euclid_m"
    groups = defaultdict(lambda: ([], []))
    with open(args.csv, newline="") as fh:
        for row in csv.DictReader(fh):
            if args.model and row["model"] != args.model:
                continue
            if args.order is not None and int(row["order"]) != args.order:
                continue
            if not row["total_pl_db"] or not row[col]:
                continue
            key = row[args.group_by] if args.group_by != "none" else "all"
            groups[(row["model"], key)][0].append(float(row["total_pl_db"]))
            groups[(row["model"], key)][1].append(max(float(row[col]), 1.0))
    if not groups:
        raise CunecError("no rows left to fit")
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["model", args.group_by, "alpha_db", "beta", "sigma_resid_db", "n_points"])
    for (model, key), (pl, d) in sorted(groups.items()):
        if len(pl) < 2:
            continue
        f = fit_linear_pl(pl, d, metric, args.fix_alpha)
        w.writerow([model, key, f"{f.alpha_db:.6g}", f"{f.beta:.6g}", f"{f.sigma_resid_db:.6g}", f.n_points])
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cunec", description="Street-network path loss generator")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="run a scenario and write the per-link CSV")
    g.add_argument("--config", required=True, type=Path)
    g.add_argument("--seed", type=_seed, help="overrides the config seed")
    g.add_argument("--out", type=Path, help="output CSV ('-' for stdout); overrides the config")
    g.add_argument("--model", choices=[m.value for m in Model])
    g.set_defaults(func=cmd_generate)

    v = sub.add_parser("validate", help="regenerate correlated fields and report their statistics")
    v.add_argument("--seed", type=_seed, default=0)
    v.add_argument("--runs", type=int, default=20)
    v.add_argument("--size", type=int, default=100)
    v.add_argument("--spacing", type=float, default=1.0)
    v.set_defaults(func=cmd_validate)

    f = sub.add_parser("fit", help="log-distance fits over a generated CSV")
    f.add_argument("csv", type=Path)
    f.add_argument("--metric", choices=[m.value for m in DistanceMetric], default="manhattan")
    f.add_argument("--fix-alpha", action="store_true", help="fit the slope only (intercept 0)")
    f.add_argument("--group-by", choices=["ap_idx", "ue_idx", "none"], default="ap_idx")
    f.add_argument("--model", choices=[Model.CUNEC.value, Model.ALPHABETA.value])
    f.add_argument("--order", type=int, choices=[0, 1, 2])
    f.set_defaults(func=cmd_fit)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CunecError, OSError) as exc:
        print(f"cunec {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
