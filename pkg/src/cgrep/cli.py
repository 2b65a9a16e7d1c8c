"""Command-line entry point wiring the modules into the two pipelines.

Subcommands
-----------
simulate   synthetic fixtures (survival tables, classification tables,
           phantom volumes + masks)
extract    volumes + masks -> features.csv + feature_dictionary.txt
rank       per-feature F1 ranking -> ranking.csv
classify   boosted-ensemble evaluation -> metrics.csv
survival   dependence selection + feature screen -> alpha_profile.csv,
           selected_features.csv
prognosis  PI, groups, group curves, permutation p, cross-tab ->
           prognosis_report.csv, comparison.csv, curves

Every subcommand is a pure function of (input files, config, --seed) to
output bytes, for any --threads value.  Exit codes: 0 success, 1 data
error, 2 bad arguments.  Logging level comes from $CGREP_LOG
(off|info|debug).
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .errors import CgrepError
from .extractor import RadiomicsExtractor
from .fractal import compute_maps, fractal_feature_names
from .io import (FeatureTable, StudyConfig, VoxelGrid, load_config,
                 load_feature_table, load_mask, load_volume,
                 write_feature_table, write_volume)
from .plot import emit_curve_svg
from .prognosis import (compute_pi, cross_tab, curve_distance,
                        group_comparison, permutation_pvalue, split_by_pi)
from .resampling import (ResamplingPlan, evaluate_model, rank_features,
                         significance_filter, threshold_select)
from .simulate import SimSpec, simulate_classification, simulate_dependent, simulate_phantom
from .survival import (cg_curve, select_alpha, select_features_dependent,
                       write_curve_csv)
from .texture import conventional_feature_names, feature_definitions

log = logging.getLogger("cgrep")

_FAMILIES = ("GTSDM", "NGTDM", "GLZSM", "Histogram", "Shape")


def _setup_logging():
    level = os.environ.get("CGREP_LOG", "off").lower()
    if level == "off":
        logging.disable(logging.CRITICAL)
        return
    logging.basicConfig(stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s",
                        level=logging.DEBUG if level == "debug" else logging.INFO)


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if np.isnan(v):
        return ""
    return repr(v)


def _write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([c if isinstance(c, str) else _fmt(c) for c in row])
    return path


def _config_from(args) -> StudyConfig:
    config = load_config(args.config) if args.config else StudyConfig()
    for name in ("iterations", "folds", "levels", "permutations", "window",
                 "f1_threshold", "majority_size", "p_threshold", "seed"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(config, name, value)
    if getattr(args, "alpha_grid", None):
        config.alpha_grid = tuple(float(a) for a in args.alpha_grid.split(","))
    if getattr(args, "displacements", None):
        config.displacements = tuple(int(d) for d in args.displacements.split(","))
    return config


def _require_labels(table: FeatureTable) -> np.ndarray:
    if table.rep_label is None or np.isnan(table.rep_label).any():
        raise CgrepError("features.csv needs a complete rep_label column")
    y = table.rep_label.astype(np.int64)
    if len(np.unique(y)) < 2:
        raise CgrepError("single-class target: rep_label must contain both classes")
    return y


def _plan_from(config: StudyConfig) -> ResamplingPlan:
    return ResamplingPlan(iterations=config.iterations, folds=config.folds,
                          majority_size=config.majority_size, seed=config.seed)


def _scaled_view(table: FeatureTable, names) -> FeatureTable:
    scaled = table.scaled_matrix(names)
    return FeatureTable(table.patient_ids,
                        {n: scaled[:, j] for j, n in enumerate(names)},
                        time_days=table.time_days, event=table.event,
                        rep_label=table.rep_label)


# ---------------------------------------------------------------------------
# Subcommands

def _cmd_simulate(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.kind == "survival":
        beta = tuple(float(b) for b in args.beta.split(","))
        gamma = tuple(float(g) for g in args.gamma.split(","))
        spec = SimSpec(n=args.n, alpha=args.alpha, beta=beta, gamma=gamma,
                       lambda_t=args.lambda_t, lambda_u=args.lambda_u,
                       seed=args.seed)
        dataset = simulate_dependent(spec)
        write_feature_table(dataset.table, out / "features.csv")
        log.info("wrote %s (%d rows)", out / "features.csv", len(dataset.table))
    elif args.kind == "classification":
        table, _ = simulate_classification(args.n, args.informative, args.noise,
                                           args.separation, args.seed)
        write_feature_table(table, out / "features.csv")
    else:  # phantom
        dims = tuple(int(d) for d in args.dims.split(","))
        grid, mask = simulate_phantom(args.phantom, dims, hurst=args.hurst,
                                      seed=args.seed, amplitude=args.amplitude)
        write_volume(grid, out / "volume.json")
        write_volume(VoxelGrid(mask.labels.astype(np.float64), mask.spacing),
                     out / "mask.json", dtype=np.int16)
        _write_csv(out / "manifest.csv", ["patient_id", "volume", "mask"],
                   [[f"PH{args.seed:04d}", "volume.json", "mask.json"]])
    return 0


def _cmd_extract(args):
    config = _config_from(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = Path(args.manifest)
    with open(manifest, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        entries = list(reader)
    if not entries or "patient_id" not in entries[0]:
        raise CgrepError(f"{manifest}: expected columns patient_id,volume,mask")
    extractor = RadiomicsExtractor(levels=config.levels,
                                   displacements=config.displacements,
                                   window=config.window, scales=config.scales,
                                   include_fractal=not args.skip_fractal)
    names = list(extractor.get_feature_names_out())
    ids, rows = [], []
    for entry in entries:
        grid = load_volume(manifest.parent / entry["volume"])
        mask = load_mask(manifest.parent / entry["mask"], grid)
        row = extractor.transform_one(grid, mask)
        ids.append(entry["patient_id"])
        rows.append([row[n] for n in names])
        log.info("extracted %d features for %s", len(names), entry["patient_id"])
        if args.dump_maps:
            for kind, fmap in compute_maps(grid, config).items():
                write_volume(fmap.as_grid(),
                             out / f"{entry['patient_id']}_{kind}.json")
    table = FeatureTable(ids, {n: np.array([r[j] for r in rows])
                               for j, n in enumerate(names)})
    write_feature_table(table, out / "features.csv")
    _write_feature_dictionary(config, out / "feature_dictionary.txt",
                              include_fractal=not args.skip_fractal)
    return 0


def _write_feature_dictionary(config, path, include_fractal=True):
    defs = feature_definitions()
    names = conventional_feature_names(config)
    if include_fractal:
        names += fractal_feature_names(config)
    lines = ["# feature name\tdefinition"]
    for name in names:
        parts = name.split("_")
        family = next((f for f in _FAMILIES if f in parts), None)
        feature = name.split(f"{family}_", 1)[1] if family else ""
        base = feature.rsplit("_d", 1)[0] if family == "GTSDM" else feature
        definition = defs.get(family, {}).get(base, "")
        if family == "GTSDM" and "_d" in feature:
            k = feature.rsplit("_d", 1)[1]
            definition += f" [offset index {k} of the direction table]"
        lines.append(f"{name}\t{definition}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _cmd_rank(args):
    config = _config_from(args)
    table = load_feature_table(args.features)
    y = _require_labels(table)
    plan = _plan_from(config)
    report = rank_features(table, y, plan, threads=args.threads)
    selected = set(threshold_select(report, config.f1_threshold))
    rows = [[name, score, int(name in selected)] for name, score in report.ranked()]
    path = _write_csv(Path(args.out) / "ranking.csv",
                      ["feature", "mean_f1", "selected_flag"], rows)
    print(f"ranked {len(rows)} features; {len(selected)} selected at "
          f"F1 >= {config.f1_threshold} -> {path}")
    return 0


def _read_ranking(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        return [(row["feature"], float(row["mean_f1"])) for row in reader]


def _cmd_classify(args):
    config = _config_from(args)
    table = load_feature_table(args.features)
    y = _require_labels(table)
    ranking_path = args.ranking or (Path(args.out) / "ranking.csv")
    ranked = _read_ranking(ranking_path)
    selected = [name for name, score in ranked if score >= config.f1_threshold]
    if args.significance:
        kept = significance_filter(table, y, selected, config.p_threshold)
        selected = [r.name for r in kept]
    if not selected:
        raise CgrepError(f"no features pass the F1 threshold {config.f1_threshold}")
    plan = _plan_from(config)
    dist = evaluate_model(table, y, selected, plan, threads=args.threads)
    rows = []
    i = 0
    for it in range(plan.iterations):
        for fold in range(plan.folds):
            rows.append([it, fold, dist.values["auc"][i], dist.values["accuracy"][i],
                         dist.values["ppv"][i], dist.values["fpr"][i]])
            i += 1
    path = _write_csv(Path(args.out) / "metrics.csv",
                      ["iteration", "fold", "auc", "accuracy", "ppv", "fpr"], rows)
    for metric in ("auc", "accuracy", "ppv", "fpr"):
        print(f"{metric}: {dist.mean(metric):.3f} +/- {dist.std(metric):.3f}")
    print(f"wrote {path}")
    return 0


def _survival_candidates(args, config, table, y_event):
    if args.candidates:
        return [c for c in args.candidates.split(",") if c]
    if args.ranking:
        ranked = _read_ranking(args.ranking)
        chosen = [n for n, s in ranked if s > config.survival_f1_threshold]
        if chosen:
            return chosen
        raise CgrepError(f"no features pass the survival F1 threshold "
                         f"{config.survival_f1_threshold}")
    return table.feature_names


def _cmd_survival(args):
    config = _config_from(args)
    table = load_feature_table(args.features)
    records = table.survival_records()
    if len(records) != len(table):
        raise CgrepError("every row needs time_days and event for survival analysis")
    event = np.array([r.event for r in records])
    candidates = _survival_candidates(args, config, table, event)
    selection = select_alpha(records, table, candidates, config.alpha_grid,
                             folds=config.folds, seed=config.seed)
    out = Path(args.out)
    _write_csv(out / "alpha_profile.csv", ["alpha", "cv_cindex"],
               [[a, c] for a, c in zip(selection.grid, selection.cv_cindex)])
    effects = select_features_dependent(records, table, selection.alpha_hat,
                                        config.p_threshold, candidates)
    _write_csv(out / "selected_features.csv", ["name", "coefficient", "p_value"],
               [[e.name, e.coefficient, e.p_value] for e in effects])
    print(f"alpha_hat={selection.alpha_hat:g} (tau={selection.tau_hat:.3f}); "
          f"{len(effects)} significant feature(s) at p < {config.p_threshold}")
    return 0


def _read_selected(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        return {row["name"]: float(row["coefficient"]) for row in reader}


def _read_alpha_hat(path):
    best_alpha, best_c = None, -np.inf
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            c = float(row["cv_cindex"])
            if c > best_c:
                best_alpha, best_c = float(row["alpha"]), c
    if best_alpha is None:
        raise CgrepError(f"{path}: empty alpha profile")
    return best_alpha


def _cmd_prognosis(args):
    config = _config_from(args)
    out = Path(args.out)
    table = load_feature_table(args.features)
    records = table.survival_records()
    if len(records) != len(table):
        raise CgrepError("every row needs time_days and event for prognosis")
    selected_path = args.selected or (out / "selected_features.csv")
    coefficients = _read_selected(selected_path)
    if not coefficients:
        raise CgrepError(f"{selected_path}: no selected features")
    alpha = args.alpha if args.alpha is not None else \
        _read_alpha_hat(out / "alpha_profile.csv")

    scaled = _scaled_view(table, list(coefficients))
    pi = compute_pi(coefficients, scaled)
    grouping = split_by_pi(pi, table.patient_ids)

    good_records = [r for r, b in zip(records, grouping.bad) if not b]
    bad_records = [r for r, b in zip(records, grouping.bad) if b]
    curve_good = cg_curve(good_records, alpha)
    curve_bad = cg_curve(bad_records, alpha)
    distance = curve_distance(curve_good, curve_bad)
    p_perm = permutation_pvalue(records, grouping, alpha, config.permutations,
                                seed=config.seed, threads=args.threads)

    (out / "group_curves").mkdir(parents=True, exist_ok=True)
    write_curve_csv(curve_good, out / "group_curves" / "good.csv")
    write_curve_csv(curve_bad, out / "group_curves" / "bad.csv")
    emit_curve_svg([("good prognosis", curve_good), ("bad prognosis", curve_bad)],
                   out / "group_curves.svg",
                   title=f"alpha={alpha:g} D={distance:.3f} p={p_perm:.4f}")

    rep = table.rep_label
    rows = [[pid, grouping.pi[i], grouping.group_of(i),
             "" if rep is None or np.isnan(rep[i]) else int(rep[i])]
            for i, pid in enumerate(table.patient_ids)]
    _write_csv(out / "prognosis_report.csv",
               ["patient_id", "pi", "group", "rep_label"], rows)

    times = np.array([r.time for r in records])
    comp = group_comparison(times, np.where(grouping.bad, "bad", "good"))
    comp_rows = []
    for level, st in comp.groups.items():
        comp_rows.append(["survival_time", level, st.n, st.mean, st.std, st.stderr,
                          st.median, st.range_min, st.range_max, comp.test,
                          comp.p_value])
    comp_rows.append(["cg_curve_distance", "good_vs_bad", len(records), distance,
                      "", "", "", "", "", "permutation", p_perm])
    if rep is not None and not np.isnan(rep).any():
        rep_comp = group_comparison(times, np.where(rep == 1, "rep", "non_rep"))
        for level, st in rep_comp.groups.items():
            comp_rows.append(["survival_time", level, st.n, st.mean, st.std,
                              st.stderr, st.median, st.range_min, st.range_max,
                              rep_comp.test, rep_comp.p_value])
        tab = cross_tab(grouping, rep.astype(np.int64))
        _write_csv(out / "rep_crosstab.csv",
                   ["rep_label", "good", "bad", "pct_good", "pct_bad"],
                   [[r, tab.counts[r, 0], tab.counts[r, 1],
                     tab.row_percent[r, 0], tab.row_percent[r, 1]] for r in (0, 1)])
    _write_csv(out / "comparison.csv",
               ["metric", "group", "n", "mean", "std", "stderr", "median",
                "range_min", "range_max", "test", "p_value"], comp_rows)
    print(f"groups {grouping.sizes}; D={distance:.4f}, permutation p={p_perm:.4f}")
    return 0


# ---------------------------------------------------------------------------
# Parser

def _build_parser():
    parser = argparse.ArgumentParser(
        prog="cgrep",
        description="Radiomics/fractal features, resampled REP classification "
                    "and copula-based survival analysis.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="master seed (default 42)")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--config", default=None, help="key=value config file")

    p = sub.add_parser("simulate", help="generate synthetic fixtures")
    p.add_argument("--kind", required=True,
                   choices=("survival", "classification", "phantom"))
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--beta", default="1.0")
    p.add_argument("--gamma", default="0.5")
    p.add_argument("--lambda-t", dest="lambda_t", type=float, default=1.0)
    p.add_argument("--lambda-u", dest="lambda_u", type=float, default=1.0)
    p.add_argument("--informative", type=int, default=3)
    p.add_argument("--noise", type=int, default=20)
    p.add_argument("--separation", type=float, default=2.0)
    p.add_argument("--phantom", default="fbm",
                   choices=("constant", "checkerboard", "ramp", "fbm"))
    p.add_argument("--dims", default="32,32,16")
    p.add_argument("--hurst", type=float, default=0.5)
    p.add_argument("--amplitude", type=float, default=10.0)
    common(p)

    p = sub.add_parser("extract", help="volumes + masks -> features.csv")
    p.add_argument("--manifest", required=True,
                   help="CSV with columns patient_id,volume,mask")
    p.add_argument("--levels", type=int, default=None)
    p.add_argument("--displacements", default=None)
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--dump-maps", action="store_true")
    p.add_argument("--skip-fractal", action="store_true")
    common(p)

    p = sub.add_parser("rank", help="per-feature F1 ranking")
    p.add_argument("--features", required=True)
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--folds", type=int, default=None)
    p.add_argument("--f1-threshold", dest="f1_threshold", type=float, default=None)
    p.add_argument("--majority-size", dest="majority_size", type=int, default=None)
    common(p)

    p = sub.add_parser("classify", help="boosted-ensemble evaluation")
    p.add_argument("--features", required=True)
    p.add_argument("--ranking", default=None)
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--folds", type=int, default=None)
    p.add_argument("--f1-threshold", dest="f1_threshold", type=float, default=None)
    p.add_argument("--majority-size", dest="majority_size", type=int, default=None)
    p.add_argument("--significance", action="store_true",
                   help="apply the second-step significance filter")
    common(p)

    p = sub.add_parser("survival", help="dependence selection + feature screen")
    p.add_argument("--features", required=True)
    p.add_argument("--alpha-grid", dest="alpha_grid", default=None)
    p.add_argument("--folds", type=int, default=None)
    p.add_argument("--p-threshold", dest="p_threshold", type=float, default=None)
    p.add_argument("--candidates", default=None,
                   help="comma-separated feature names (default: all)")
    p.add_argument("--ranking", default=None,
                   help="ranking.csv to pre-filter candidates (strict > 0.7)")
    common(p)

    p = sub.add_parser("prognosis", help="prognostic grouping and curves")
    p.add_argument("--features", required=True)
    p.add_argument("--selected", default=None,
                   help="selected_features.csv (default: <out>/selected_features.csv)")
    p.add_argument("--alpha", type=float, default=None,
                   help="dependence level (default: argmax of <out>/alpha_profile.csv)")
    p.add_argument("--permutations", type=int, default=None)
    common(p)
    return parser


_COMMANDS = {"simulate": _cmd_simulate, "extract": _cmd_extract,
             "rank": _cmd_rank, "classify": _cmd_classify,
             "survival": _cmd_survival, "prognosis": _cmd_prognosis}


def dispatch(argv) -> int:
    _setup_logging()
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.seed is None:
        if os.environ.get("CGREP_REQUIRE_SEED"):
            print("error: --seed is required when CGREP_REQUIRE_SEED is set",
                  file=sys.stderr)
            return 2
        args.seed = 42
    try:
        return _COMMANDS[args.command](args)
    except (CgrepError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
