"""Command-line pipeline. Every subcommand resolves its parameters (explicit
flags > --config file > TILTWEIGH_SEED env > builtin defaults), writes the
resolved config.json, metrics.json and run.log into the output directory,
and exits 0 on success, 1 on a domain error, 2 on a usage error.

Re-running a subcommand from its emitted config.json reproduces metrics.json
bit for bit (per kernel backend; the backend is recorded in config.json).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import _kernels
from .classifier import ProbClassifier, calibrate, fit_logistic
from .data import (
    SplitSpec,
    load_labeled,
    load_unlabeled,
    save_labeled,
    save_unlabeled,
    split,
)
from .downstream import (
    build_model_zoo,
    evaluate_target,
    finetune,
    save_score_report,
    score_models,
)
from .errors import TiltweighError
from .evaluation import consistency_curve, per_class_pr, precision_recall
from .numerics import substream_seed
from .synthetic import (
    WATERBIRDS_GROUP_TO_CLASS,
    WATERBIRDS_SRC_PROPS,
    WATERBIRDS_TEST_SIZES,
    DiscreteShiftSpec,
    GaussianLdaSpec,
    check_anchor_sets,
    gen_group_shift,
    gen_label_shift,
    gen_lda,
    label_switch_twin_spec,
    oracle_solve,
    waterbirds_analog_means,
)
from .tilt import (
    BREEDS_CALIBRATIONS,
    BREEDS_GRID,
    WATERBIRDS_CALIBRATIONS,
    WATERBIRDS_GRID,
    ExtraConfig,
    WeightVector,
    fit_extra,
    sweep,
)

# builtin defaults per subcommand; None in the parsed namespace means
# "not set on the command line", so config files can fill the gap
DEFAULTS = {
    "fit-source": {
        "source": None, "penalty": "l2", "strength": 10.0, "tol": 1e-6,
        "max_iter": 500, "seed": 0,
    },
    "calibrate": {
        "classifier": None, "holdout": None, "kind": "ts", "seed": 0,
    },
    "fit-extra": {
        "classifier": None, "source": None, "target": None,
        "learning_rate": 5e-4, "batch_size": 500, "epochs": 200, "lam": 0.0,
        "init_scale": 0.01, "freeze_theta": False, "repeats": 1, "seed": 0,
    },
    "sweep": {
        "source": None, "target": None, "preset": "waterbirds",
        "holdout_fraction": 0.2, "clf_strength": 10.0, "threads": 1, "seed": 0,
    },
    "eval-target": {
        "model": None, "source": None, "weights": None, "loss": "zero-one",
        "seed": 0,
    },
    "finetune": {
        "source": None, "weights": None, "penalty": "l2", "strength": 0.1,
        "tol": 1e-6, "max_iter": 500, "seed": 0,
    },
    "model-select": {
        "train": None, "val": None, "weights": None, "target_test": None,
        "external": None, "n_strengths": 20, "seed": 0,
    },
    "synth": {
        "preset": "waterbirds-analog", "n_source": 4795, "n_target": 4000,
        "target_groups": "1,2", "dim": 8, "seed": 0,
    },
    "oracle": {
        "spec": None, "preset": None, "restarts": 50, "seed": 0,
    },
    "pr-curve": {
        "source": None, "weights": None, "target_groups": "1,2",
        "grid_count": 40, "per_class": False, "seed": 0,
    },
    "consistency": {
        "sizes": "1000,4000,16000", "repeats": 5, "learning_rate": 2e-3,
        "batch_size": 500, "epochs": 300, "lam": 0.0, "seed": 0,
    },
}


def _resolve(sub, args):
    """Merge builtin defaults, --config file, env seed, and explicit flags."""
    params = dict(DEFAULTS[sub])
    env_seed = os.environ.get("TILTWEIGH_SEED")
    if env_seed is not None:
        params["seed"] = int(env_seed)
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            stored = json.load(fh)
        if stored.get("subcommand") not in (None, sub):
            raise TiltweighError(
                f"config file is for subcommand {stored.get('subcommand')!r}, not {sub!r}"
            )
        for key, value in stored.get("params", {}).items():
            if key in params:
                params[key] = value
    for key in params:
        value = getattr(args, key, None)
        if value is not None:
            params[key] = value
    missing = [k for k, v in params.items() if v is None and k in _REQUIRED[sub]]
    if missing:
        raise UsageError(f"missing required flags for {sub}: " + ", ".join(
            "--" + k.replace("_", "-") for k in missing))
    return params


_REQUIRED = {
    "fit-source": {"source"},
    "calibrate": {"classifier", "holdout"},
    "fit-extra": {"classifier", "source", "target"},
    "sweep": {"source", "target"},
    "eval-target": {"model", "source", "weights"},
    "finetune": {"source", "weights"},
    "model-select": {"train", "val", "weights"},
    "synth": set(),
    "oracle": set(),
    "pr-curve": {"source", "weights"},
    "consistency": set(),
}


class UsageError(Exception):
    pass


class _Run:
    """Output directory plus the config/metrics/log trio every run writes."""

    def __init__(self, sub, params, outdir):
        self.sub = sub
        self.params = params
        self.dir = Path(outdir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.t0 = time.time()
        self.log_lines = [f"subcommand: {sub}", f"backend: {_kernels.BACKEND}"]
        with open(self.dir / "config.json", "w", encoding="utf-8") as fh:
            json.dump(
                {"subcommand": sub, "backend": _kernels.BACKEND, "params": params},
                fh, indent=1, sort_keys=True,
            )

    def log(self, line):
        self.log_lines.append(str(line))

    def finish(self, metrics):
        with open(self.dir / "metrics.json", "w", encoding="utf-8") as fh:
            json.dump(metrics, fh, indent=1, sort_keys=True)
        self.log(f"elapsed_seconds: {time.time() - self.t0:.3f}")
        with open(self.dir / "run.log", "w", encoding="utf-8") as fh:
            fh.write("\n".join(self.log_lines) + "\n")


def _extra_cfg(params, seed):
    return ExtraConfig(
        learning_rate=float(params["learning_rate"]),
        batch_size=int(params["batch_size"]),
        epochs=int(params["epochs"]),
        lam=float(params["lam"]),
        seed=int(seed),
        init_scale=float(params["init_scale"]),
        freeze_theta=bool(params["freeze_theta"]),
    )


def _parse_groups(text):
    return tuple(int(g) for g in str(text).split(",") if str(g).strip() != "")


# --------------------------------------------------------------------------
# subcommand bodies
# --------------------------------------------------------------------------


def run_fit_source(params, run):
    ds = load_labeled(params["source"])
    clf = fit_logistic(
        ds, params["penalty"], float(params["strength"]), float(params["tol"]),
        int(params["max_iter"]), int(params["seed"]),
    )
    clf.save(run.dir / "classifier.json")
    info = clf.fit_info
    run.log(f"fit {ds.n} x {ds.dim}, K={ds.class_count}")
    return {
        "converged": info["converged"],
        "iterations": info["iterations"],
        "objective": info["objective"],
        "separable_degenerate": info["separable_degenerate"],
        "train_accuracy": clf.accuracy(ds),
        "train_nll": clf.nll(ds),
    }


def run_calibrate(params, run):
    clf = ProbClassifier.load(params["classifier"])
    holdout = load_labeled(params["holdout"])
    pre = clf.nll(holdout)
    cal = calibrate(clf, holdout, params["kind"])
    cal.save(run.dir / "classifier.json")
    return {
        "kind": params["kind"],
        "pre_nll": pre,
        "post_nll": cal.nll(holdout),
        "degenerate_holdout": bool(
            (cal.fit_info or {}).get("calibration_degenerate_holdout", False)
        ),
    }


def run_fit_extra(params, run):
    clf = ProbClassifier.load(params["classifier"])
    src = load_labeled(params["source"])
    tgt = load_unlabeled(params["target"])
    repeats = int(params["repeats"])
    fits = []
    for rep in range(repeats):
        seed = int(params["seed"]) if repeats == 1 else substream_seed(int(params["seed"]), rep)
        cfg = _extra_cfg(params, seed)
        fits.append(fit_extra(clf, src, tgt, cfg))
        run.log(f"repeat {rep}: objective {fits[-1][0].objective!r}")
    objectives = [m.objective for m, _ in fits]
    best = int(np.argmin(objectives))
    model, wv = fits[best]
    model.save(run.dir / "tilt.json")
    wv.save(run.dir / "weights.csv", run.dir / "weights.json")
    return {
        "objective": model.objective,
        "objective_mean": float(np.mean(objectives)),
        "objective_std": float(np.std(objectives)),
        "best_repeat": best,
        "mean_weight": wv.mean_weight,
        "weight_std": float(wv.weights.std()),
        "clip_count": wv.clip_count,
        "normalizer_at_fit": model.normalizer_at_fit,
    }


def run_sweep(params, run):
    src = load_labeled(params["source"])
    tgt = load_unlabeled(params["target"])
    seed = int(params["seed"])
    preset = params["preset"]
    if preset == "waterbirds":
        grid, calibrations = WATERBIRDS_GRID, WATERBIRDS_CALIBRATIONS
    elif preset == "breeds":
        grid, calibrations = BREEDS_GRID, BREEDS_CALIBRATIONS
    else:
        raise TiltweighError(f"unknown sweep preset {preset!r}")
    fit_part, holdout = split(src, SplitSpec(1.0 - float(params["holdout_fraction"]), seed))
    base = fit_logistic(fit_part, "l2", float(params["clf_strength"]), 1e-6, 500, seed)
    variants = [calibrate(base, holdout, kind) for kind in calibrations]
    grid = tuple(replace(cfg, seed=substream_seed(seed, i)) for i, cfg in enumerate(grid))
    model, wv, report = sweep(
        variants, src, tgt, grid, threads=int(params["threads"])
    )
    model.save(run.dir / "tilt.json")
    wv.save(run.dir / "weights.csv", run.dir / "weights.json")
    cells = [
        {
            "calibration": calibrations[c.variant],
            "config": c.config.to_json(),
            "objective": None if math.isnan(c.objective) else c.objective,
            "ok": c.ok,
            "error": c.error,
        }
        for c in report
    ]
    with open(run.dir / "report.json", "w", encoding="utf-8") as fh:
        json.dump(cells, fh, indent=1, sort_keys=True)
    best = min((c for c in report if c.ok), key=lambda c: c.objective)
    return {
        "cells": len(report),
        "cells_ok": sum(c.ok for c in report),
        "best_objective": best.objective,
        "best_calibration": calibrations[best.variant],
        "best_config": best.config.to_json(),
        "mean_weight": wv.mean_weight,
    }


def run_eval_target(params, run):
    model = ProbClassifier.load(params["model"])
    src = load_labeled(params["source"])
    wv = WeightVector.load(params["weights"])
    risk = evaluate_target(model, src, wv, params["loss"])
    out = {"loss": params["loss"], "risk": risk}
    if params["loss"].replace("-", "_") == "zero_one":
        out["estimated_accuracy"] = 1.0 - risk
    return out


def run_finetune(params, run):
    src = load_labeled(params["source"])
    wv = WeightVector.load(params["weights"])
    clf = finetune(
        src, wv, params["penalty"], float(params["strength"]),
        float(params["tol"]), int(params["max_iter"]), int(params["seed"]),
    )
    clf.save(run.dir / "model.json")
    return {
        "converged": clf.fit_info["converged"],
        "iterations": clf.fit_info["iterations"],
        "objective": clf.fit_info["objective"],
        "weighted_train_accuracy": float(
            np.mean(clf.predict(src.features) == src.labels)
        ),
    }


def run_model_select(params, run):
    train = load_labeled(params["train"])
    val = load_labeled(params["val"])
    wv = WeightVector.load(params["weights"])
    tgt_test = load_labeled(params["target_test"]) if params["target_test"] else None
    external = None
    if params["external"]:
        external = np.loadtxt(params["external"], delimiter=",", skiprows=1, usecols=1)
    strengths = tuple(np.logspace(-4, -1, int(params["n_strengths"])))
    zoo, skipped_groups = build_model_zoo(train, int(params["seed"]), strengths)
    rows, summary = score_models(zoo, val, wv, tgt_test, external)
    save_score_report(rows, summary, run.dir / "report.csv", run.dir / "summary.json")
    metrics = {
        "zoo_size": len(zoo),
        "group_tier_skipped": skipped_groups,
        "selected": summary["selected"],
    }
    if "spearman" in summary:
        metrics["spearman"] = summary["spearman"]
    return metrics


def run_synth(params, run):
    seed = int(params["seed"])
    preset = params["preset"]
    n_p, n_q = int(params["n_source"]), int(params["n_target"])
    if preset == "waterbirds-analog":
        means = waterbirds_analog_means(int(params["dim"]))
        tgroups = _parse_groups(params["target_groups"])
        tprops = np.zeros(len(WATERBIRDS_SRC_PROPS))
        for g in tgroups:
            tprops[g] = WATERBIRDS_TEST_SIZES[g]
        tprops /= tprops.sum()
        src, tgt, tgt_lab = gen_group_shift(
            means, WATERBIRDS_GROUP_TO_CLASS, WATERBIRDS_SRC_PROPS, tprops,
            n_p, n_q, seed,
        )
        truth = {
            "preset": preset,
            "group_means": means.tolist(),
            "group_to_class": list(WATERBIRDS_GROUP_TO_CLASS),
            "src_props": list(WATERBIRDS_SRC_PROPS),
            "tgt_props": tprops.tolist(),
            "target_groups": list(tgroups),
        }
    elif preset == "lda-drift":
        spec = _default_lda_spec()
        src, tgt, tilt, tgt_lab = gen_lda(spec, n_p, n_q, seed)
        truth = {"preset": preset, "spec": spec.to_json(), "tilt": tilt.to_json()}
    elif preset == "label-shift":
        means = np.array([[-2.0] + [0.0] * (int(params["dim"]) - 1),
                          [2.0] + [0.0] * (int(params["dim"]) - 1)])
        src, tgt, tilt, tgt_lab = gen_label_shift(
            means, [0.5, 0.5], [0.2, 0.8], n_p, n_q, seed
        )
        truth = {"preset": preset, "tilt": tilt.to_json()}
    else:
        raise TiltweighError(f"unknown synth preset {preset!r}")
    save_labeled(src, run.dir / "source.csv")
    save_unlabeled(tgt, run.dir / "target.csv")
    save_labeled(tgt_lab, run.dir / "target_labeled.csv")
    with open(run.dir / "truth.json", "w", encoding="utf-8") as fh:
        json.dump(truth, fh, indent=1, sort_keys=True)
    return {
        "preset": preset,
        "n_source": src.n,
        "n_target": tgt.n,
        "dim": src.dim,
        "class_count": src.class_count,
    }


def _default_lda_spec():
    return GaussianLdaSpec(
        [0.6, 0.4],
        [[-2.0, 0.0], [2.0, 0.0]],
        [[-1.7, -0.2], [2.3, 0.3]],
    )


def run_oracle(params, run):
    if params["preset"] == "label-switch-twin":
        spec = label_switch_twin_spec()
    elif params["spec"]:
        with open(params["spec"], "r", encoding="utf-8") as fh:
            spec = DiscreteShiftSpec.from_json(json.load(fh))
    else:
        raise UsageError("oracle needs --spec or --preset label-switch-twin")
    anchors = check_anchor_sets(spec)
    report = oracle_solve(spec, restarts=int(params["restarts"]), seed=int(params["seed"]))
    with open(run.dir / "oracle.json", "w", encoding="utf-8") as fh:
        json.dump(report.to_json(anchors), fh, indent=1, sort_keys=True)
    return {
        "n_optima": report.n_optima,
        "best_kl": report.kls[0],
        "kl_gap": (report.kls[1] - report.kls[0]) if report.n_optima > 1 else None,
        "anchored_classes": sum(1 for r in anchors.values() if r.anchored),
        "rank_ok_classes": sum(1 for r in anchors.values() if r.rank_ok),
    }


def run_pr_curve(params, run):
    src = load_labeled(params["source"])
    wv = WeightVector.load(params["weights"])
    tgroups = _parse_groups(params["target_groups"])
    grid = np.linspace(0.5 / int(params["grid_count"]), 0.5, int(params["grid_count"]))
    curve = precision_recall(wv, src.groups, tgroups, grid)
    curve.save(run.dir / "curve.csv")
    metrics = {
        "target_groups": list(tgroups),
        "recall_at_10pct": float(np.interp(0.10, curve.fractions, curve.recall)),
        "precision_at_10pct": float(np.interp(0.10, curve.fractions, curve.precision)),
        "empty_target_group": curve.empty_target_group,
    }
    if params["per_class"]:
        for cls, sub in per_class_pr(wv, src.labels, src.groups, tgroups, grid).items():
            sub.save(run.dir / f"curve_class{cls}.csv")
    return metrics


def run_consistency(params, run):
    sizes = [int(s) for s in str(params["sizes"]).split(",")]
    cfg = ExtraConfig(
        learning_rate=float(params["learning_rate"]),
        batch_size=int(params["batch_size"]),
        epochs=int(params["epochs"]),
        lam=float(params["lam"]),
        seed=int(params["seed"]),
    )
    table = consistency_curve(
        _default_lda_spec(), sizes, int(params["repeats"]), cfg, seed=int(params["seed"])
    )
    table.save(run.dir / "consistency.csv")
    return {
        "sizes": list(table.sizes),
        "param_err_mean": list(table.param_err_mean),
        "weight_err_mean": list(table.weight_err_mean),
        "loglog_slope": table.slope,
    }


RUNNERS = {
    "fit-source": run_fit_source,
    "calibrate": run_calibrate,
    "fit-extra": run_fit_extra,
    "sweep": run_sweep,
    "eval-target": run_eval_target,
    "finetune": run_finetune,
    "model-select": run_model_select,
    "synth": run_synth,
    "oracle": run_oracle,
    "pr-curve": run_pr_curve,
    "consistency": run_consistency,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tiltweigh",
        description="Importance weighting under exponential-tilt distribution "
        "shift: fit weights from a labeled source and unlabeled target, then "
        "evaluate, fine-tune, or select models for the target domain.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add(name, help_text, flags):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", default=None,
                       help="config.json from an earlier run; explicit flags override")
        p.add_argument("--out", "-o", required=True, help="output directory")
        for args, kwargs in flags:
            p.add_argument(*args, **kwargs)
        return p

    seed_flag = (["--seed"], dict(type=int, default=None,
                                  help="RNG seed (default 0; env TILTWEIGH_SEED overrides the default)"))

    add("fit-source", "fit the multinomial logistic source classifier", [
        (["--source", "-s"], dict(default=None, help="labeled source CSV/JSON")),
        (["--penalty"], dict(default=None, choices=["l1", "l2"],
                             help="regularizer (default l2)")),
        (["--strength"], dict(type=float, default=None,
                              help="penalty strength, inverse-C convention 1/C (default 10 = C 0.1)")),
        (["--tol"], dict(type=float, default=None, help="gradient sup-norm stop (default 1e-6)")),
        (["--max-iter"], dict(type=int, default=None, dest="max_iter", help="iteration cap (default 500)")),
        seed_flag,
    ])
    add("calibrate", "fit a post-hoc calibration transform on held-out data", [
        (["--classifier"], dict(default=None, help="classifier.json to calibrate")),
        (["--holdout"], dict(default=None, help="labeled holdout CSV/JSON")),
        (["--kind"], dict(default=None, choices=["none", "ts", "bcts", "vs"],
                          help="transform family (default ts)")),
        seed_flag,
    ])
    add("fit-extra", "fit the exponential tilt and emit importance weights", [
        (["--classifier"], dict(default=None, help="calibrated classifier.json")),
        (["--source", "-s"], dict(default=None)),
        (["--target", "-t"], dict(default=None, help="unlabeled target CSV")),
        (["--learning-rate"], dict(type=float, default=None, dest="learning_rate",
                                   help="Adam step size (default 5e-4)")),
        (["--batch-size"], dict(type=int, default=None, dest="batch_size", help="default 500")),
        (["--epochs"], dict(type=int, default=None, help="default 200")),
        (["--lam"], dict(type=float, default=None,
                         help="normalizer regularizer weight (default 0)")),
        (["--init-scale"], dict(type=float, default=None, dest="init_scale",
                                help="stddev of the parameter init (default 0.01)")),
        (["--freeze-theta"], dict(action="store_const", const=True, default=None,
                                  dest="freeze_theta", help="hold the slopes at 0 (label-shift mode)")),
        (["--repeats"], dict(type=int, default=None,
                             help="independent restarts; weights come from the lowest objective")),
        seed_flag,
    ])
    add("sweep", "grid of tilt fits x calibrations; keep the lowest objective", [
        (["--source", "-s"], dict(default=None)),
        (["--target", "-t"], dict(default=None)),
        (["--preset"], dict(default=None, choices=["waterbirds", "breeds"],
                            help="waterbirds: lr {5e-4,4e-5} x epochs {100,200,400}, B=500, lam=0, "
                                 "calibrations {none,ts,bcts,vs}; breeds: lr 1e-4, B=1500, E=500, "
                                 "lam=1e-6, bcts")),
        (["--holdout-fraction"], dict(type=float, default=None, dest="holdout_fraction",
                                      help="calibration holdout fraction (default 0.2)")),
        (["--clf-strength"], dict(type=float, default=None, dest="clf_strength",
                                  help="source classifier penalty strength (default 10 = C 0.1)")),
        (["--threads"], dict(type=int, default=None, help="parallel sweep cells (default 1)")),
        seed_flag,
    ])
    add("eval-target", "weighted source risk as a target performance estimate", [
        (["--model"], dict(default=None, help="classifier/model JSON to evaluate")),
        (["--source", "-s"], dict(default=None)),
        (["--weights"], dict(default=None, help="weights.csv from fit-extra/sweep")),
        (["--loss"], dict(default=None, choices=["zero-one", "nll"], help="default zero-one")),
        seed_flag,
    ])
    add("finetune", "weighted-ERM logistic fit on the reweighted source", [
        (["--source", "-s"], dict(default=None)),
        (["--weights"], dict(default=None)),
        (["--penalty"], dict(default=None, choices=["l1", "l2"])),
        (["--strength"], dict(type=float, default=None, help="default 0.1")),
        (["--tol"], dict(type=float, default=None)),
        (["--max-iter"], dict(type=int, default=None, dest="max_iter")),
        seed_flag,
    ])
    add("model-select", "score a logistic model zoo on weighted validation data", [
        (["--train"], dict(default=None, help="labeled data the zoo is fitted on")),
        (["--val"], dict(default=None, help="labeled validation data the scores use")),
        (["--weights"], dict(default=None, help="weights.csv aligned with --val")),
        (["--target-test"], dict(default=None, dest="target_test",
                                 help="labeled target data for true accuracies (optional)")),
        (["--external"], dict(default=None,
                              help="CSV model_id,score with an externally computed score (optional)")),
        (["--n-strengths"], dict(type=int, default=None, dest="n_strengths",
                                 help="log grid 1e-4..1e-1 size (default 20)")),
        seed_flag,
    ])
    add("synth", "generate a synthetic shift benchmark", [
        (["--preset"], dict(default=None,
                            choices=["waterbirds-analog", "lda-drift", "label-shift"])),
        (["--n-source"], dict(type=int, default=None, dest="n_source", help="default 4795")),
        (["--n-target"], dict(type=int, default=None, dest="n_target", help="default 4000")),
        (["--target-groups"], dict(default=None, dest="target_groups",
                                   help="comma list, waterbirds-analog only (default 1,2)")),
        (["--dim"], dict(type=int, default=None, help="feature dimension (default 8)")),
        seed_flag,
    ])
    add("oracle", "solve a discrete spec exactly; report optima and anchors", [
        (["--spec"], dict(default=None, help="DiscreteShiftSpec JSON file")),
        (["--preset"], dict(default=None, choices=["label-switch-twin"])),
        (["--restarts"], dict(type=int, default=None, help="default 50")),
        seed_flag,
    ])
    add("pr-curve", "precision/recall of the top-x%% weights against groups", [
        (["--source", "-s"], dict(default=None, help="labeled source CSV with groups")),
        (["--weights"], dict(default=None)),
        (["--target-groups"], dict(default=None, dest="target_groups", help="default 1,2")),
        (["--grid-count"], dict(type=int, default=None, dest="grid_count",
                                help="fractions in (0, 0.5] (default 40)")),
        (["--per-class"], dict(action="store_const", const=True, default=None,
                               dest="per_class", help="also emit per-class curves")),
        seed_flag,
    ])
    add("consistency", "estimation error vs sample size on the drift preset", [
        (["--sizes"], dict(default=None, help="comma list (default 1000,4000,16000)")),
        (["--repeats"], dict(type=int, default=None, help="default 5")),
        (["--learning-rate"], dict(type=float, default=None, dest="learning_rate")),
        (["--batch-size"], dict(type=int, default=None, dest="batch_size")),
        (["--epochs"], dict(type=int, default=None)),
        (["--lam"], dict(type=float, default=None)),
        seed_flag,
    ])
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    sub = args.subcommand
    try:
        params = _resolve(sub, args)
    except UsageError as exc:
        parser.error(str(exc))  # exits 2
        return 2
    try:
        run = _Run(sub, params, args.out)
        metrics = RUNNERS[sub](params, run)
        run.finish(metrics)
    except UsageError as exc:
        parser.error(str(exc))
        return 2
    except (TiltweighError, FileNotFoundError) as exc:
        print(f"tiltweigh {sub}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
