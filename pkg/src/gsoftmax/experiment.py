"""Experiment runner: train every (loss mode, seed), analyse, compare.

Output layout under ``out_dir``::

    summary.json
    <mode>/seed<k>/history.csv      epoch, lr, loss, train_metric, test_metric
    <mode>/seed<k>/features.csv     labels then one score feature per class
    <mode>/seed<k>/features.json    the same dump as {"labels", "features"}
    <mode>/seed<k>/scatter.csv      (feature, prediction) points per true class
    <mode>/seed<k>/separability.{json,csv}
    <mode>/seed<k>/model.json

Nothing time- or path-dependent goes into ``summary.json``, so reruns of
one configuration produce identical bytes.
"""

import csv
import itertools
import json
import logging
import os

import numpy as np

from .analysis import impostor_report, multilabel_report, paired_t_test, pearson_correlation, scatter_rows
from .config import build_datasets, build_head_init, build_optimizer, build_schedule
from .errors import DomainError
from .trainer import DUAL_MODES, MlpConfig, evaluate, export_features, train

__all__ = ["run_experiment", "write_csv", "analyze_features"]

log = logging.getLogger(__name__)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def analyze_features(model, dump, analysis):
    """Separability report for a feature dump, per the analysis options."""
    logits = model.score_logits(dump.features)
    if model.multilabel:
        return multilabel_report(logits, dump.labels, analysis["ddof"])
    return impostor_report(logits, dump.labels, analysis["impostor_mode"], analysis["ddof"])


def _ap_list(ev, m):
    return [ev["per_class_ap"].get(i) for i in range(m)]


def _stat(fn, a, b):
    try:
        r = fn(a, b)
    except DomainError as exc:
        return {"error": str(exc)}
    return {"statistic": r.statistic, "p_val": r.p_val, "df": r.df}


def _both_defined(a, b):
    keep = [i for i, (u, v) in enumerate(zip(a, b)) if u is not None and v is not None]
    return [a[i] for i in keep], [b[i] for i in keep]


def _train_one(cfg, mode, seed, train_data, test_data, run_dir):
    m = train_data.num_classes
    width = 2 * m if mode in DUAL_MODES else m
    mlp_cfg = MlpConfig(train_data.x.shape[1], tuple(cfg["model"]["hidden_dims"]), width, seed=seed)
    result = train(mlp_cfg, mode, build_schedule(cfg), build_optimizer(cfg), train_data, test_data,
                   epochs=cfg["epochs"], batch_size=cfg["batch_size"],
                   head_init=build_head_init(cfg), seed=seed)
    model = result.model
    analysis = cfg["analysis"]
    eval_data = test_data if analysis["split"] == "test" and test_data is not None else train_data
    ev = evaluate(model, eval_data)
    dump = export_features(model, eval_data)
    report = analyze_features(model, dump, analysis)

    os.makedirs(run_dir, exist_ok=True)
    cols = ["epoch", "lr", "loss", "train_metric"] + (["test_metric"] if test_data is not None else [])
    write_csv(os.path.join(run_dir, "history.csv"), cols, [[h[c] for c in cols] for h in result.history])
    logits = model.score_logits(dump.features)
    label_cols = [f"y{i}" for i in range(m)] if model.multilabel else ["label"]
    labels = dump.labels if model.multilabel else dump.labels[:, None]
    write_csv(os.path.join(run_dir, "features.csv"), label_cols + [f"x{i}" for i in range(m)],
              np.concatenate([labels, logits], axis=1).tolist())
    _write_json(os.path.join(run_dir, "features.json"),
                {"labels": dump.labels.tolist(), "features": logits.tolist()})
    if not model.multilabel:
        rows = [(c, *r) for c in range(m) for r in scatter_rows(logits, dump.scores, dump.labels, c)]
        write_csv(os.path.join(run_dir, "scatter.csv"), ["true_class", "output", "x", "p", "is_true"], rows)
    _write_json(os.path.join(run_dir, "separability.json"), report.to_dict())
    sep_rows = report.to_rows()
    if sep_rows:
        write_csv(os.path.join(run_dir, "separability.csv"), list(sep_rows[0]),
                  [list(r.values()) for r in sep_rows])
    _write_json(os.path.join(run_dir, "model.json"), model.to_dict())

    aps = _ap_list(ev, m)
    by_class = {c.class_id: c for c in report.per_class}
    correlations = {}
    for key in ("compactness", "separability", "ratio"):
        pairs = [(aps[c], getattr(by_class[c], key)) for c in by_class if aps[c] is not None]
        correlations[f"ap_vs_{key}"] = _stat(pearson_correlation, [p[0] for p in pairs],
                                             [p[1] for p in pairs])
    metrics = {k: v for k, v in ev.items() if k not in ("per_class_ap", "ap_excluded")}
    return {
        "mode": mode,
        "seed": seed,
        "initial_train_loss": result.initial_loss,
        "final_train_loss": result.final_loss,
        "final": metrics,
        "per_class_ap": aps,
        "separability": report.to_dict(),
        "correlations": correlations,
        "head": None if model.head is None else model.head.to_dict(),
    }


def run_experiment(cfg, out_dir):
    """Run a validated configuration; returns the summary dict."""
    train_data, test_data = build_datasets(cfg)
    os.makedirs(out_dir, exist_ok=True)
    runs = []
    for mode in cfg["loss_modes"]:
        for seed in cfg["seeds"]:
            log.info("training %s seed=%d", mode, seed)
            run_dir = os.path.join(out_dir, mode, f"seed{seed}")
            runs.append(_train_one(cfg, mode, seed, train_data, test_data, run_dir))

    comparisons = []
    for mode_a, mode_b in itertools.combinations(cfg["loss_modes"], 2):
        for seed in cfg["seeds"]:
            ra = next(r for r in runs if r["mode"] == mode_a and r["seed"] == seed)
            rb = next(r for r in runs if r["mode"] == mode_b and r["seed"] == seed)
            a, b = _both_defined(ra["per_class_ap"], rb["per_class_ap"])
            comparisons.append({
                "modes": [mode_a, mode_b],
                "seed": seed,
                "paired_t_test": _stat(paired_t_test, a, b),
                "pearson": _stat(pearson_correlation, a, b),
            })

    aggregate = {}
    for mode in cfg["loss_modes"]:
        mine = [r for r in runs if r["mode"] == mode]
        aggregate[mode] = {
            "mean_metric": float(np.mean([r["final"]["metric"] for r in mine])),
            "mean_compactness": float(np.mean([r["separability"]["mean"]["compactness"] for r in mine])),
            "mean_separability": float(np.mean([r["separability"]["mean"]["separability"] for r in mine])),
            "mean_ratio": float(np.mean([r["separability"]["mean"]["ratio"] for r in mine])),
        }
    config = {k: v for k, v in cfg.items() if k != "output_dir"}
    summary = {"config": config, "runs": runs, "comparisons": comparisons, "aggregate": aggregate}
    _write_json(os.path.join(out_dir, "summary.json"), summary)
    return summary
