"""Command-line entry point.

Exit codes: 0 success, 1 validation, 2 data, 3 numeric failure.
``GSOFTMAX_OUT`` overrides the output directory of ``run`` and ``analyze``.
"""

import argparse
import csv
import io
import json
import logging
import os
import sys

import jsonschema
import numpy as np

from . import analysis, metrics
from .config import SCHEMA, build_schedule, load_config
from .errors import ConfigError, DivergenceError, DomainError, FormatError, ShapeError
from .experiment import run_experiment, write_csv
from .gradcheck import TOLERANCE, run_gradcheck
from .schedule import schedule_from_dict

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

OUT_ENV = "GSOFTMAX_OUT"

log = logging.getLogger("gsoftmax")


def _out_dir(arg, default):
    return os.environ.get(OUT_ENV) or arg or default


def _emit(doc, fmt, stream=None):
    stream = stream or sys.stdout
    if fmt == "json":
        json.dump(doc, stream, indent=2)
        stream.write("\n")
        return
    w = csv.writer(stream)
    w.writerow(["key", "value"])
    for k, v in doc.items():
        w.writerow([k, json.dumps(v) if isinstance(v, (dict, list)) else v])


def cmd_gradcheck(args):
    if args.trials < 1:
        raise ConfigError("--trials must be >= 1")
    report = run_gradcheck(args.trials, args.seed)
    for line in report.lines():
        print(line)
    if not report.passed:
        for name, b in report.failures().items():
            print(f"FAILED {name}: seed={b.worst_seed} index={b.worst_index} "
                  f"rel_err={b.max_rel_err:.3e} > {TOLERANCE:g}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_run(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg["seeds"] = [args.seed]
    out = _out_dir(args.out, cfg["output_dir"])
    summary = run_experiment(cfg, out)
    print(json.dumps(summary["aggregate"], indent=2))
    return EXIT_OK


# analyze inputs

def _read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FormatError(f"{path}: empty file")
    return rows[0], rows[1:]


def _floats(rows, path):
    try:
        return np.array([[float(v) for v in r] for r in rows], dtype=np.float64)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def _long_report(header, rows, path, ddof):
    by_class = {}
    for r in rows:
        try:
            cid, value = int(r[0]), float(r[1])
        except (ValueError, IndexError):
            raise FormatError(f"{path}: bad row {r}") from None
        by_class.setdefault(cid, []).append(value)
    return analysis.separability_report(dict(sorted(by_class.items())), ddof)


def _dump_report(labels, features, mode, ddof):
    if labels.ndim == 2:
        return analysis.multilabel_report(features, labels, ddof)
    return analysis.impostor_report(features, labels.astype(np.int64), mode, ddof)


def load_report(path, mode="per_feature", ddof=1):
    """Separability report from any supported feature dump.

    CSV with header ``class_id,feature_value``: one scalar per row.
    CSV with ``label`` or ``y0..`` columns then ``x0..``: a trainer dump.
    JSON ``{"labels": [...], "features": [[...], ...]}``: a trainer dump.
    """
    if not os.path.isfile(path):
        raise FileNotFoundError(path)
    if path.endswith(".json"):
        with open(path) as fh:
            try:
                doc = json.load(fh)
                labels = np.asarray(doc["labels"])
                features = np.asarray(doc["features"], dtype=np.float64)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise FormatError(f"{path}: not a feature dump ({exc})") from None
        return _dump_report(labels, features, mode, ddof)
    header, rows = _read_csv(path)
    if header[:2] == ["class_id", "feature_value"]:
        return _long_report(header, rows, path, ddof)
    n_lab = sum(1 for h in header if h == "label" or (h.startswith("y") and h[1:].isdigit()))
    if n_lab == 0 or not all(h.startswith("x") for h in header[n_lab:]):
        raise FormatError(f"{path}: unrecognised header {header}")
    table = _floats(rows, path)
    labels = table[:, :n_lab]
    labels = labels[:, 0] if header[0] == "label" else labels
    return _dump_report(labels, table[:, n_lab:], mode, ddof)


def cmd_analyze(args):
    report = load_report(args.input, args.mode, args.ddof)
    out = _out_dir(args.out, None)
    if out:
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, "separability.json"), "w") as fh:
            json.dump(report.to_dict(), fh, indent=2)
            fh.write("\n")
        rows = report.to_rows()
        if rows:
            write_csv(os.path.join(out, "separability.csv"), list(rows[0]),
                      [list(r.values()) for r in rows])
    if args.format == "json":
        _emit(report.to_dict(), "json")
    else:
        rows = report.to_rows()
        w = csv.writer(sys.stdout)
        if rows:
            w.writerow(list(rows[0]))
            w.writerows(list(r.values()) for r in rows)
    return EXIT_OK


def load_predictions(path):
    """``(scores, labels, class_ids)`` from an ``item_id,class_id,score,label`` CSV.

    Every item must carry a row for every class.
    """
    if not os.path.isfile(path):
        raise FileNotFoundError(path)
    header, rows = _read_csv(path)
    if header[:4] != ["item_id", "class_id", "score", "label"]:
        raise FormatError(f"{path}: expected header item_id,class_id,score,label")
    cells = {}
    try:
        for r in rows:
            cells[(r[0], int(r[1]))] = (float(r[2]), int(r[3]))
    except (ValueError, IndexError):
        raise FormatError(f"{path}: bad row {r}") from None
    items = list(dict.fromkeys(k[0] for k in cells))
    classes = sorted({k[1] for k in cells})
    if len(cells) != len(items) * len(classes):
        raise FormatError(f"{path}: every item needs one row per class")
    scores = np.array([[cells[(i, c)][0] for c in classes] for i in items])
    labels = np.array([[cells[(i, c)][1] for c in classes] for i in items])
    if not np.isin(labels, (0, 1)).all():
        raise FormatError(f"{path}: labels must be 0 or 1")
    return scores, labels, classes


def cmd_metrics(args):
    scores, labels, classes = load_predictions(args.input)
    aps, excluded = metrics.per_class_average_precision(metrics.ranked_from_matrix(scores, labels))
    doc = {
        "per_class_ap": {str(classes[i]): ap for i, ap in aps.items()},
        "ap_excluded": [classes[i] for i in excluded],
        "mAP": float(np.mean(list(aps.values()))) if aps else None,
    }
    counts = metrics.binarize_predictions(scores, labels, args.threshold)
    doc.update(metrics.prf_metrics(counts, args.skip_empty))
    doc["threshold"] = args.threshold
    _emit(doc, args.format)
    return EXIT_OK


def load_schedule(path):
    """Schedule from a full experiment config or a bare schedule object."""
    if not os.path.isfile(path):
        raise FileNotFoundError(path)
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    if isinstance(doc, dict) and "dataset" in doc:
        return build_schedule(load_config(path))
    try:
        jsonschema.validate(doc, SCHEMA["properties"]["schedule"])
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"schedule: {exc.message}") from None
    try:
        return schedule_from_dict(doc)
    except DomainError as exc:
        raise ConfigError(f"schedule: {exc}") from None


def cmd_schedule_preview(args):
    spec = load_schedule(args.config)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epoch", "rate"])
    for e in range(1, spec.max_epoch + 1):
        w.writerow([e, repr(float(spec.rate(e)))])
    sys.stdout.write(buf.getvalue())
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="gsoftmax", description="G-softmax training and analysis tools")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gradcheck", help="finite-difference check of all gradient blocks")
    g.add_argument("--trials", type=int, default=1000)
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_gradcheck)

    r = sub.add_parser("run", help="train, analyse and compare the configured loss modes")
    r.add_argument("--config", required=True)
    r.add_argument("--out")
    r.add_argument("--seed", type=int, help="run this single seed instead of the configured list")
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("analyze", help="separability report from a feature dump")
    a.add_argument("--input", required=True)
    a.add_argument("--out")
    a.add_argument("--mode", choices=analysis.IMPOSTOR_MODES, default="per_feature")
    a.add_argument("--ddof", type=int, choices=(0, 1), default=1)
    a.add_argument("--format", choices=("json", "csv"), default="json")
    a.set_defaults(func=cmd_analyze)

    m = sub.add_parser("metrics", help="AP, mAP and P/R/F1 from a predictions CSV")
    m.add_argument("--input", required=True)
    m.add_argument("--threshold", type=float, default=0.5)
    m.add_argument("--skip-empty", action="store_true")
    m.add_argument("--format", choices=("json", "csv"), default="json")
    m.set_defaults(func=cmd_metrics)

    s = sub.add_parser("schedule-preview", help="epoch,rate CSV for the configured schedule")
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_schedule_preview)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, DomainError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (FileNotFoundError, FormatError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DivergenceError, FloatingPointError, OverflowError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
