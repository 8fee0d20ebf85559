"""Experiment configuration: JSON schema, validation, and object builders."""

import copy
import json

import jsonschema
import numpy as np

from .data import (Dataset, MultiLabelBlobSpec, SyntheticBlobSpec, corner_centers, generate_blobs,
                   generate_multilabel_blobs, load_cifar10_binary)
from .errors import ConfigError, DomainError
from .schedule import schedule_from_dict
from .trainer import LOSS_MODES, HeadInit, OptimizerState

__all__ = ["SCHEMA", "DEFAULTS", "load_config", "validate_config", "build_datasets",
           "build_schedule", "build_head_init", "build_optimizer"]

_number_list = {"type": "array", "items": {"type": "number"}}
_centers = {"oneOf": [{"type": "array", "items": _number_list, "minItems": 1},
                      {"const": "unit_square"}]}

_schedule = {
    "type": "object",
    "oneOf": [
        {
            "properties": {
                "kind": {"const": "malleable"},
                "base_rate": {"type": "number", "exclusiveMinimum": 0},
                "max_epoch": {"type": "integer", "minimum": 1},
                "pieces": {"type": "array", "minItems": 1,
                           "items": {"type": "array", "minItems": 3, "maxItems": 3,
                                     "items": {"type": "number"}}},
                "abscissa": {"enum": ["piece", "global"]},
            },
            "required": ["kind", "base_rate", "max_epoch", "pieces"],
            "additionalProperties": False,
        },
        {
            "properties": {
                "kind": {"const": "constant"},
                "base_rate": {"type": "number", "exclusiveMinimum": 0},
                "max_epoch": {"type": "integer", "minimum": 1},
            },
            "required": ["kind", "base_rate", "max_epoch"],
            "additionalProperties": False,
        },
        {
            "properties": {
                "kind": {"const": "staircase"},
                "steps": {"type": "array", "minItems": 1,
                          "items": {"type": "array", "minItems": 2, "maxItems": 2,
                                    "items": {"type": "number"}}},
            },
            "required": ["kind", "steps"],
            "additionalProperties": False,
        },
    ],
}

SCHEMA = {
    "type": "object",
    "properties": {
        "dataset": {
            "type": "object",
            "oneOf": [
                {
                    "properties": {
                        "kind": {"const": "blobs"},
                        "num_classes": {"type": "integer", "minimum": 2},
                        "dim": {"type": "integer", "minimum": 1},
                        "centers": _centers,
                        "spread": {"type": "number", "minimum": 0},
                        "train_per_class": {"type": "integer", "minimum": 2},
                        "test_per_class": {"type": "integer", "minimum": 2},
                        "seed": {"type": "integer"},
                    },
                    "required": ["kind", "num_classes", "dim", "centers", "spread", "train_per_class"],
                    "additionalProperties": False,
                },
                {
                    "properties": {
                        "kind": {"const": "multilabel_blobs"},
                        "num_classes": {"type": "integer", "minimum": 2},
                        "dim": {"type": "integer", "minimum": 1},
                        "centers": {"type": "array", "items": _number_list, "minItems": 2},
                        "spread": {"type": "number", "minimum": 0},
                        "train_samples": {"type": "integer", "minimum": 2},
                        "test_samples": {"type": "integer", "minimum": 2},
                        "label_prob": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                        "seed": {"type": "integer"},
                    },
                    "required": ["kind", "num_classes", "dim", "centers", "spread", "train_samples"],
                    "additionalProperties": False,
                },
                {
                    "properties": {
                        "kind": {"const": "cifar10"},
                        "train_files": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                        "test_file": {"type": "string"},
                        "limit": {"type": "integer", "minimum": 1},
                    },
                    "required": ["kind", "train_files"],
                    "additionalProperties": False,
                },
            ],
        },
        "model": {
            "type": "object",
            "properties": {"hidden_dims": {"type": "array", "items": {"type": "integer", "minimum": 1}}},
            "additionalProperties": False,
        },
        "loss_modes": {"type": "array", "items": {"enum": list(LOSS_MODES)}, "minItems": 1,
                       "uniqueItems": True},
        "predictor": {
            "type": "object",
            "properties": {
                "lambda": {"type": "number", "minimum": 0},
                "mu": {"type": "number"},
                "sigma": {"type": "number", "exclusiveMinimum": 0},
                "learnable_lambda": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        "schedule": _schedule,
        "optimizer": {
            "type": "object",
            "properties": {
                "momentum": {"type": "number", "minimum": 0, "maximum": 1},
                "weight_decay": {"type": "number", "minimum": 0},
                "decay_distribution": {"type": "boolean"},
                "predictor_lr_mult": {"type": "number", "minimum": 0},
            },
            "additionalProperties": False,
        },
        "epochs": {"type": "integer", "minimum": 1},
        "batch_size": {"type": "integer", "minimum": 1},
        "seeds": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
        "output_dir": {"type": "string"},
        "analysis": {
            "type": "object",
            "properties": {
                "impostor_mode": {"enum": ["per_feature", "pooled"]},
                "ddof": {"enum": [0, 1]},
                "threshold": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "split": {"enum": ["train", "test"]},
            },
            "additionalProperties": False,
        },
        "format": {"enum": ["json", "csv"]},
    },
    "required": ["dataset", "loss_modes", "schedule"],
    "additionalProperties": False,
}

DEFAULTS = {
    "model": {"hidden_dims": [32, 32]},
    "predictor": {"lambda": 1.0, "mu": 0.0, "sigma": 1.0, "learnable_lambda": False},
    "optimizer": {"momentum": 0.9, "weight_decay": 5e-4, "decay_distribution": True,
                  "predictor_lr_mult": 1.0},
    "batch_size": 64,
    "seeds": [0],
    "output_dir": "runs",
    "analysis": {"impostor_mode": "per_feature", "ddof": 1, "threshold": 0.5, "split": "test"},
    "format": "json",
}


def validate_config(doc):
    """Validate against :data:`SCHEMA` and fill defaults; returns a new dict."""
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None
    out = copy.deepcopy(doc)
    for key, default in DEFAULTS.items():
        if isinstance(default, dict):
            out[key] = {**default, **out.get(key, {})}
        else:
            out.setdefault(key, copy.deepcopy(default))
    try:
        schedule = build_schedule(out)
    except DomainError as exc:
        raise ConfigError(f"schedule: {exc}") from None
    out.setdefault("epochs", schedule.max_epoch)
    if out["epochs"] > schedule.max_epoch:
        raise ConfigError(f"epochs={out['epochs']} exceeds the schedule's {schedule.max_epoch}")
    single = {"softmax", "gsoftmax"}
    multi = set(out["loss_modes"]) - single
    if multi and out["dataset"]["kind"] != "multilabel_blobs":
        raise ConfigError(f"multi-label loss modes {sorted(multi)} need a multi-label dataset")
    if out["dataset"]["kind"] == "multilabel_blobs" and set(out["loss_modes"]) & single:
        raise ConfigError("single-label loss modes need a single-label dataset")
    return out


def load_config(path):
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    return validate_config(doc)


def build_schedule(cfg):
    return schedule_from_dict(cfg["schedule"])


def build_head_init(cfg):
    p = cfg["predictor"]
    return HeadInit(p["lambda"], p["mu"], p["sigma"], p["learnable_lambda"])


def build_optimizer(cfg):
    o = cfg["optimizer"]
    return OptimizerState(o["momentum"], o["weight_decay"], o["decay_distribution"],
                          o["predictor_lr_mult"])


def build_datasets(cfg):
    """Return ``(train, test)``; ``test`` may be None."""
    d = cfg["dataset"]
    kind = d["kind"]
    seed = d.get("seed", 0)
    if kind == "blobs":
        k = d["num_classes"]
        centers = corner_centers(k) if d["centers"] == "unit_square" else tuple(map(tuple, d["centers"]))
        spreads = (d["spread"],) * k
        try:
            train = generate_blobs(SyntheticBlobSpec(k, d["dim"], centers, spreads,
                                                     d["train_per_class"], seed))
            test = None
            if "test_per_class" in d:
                test = generate_blobs(SyntheticBlobSpec(k, d["dim"], centers, spreads,
                                                        d["test_per_class"], seed + 1))
        except DomainError as exc:
            raise ConfigError(f"dataset: {exc}") from None
        return train, test
    if kind == "multilabel_blobs":
        k = d["num_classes"]
        centers = tuple(map(tuple, d["centers"]))
        prob = d.get("label_prob", 0.3)
        try:
            train = generate_multilabel_blobs(MultiLabelBlobSpec(
                k, d["dim"], centers, d["spread"], d["train_samples"], prob, seed))
            test = None
            if "test_samples" in d:
                test = generate_multilabel_blobs(MultiLabelBlobSpec(
                    k, d["dim"], centers, d["spread"], d["test_samples"], prob, seed + 1))
        except DomainError as exc:
            raise ConfigError(f"dataset: {exc}") from None
        return train, test
    # cifar10
    parts = [load_cifar10_binary(p) for p in d["train_files"]]
    train = Dataset(np.concatenate([p.x for p in parts]), np.concatenate([p.y for p in parts]), 10)
    test = load_cifar10_binary(d["test_file"]) if "test_file" in d else None
    limit = d.get("limit")
    if limit:
        train = Dataset(train.x[:limit], train.y[:limit], 10)
        if test is not None:
            test = Dataset(test.x[:limit], test.y[:limit], 10)
    return train, test
