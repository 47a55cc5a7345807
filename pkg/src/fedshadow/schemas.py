"""Published JSON Schemas for every HTTP payload.

These are the wire contract: response tests validate against them, and
external consumers (the dashboard included) may rely on them.
"""

_number = {"type": "number"}
_nullable_number = {"type": ["number", "null"]}
_point3 = {
    "type": "array",
    "items": _number,
    "minItems": 3,
    "maxItems": 3,
}

ATTACK_SCHEMA = {
    "type": ["object", "null"],
    "properties": {
        "victim_class": {"type": "integer", "minimum": 0},
        "target_class": {"type": "integer", "minimum": 0},
        "n_malicious": {"type": "integer", "minimum": 1},
        "window": {
            "type": "array",
            "items": {"type": "integer", "minimum": 1},
            "minItems": 2,
            "maxItems": 2,
        },
        "availability_bias": {"type": "number", "minimum": 0, "maximum": 1},
        "allow_noop": {"type": "boolean"},
    },
    "required": ["victim_class", "target_class", "n_malicious", "window"],
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "n_clients": {"type": "integer", "minimum": 1},
        "participants_per_round": {"type": "integer", "minimum": 1},
        "n_rounds": {"type": "integer", "minimum": 1},
        "attack": ATTACK_SCHEMA,
        "data_spec": {"type": "object"},
        "train_spec": {
            "type": "object",
            "properties": {
                "learning_rate": {"type": "number", "exclusiveMinimum": 0},
                "local_epochs": {"type": "integer", "minimum": 1},
                "batch_size": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "master_seed": {"type": "integer", "minimum": 0},
    },
    "additionalProperties": False,
}

RUN_CREATED_SCHEMA = {
    "type": "object",
    "properties": {"run_id": {"type": "string", "pattern": "^[a-z0-9-]{8,64}$"}},
    "required": ["run_id"],
    "additionalProperties": False,
}

RUN_HANDLE_SCHEMA = {
    "type": "object",
    "properties": {
        "run_id": {"type": "string"},
        "status": {"enum": ["pending", "running", "completed", "failed"]},
        "completed_rounds": {"type": "integer", "minimum": 0},
        "created_at": {"type": "string"},
        "error": {"type": ["string", "null"]},
        "config": CONFIG_SCHEMA,
    },
    "required": ["run_id", "status", "completed_rounds", "created_at"],
    "additionalProperties": False,
}

RUN_LIST_SCHEMA = {
    "type": "object",
    "properties": {
        "runs": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "run_id": {"type": "string"},
                    "status": {"enum": ["pending", "running", "completed", "failed"]},
                    "completed_rounds": {"type": "integer", "minimum": 0},
                    "created_at": {"type": "string"},
                    "config_summary": {"type": "object"},
                },
                "required": ["run_id", "status", "completed_rounds", "created_at"],
                "additionalProperties": False,
            },
        }
    },
    "required": ["runs"],
    "additionalProperties": False,
}

METRICS_SCHEMA = {
    "type": "object",
    "properties": {
        "class": {"type": "integer", "minimum": 0},
        "series": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "round": {"type": "integer", "minimum": 1},
                    "f1": {"type": "number", "minimum": 0, "maximum": 1},
                    "accuracy": {"type": "number", "minimum": 0, "maximum": 1},
                },
                "required": ["round", "f1", "accuracy"],
                "additionalProperties": False,
            },
        },
    },
    "required": ["class", "series"],
    "additionalProperties": False,
}

SIGNATURE_SCHEMA = {
    "type": "object",
    "properties": {
        "round": {"type": "integer", "minimum": 1},
        "points": {"type": "array", "items": _point3},
        "malicious": {"type": "array", "items": {"type": "boolean"}},
        "explained_variance": {
            "type": "array",
            "items": {"type": "number", "minimum": 0},
            "minItems": 3,
            "maxItems": 3,
        },
        "separability": {"type": ["number", "null"], "minimum": -1, "maximum": 1},
        "density_ratio": _nullable_number,
    },
    "required": ["round", "points", "malicious", "explained_variance",
                 "separability", "density_ratio"],
    "additionalProperties": False,
}

TRAJECTORY_SCHEMA = {
    "type": "object",
    "properties": {
        "explained_variance": {"type": "array", "items": {"type": "number", "minimum": 0}},
        "entries": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "round": {"type": "integer", "minimum": 1},
                    "client_id": {"type": "integer", "minimum": 0},
                    "point": _point3,
                },
                "required": ["round", "client_id", "point"],
                "additionalProperties": False,
            },
        },
    },
    "required": ["explained_variance", "entries"],
    "additionalProperties": False,
}

ADVISORY_SCHEMA = {
    "type": "object",
    "properties": {
        "flagged_clients": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "client_id": {"type": "integer", "minimum": 0},
                    "evidence": {
                        "type": "array",
                        "minItems": 1,
                        "items": {
                            "type": "object",
                            "properties": {
                                "kind": {"enum": ["f1_impact", "signature_outlier", "density"]},
                                "value": {"type": "number", "minimum": 0, "maximum": 1},
                            },
                            "required": ["kind", "value"],
                            "additionalProperties": False,
                        },
                    },
                    "score": {"type": "number", "minimum": 0, "maximum": 1},
                },
                "required": ["client_id", "evidence", "score"],
                "additionalProperties": False,
            },
        },
        "recommendations": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "category": {
                        "enum": [
                            "client_verification",
                            "anomaly_detection",
                            "robust_model",
                            "robustness_codesign",
                        ]
                    },
                    "text": {"type": "string"},
                    "triggering_metric": {"type": "string"},
                },
                "required": ["category", "text", "triggering_metric"],
                "additionalProperties": False,
            },
        },
        "summary_stats": {
            "type": "object",
            "properties": {
                "victim_f1_drop": {"type": "number"},
                "peak_separability_round": {"type": ["integer", "null"]},
                "peak_separability": _nullable_number,
                "mean_density_ratio": _nullable_number,
            },
            "required": ["victim_f1_drop", "peak_separability_round", "mean_density_ratio"],
            "additionalProperties": False,
        },
    },
    "required": ["flagged_clients", "recommendations", "summary_stats"],
    "additionalProperties": False,
}

ERROR_SCHEMA = {
    "type": "object",
    "properties": {
        "detail": {"type": "string"},
        "errors": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "field": {"type": "string"},
                    "message": {"type": "string"},
                },
                "required": ["field", "message"],
                "additionalProperties": False,
            },
        },
    },
    "required": ["detail"],
    "additionalProperties": False,
}
