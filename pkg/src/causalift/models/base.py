"""Shared model plumbing: specs, input checks, scaling, serialization.

Every trained model is a pure value. ``predict`` validates the incoming
column count against the schema captured at fit time; a mismatch is an error,
never silent broadcasting.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

FAMILIES = ("ols", "lasso", "forest", "gbt", "mlp")

SERIAL_FORMAT = "causalift-model"
SERIAL_VERSION = 1


class ModelError(ValueError):
    """Raised for invalid model inputs, specs, or training failures."""


@dataclass(frozen=True)
class ModelSpec:
    """A model family plus the hyperparameters and seed that define a fit."""

    family: str
    hyperparams: Mapping[str, object] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ModelError(f"unknown model family {self.family!r}; have {FAMILIES}")
        object.__setattr__(self, "hyperparams", dict(self.hyperparams))

    def __eq__(self, other) -> bool:
        if not isinstance(other, ModelSpec):
            return NotImplemented
        return (
            self.family == other.family
            and self.seed == other.seed
            and dict(self.hyperparams) == dict(other.hyperparams)
        )


def check_matrix(X, n_columns: int | None = None, name: str = "X") -> np.ndarray:
    """Coerce to a finite 2-D float64 array, optionally pinning column count."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim != 2:
        raise ModelError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ModelError(f"{name} contains non-finite values")
    if n_columns is not None and arr.shape[1] != n_columns:
        raise ModelError(
            f"model expects {n_columns} input columns, got {arr.shape[1]}"
        )
    return arr


def check_vector(y, n_rows: int, name: str = "y") -> np.ndarray:
    arr = np.asarray(y, dtype=np.float64)
    if arr.ndim != 1:
        raise ModelError(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.shape[0] != n_rows:
        raise ModelError(f"{name} has {arr.shape[0]} rows, expected {n_rows}")
    if not np.isfinite(arr).all():
        raise ModelError(f"{name} contains non-finite values")
    return arr


Schema = tuple | None


class TrainedModel:
    """Base for fitted models; subclasses implement ``_predict``.

    ``input_schema`` is metadata naming the (variable, lag) columns the model
    was trained on; column-count validation happens regardless.
    """

    spec: ModelSpec
    input_schema: Schema
    training_summary: dict

    @property
    def n_inputs(self) -> int:
        raise NotImplementedError

    def _predict(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def predict(self, X) -> np.ndarray:
        return self._predict(check_matrix(X, self.n_inputs))


@dataclass(frozen=True)
class ColumnScaler:
    """Per-column standardization fit on training data only."""

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "ColumnScaler":
        X = check_matrix(X)
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        # constant columns pass through centered, not divided to nothing
        scale = np.where(scale > 0.0, scale, 1.0)
        return cls(mean=mean, scale=scale)

    def transform(self, X) -> np.ndarray:
        X = check_matrix(X, self.mean.shape[0], name="X")
        return (X - self.mean) / self.scale


class ScaledModel(TrainedModel):
    """Wraps a model trained on standardized inputs (and offset target)."""

    def __init__(
        self,
        inner: TrainedModel,
        scaler: ColumnScaler,
        y_offset: float = 0.0,
    ):
        self.inner = inner
        self.scaler = scaler
        self.y_offset = float(y_offset)
        self.spec = inner.spec
        self.input_schema = inner.input_schema
        self.training_summary = inner.training_summary

    @property
    def n_inputs(self) -> int:
        return self.scaler.mean.shape[0]

    def _predict(self, X: np.ndarray) -> np.ndarray:
        return self.inner.predict(self.scaler.transform(X)) + self.y_offset


def _arr(values) -> list:
    return np.asarray(values, dtype=np.float64).tolist()


def schema_to_json(schema: Schema):
    if schema is None:
        return None
    return [[str(v), int(l)] for v, l in schema]


def schema_from_json(raw) -> Schema:
    if raw is None:
        return None
    return tuple((str(v), int(l)) for v, l in raw)


def model_to_json(model: TrainedModel) -> str:
    """Serialize any trained model; floats survive the round trip exactly."""
    payload = {
        "format": SERIAL_FORMAT,
        "version": SERIAL_VERSION,
        "family": model.spec.family,
        "spec": {
            "family": model.spec.family,
            "hyperparams": model.spec.hyperparams,
            "seed": model.spec.seed,
        },
        "schema": schema_to_json(model.input_schema),
        "summary": model.training_summary,
        "params": _encode_params(model),
    }
    return json.dumps(payload, sort_keys=True) + "\n"


def model_from_json(text: str) -> TrainedModel:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"invalid model JSON: {exc}") from None
    if not isinstance(payload, dict) or payload.get("format") != SERIAL_FORMAT:
        raise ModelError("not a serialized model")
    if payload.get("version") != SERIAL_VERSION:
        raise ModelError(f"unsupported model version {payload.get('version')!r}")
    spec = ModelSpec(
        family=payload["spec"]["family"],
        hyperparams=payload["spec"]["hyperparams"],
        seed=payload["spec"]["seed"],
    )
    schema = schema_from_json(payload.get("schema"))
    summary = payload.get("summary", {})
    return _decode_params(spec, schema, summary, payload["params"])


# Registered by the concrete model modules to avoid import cycles.
_ENCODERS: dict[type, callable] = {}
_DECODERS: dict[str, callable] = {}


def register_codec(cls: type, kind: str, encode, decode) -> None:
    _ENCODERS[cls] = (kind, encode)
    _DECODERS[kind] = decode


def _encode_params(model: TrainedModel) -> dict:
    for cls, (kind, encode) in _ENCODERS.items():
        if isinstance(model, cls):
            return {"kind": kind, **encode(model)}
    raise ModelError(f"no serializer for {type(model).__name__}")


def _decode_params(spec, schema, summary, params: dict) -> TrainedModel:
    kind = params.get("kind")
    if kind not in _DECODERS:
        raise ModelError(f"unknown serialized model kind {kind!r}")
    return _DECODERS[kind](spec, schema, summary, params)


def _encode_scaled(model: ScaledModel) -> dict:
    return {
        "mean": _arr(model.scaler.mean),
        "scale": _arr(model.scaler.scale),
        "y_offset": model.y_offset,
        "inner": _encode_params(model.inner),
    }


def _decode_scaled(spec, schema, summary, params) -> ScaledModel:
    inner = _decode_params(spec, schema, summary, params["inner"])
    scaler = ColumnScaler(
        mean=np.asarray(params["mean"], dtype=np.float64),
        scale=np.asarray(params["scale"], dtype=np.float64),
    )
    return ScaledModel(inner, scaler, params["y_offset"])


register_codec(ScaledModel, "scaled", _encode_scaled, _decode_scaled)
