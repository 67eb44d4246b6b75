"""JSON ingestion and emission.  Complex numbers are [re, im] pairs."""

from __future__ import annotations

import json
import math
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from . import linalg as la
from .broadcast import BroadcastChannel, channel_zoo
from .qip import DensityOperator, QuantumChannel, Register

SCHEMA_VERSION = "1"
KRAUS_TOL = 1e-9


class ValidationError(ValueError):
    """Malformed input; ``path`` locates the offending JSON element."""

    def __init__(self, message: str, path: str = "$"):
        super().__init__(message)
        self.path = path


def encode_complex(a) -> list:
    a = np.asarray(a)
    if a.ndim == 0:
        z = complex(a)
        return [z.real, z.imag]
    return [encode_complex(x) for x in a]


def decode_complex(obj, path: str = "$") -> np.ndarray:
    arr = np.asarray(obj, dtype=float) if _is_numeric(obj) else None
    if arr is None or arr.ndim < 1 or arr.shape[-1] != 2:
        raise ValidationError("expected nested arrays of [re, im] pairs", path)
    return arr[..., 0] + 1j * arr[..., 1]


def _is_numeric(obj) -> bool:
    try:
        a = np.asarray(obj, dtype=float)
    except (TypeError, ValueError):
        return False
    return a.dtype != object


def read_json(path: str | Path) -> Any:
    try:
        with open(path) as f:
            return json.load(f)
    except OSError as e:
        raise ValidationError(f"cannot read {path}: {e.strerror}") from e
    except json.JSONDecodeError as e:
        raise ValidationError(f"malformed JSON in {path}: {e.msg} (line {e.lineno}, column {e.colno})",
                              f"$@{e.lineno}:{e.colno}") from e


def to_jsonable(obj):
    """Plain Python types; non-finite floats become the strings "inf", "-inf" and "nan"."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return encode_complex(obj)
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2)


# ---------------------------------------------------------------------------
# channels


def load_channel(spec: dict | str | Path) -> BroadcastChannel:
    if not isinstance(spec, dict):
        spec = read_json(spec)
    if not isinstance(spec, dict):
        raise ValidationError("channel spec must be a JSON object")
    has_k, has_z = "kraus" in spec, "zoo" in spec
    if has_k == has_z:
        raise ValidationError("exactly one of 'kraus' and 'zoo' must be present")
    if has_z:
        z = spec["zoo"]
        if not isinstance(z, dict) or "name" not in z:
            raise ValidationError("zoo entry needs a name", "$.zoo")
        try:
            bc = channel_zoo(z["name"], z.get("params"))
        except (TypeError, ValueError) as e:
            raise ValidationError(str(e), "$.zoo") from e
        dec = spec.get("decoding_set", bc.decoding_set)
        mal = spec.get("malicious_set", bc.malicious_set)
        try:
            return BroadcastChannel(bc.channel, tuple(dec), tuple(mal), spec.get("name", bc.name), bc.params)
        except ValueError as e:
            raise ValidationError(str(e), "$") from e
    for key in ("dim_in", "outputs", "decoding_set", "malicious_set"):
        if key not in spec:
            raise ValidationError(f"missing field {key!r}", f"$.{key}")
    try:
        labels = [o["label"] for o in spec["outputs"]]
        dims = [int(o["dim"]) for o in spec["outputs"]]
    except (KeyError, TypeError, ValueError) as e:
        raise ValidationError("outputs must be a list of {label, dim}", "$.outputs") from e
    din = int(spec["dim_in"])
    dout = int(np.prod(dims))
    ks = []
    for i, k in enumerate(spec["kraus"]):
        m = decode_complex(k, f"$.kraus[{i}]")
        if m.shape != (dout, din):
            raise ValidationError(f"Kraus operator shape {m.shape} != ({dout}, {din})", f"$.kraus[{i}]")
        ks.append(m)
    if not ks:
        raise ValidationError("kraus list is empty", "$.kraus")
    err = float(np.max(np.abs(sum(k.conj().T @ k for k in ks) - np.eye(din))))
    if err > KRAUS_TOL:
        raise ValidationError(f"Kraus completeness violated by {err:.3e} (tolerance {KRAUS_TOL:g})", "$.kraus")
    in_label = spec.get("input_label", "A")
    out = set(labels)
    for key in ("decoding_set", "malicious_set"):
        bad = set(spec[key]) - out
        if bad:
            raise ValidationError(f"labels {sorted(bad)} are not outputs", f"$.{key}")
    try:
        ch = QuantumChannel(tuple(ks), Register((in_label,), (din,)), Register(tuple(labels), tuple(dims)), check=False)
        return BroadcastChannel(ch, tuple(spec["decoding_set"]), tuple(spec["malicious_set"]), spec.get("name", ""))
    except ValueError as e:
        raise ValidationError(str(e)) from e


def channel_to_spec(bc: BroadcastChannel) -> dict:
    ch = bc.channel
    if len(ch.in_register.labels) != 1:
        raise ValueError("channel spec files describe single-input channels")
    return {
        "schema_version": SCHEMA_VERSION,
        "name": bc.name,
        "input_label": ch.in_register.labels[0],
        "dim_in": ch.in_register.dim,
        "outputs": [{"label": l, "dim": d} for l, d in zip(ch.out_register.labels, ch.out_register.dims)],
        "kraus": [encode_complex(k) for k in ch.kraus],
        "decoding_set": list(bc.decoding_set),
        "malicious_set": list(bc.malicious_set),
    }


# ---------------------------------------------------------------------------
# states


def load_state(spec: dict | str | Path, rng: np.random.Generator | None = None, psd_tol: float = 1e-12) -> DensityOperator:
    """State from {labels, dims, matrix} or {generate: maximally_entangled | haar, ...}."""
    if not isinstance(spec, dict):
        spec = read_json(spec)
    if not isinstance(spec, dict):
        raise ValidationError("state spec must be a JSON object")
    if "generate" in spec:
        return generate_state(spec, rng or np.random.default_rng(0))
    for key in ("labels", "dims", "matrix"):
        if key not in spec:
            raise ValidationError(f"missing field {key!r}", f"$.{key}")
    m = decode_complex(spec["matrix"], "$.matrix")
    dims = [int(d) for d in spec["dims"]]
    n = int(np.prod(dims))
    if m.shape != (n, n):
        raise ValidationError(f"matrix shape {m.shape} does not match dims {dims}", "$.matrix")
    if np.max(np.abs(m - m.conj().T)) > 1e-9:
        raise ValidationError("matrix is not Hermitian", "$.matrix")
    if la.min_eig(m) < -psd_tol:
        raise ValidationError(f"matrix has eigenvalue {la.min_eig(m):.3e} below -psd_tol", "$.matrix")
    try:
        return DensityOperator(m, Register(tuple(spec["labels"]), tuple(dims)), check=False)
    except ValueError as e:
        raise ValidationError(str(e)) from e


def generate_state(spec: dict, rng: np.random.Generator) -> DensityOperator:
    kind = spec["generate"]
    labels = tuple(spec.get("labels", ("A", "B")))
    if kind == "maximally_entangled":
        d = int(spec.get("dim", 2))
        if len(labels) != 2:
            raise ValidationError("maximally_entangled needs two labels", "$.labels")
        return DensityOperator(la.proj(la.max_entangled(d)), Register(labels, (d, d)), check=False)
    if kind == "haar":
        dims = tuple(int(d) for d in spec.get("dims", [2] * len(labels)))
        if len(dims) != len(labels):
            raise ValidationError("labels and dims differ in length", "$.dims")
        rank = spec.get("rank")
        m = la.random_density(int(np.prod(dims)), rng, rank)
        return DensityOperator(m, Register(labels, dims), check=False)
    raise ValidationError(f"unknown generator {kind!r}", "$.generate")


def state_to_spec(rho: DensityOperator) -> dict:
    return {"schema_version": SCHEMA_VERSION, "labels": list(rho.labels), "dims": list(rho.dims),
            "matrix": encode_complex(rho.matrix)}


# ---------------------------------------------------------------------------
# schemas


def load_schema(name: str) -> dict:
    return json.loads(resources.files("entrocap").joinpath("schemas", f"{name}.v{SCHEMA_VERSION}.json").read_text())
