"""JSON formats for polynomials, division results, models and reports."""
from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .division import DivisionResult
from .network import TwoLayerNet
from .tropical import LatticePolynomial, TropicalPolynomial


class SchemaError(ValueError):
    """JSON document does not match the expected layout."""


def _real(value, where):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"{where}: expected a number, got {type(value).__name__}")
    if not math.isfinite(value):
        raise SchemaError(f"{where}: must be finite")
    return float(value)


def polynomial_from_json(doc) -> TropicalPolynomial:
    if not isinstance(doc, dict):
        raise SchemaError("polynomial: expected an object with 'dim' and 'terms'")
    if "dim" not in doc:
        raise SchemaError("polynomial: missing field 'dim'")
    dim = doc["dim"]
    if isinstance(dim, bool) or not isinstance(dim, int) or dim < 1:
        raise SchemaError(f"dim: expected a positive integer, got {dim!r}")
    terms = doc.get("terms")
    if not isinstance(terms, list):
        raise SchemaError("terms: expected a list")
    degrees, coeffs = [], []
    for k, term in enumerate(terms):
        if not isinstance(term, dict):
            raise SchemaError(f"terms[{k}]: expected an object")
        for key in ("a", "b"):
            if key not in term:
                raise SchemaError(f"terms[{k}]: missing field '{key}'")
        a = term["a"]
        if not isinstance(a, list) or len(a) != dim:
            raise SchemaError(f"terms[{k}].a: expected a list of {dim} numbers")
        degrees.append([_real(v, f"terms[{k}].a[{i}]") for i, v in enumerate(a)])
        coeffs.append(_real(term["b"], f"terms[{k}].b"))
    if not degrees:
        return TropicalPolynomial.bottom(dim)
    return TropicalPolynomial(degrees, coeffs, dim)


def _degree_out(a):
    return [int(v) if float(v).is_integer() else float(v) for v in a]


def polynomial_to_json(p) -> dict:
    if isinstance(p, LatticePolynomial):
        return {"dim": p.dim, "terms": [{"a": list(k), "b": float(v)} for k, v in p.items()]}
    return {"dim": p.dim,
            "terms": [{"a": _degree_out(t.degree), "b": t.coeff} for t in p.terms]}


def division_to_json(result: DivisionResult) -> dict:
    return {"quotient": polynomial_to_json(result.quotient),
            "remainder": polynomial_to_json(result.remainder),
            "exact": bool(result.exact)}


def division_from_json(doc):
    """Returns ``(quotient, remainder, exact)``; the quotient as a LatticePolynomial."""
    if not isinstance(doc, dict):
        raise SchemaError("division result: expected an object")
    for key in ("quotient", "remainder", "exact"):
        if key not in doc:
            raise SchemaError(f"division result: missing field '{key}'")
    q = polynomial_from_json(doc["quotient"])
    quotient = LatticePolynomial(q.dim, {tuple(int(v) for v in t.degree): t.coeff for t in q.terms})
    if not isinstance(doc["exact"], bool):
        raise SchemaError("exact: expected true or false")
    return quotient, polynomial_from_json(doc["remainder"]), doc["exact"]


def model_from_json(doc) -> TwoLayerNet:
    if not isinstance(doc, dict):
        raise SchemaError("model: expected an object")
    for key in ("W1", "b1", "w2", "b2"):
        if key not in doc:
            raise SchemaError(f"model: missing field '{key}'")
    try:
        W1 = np.asarray(doc["W1"], dtype=float)
        b1 = np.asarray(doc["b1"], dtype=float)
        w2 = np.asarray(doc["w2"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"model: non-numeric weights ({exc})") from None
    if W1.ndim != 2:
        raise SchemaError("W1: expected a list of equal-length rows")
    b2 = _real(doc["b2"], "b2")
    try:
        return TwoLayerNet(W1, b1, w2, b2)
    except ValueError as exc:
        raise SchemaError(f"model: {exc}") from None


def model_to_json(net: TwoLayerNet) -> dict:
    return net.to_dict()


def read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})") from None


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path, doc):
    """Serialize first, then write to a temp file beside ``path`` and rename."""
    write_text(path, dumps(doc))


def write_text(path, text):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_polynomial(path) -> TropicalPolynomial:
    return polynomial_from_json(read_json(path))


def read_model(path) -> TwoLayerNet:
    return model_from_json(read_json(path))
