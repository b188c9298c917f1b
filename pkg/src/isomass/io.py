"""File formats: geometry JSON (schema 1), MatrixMarket export, banded-factor text files.

Geometry JSON layout::

    {
      "schema": 1,
      "label": "kite_like",
      "dim": 2,
      "description": "...",
      "patches": [
        {"label": "...", "degree": [2, 2], "knots": [[...], [...]],
         "control_points": [[x, y], ...],        # one row per point, co-lexicographic
         "singular": false, "singular_set": ""}
      ],
      "interfaces": [[patch_a, face_a, patch_b, face_b, orientation], ...]
    }

Faces are numbered ``2*k + side`` (``side`` 0 for ``xi_k = 0``, 1 for ``xi_k = 1``).
A file with more than one patch (or ``"multipatch": true``) loads as a
:class:`~isomass.geometry.MultipatchGeometry`.
"""

import json
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from .exceptions import DataError
from .geometry import MultipatchGeometry, Patch
from .kron import Banded
from .splines import KnotVector, TensorBasis

SCHEMA_VERSION = 1

__all__ = [
    "SCHEMA_VERSION",
    "geometry_from_dict",
    "geometry_to_dict",
    "load_geometry",
    "save_geometry",
    "write_matrix_market",
    "read_matrix_market",
    "write_banded",
    "read_banded",
]


def _patch_from_dict(d, dim):
    degree = d["degree"]
    knots = d["knots"]
    if len(degree) != dim or len(knots) != dim:
        raise DataError(f"patch {d.get('label', '')!r}: expected {dim} degrees and knot vectors")
    basis = TensorBasis([KnotVector(k, p) for k, p in zip(knots, degree)])
    return Patch(
        basis,
        np.asarray(d["control_points"], dtype=float),
        label=d.get("label", ""),
        singular=d.get("singular", False),
        singular_set=d.get("singular_set", ""),
    )


def _patch_to_dict(patch):
    return {
        "label": patch.label,
        "degree": [kv.degree for kv in patch.basis.kvs],
        "knots": [kv.knots.tolist() for kv in patch.basis.kvs],
        "control_points": patch.control_points.tolist(),
        "singular": patch.singular,
        "singular_set": patch.singular_set,
    }


def geometry_from_dict(data):
    if not isinstance(data, dict):
        raise DataError("geometry file must hold a JSON object")
    if data.get("schema") != SCHEMA_VERSION:
        raise DataError(f"unsupported geometry schema {data.get('schema')!r} (expected {SCHEMA_VERSION})")
    try:
        dim = int(data["dim"])
        patches = [_patch_from_dict(p, dim) for p in data["patches"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed geometry: {exc!r}") from exc
    if not patches:
        raise DataError("geometry file has no patches")
    if len(patches) == 1 and not data.get("multipatch", False):
        patch = patches[0]
        patch.label = data.get("label", patch.label)
        patch.description = data.get("description", "")
        return patch
    return MultipatchGeometry(
        patches,
        label=data.get("label", ""),
        interfaces=[tuple(i) for i in data.get("interfaces", [])],
        description=data.get("description", ""),
    )


def geometry_to_dict(geom, description=""):
    if isinstance(geom, Patch):
        patches, label, interfaces, multi = [geom], geom.label, [], False
    else:
        patches, label, interfaces, multi = list(geom.patches), geom.label, list(geom.interfaces), True
    out = {
        "schema": SCHEMA_VERSION,
        "label": label,
        "dim": patches[0].dim,
        "description": description or geom.description,
        "patches": [_patch_to_dict(p) for p in patches],
    }
    if multi:
        out["multipatch"] = True
        out["interfaces"] = [list(map(int, i)) for i in interfaces]
    return out


def load_geometry(path):
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: not valid JSON ({exc})") from exc
    return geometry_from_dict(data)


def save_geometry(geom, path, description=""):
    Path(path).write_text(json.dumps(geometry_to_dict(geom, description), indent=1) + "\n")


def write_matrix_market(path, M, comment=""):
    """Write a sparse matrix in MatrixMarket coordinate format (symmetric storage when exact)."""
    M = sp.coo_matrix(M)
    symmetry = "symmetric" if (abs(M - M.T)).nnz == 0 else "general"
    scipy.io.mmwrite(str(path), M, comment=comment, symmetry=symmetry)


def read_matrix_market(path):
    return sp.csr_matrix(scipy.io.mmread(str(path)))


def write_banded(path, B):
    """Text format: first line ``order bandwidth``, then one line per band (diagonal first)."""
    lines = [f"{B.order} {B.bandwidth}"]
    for k in range(B.bandwidth + 1):
        lines.append(" ".join(repr(float(v)) for v in B.bands[k, : B.order - k]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_banded(path):
    lines = Path(path).read_text().splitlines()
    n, b = map(int, lines[0].split())
    bands = np.zeros((b + 1, n))
    for k in range(b + 1):
        vals = np.array(lines[1 + k].split(), dtype=float) if n - k > 0 else np.zeros(0)
        if vals.size != n - k:
            raise DataError(f"band {k} has {vals.size} entries, expected {n - k}")
        bands[k, : n - k] = vals
    return Banded(bands)
