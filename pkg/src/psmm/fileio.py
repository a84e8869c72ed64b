"""On-disk formats.

MDS1 dataset file
-----------------
Line 1 is a UTF-8 JSON header terminated by a newline::

    {"format":"MDS1","n":<int>,"dims":[<int>,...],"dtype":"f64le","has_response":<bool>}

followed by n * prod(dims) IEEE-754 float64 little-endian values
(sample-major, row-major within each sample) and, if has_response, n
further float64 response values.  Total length is exactly
header + 8 * n * (prod(dims) + has_response) bytes.

CSV dataset file
----------------
Header row ``y,x_1_1,...,x_d1_d2`` (row-major coordinates, 1-based), one
sample per row.  Values are decimal doubles; parsing round-trips through
the binary float64 representation, so a CSV written from an MDS1 file
describes bit-identical data.

Estimate JSON
-------------
Bases are stored column-by-column.  Matrix estimates carry ``row_basis``
and ``col_basis``; tensor estimates carry ``mode_bases``.  Both embed the
configuration echo, the per-slice convergence summary and
``format_version`` 1, and round-trip losslessly.
"""

import csv
import json

import numpy as np

from .data import MatrixDataset, TensorDataset
from .pipeline import SubspaceEstimate, TensorSubspaceEstimate

FORMAT_VERSION = 1
_DTYPE = np.dtype("<f8")


def write_mds1(path, dataset):
    samples = np.ascontiguousarray(dataset.samples, dtype=_DTYPE)
    header = {
        "format": "MDS1",
        "n": int(dataset.n),
        "dims": [int(d) for d in samples.shape[1:]],
        "dtype": "f64le",
        "has_response": dataset.responses is not None,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, separators=(",", ":")).encode("utf-8") + b"\n")
        fh.write(samples.tobytes())
        if dataset.responses is not None:
            fh.write(np.ascontiguousarray(dataset.responses, dtype=_DTYPE).tobytes())


def read_mds1(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    newline = raw.find(b"\n")
    if newline < 0:
        raise ValueError("MDS1 file has no header line")
    try:
        header = json.loads(raw[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValueError(f"MDS1 header is not valid JSON: {exc}") from exc
    if header.get("format") != "MDS1":
        raise ValueError("not an MDS1 file")
    if header.get("dtype") != "f64le":
        raise ValueError(f"unsupported dtype {header.get('dtype')!r}")
    n = int(header["n"])
    dims = [int(d) for d in header["dims"]]
    if len(dims) < 2:
        raise ValueError("MDS1 dims must have at least two entries")
    has_response = bool(header["has_response"])
    payload = raw[newline + 1 :]
    count = n * int(np.prod(dims))
    expected = 8 * (count + (n if has_response else 0))
    if len(payload) != expected:
        raise ValueError(
            f"MDS1 payload has {len(payload)} bytes, expected {expected}"
        )
    values = np.frombuffer(payload, dtype=_DTYPE)
    samples = values[:count].reshape(n, *dims).copy()
    responses = values[count:].copy() if has_response else None
    if len(dims) == 2:
        return MatrixDataset(samples, responses)
    return TensorDataset(samples, responses)


def write_dataset_csv(path, dataset):
    if not isinstance(dataset, MatrixDataset):
        raise ValueError("CSV datasets support matrix samples only")
    if dataset.responses is None:
        raise ValueError("CSV datasets require responses")
    d1, d2 = dataset.d1, dataset.d2
    header = ["y"] + [f"x_{i}_{j}" for i in range(1, d1 + 1) for j in range(1, d2 + 1)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for y, sample in zip(dataset.responses, dataset.samples):
            writer.writerow([repr(float(y))] + [repr(float(v)) for v in sample.ravel()])


def read_dataset_csv(path):
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError("CSV dataset is empty") from None
        rows = list(reader)
    if not header or header[0] != "y":
        raise ValueError("CSV dataset must start with a 'y' column")
    coords = []
    for name in header[1:]:
        parts = name.split("_")
        if len(parts) != 3 or parts[0] != "x":
            raise ValueError(f"unexpected CSV column {name!r}")
        coords.append((int(parts[1]), int(parts[2])))
    if not coords:
        raise ValueError("CSV dataset has no coordinate columns")
    d1 = max(i for i, _ in coords)
    d2 = max(j for _, j in coords)
    if sorted(coords) != [(i, j) for i in range(1, d1 + 1) for j in range(1, d2 + 1)]:
        raise ValueError("CSV columns do not cover a full d1 x d2 grid")
    if not rows:
        raise ValueError("CSV dataset has no samples")
    samples = np.empty((len(rows), d1, d2))
    responses = np.empty(len(rows))
    for idx, row in enumerate(rows):
        if len(row) != len(header):
            raise ValueError(f"CSV row {idx + 2} has {len(row)} fields")
        responses[idx] = float(row[0])
        for (i, j), value in zip(coords, row[1:]):
            samples[idx, i - 1, j - 1] = float(value)
    return MatrixDataset(samples, responses)


def _columns(basis):
    return np.asarray(basis, dtype=np.float64).T.tolist()


def _from_columns(columns):
    return np.asarray(columns, dtype=np.float64).T


def estimate_to_dict(estimate):
    if isinstance(estimate, TensorSubspaceEstimate):
        return {
            "format_version": FORMAT_VERSION,
            "mode_bases": [_columns(b) for b in estimate.mode_bases],
            "mode_eigvals": [np.asarray(w).tolist() for w in estimate.mode_eigvals],
            "selected_dims": [int(r) for r in estimate.selected_dims],
            "config": estimate.config,
            "convergence": estimate.convergence,
        }
    return {
        "format_version": FORMAT_VERSION,
        "row_basis": _columns(estimate.row_basis),
        "col_basis": _columns(estimate.col_basis),
        "eigvals_row": np.asarray(estimate.eigvals_row).tolist(),
        "eigvals_col": np.asarray(estimate.eigvals_col).tolist(),
        "selected_dims": [int(r) for r in estimate.selected_dims],
        "config": estimate.config,
        "convergence": estimate.convergence,
    }


def estimate_from_dict(doc):
    if doc.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported estimate format_version {doc.get('format_version')!r}")
    if "mode_bases" in doc:
        return TensorSubspaceEstimate(
            mode_bases=[_from_columns(b) for b in doc["mode_bases"]],
            mode_eigvals=[np.asarray(w, dtype=np.float64) for w in doc["mode_eigvals"]],
            selected_dims=tuple(int(r) for r in doc["selected_dims"]),
            config=doc.get("config", {}),
            convergence=doc.get("convergence", []),
        )
    return SubspaceEstimate(
        row_basis=_from_columns(doc["row_basis"]),
        col_basis=_from_columns(doc["col_basis"]),
        eigvals_row=np.asarray(doc["eigvals_row"], dtype=np.float64),
        eigvals_col=np.asarray(doc["eigvals_col"], dtype=np.float64),
        selected_dims=tuple(int(r) for r in doc["selected_dims"]),
        config=doc.get("config", {}),
        convergence=doc.get("convergence", []),
    )


def write_estimate_json(path, estimate):
    with open(path, "w") as fh:
        json.dump(estimate_to_dict(estimate), fh, separators=(",", ":"))
        fh.write("\n")


def read_estimate_json(path):
    with open(path, "r") as fh:
        return estimate_from_dict(json.load(fh))


def write_cov_json(path, params):
    if hasattr(params, "sigma_row"):
        doc = {
            "mean": params.mean.tolist(),
            "sigma_row": params.sigma_row.tolist(),
            "sigma_col": params.sigma_col.tolist(),
            "iterations": int(params.iterations),
            "converged": bool(params.converged),
        }
    else:
        doc = {
            "mean": params.mean.tolist(),
            "sigmas": [s.tolist() for s in params.sigmas],
            "iterations": int(params.iterations),
            "converged": bool(params.converged),
        }
    with open(path, "w") as fh:
        json.dump(doc, fh, separators=(",", ":"))
        fh.write("\n")


def write_truth_json(path, instance):
    doc = {
        "model": int(instance.model_id),
        "seed": int(instance.seed),
        "noise_sd": float(instance.noise_sd),
        "row_basis": _columns(instance.true_row_basis),
        "col_basis": _columns(instance.true_col_basis),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, separators=(",", ":"))
        fh.write("\n")


def load_dataset(path):
    """Read a dataset file, sniffing MDS1 versus CSV from the first line."""
    with open(path, "rb") as fh:
        first = fh.readline()
    if first.lstrip().startswith(b"{"):
        return read_mds1(path)
    return read_dataset_csv(path)
