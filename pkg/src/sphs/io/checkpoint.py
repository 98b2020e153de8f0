"""Checkpoint and POD-basis files"""

import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from sphs.calculators.pod import PodBasis
from sphs.calculators.preprocessing import Normalizer
from sphs.core.autodiff import ParamVector
from sphs.core.errors import DataError
from sphs.models.phs import ModelSpec, PhsModel

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    """A trained model with the normalizer of its training data"""

    model: PhsModel
    normalizer: Normalizer = None
    metadata: dict = field(default_factory=dict)


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise DataError(f"invalid JSON ({e.msg})", path=path, line=e.lineno) from None


def save_checkpoint(checkpoint, path):
    """
    Write a checkpoint as JSON

    Parameters are written with Python's shortest round-trip float
    representation, so loading reproduces every value bit-exactly.
    """
    model = checkpoint.model
    document = {
        "format_version": FORMAT_VERSION,
        "model_spec": model.spec.to_dict(),
        "segments": [
            {"name": s.name, "offset": s.offset, "shape": list(s.shape)} for s in model.layout.segments
        ],
        "params": [float(v) for v in model.params.values],
        "x_star": [float(v) for v in model.equilibrium()] if model.has_hamiltonian else None,
        "normalizer": None if checkpoint.normalizer is None else checkpoint.normalizer.to_dict(),
        "metadata": checkpoint.metadata,
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(document, f, indent=1)
        f.write("\n")
    logger.debug("Saved checkpoint to %s", path)


def load_checkpoint(path):
    """
    Read a checkpoint written by ``save_checkpoint``

    Raises:
        DataError: Unknown format version, or parameters that do not match the
            layout implied by the model specification
    """
    document = _read_json(path)
    version = document.get("format_version")
    if version != FORMAT_VERSION:
        raise DataError(f"unsupported checkpoint format version {version}", path=path)
    spec = ModelSpec.from_dict(document["model_spec"])
    skeleton = PhsModel(spec)
    names = [segment["name"] for segment in document.get("segments", [])]
    if names and names != skeleton.layout.names:
        raise DataError("parameter segments do not match the model specification", path=path)
    values = np.array(document["params"], dtype=np.float64)
    if values.size != skeleton.layout.size:
        raise DataError(
            f"checkpoint holds {values.size} parameters, model needs {skeleton.layout.size}", path=path
        )
    model = PhsModel(spec, ParamVector(skeleton.layout, values))
    normalizer = document.get("normalizer")
    return Checkpoint(
        model=model,
        normalizer=None if normalizer is None else Normalizer.from_dict(normalizer),
        metadata=document.get("metadata", {}),
    )


def save_basis(basis, directory, name="basis"):
    """
    Write ``<name>.json`` (N, n, c, shift, singular values) and ``<name>_modes.csv``

    Returns:
        Path of the JSON header
    """
    os.makedirs(directory, exist_ok=True)
    header_path = os.path.join(directory, f"{name}.json")
    modes_path = os.path.join(directory, f"{name}_modes.csv")
    header = {
        "format_version": FORMAT_VERSION,
        "snapshot_dim": basis.snapshot_dim,
        "latent_dim": basis.latent_dim,
        "scale": float(basis.scale),
        "shift": [float(v) for v in basis.shift],
        "singular_values": [float(v) for v in basis.singular_values],
        "modes_file": os.path.basename(modes_path),
    }
    with open(header_path, "w", encoding="utf-8") as f:
        json.dump(header, f, indent=1)
        f.write("\n")
    with open(modes_path, "w", encoding="utf-8", newline="") as f:
        for row in basis.modes:
            f.write(",".join(repr(float(v)) for v in row) + "\n")
    logger.info("Saved POD basis to %s", header_path)
    return header_path


def load_basis(header_path):
    """Read a basis written by ``save_basis``"""
    header = _read_json(header_path)
    if header.get("format_version") != FORMAT_VERSION:
        raise DataError(f"unsupported basis format version {header.get('format_version')}", path=header_path)
    modes_path = os.path.join(os.path.dirname(header_path), header["modes_file"])
    rows = []
    with open(modes_path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rows.append([float(v) for v in line.split(",")])
            except ValueError as e:
                raise DataError(f"not a number ({e})", path=modes_path, line=line_no) from None
    modes = np.array(rows)
    expected = (header["snapshot_dim"], header["latent_dim"])
    if modes.shape != expected:
        raise DataError(f"mode matrix has shape {modes.shape}, header says {expected}", path=modes_path)
    return PodBasis(
        modes,
        float(header["scale"]),
        np.array(header["shift"], dtype=np.float64),
        np.array(header["singular_values"], dtype=np.float64),
    )
