"""K-modality data model, the masking projection and dataset I/O.

Modality indices are zero-based throughout the Python API; labels such as
``m1+m2`` are one-based to match how modalities are usually named.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .exceptions import InvalidInputError, MissingModalityError, SchemaMismatchError


@dataclass(frozen=True)
class ModalitySchema:
    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) < 1:
            raise InvalidInputError("schema needs at least one modality")
        if any(d < 1 for d in dims):
            raise InvalidInputError(f"modality dimensions must be positive, got {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def K(self) -> int:
        return len(self.dims)

    @property
    def d(self) -> int:
        return sum(self.dims)

    @cached_property
    def offsets(self) -> tuple[int, ...]:
        return tuple(int(o) for o in np.concatenate([[0], np.cumsum(self.dims)]))

    def block_slice(self, k: int) -> slice:
        return slice(self.offsets[k], self.offsets[k + 1])

    @classmethod
    def uniform(cls, K: int, dim: int) -> "ModalitySchema":
        return cls((dim,) * K)


@dataclass(frozen=True)
class ModalitySubset:
    """A subset M of the modalities, used as a mask."""

    schema: ModalitySchema
    mask: tuple[bool, ...]

    def __post_init__(self):
        mask = tuple(bool(b) for b in self.mask)
        if len(mask) != self.schema.K:
            raise InvalidInputError(f"mask length {len(mask)} != K={self.schema.K}")
        object.__setattr__(self, "mask", mask)

    @classmethod
    def of(cls, schema: ModalitySchema, indices: Iterable[int]) -> "ModalitySubset":
        indices = set(indices)
        bad = [k for k in indices if not 0 <= k < schema.K]
        if bad:
            raise InvalidInputError(f"modality indices {bad} out of range for K={schema.K}")
        return cls(schema, tuple(k in indices for k in range(schema.K)))

    @classmethod
    def full(cls, schema: ModalitySchema) -> "ModalitySubset":
        return cls(schema, (True,) * schema.K)

    @classmethod
    def empty(cls, schema: ModalitySchema) -> "ModalitySubset":
        return cls(schema, (False,) * schema.K)

    @classmethod
    def first(cls, schema: ModalitySchema, k: int) -> "ModalitySubset":
        """The subset {m1, ..., mk}."""
        return cls.of(schema, range(k))

    @classmethod
    def parse(cls, schema: ModalitySchema, text: str) -> "ModalitySubset":
        """Parse ``"1,2"``, ``"m1+m2"``, ``"all"`` or ``"none"`` (one-based)."""
        text = text.strip().lower()
        if text in ("all", "full"):
            return cls.full(schema)
        if text in ("", "none", "empty"):
            return cls.empty(schema)
        parts = text.replace("+", ",").replace("m", "").split(",")
        return cls.of(schema, (int(p) - 1 for p in parts if p.strip()))

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(k for k, b in enumerate(self.mask) if b)

    @property
    def size(self) -> int:
        return sum(self.mask)

    @property
    def is_empty(self) -> bool:
        return not any(self.mask)

    @property
    def label(self) -> str:
        return "+".join(f"m{k + 1}" for k in self.indices) or "none"

    def coord_mask(self) -> np.ndarray:
        """Boolean mask over the d concatenated coordinates."""
        return np.repeat(np.array(self.mask, dtype=bool), self.schema.dims)

    def projector(self) -> np.ndarray:
        """The diagonal 0/1 matrix P with P x = to_masked_vector(x)."""
        return np.diag(self.coord_mask().astype(float))

    def issubset(self, other: "ModalitySubset") -> bool:
        _check_same_schema(self.schema, other.schema)
        return all(b <= a for a, b in zip(other.mask, self.mask))

    def __contains__(self, k: int) -> bool:
        return self.mask[k]

    def __and__(self, other: "ModalitySubset") -> "ModalitySubset":
        return compose_subsets(self, other)

    def __str__(self) -> str:
        return self.label


@dataclass(frozen=True)
class MultiModalSample:
    blocks: tuple[np.ndarray | None, ...]
    y: float

    def __post_init__(self):
        blocks = tuple(None if b is None else np.asarray(b, dtype=float).reshape(-1)
                       for b in self.blocks)
        if not np.isfinite(self.y):
            raise InvalidInputError("label must be finite")
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "y", float(self.y))

    def conforms_to(self, schema: ModalitySchema) -> bool:
        if len(self.blocks) != schema.K:
            return False
        return all(b is None or b.shape == (dk,) for b, dk in zip(self.blocks, schema.dims))

    def __eq__(self, other):
        if not isinstance(other, MultiModalSample) or len(self.blocks) != len(other.blocks):
            return NotImplemented
        if self.y != other.y:
            return False
        for a, b in zip(self.blocks, other.blocks):
            if (a is None) != (b is None):
                return False
            if a is not None and not np.array_equal(a, b):
                return False
        return True

    __hash__ = None


def _check_same_schema(a: ModalitySchema, b: ModalitySchema):
    if a != b:
        raise SchemaMismatchError(f"schema mismatch: {a.dims} vs {b.dims}")


def _check_sample(sample: MultiModalSample, schema: ModalitySchema):
    if not sample.conforms_to(schema):
        raise SchemaMismatchError("sample blocks do not match schema dims "
                                  f"{schema.dims}")


def project(sample: MultiModalSample, subset: ModalitySubset) -> MultiModalSample:
    """p_M: keep blocks in ``subset``, replace the rest with ⊥ (``None``)."""
    _check_sample(sample, subset.schema)
    blocks = tuple(b if keep else None for b, keep in zip(sample.blocks, subset.mask))
    return MultiModalSample(blocks, sample.y)


def compose_subsets(n: ModalitySubset, m: ModalitySubset) -> ModalitySubset:
    """The subset realising ``project(project(x, m), n)``."""
    _check_same_schema(n.schema, m.schema)
    return ModalitySubset(n.schema, tuple(a and b for a, b in zip(n.mask, m.mask)))


def to_masked_vector(sample: MultiModalSample, subset: ModalitySubset) -> np.ndarray:
    _check_sample(sample, subset.schema)
    schema = subset.schema
    out = np.zeros(schema.d)
    for k, keep in enumerate(subset.mask):
        if not keep:
            continue
        if sample.blocks[k] is None:
            raise MissingModalityError(f"modality m{k + 1} is absent but in subset")
        out[schema.block_slice(k)] = sample.blocks[k]
    return out


@dataclass(frozen=True, eq=False)
class Dataset:
    """An ordered collection of samples held as dense arrays.

    ``X`` is the zero-filled (m, d) design matrix, ``present`` the (m, K)
    block-presence flags and ``y`` the labels.
    """

    schema: ModalitySchema
    X: np.ndarray
    y: np.ndarray
    present: np.ndarray = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if X.ndim != 2 or X.shape[1] != self.schema.d:
            raise SchemaMismatchError(f"X must have shape (m, {self.schema.d}), got {X.shape}")
        if X.shape[0] != y.shape[0]:
            raise InvalidInputError("X and y disagree on sample count")
        if not np.all(np.isfinite(y)):
            raise InvalidInputError("labels must be finite")
        present = (np.ones((X.shape[0], self.schema.K), dtype=bool) if self.present is None
                   else np.asarray(self.present, dtype=bool))
        if present.shape != (X.shape[0], self.schema.K):
            raise InvalidInputError("presence flags must have shape (m, K)")
        absent_coords = ~np.repeat(present, self.schema.dims, axis=1)
        if np.any(absent_coords):
            X = X.copy()
            X[absent_coords] = 0.0
        for arr in (X, y, present):
            arr.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "present", present)

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def m(self) -> int:
        return len(self)

    def sample(self, i: int) -> MultiModalSample:
        blocks = tuple(self.X[i, self.schema.block_slice(k)].copy() if self.present[i, k] else None
                       for k in range(self.schema.K))
        return MultiModalSample(blocks, self.y[i])

    @property
    def samples(self) -> list[MultiModalSample]:
        return [self.sample(i) for i in range(len(self))]

    @classmethod
    def from_samples(cls, schema: ModalitySchema, samples: Sequence[MultiModalSample],
                     metadata: dict | None = None) -> "Dataset":
        X = np.zeros((len(samples), schema.d))
        present = np.zeros((len(samples), schema.K), dtype=bool)
        for i, s in enumerate(samples):
            _check_sample(s, schema)
            for k, b in enumerate(s.blocks):
                if b is not None:
                    X[i, schema.block_slice(k)] = b
                    present[i, k] = True
        return cls(schema, X, [s.y for s in samples], present, dict(metadata or {}))

    def masked_X(self, subset: ModalitySubset) -> np.ndarray:
        """Rows of ``to_masked_vector`` for every sample."""
        _check_same_schema(self.schema, subset.schema)
        needed = np.array(subset.mask)
        if np.any(~self.present[:, needed]):
            raise MissingModalityError("a modality in the subset is absent in some samples")
        return self.X * subset.coord_mask()

    def rows(self, start: int, stop: int | None = None) -> "Dataset":
        stop = len(self) if stop is None else stop
        meta = dict(self.metadata)
        base = meta.get("rows", [0, len(self)])[0]
        meta["rows"] = [base + start, base + min(stop, len(self))]
        return Dataset(self.schema, self.X[start:stop], self.y[start:stop],
                       self.present[start:stop], meta)

    def split(self, train_fraction: float = 0.8) -> tuple["Dataset", "Dataset"]:
        """Contiguous train/test split; rows are i.i.d. so no shuffling is needed."""
        n_train = int(round(train_fraction * len(self)))
        if not 0 < n_train < len(self):
            raise InvalidInputError(f"split leaves an empty side (m={len(self)})")
        return self.rows(0, n_train), self.rows(n_train)

    def overlaps(self, other: "Dataset") -> bool:
        """Whether both views were cut from the same source with shared rows."""
        a, b = self.metadata, other.metadata
        if a.get("digest") is None or a.get("digest") != b.get("digest"):
            return self is other
        ra, rb = a.get("rows", [0, len(self)]), b.get("rows", [0, len(other)])
        return ra[0] < rb[1] and rb[0] < ra[1]


def config_digest(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def save_dataset(dataset: Dataset, path: str | Path) -> tuple[Path, Path]:
    """Write ``<path>`` as CSV and ``<path>.json`` with schema and provenance."""
    path = Path(path)
    schema = dataset.schema
    header = [f"m{k + 1}_{j}" for k in range(schema.K) for j in range(schema.dims[k])] + ["y"]
    coord_present = np.repeat(dataset.present, schema.dims, axis=1)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row, pres, y in zip(dataset.X, coord_present, dataset.y):
            writer.writerow([repr(float(v)) if p else "" for v, p in zip(row, pres)] + [repr(float(y))])
    sidecar = path.with_name(path.name + ".json")
    sidecar.write_text(json.dumps({"dims": list(schema.dims), "m": len(dataset),
                                   "metadata": dataset.metadata}, indent=2, default=str))
    return path, sidecar


def load_dataset(path: str | Path) -> Dataset:
    path = Path(path)
    sidecar = json.loads(path.with_name(path.name + ".json").read_text())
    schema = ModalitySchema(tuple(sidecar["dims"]))
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        rows = list(reader)
    X = np.zeros((len(rows), schema.d))
    present = np.ones((len(rows), schema.K), dtype=bool)
    y = np.empty(len(rows))
    for i, row in enumerate(rows):
        if len(row) != schema.d + 1:
            raise SchemaMismatchError(f"row {i} has {len(row)} cells, expected {schema.d + 1}")
        y[i] = float(row[-1])
        for k in range(schema.K):
            cells = row[schema.block_slice(k)]
            if all(c == "" for c in cells):
                present[i, k] = False
            elif any(c == "" for c in cells):
                raise InvalidInputError(f"row {i}: modality m{k + 1} is partially missing")
            else:
                X[i, schema.block_slice(k)] = [float(c) for c in cells]
    return Dataset(schema, X, y, present, sidecar.get("metadata", {}))
