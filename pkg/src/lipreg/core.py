"""Shared data model: labeled point sets in R^a x R^b, risk functionals, dataset I/O."""

import csv
import json
from collections import namedtuple
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

DUPLICATE_TOL = 1e-12


class DatasetError(ValueError):
    """Raised for malformed, inconsistent or conflicting datasets."""


RiskReport = namedtuple('RiskReport', [
    'empirical_risk',    # mean of the per-point losses
    'per_point_losses',  # ndarray of shape (n,)
])


def _frozen(arr):
    arr = np.array(arr, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Paired samples ``X[i] -> Y[i]`` with ``X`` of shape (n, a) and ``Y`` of shape (n, b).

    Instances are immutable. Use :meth:`from_arrays` to build one from raw data;
    it validates shapes and merges duplicate inputs.
    """
    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X = _frozen(self.X)
        Y = _frozen(self.Y)
        if X.ndim != 2 or Y.ndim != 2:
            raise DatasetError('inputs and labels must be 2-D arrays')
        if X.shape[0] == 0:
            raise DatasetError('empty dataset')
        if X.shape[0] != Y.shape[0]:
            raise DatasetError(f'{X.shape[0]} inputs but {Y.shape[0]} labels')
        if X.shape[1] == 0 or Y.shape[1] == 0:
            raise DatasetError('input and label dimensions must be positive')
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise DatasetError('non-finite coordinates')
        object.__setattr__(self, 'X', X)
        object.__setattr__(self, 'Y', Y)

    @classmethod
    def from_arrays(cls, X, Y):
        """Validate and build a dataset, merging inputs that occur more than once.

        Repeated inputs are merged when their labels agree to within 1e-12;
        otherwise no finite Lipschitz constant fits the data and
        :class:`DatasetError` is raised.
        """
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        Y = np.asarray(Y, dtype=np.float64)
        if Y.ndim == 1:
            Y = Y[:, None]
        if X.shape[0] != Y.shape[0]:
            raise DatasetError(f'{X.shape[0]} inputs but {Y.shape[0]} labels')
        if X.shape[0] == 0:
            raise DatasetError('empty dataset')
        _, first, inverse = np.unique(X, axis=0, return_index=True, return_inverse=True)
        inverse = inverse.reshape(-1)
        if len(first) < X.shape[0]:
            for i in range(X.shape[0]):
                j = first[inverse[i]]
                if np.max(np.abs(Y[i] - Y[j])) > DUPLICATE_TOL:
                    raise DatasetError(
                        f'rows {j} and {i} share input {X[i].tolist()} but have '
                        'different labels')
            keep = np.sort(first)
            X, Y = X[keep], Y[keep]
        return cls(X, Y)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def a(self):
        return self.X.shape[1]

    @property
    def b(self):
        return self.Y.shape[1]

    def __len__(self):
        return self.n

    def __eq__(self, other):
        if not isinstance(other, LabeledDataset):
            return NotImplemented
        return (self.X.shape == other.X.shape and self.Y.shape == other.Y.shape
                and np.array_equal(self.X, other.X) and np.array_equal(self.Y, other.Y))

    def subset(self, idx):
        return LabeledDataset(self.X[idx], self.Y[idx])

    def with_labels(self, Y):
        return LabeledDataset(self.X, Y)


def _check_pair(predictions, labels):
    P = np.asarray(predictions, dtype=np.float64)
    T = np.asarray(labels, dtype=np.float64)
    if P.ndim == 1:
        P = P[:, None]
    if T.ndim == 1:
        T = T[:, None]
    if P.shape != T.shape:
        raise ValueError(f'shape mismatch: predictions {P.shape} vs labels {T.shape}')
    if P.shape[0] == 0:
        raise ValueError('no points to score')
    return P, T


def empirical_risk(predictions, labels):
    """Mean Euclidean distance between predictions and labels (row-wise)."""
    P, T = _check_pair(predictions, labels)
    losses = np.linalg.norm(P - T, axis=1)
    return RiskReport(float(np.mean(losses)), losses)


def squared_loss(predictions, labels):
    """Mean squared Euclidean distance between predictions and labels."""
    P, T = _check_pair(predictions, labels)
    losses = np.sum((P - T) ** 2, axis=1)
    return RiskReport(float(np.mean(losses)), losses)


def pairwise_distances(A, B=None):
    """Euclidean distance matrix between the rows of ``A`` and ``B``."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = A if B is None else np.atleast_2d(np.asarray(B, dtype=np.float64))
    return cdist(A, B)


# -- I/O ---------------------------------------------------------------------

def _infer_format(path, fmt):
    if fmt is not None:
        fmt = fmt.lower()
    else:
        fmt = Path(path).suffix.lstrip('.').lower()
    if fmt not in ('json', 'csv'):
        raise DatasetError(f'unknown dataset format {fmt!r} (expected json or csv)')
    return fmt


def dataset_to_dict(dataset):
    return {'a': dataset.a, 'b': dataset.b,
            'X': dataset.X.tolist(), 'Y': dataset.Y.tolist()}


def dataset_from_dict(obj):
    try:
        a, b = int(obj['a']), int(obj['b'])
        X, Y = obj['X'], obj['Y']
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetError(f'malformed dataset object: {exc}') from None
    if len(X) == 0:
        raise DatasetError('empty dataset')
    for name, rows, dim in (('X', X, a), ('Y', Y, b)):
        for i, row in enumerate(rows):
            if len(row) != dim:
                raise DatasetError(f'{name} row {i} has {len(row)} entries, expected {dim}')
    return LabeledDataset.from_arrays(np.array(X, dtype=np.float64).reshape(len(X), a),
                                      np.array(Y, dtype=np.float64).reshape(len(Y), b))


def save_dataset(dataset, path, fmt=None):
    """Write ``dataset`` as JSON (canonical) or CSV with header ``x1..xa,y1..yb``."""
    fmt = _infer_format(path, fmt)
    path = Path(path)
    if fmt == 'json':
        path.write_text(json.dumps(dataset_to_dict(dataset)))
        return
    header = [f'x{i + 1}' for i in range(dataset.a)] + [f'y{j + 1}' for j in range(dataset.b)]
    with path.open('w', newline='') as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for x, y in zip(dataset.X, dataset.Y):
            writer.writerow([repr(float(v)) for v in x] + [repr(float(v)) for v in y])


def load_dataset(path, fmt=None, a=None):
    """Read a dataset written by :func:`save_dataset`.

    For CSV the input dimension is taken from the ``x*`` header columns; ``a``
    may be given to override a header without names.
    """
    fmt = _infer_format(path, fmt)
    path = Path(path)
    text = path.read_text()
    if not text.strip():
        raise DatasetError('empty dataset')
    if fmt == 'json':
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DatasetError(f'cannot parse {path}: {exc}') from None
        return dataset_from_dict(obj)
    return _parse_csv(text.splitlines(), a)


def _parse_csv(lines, a=None):
    rows = list(csv.reader(lines))
    header, body = rows[0], [r for r in rows[1:] if r]
    if a is None:
        a = sum(1 for h in header if h.strip().lower().startswith('x'))
    width = len(header)
    if not 0 < a < width:
        raise DatasetError(f'cannot determine input dimension from header {header}')
    if not body:
        raise DatasetError('empty dataset')
    values = []
    for lineno, row in enumerate(body, start=2):
        if len(row) != width:
            raise DatasetError(f'row {lineno}: expected {width} columns, got {len(row)}')
        try:
            values.append([float(v) for v in row])
        except ValueError as exc:
            raise DatasetError(f'row {lineno}: {exc}') from None
    arr = np.array(values, dtype=np.float64)
    return LabeledDataset.from_arrays(arr[:, :a], arr[:, a:])
