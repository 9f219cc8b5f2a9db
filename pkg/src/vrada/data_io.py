"""LibSVM parsing, row normalization and synthetic problem generators."""
import gzip
import io
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InputShapeError, ParseError
from .losses import LabeledSample


@dataclass(frozen=True)
class SparseDataset:
    """Row-wise sparse design matrix (CSR, 0-based feature indices) with labels.

    ``targets`` keeps the raw label values; ``classes`` holds their index under
    ``label_map`` (raw label -> class, assigned in sorted order of raw labels).
    """

    indptr: np.ndarray
    indices: np.ndarray
    values: np.ndarray
    targets: np.ndarray
    d: int
    classes: np.ndarray = None
    label_map: dict = field(default_factory=dict)
    normalized: bool = False
    zero_rows: int = 0

    @property
    def n(self):
        return self.indptr.size - 1

    @property
    def c(self):
        return len(self.label_map)

    def row_norms(self):
        """Euclidean row norms, scaled by each row's largest entry to avoid under/overflow."""
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        peak = np.zeros(self.n)
        np.maximum.at(peak, rows, np.abs(self.values))
        safe = np.where(peak > 0, peak, 1.0)
        scaled = self.values / safe[rows]
        return peak * np.sqrt(np.bincount(rows, weights=scaled * scaled, minlength=self.n))

    def row_norms_sq(self):
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        return np.bincount(rows, weights=self.values * self.values, minlength=self.n)

    def sample(self, i):
        lo, hi = self.indptr[i], self.indptr[i + 1]
        label = self.targets[i] if self.classes is None else self.classes[i]
        return LabeledSample(self.indices[lo:hi], self.values[lo:hi], float(label))

    @property
    def rows(self):
        return [self.sample(i) for i in range(self.n)]

    def to_dense(self):
        out = np.zeros((self.n, self.d))
        for i in range(self.n):
            lo, hi = self.indptr[i], self.indptr[i + 1]
            out[i, self.indices[lo:hi]] = self.values[lo:hi]
        return out

    def subset(self, rows):
        """Dataset restricted to ``rows`` (kept in the given order)."""
        rows = np.asarray(rows, dtype=np.int64)
        lengths = np.diff(self.indptr)[rows]
        indptr = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
        take = np.concatenate([np.arange(self.indptr[r], self.indptr[r + 1]) for r in rows]) \
            if rows.size else np.zeros(0, dtype=np.int64)
        return replace(self, indptr=indptr, indices=self.indices[take].copy(),
                       values=self.values[take].copy(), targets=self.targets[rows].copy(),
                       classes=None if self.classes is None else self.classes[rows].copy(),
                       zero_rows=int(np.sum(lengths == 0)))


def _open_text(source):
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        path = str(source)
        if path.endswith(".gz"):
            return gzip.open(path, "rt", encoding="utf-8")
        return open(path, "r", encoding="utf-8")
    return source


def _label_map(targets):
    return {float(v): i for i, v in enumerate(np.unique(targets))}


def from_arrays(indptr, indices, values, targets, d, normalized=False):
    targets = np.asarray(targets, dtype=np.float64)
    label_map = _label_map(targets)
    classes = np.array([label_map[float(t)] for t in targets], dtype=np.int64)
    indptr = np.asarray(indptr, dtype=np.int64)
    return SparseDataset(indptr, np.asarray(indices, dtype=np.int64),
                         np.asarray(values, dtype=np.float64), targets, int(d),
                         classes, label_map, normalized, int(np.sum(np.diff(indptr) == 0)))


def from_dense(A, b):
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    mask = A != 0
    indptr = np.concatenate([[0], np.cumsum(mask.sum(axis=1))])
    rows, cols = np.nonzero(mask)
    return from_arrays(indptr, cols, A[rows, cols], b, A.shape[1])


def parse_libsvm(source, dim=None):
    """Parse LibSVM text (``<label> <index>:<value> ...``, 1-based indices).

    ``source`` is a path (``.gz`` decompressed transparently) or a text stream.
    ``dim`` overrides the inferred feature dimension.  Rows without features
    are accepted and counted in ``zero_rows``.
    """
    stream = _open_text(source)
    indptr, indices, values, targets = [0], [], [], []
    max_index = 0
    try:
        for lineno, raw in enumerate(stream, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            try:
                targets.append(float(tokens[0]))
            except ValueError:
                raise ParseError(f"non-numeric label {tokens[0]!r}", lineno) from None
            if not np.isfinite(targets[-1]):
                raise ParseError(f"non-finite label {tokens[0]!r}", lineno)
            prev = 0
            for tok in tokens[1:]:
                idx_s, sep, val_s = tok.partition(":")
                if not sep:
                    raise ParseError(f"expected index:value, got {tok!r}", lineno)
                try:
                    idx = int(idx_s)
                    val = float(val_s)
                except ValueError:
                    raise ParseError(f"non-numeric token {tok!r}", lineno) from None
                if idx < 1:
                    raise ParseError(f"feature index {idx} < 1", lineno)
                if idx == prev:
                    raise ParseError(f"duplicate feature index {idx}", lineno)
                if idx < prev:
                    raise ParseError(f"feature index {idx} after {prev} (must increase)", lineno)
                if not np.isfinite(val):
                    raise ParseError(f"non-finite value {val_s!r}", lineno)
                prev = idx
                indices.append(idx - 1)
                values.append(val)
            max_index = max(max_index, prev)
            indptr.append(len(indices))
    finally:
        if stream is not source:
            stream.close()
    if not targets:
        raise ParseError("empty LibSVM input")
    d = max_index if dim is None else int(dim)
    if d < max_index:
        raise InputShapeError(f"dim={d} smaller than largest feature index {max_index}")
    return from_arrays(indptr, indices, values, targets, max(d, 1))


def _fmt(x):
    return repr(float(x))


def write_libsvm(ds, stream):
    """Serialize ``ds`` in LibSVM format (1-based indices, full float precision)."""
    for i in range(ds.n):
        lo, hi = ds.indptr[i], ds.indptr[i + 1]
        feats = " ".join(f"{j + 1}:{_fmt(v)}" for j, v in zip(ds.indices[lo:hi], ds.values[lo:hi]))
        stream.write(f"{_fmt(ds.targets[i])} {feats}".rstrip() + "\n")


def to_libsvm_text(ds):
    buf = io.StringIO()
    write_libsvm(ds, buf)
    return buf.getvalue()


def normalize_rows(ds):
    """Scale every nonzero row to unit Euclidean norm.

    Zero rows pass through unchanged and are counted with a warning.  A
    dataset already flagged ``normalized`` is returned as is.
    """
    if ds.normalized:
        return ds
    norms = ds.row_norms()
    zero = int(np.sum(norms == 0))
    if zero:
        warnings.warn(f"{zero} zero rows left unnormalized", stacklevel=2)
    scale = np.where(norms > 0, norms, 1.0)
    values = ds.values / np.repeat(scale, np.diff(ds.indptr))
    return replace(ds, values=values, normalized=True, zero_rows=zero)


def add_bias(ds):
    """Append a constant-1 feature at index d (after any normalization)."""
    lengths = np.diff(ds.indptr) + 1
    indptr = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    indices = np.empty(indptr[-1], dtype=np.int64)
    values = np.empty(indptr[-1])
    for i in range(ds.n):
        lo, hi = ds.indptr[i], ds.indptr[i + 1]
        o = indptr[i]
        indices[o:o + hi - lo] = ds.indices[lo:hi]
        values[o:o + hi - lo] = ds.values[lo:hi]
        indices[indptr[i + 1] - 1] = ds.d
        values[indptr[i + 1] - 1] = 1.0
    return replace(ds, indptr=indptr, indices=indices, values=values, d=ds.d + 1, zero_rows=0)


def ridge_problem(A, b, sigma):
    """Squared-loss finite sum plus (sigma/2)||x||^2, with its exact minimizer.

    Returns ``(objective, x_star, f_star)``; x_star solves the normal
    equations (A^T A / n + sigma I) x = A^T b / n directly.  With sigma = 0 and
    a rank-deficient A the minimum-norm solution is returned and a warning
    flags the non-uniqueness.
    """
    from .core_model import make_objective

    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    b = np.asarray(b, dtype=np.float64)
    n, d = A.shape
    ds = from_dense(A, b)
    obj = make_objective(ds, "squared", lambda2=sigma)
    H = A.T @ A / n + sigma * np.eye(d)
    rhs = A.T @ b / n
    if sigma > 0:
        x_star = np.linalg.solve(H, rhs)
    else:
        x_star, _, rank, _ = np.linalg.lstsq(A, b, rcond=None)
        if rank < d:
            warnings.warn("sigma = 0 with rank-deficient design: minimizer not unique",
                          stacklevel=2)
    r = A @ x_star - b
    f_star = 0.5 * float(r @ r) / n + 0.5 * sigma * float(x_star @ x_star)
    return obj, x_star, f_star


def synth_ridge(n, d, sigma, seed=0):
    """Random ridge instance with unit-norm rows (so L = 1) and noisy targets."""
    if n < 1 or d < 1:
        raise InputShapeError("synth_ridge needs n, d >= 1")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, d))
    A /= np.linalg.norm(A, axis=1, keepdims=True)
    w = rng.standard_normal(d)
    b = A @ w + 0.1 * rng.standard_normal(n)
    return ridge_problem(A, b, sigma)


# one-hot groups of a 123-feature census-style binary dataset
_A9A_GROUPS = (5, 7, 16, 7, 14, 6, 5, 2, 5, 5, 5, 41, 3, 2)


def synth_a9a_like(n, seed=0, positive_rate=0.24):
    """Binary dataset shaped like LibSVM a9a: 123 one-hot features, 14 active per row.

    Each of 14 categorical groups contributes one active feature drawn from
    a skewed per-group distribution; labels in {-1, +1} follow a noisy
    logistic model over the features.  Rows are not normalized.
    """
    rng = np.random.default_rng(seed)
    d = sum(_A9A_GROUPS)
    offsets = np.concatenate([[0], np.cumsum(_A9A_GROUPS)[:-1]])
    cols = np.empty((n, len(_A9A_GROUPS)), dtype=np.int64)
    for g, (size, off) in enumerate(zip(_A9A_GROUPS, offsets)):
        p = rng.dirichlet(np.full(size, 0.7))
        cols[:, g] = off + rng.choice(size, size=n, p=p)
    w = rng.normal(0.0, 1.2, size=d)
    scores = w[cols].sum(axis=1)
    scores -= np.quantile(scores, 1.0 - positive_rate)
    prob = 1.0 / (1.0 + np.exp(-2.0 * scores))
    labels = np.where(rng.random(n) < prob, 1.0, -1.0)
    cols.sort(axis=1)
    indptr = np.arange(0, n * len(_A9A_GROUPS) + 1, len(_A9A_GROUPS))
    return from_arrays(indptr, cols.ravel(), np.ones(cols.size), labels, d)
