"""Sparse tensor-product features and normalized linear Q approximation.

A state is featurized per dimension into a short list of active centers
(see basis.active_centers), then combined into multivariate features by a
Cartesian product: the joint value is the product of the per-dimension
values and the joint index is the row-major flat index over the center
grid.  Q(s, a) = sum_j phi_j theta_j^a / sum_j phi_j, so only the active
entries ever touch the weight table.

Weights are stored float32 by default (4 bytes each); all sums, deltas and
traces are carried in float64.
"""

from __future__ import annotations

import functools
import json
import os
import struct
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .basis import DimensionGrid, KernelKind, grid_arrays, kernel_eval, support_window

WEIGHT_MAGIC = b"KRLW"
WEIGHT_VERSION = 1
_HEADER = struct.Struct("<4sIQII")  # magic, version, n_features, n_actions, bytes/weight


@dataclass(frozen=True)
class StateSpace:
    """Ordered dimension grids; feature count is the product of grid sizes."""

    dims: tuple[DimensionGrid, ...]

    def __post_init__(self):
        if not self.dims:
            raise ValueError("state space needs at least one dimension")

    @property
    def n_dims(self) -> int:
        return len(self.dims)

    @property
    def total_features(self) -> int:
        n = 1
        for g in self.dims:
            n *= g.n_centers
        return n

    def to_dict(self) -> dict:
        return {"dims": [g.to_dict() for g in self.dims]}

    @classmethod
    def from_dict(cls, d: dict) -> "StateSpace":
        return cls(tuple(DimensionGrid.from_dict(g) for g in d["dims"]))


def flat_index(space: StateSpace, multi: tuple[int, ...]) -> int:
    """Row-major flat index; the last dimension varies fastest."""
    if len(multi) != space.n_dims:
        raise IndexError(f"expected {space.n_dims} indices, got {len(multi)}")
    flat = 0
    for k, g in zip(multi, space.dims):
        if not 0 <= k < g.n_centers:
            raise IndexError(f"index {k} out of range [0, {g.n_centers})")
        flat = flat * g.n_centers + k
    return flat


def multi_index(space: StateSpace, flat: int) -> tuple[int, ...]:
    if not 0 <= flat < space.total_features:
        raise IndexError(f"flat index {flat} out of range [0, {space.total_features})")
    out = []
    for g in reversed(space.dims):
        out.append(flat % g.n_centers)
        flat //= g.n_centers
    return tuple(reversed(out))


@dataclass
class SparseFeatures:
    """Active feature entries for one state, sorted by flat index.

    When every center of every dimension participated (full-support kernel),
    ``dense_values`` holds the complete product vector over all features,
    zeros from product underflow included; ``idx``/``values`` still list only
    the nonzero entries.  The dense vector lets Q evaluation run as one
    contiguous matvec instead of a gather.
    """

    idx: np.ndarray  # int64 flat indices
    values: np.ndarray  # float64 kernel products
    norm_sum: float
    dense_values: np.ndarray | None = None

    @property
    def n_active(self) -> int:
        return int(self.idx.size)


@functools.lru_cache(maxsize=None)
def _iota(n: int) -> np.ndarray:
    """Shared 0..n-1 index vector; treat as read-only."""
    return np.arange(n, dtype=np.int64)


def _dense_features(dense: np.ndarray, counters) -> SparseFeatures:
    """Wrap a full product vector; zeros stay in dense_values only."""
    if float(dense.min()) > 0.0:  # kernel values are never negative
        flat = _iota(dense.size)
        vals = dense
    else:
        flat = np.flatnonzero(dense)
        vals = dense[flat]
    if counters is not None:
        counters.active_entries += int(vals.size)
    return SparseFeatures(flat, vals, float(dense.sum()), dense_values=dense)


@functools.lru_cache(maxsize=None)
def _gaussian_design(space: StateSpace) -> tuple[np.ndarray, np.ndarray]:
    """Precomputed (design matrix, constant vector) for full-Gaussian features.

    Expanding -sum_d (x_d - c_d)^2 / (2 sigma_d^2) splits it into a part
    linear in the state, a state-only scalar, and a center-only constant:
    row j of the design holds [2 alpha_d * c_dj ..., 1.0] and the constant
    vector holds -sum_d alpha_d c_dj^2, so the whole exponent vector is one
    matrix-vector product away.
    """
    shape = tuple(g.n_centers for g in space.dims)
    design = np.empty((space.total_features, space.n_dims + 1), dtype=np.float64)
    base = np.zeros(shape, dtype=np.float64)
    for axis, g in enumerate(space.dims):
        _, centers = grid_arrays(g)
        alpha = 0.5 / (g.sigma * g.sigma)
        ax = [1] * len(shape)
        ax[axis] = g.n_centers
        design[:, axis] = np.broadcast_to(((2.0 * alpha) * centers).reshape(ax), shape).ravel()
        base -= (alpha * centers * centers).reshape(ax)
    design[:, -1] = 1.0
    return design, base.ravel()


def _features_gaussian(space: StateSpace, state, counters) -> SparseFeatures:
    """Full-Gaussian featurization over every center combination.

    The exponent sum over dimensions comes from the cached design matrix in
    one matvec, then a single exp over all features.  Working in exponent
    space sidesteps chaining per-dimension products through the float64
    subnormal range, which costs FPU assists on far-off centers.
    """
    design, base = _gaussian_design(space)
    t = np.empty(space.n_dims + 1, dtype=np.float64)
    s0 = 0.0
    for i, (x, g) in enumerate(zip(state, space.dims)):
        xc = g.clamp(float(x))
        t[i] = xc
        s0 += (0.5 / (g.sigma * g.sigma)) * xc * xc
        if counters is not None:
            counters.kernel_evals += g.n_centers
    t[-1] = -s0
    arg = design @ t
    np.add(arg, base, out=arg)
    return _dense_features(np.exp(arg, out=arg), counters)


def features(space: StateSpace, kind: KernelKind, state, counters=None) -> SparseFeatures:
    """Featurize a state vector into sparse normalized-basis entries.

    The compact-kernel path works in plain scalars: support windows hold a
    handful of centers, where Python arithmetic beats per-op array dispatch.
    Products of in-support compact values are bounded away from underflow
    (every factor exceeds 1e-17), so each combination stays strictly
    positive and the active set equals a brute-force scan of every center
    combination.
    """
    if len(state) != space.n_dims:
        raise ValueError(f"state has {len(state)} components, space has {space.n_dims}")
    kind = KernelKind(kind)
    if kind is KernelKind.GAUSSIAN:
        return _features_gaussian(space, state, counters)
    flat: list[int] = []
    vals: list[float] = []
    complete = True
    for x, g in zip(state, space.dims):
        xc = g.clamp(float(x))
        k_first, k_last = support_window(g, kind, xc)
        if counters is not None:
            counters.kernel_evals += k_last - k_first + 1
        ks = []
        vs = []
        for k in range(k_first, k_last + 1):
            v = kernel_eval(kind, xc - (g.lo + k * g.delta), g.sigma, g.half_width)
            if v > 0.0:
                ks.append(k)
                vs.append(v)
        if not ks:
            empty = np.empty(0, dtype=np.int64)
            return SparseFeatures(empty, np.empty(0, dtype=np.float64), 0.0)
        complete = complete and len(ks) == g.n_centers
        if not flat:
            flat = ks
            vals = vs
        else:
            n = g.n_centers
            flat = [f * n + k for f in flat for k in ks]
            vals = [a * b for a in vals for b in vs]
    idx = np.array(flat, dtype=np.int64)
    va = np.array(vals, dtype=np.float64)
    if counters is not None:
        counters.active_entries += va.size
    return SparseFeatures(idx, va, float(va.sum()), dense_values=va if complete else None)


@dataclass
class WeightTable:
    """Per-action weight columns plus the eligibility-trace bookkeeping.

    ``traces`` is a dense float64 vector but only the indices in
    ``trace_idx`` are nonzero, so per-step trace work is O(active traces).
    """

    weights: np.ndarray  # (n_features, n_actions)
    traces: np.ndarray  # float64 (n_features,)
    trace_idx: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    @classmethod
    def zeros(cls, n_features: int, n_actions: int, dtype=np.float32) -> "WeightTable":
        if n_features < 1 or n_actions < 1:
            raise ValueError("table shape must be positive")
        return cls(
            np.zeros((n_features, n_actions), dtype=dtype),
            np.zeros(n_features, dtype=np.float64),
        )

    @property
    def n_features(self) -> int:
        return self.weights.shape[0]

    @property
    def n_actions(self) -> int:
        return self.weights.shape[1]

    def reset_traces(self) -> None:
        if self.trace_idx.size:
            self.traces[self.trace_idx] = 0.0
        self.trace_idx = np.empty(0, dtype=np.int64)


def q_value(f: SparseFeatures, table: WeightTable, action: int, counters=None) -> float:
    """Normalized Q for one action, accumulated in float64."""
    if not 0 <= action < table.n_actions:
        raise IndexError(f"action {action} out of range [0, {table.n_actions})")
    if f.norm_sum <= 0.0:
        raise ValueError("degenerate state: no active features (normSum is 0)")
    if counters is not None:
        counters.multiply_adds += f.n_active
    return float(f.values @ table.weights[f.idx, action].astype(np.float64, copy=False) / f.norm_sum)


# keeps value * weight out of the float32 subnormal range for |weight| >= 1e-8
_DENSE_FLUSH = 1e-30


def q_values_matrix(f: SparseFeatures, weights: np.ndarray, counters=None) -> np.ndarray:
    """Normalized Q for every column of a (n_features, n_actions) matrix.

    This is the action-selection hot loop: it runs in the matrix storage
    precision (float32 by default, so the matvec needs no upcast copy of
    the weights).  The learning path (q_value, deltas, traces) always
    accumulates in float64.
    """
    if f.norm_sum <= 0.0:
        raise ValueError("degenerate state: no active features (normSum is 0)")
    if counters is not None:
        counters.multiply_adds += f.n_active * weights.shape[1]
    dense = f.dense_values
    if dense is not None and dense.size == weights.shape[0]:
        if weights.dtype == np.float32:
            # flush the far tail before the matvec: products of tiny values
            # with float32 weights land in the subnormal range and stall the
            # FPU, while contributing under 1e-22 to any Q sum
            vals = np.multiply(dense, dense >= _DENSE_FLUSH, dtype=np.float32)
        else:
            vals = dense
        return np.asarray((vals @ weights) / f.norm_sum, dtype=np.float64)
    if f.n_active == weights.shape[0]:
        sub = weights  # dense featurization, skip the gather
    else:
        sub = weights[f.idx]
    vals = f.values.astype(weights.dtype, copy=False)
    return np.asarray((vals @ sub) / f.norm_sum, dtype=np.float64)


def q_values_all(f: SparseFeatures, table: WeightTable, counters=None) -> np.ndarray:
    """Normalized Q for every action of one weight table."""
    return q_values_matrix(f, table.weights, counters)


def dense_q_oracle(space: StateSpace, kind: KernelKind, state, table: WeightTable, action: int) -> float:
    """Brute-force Q over every center combination (reference path).

    Evaluates the multivariate kernel at all total_features centers with no
    sparsity shortcuts: Gaussian kinds from the N-dimensional distance
    exp(-sum_i d_i^2 / (2 sigma_i^2)) (truncated per dimension for the 3-sigma
    variant), other kinds as the product of 1-D kernel values.
    """
    kind = KernelKind(kind)
    if len(state) != space.n_dims:
        raise ValueError(f"state has {len(state)} components, space has {space.n_dims}")
    shape = tuple(g.n_centers for g in space.dims)
    dists = []
    for x, g in zip(state, space.dims):
        xc = g.clamp(float(x))
        dists.append(xc - (g.lo + g.delta * np.arange(g.n_centers)))
    if kind in (KernelKind.GAUSSIAN, KernelKind.GAUSSIAN3S):
        expo = np.zeros(shape, dtype=np.float64)
        inside = np.ones(shape, dtype=bool)
        for axis, (d, g) in enumerate(zip(dists, space.dims)):
            ax_shape = [1] * space.n_dims
            ax_shape[axis] = g.n_centers
            expo = expo + (d * d * (0.5 / (g.sigma * g.sigma))).reshape(ax_shape)
            if kind is KernelKind.GAUSSIAN3S:
                inside &= (np.abs(d) / g.half_width < 1.0).reshape(ax_shape)
        phi = np.exp(-expo)
        if kind is KernelKind.GAUSSIAN3S:
            phi = np.where(inside, phi, 0.0)
    else:
        phi = np.ones(shape, dtype=np.float64)
        for axis, (d, g) in enumerate(zip(dists, space.dims)):
            vals = np.array(
                [kernel_eval(kind, float(di), g.sigma, g.half_width) for di in d],
                dtype=np.float64,
            )
            ax_shape = [1] * space.n_dims
            ax_shape[axis] = g.n_centers
            phi = phi * vals.reshape(ax_shape)
    phi = phi.ravel()
    norm = phi.sum()
    if norm <= 0.0:
        return 0.0
    return float(phi @ table.weights[:, action].astype(np.float64, copy=False) / norm)


def model_size_bytes(n_features: int, n_actions: int, bytes_per_weight: int = 4) -> int:
    return n_features * n_actions * bytes_per_weight


def atomic_write_bytes(path: str, data: bytes) -> None:
    """Write via a temp file in the same directory, then rename over."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def _meta_path(path: str) -> str:
    base, _ = os.path.splitext(path)
    return base + ".meta.json"


def save_weights(path: str, table: WeightTable, meta: dict | None = None) -> None:
    """Serialize a weight table: 24-byte header + row-major little-endian weights.

    Metadata (grids, kernel, action map, ...) goes to a JSON sidecar next to
    the binary file.  Both writes are atomic.
    """
    w = table.weights
    bpw = w.dtype.itemsize
    header = _HEADER.pack(WEIGHT_MAGIC, WEIGHT_VERSION, w.shape[0], w.shape[1], bpw)
    body = np.ascontiguousarray(w, dtype=w.dtype.newbyteorder("<")).tobytes()
    atomic_write_bytes(path, header + body)
    if meta is not None:
        atomic_write_text(_meta_path(path), json.dumps(meta, indent=2, sort_keys=True) + "\n")


def load_weights(path: str) -> tuple[WeightTable, dict | None]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, n_features, n_actions, bpw = _HEADER.unpack_from(raw)
    if magic != WEIGHT_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != WEIGHT_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    if bpw == 4:
        dtype = np.dtype("<f4")
    elif bpw == 8:
        dtype = np.dtype("<f8")
    else:
        raise ValueError(f"{path}: unsupported weight width {bpw}")
    expected = _HEADER.size + n_features * n_actions * bpw
    if len(raw) != expected:
        raise ValueError(f"{path}: size {len(raw)} != expected {expected}")
    w = np.frombuffer(raw, dtype=dtype, offset=_HEADER.size).reshape(n_features, n_actions)
    table = WeightTable(w.copy(), np.zeros(n_features, dtype=np.float64))
    meta = None
    mp = _meta_path(path)
    if os.path.exists(mp):
        with open(mp, "r", encoding="utf-8") as fh:
            meta = json.load(fh)
    return table, meta
