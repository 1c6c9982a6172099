"""Closed-form ridge regression over incrementally accumulated statistics.

Rows are absorbed into raw sufficient statistics (``sum x x^T``,
``sum x y``, ``sum x``, ``sum y``, count). ``solve`` centres them, applies
the model's standardization and solves the penalized normal equations with
a Cholesky factorization, so absorbing rows one at a time and solving is
exactly equivalent to a batch fit. The intercept is never penalized.
"""

from __future__ import annotations

import math
import struct
import zlib
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg

from .errors import (
    CorruptFile,
    DimensionMismatch,
    InsufficientData,
    NonFiniteInput,
    SingularSystem,
    StaleModel,
    VersionUnsupported,
)
from .ingest import ScalerStats

MAGIC = b"PRQR"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class RidgeConfig:
    alpha: float = 2.0
    fit_intercept: bool = True

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha >= 0):
            raise ValueError(f"alpha must be finite and >= 0, got {self.alpha}")


@dataclass
class SuffStats:
    gram: np.ndarray
    moment: np.ndarray
    sum_x: np.ndarray
    sum_y: float = 0.0
    count: int = 0

    @classmethod
    def empty(cls, d: int) -> "SuffStats":
        return cls(gram=np.zeros((d, d)), moment=np.zeros(d), sum_x=np.zeros(d))

    @property
    def dim(self) -> int:
        return len(self.sum_x)

    def add(self, x: np.ndarray, y: float) -> None:
        self.gram += np.outer(x, x)
        self.moment += x * y
        self.sum_x += x
        self.sum_y += y
        self.count += 1

    def add_batch(self, X: np.ndarray, y: np.ndarray) -> None:
        self.gram += X.T @ X
        self.moment += X.T @ y
        self.sum_x += X.sum(axis=0)
        self.sum_y += float(y.sum())
        self.count += len(y)

    def copy(self) -> "SuffStats":
        return SuffStats(
            self.gram.copy(), self.moment.copy(), self.sum_x.copy(), self.sum_y, self.count
        )


def _check_row(x, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (d,):
        raise DimensionMismatch(f"expected a row of width {d}, got shape {x.shape}")
    return x


@dataclass(eq=False)
class RidgeModelState:
    """Accumulating ridge model.

    ``coefficients`` and ``intercept`` live in the standardized space given
    by ``scaler`` (identity by default, i.e. raw features). Columns whose
    scaler stddev is 0 carry a zero coefficient.

    With ``track_inverse`` the inverse of the penalized system is maintained
    by Sherman-Morrison rank-one updates on every absorbed row; this needs
    ``alpha > 0`` and gives the same coefficients as a fresh solve.
    """

    config: RidgeConfig
    stats: SuffStats
    scaler: ScalerStats
    coefficients: np.ndarray
    intercept: float = 0.0
    dirty: bool = False
    fallback: float = 0.0
    track_inverse: bool = False
    _inverse: Optional[np.ndarray] = field(default=None, repr=False)

    @classmethod
    def empty(
        cls,
        d: int,
        config: Optional[RidgeConfig] = None,
        scaler: Optional[ScalerStats] = None,
        *,
        fallback: float = 0.0,
        track_inverse: bool = False,
    ) -> "RidgeModelState":
        config = config or RidgeConfig()
        if track_inverse and config.alpha <= 0:
            raise ValueError("Sherman-Morrison tracking needs alpha > 0")
        state = cls(
            config=config,
            stats=SuffStats.empty(d),
            scaler=scaler if scaler is not None else ScalerStats.identity(d),
            coefficients=np.zeros(d),
            fallback=fallback,
            track_inverse=track_inverse,
        )
        if scaler is not None and scaler.dim != d:
            raise DimensionMismatch(f"scaler width {scaler.dim} != {d}")
        if track_inverse:
            state._inverse = np.eye(d) / config.alpha
        return state

    @classmethod
    def from_batch(cls, X, y, config=None, scaler=None, **kwargs) -> "RidgeModelState":
        X = np.asarray(X, dtype=np.float64)
        state = cls.empty(X.shape[1], config, scaler, **kwargs)
        return state.absorb_batch(X, y).solve()

    @property
    def dim(self) -> int:
        return self.stats.dim

    @property
    def count(self) -> int:
        return self.stats.count

    @property
    def is_fallback(self) -> bool:
        return self.stats.count == 0

    # -- updates -----------------------------------------------------------

    def _scaled_direction(self, delta: np.ndarray) -> np.ndarray:
        s = self.scaler.stddev
        return np.where(s > 0, delta / np.where(s > 0, s, 1.0), 0.0)

    def _rank_one_update(self, x: np.ndarray) -> None:
        st = self.stats
        if self.config.fit_intercept:
            if st.count == 0:
                return
            weight = st.count / (st.count + 1)
            v = math.sqrt(weight) * self._scaled_direction(x - st.sum_x / st.count)
        else:
            v = self._scaled_direction(x - self.scaler.mean)
        Av = self._inverse @ v
        self._inverse -= np.outer(Av, Av) / (1.0 + v @ Av)

    def absorb_row(self, x, y: float) -> "RidgeModelState":
        x = _check_row(x, self.dim)
        if not (np.all(np.isfinite(x)) and math.isfinite(y)):
            raise NonFiniteInput("absorbed row contains a non-finite value")
        if self.track_inverse and self._inverse is not None:
            self._rank_one_update(x)
        self.stats.add(x, float(y))
        self.dirty = True
        return self

    def absorb_batch(self, X, y) -> "RidgeModelState":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.dim or len(y) != X.shape[0]:
            raise DimensionMismatch(f"expected ({len(y)}, {self.dim}) rows, got {X.shape}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise NonFiniteInput("absorbed rows contain a non-finite value")
        if len(y) == 0:
            return self
        self.stats.add_batch(X, y)
        self._inverse = None
        self.dirty = True
        return self

    def set_scaler(self, scaler: ScalerStats) -> "RidgeModelState":
        if scaler.dim != self.dim:
            raise DimensionMismatch(f"scaler width {scaler.dim} != {self.dim}")
        if scaler != self.scaler:
            self.scaler = scaler
            self._inverse = None
            self.dirty = True
        return self

    def reset(self) -> "RidgeModelState":
        """Drop all absorbed rows, keeping config and scaler."""
        self.stats = SuffStats.empty(self.dim)
        self.coefficients = np.zeros(self.dim)
        self.intercept = 0.0
        self.dirty = False
        if self.track_inverse:
            self._inverse = np.eye(self.dim) / self.config.alpha
        return self

    # -- solving -----------------------------------------------------------

    def _scaled_system(self):
        """Penalty-free system matrix and right-hand side in standardized space."""
        st, sc = self.stats, self.scaler
        c = st.count
        if self.config.fit_intercept:
            G = st.gram - np.outer(st.sum_x, st.sum_x) / c
            b = st.moment - st.sum_x * (st.sum_y / c)
        else:
            m = sc.mean
            G = st.gram - np.outer(m, st.sum_x) - np.outer(st.sum_x, m) + c * np.outer(m, m)
            b = st.moment - m * st.sum_y
        s = np.where(sc.stddev > 0, sc.stddev, 1.0)
        active = sc.stddev > 0
        G = G / np.outer(s, s)
        b = b / s
        G[~active, :] = 0.0
        G[:, ~active] = 0.0
        b[~active] = 0.0
        return 0.5 * (G + G.T), b, active

    def solve(self) -> "RidgeModelState":
        """Closed-form fit of the absorbed rows; clears ``dirty``."""
        st = self.stats
        if st.count == 0:
            raise InsufficientData("no rows absorbed")
        G, b, active = self._scaled_system()
        alpha = self.config.alpha
        w = np.zeros(self.dim)
        if self.track_inverse:
            if self._inverse is None:
                self._inverse = linalg.cho_solve(
                    linalg.cho_factor(G + alpha * np.eye(self.dim)), np.eye(self.dim)
                )
            w = self._inverse @ b
            w[~active] = 0.0
        elif active.any():
            A = G[np.ix_(active, active)] + alpha * np.eye(int(active.sum()))
            if alpha == 0:
                eig = np.linalg.eigvalsh(A)
                if eig[0] <= A.shape[0] * np.finfo(float).eps * max(eig[-1], 0.0):
                    raise SingularSystem("alpha = 0 and the centred Gram matrix is rank deficient")
            try:
                w[active] = linalg.cho_solve(linalg.cho_factor(A), b[active])
            except linalg.LinAlgError:
                raise SingularSystem("penalized system is not positive definite") from None
        self.coefficients = w
        if self.config.fit_intercept:
            sum_z = self._scaled_direction(st.sum_x - st.count * self.scaler.mean)
            self.intercept = float((st.sum_y - w @ sum_z) / st.count)
        else:
            self.intercept = 0.0
        self.dirty = False
        return self

    def predict(self, x) -> float:
        if self.dirty:
            raise StaleModel("rows absorbed since the last solve")
        x = _check_row(x, self.dim)
        if self.stats.count == 0:
            return float(self.fallback)
        return float(self.coefficients @ self.scaler.transform(x) + self.intercept)

    def predict_many(self, X) -> np.ndarray:
        if self.dirty:
            raise StaleModel("rows absorbed since the last solve")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise DimensionMismatch(f"expected width {self.dim}, got shape {X.shape}")
        if self.stats.count == 0:
            return np.full(len(X), float(self.fallback))
        return self.scaler.transform(X) @ self.coefficients + self.intercept

    def raw_coefficients(self):
        """``(weights, intercept)`` expressed on unscaled features."""
        s = self.scaler.stddev
        w = np.where(s > 0, self.coefficients / np.where(s > 0, s, 1.0), 0.0)
        return w, float(self.intercept - w @ self.scaler.mean)

    def __eq__(self, other):
        if not isinstance(other, RidgeModelState):
            return NotImplemented
        a, b = self.stats, other.stats
        return (
            self.config == other.config
            and a.count == b.count
            and a.sum_y == b.sum_y
            and np.array_equal(a.gram, b.gram)
            and np.array_equal(a.moment, b.moment)
            and np.array_equal(a.sum_x, b.sum_x)
            and self.scaler == other.scaler
            and np.array_equal(self.coefficients, other.coefficients)
            and self.intercept == other.intercept
            and self.dirty == other.dirty
        )

    __hash__ = None


# -- persistence -----------------------------------------------------------

_HEADER = struct.Struct("<4sIIdBQ")


def dump_state(state: RidgeModelState) -> bytes:
    if state.dirty:
        state.solve()
    st, d = state.stats, state.dim
    body = bytearray(
        _HEADER.pack(
            MAGIC, FORMAT_VERSION, d, float(state.config.alpha), int(state.config.fit_intercept), st.count
        )
    )
    for arr in (
        st.gram.reshape(d * d),
        st.moment,
        st.sum_x,
        [st.sum_y],
        state.scaler.mean,
        state.scaler.stddev,
        state.coefficients,
        [state.intercept],
    ):
        body += np.asarray(arr, dtype="<f8").tobytes()
    body += struct.pack("<I", zlib.crc32(bytes(body)) & 0xFFFFFFFF)
    return bytes(body)


def parse_state(blob: bytes) -> RidgeModelState:
    if len(blob) < _HEADER.size + 4:
        raise CorruptFile("model file truncated")
    magic, version, d, alpha, fit_intercept, count = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise CorruptFile(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise VersionUnsupported(f"model file version {version} (supported: {FORMAT_VERSION})")
    n_floats = d * d + 5 * d + 2
    expected = _HEADER.size + 8 * n_floats + 4
    if len(blob) != expected:
        raise CorruptFile(f"model file is {len(blob)} bytes, expected {expected}")
    (crc,) = struct.unpack_from("<I", blob, expected - 4)
    if zlib.crc32(blob[: expected - 4]) & 0xFFFFFFFF != crc:
        raise CorruptFile("checksum mismatch")
    if fit_intercept not in (0, 1):
        raise CorruptFile(f"bad fit_intercept flag {fit_intercept}")
    floats = np.frombuffer(blob, dtype="<f8", count=n_floats, offset=_HEADER.size).astype(np.float64)
    parts = np.split(floats, np.cumsum([d * d, d, d, 1, d, d, d]))
    gram, moment, sum_x, sum_y, mean, std, coef, intercept = parts
    try:
        config = RidgeConfig(alpha=float(alpha), fit_intercept=bool(fit_intercept))
    except ValueError as exc:
        raise CorruptFile(str(exc)) from None
    return RidgeModelState(
        config=config,
        stats=SuffStats(gram.reshape(d, d), moment, sum_x, float(sum_y[0]), int(count)),
        scaler=ScalerStats(mean=mean, stddev=std),
        coefficients=coef,
        intercept=float(intercept[0]),
        dirty=False,
    )


def save_state(state: RidgeModelState, path) -> None:
    """Write the binary model file; a dirty state is solved first."""
    with open(path, "wb") as fh:
        fh.write(dump_state(state))


def load_state(path) -> RidgeModelState:
    with open(path, "rb") as fh:
        return parse_state(fh.read())
