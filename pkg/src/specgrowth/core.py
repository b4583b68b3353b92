"""Truncated spectral models and their primitives.

A model couples a positive eigenvalue ladder (the diagonal of K0) with a
banded Hermitian operator A. The driven system evolves under
H(t) = K0 + V(t) where V(t) carries the entry

    V(t)[m, n] = A[m, n] * exp(-i t (lambda_m - lambda_n)),

the rotating-frame image of A under the K0 phase flow. When all ladder
gaps are integers, V(t) is 2*pi-periodic in t.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse

from .errors import (
    DimensionMismatchError,
    InvalidParameterError,
    StrategyError,
)

_INTEGER_GAP_TOL = 1e-9
_HERMITICITY_TOL = 1e-12


def _frozen(values, dtype):
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class QuantumState:
    """Complex coefficient vector in a model's eigenbasis.

    basis_id ties the state to the model that produced it; states built
    by hand may leave it empty to skip the tag check.
    """

    coeffs: np.ndarray
    basis_id: str = ""

    def __post_init__(self):
        arr = _frozen(self.coeffs, np.complex128)
        if arr.ndim != 1:
            raise InvalidParameterError("coeffs", "expected a 1-d sequence")
        if arr.size < 2:
            raise InvalidParameterError("coeffs", "need at least 2 modes")
        if not np.all(np.isfinite(arr.view(np.float64))):
            raise InvalidParameterError("coeffs", "entries must be finite")
        object.__setattr__(self, "coeffs", arr)

    @property
    def n_modes(self):
        return self.coeffs.size

    def norm(self):
        """Euclidean norm of the coefficient vector."""
        return float(np.linalg.norm(self.coeffs))


@dataclass(frozen=True, eq=False)
class EigenLadder:
    """Nondecreasing, strictly positive eigenvalues of K0.

    exact_gaps declares that all pairwise differences are integers, which
    makes the rotating-frame potential 2*pi-periodic.
    """

    values: np.ndarray
    exact_gaps: bool = False

    def __post_init__(self):
        arr = _frozen(self.values, np.float64)
        if arr.ndim != 1 or arr.size < 2:
            raise InvalidParameterError("values", "expected a 1-d sequence of length >= 2")
        if not np.all(np.isfinite(arr)):
            raise InvalidParameterError("values", "entries must be finite")
        if arr[0] <= 0.0:
            raise InvalidParameterError("values", "ladder must be strictly positive")
        if np.any(np.diff(arr) < 0.0):
            raise InvalidParameterError("values", "ladder must be nondecreasing")
        if self.exact_gaps:
            gaps = arr - arr[0]
            if np.max(np.abs(gaps - np.round(gaps))) > _INTEGER_GAP_TOL:
                raise InvalidParameterError(
                    "values", "exact_gaps set but pairwise gaps are not integers"
                )
        object.__setattr__(self, "values", arr)

    @property
    def n_modes(self):
        return self.values.size


class BandedHermitian:
    """Hermitian matrix stored as its main diagonal and superdiagonals.

    bands maps an offset k >= 0 to the k-th superdiagonal (length n - k);
    subdiagonals follow from conjugate symmetry. The main diagonal must be
    real. Entries with |row - col| > bandwidth are zero by construction.
    """

    def __init__(self, n, bands):
        n = int(n)
        if n < 2:
            raise InvalidParameterError("n", "need at least 2 modes")
        clean = {}
        for k, values in bands.items():
            k = int(k)
            if k < 0 or k >= n:
                raise InvalidParameterError("bands", f"offset {k} out of range for n = {n}")
            arr = _frozen(values, np.complex128)
            if arr.shape != (n - k,):
                raise DimensionMismatchError(
                    f"band {k} has length {arr.size}, expected {n - k}"
                )
            if not np.all(np.isfinite(arr.view(np.float64))):
                raise InvalidParameterError("bands", f"band {k} has non-finite entries")
            clean[k] = arr
        if 0 not in clean:
            clean[0] = _frozen(np.zeros(n), np.complex128)
        diag = clean[0]
        scale = max(1.0, float(np.max(np.abs(diag))))
        if np.max(np.abs(diag.imag)) > _HERMITICITY_TOL * scale:
            raise InvalidParameterError("bands", "main diagonal of a Hermitian matrix must be real")
        self._n = n
        self._bands = dict(sorted(clean.items()))
        self._bandwidth = max(self._bands)

    @property
    def n(self):
        return self._n

    @property
    def bandwidth(self):
        return self._bandwidth

    def band(self, k):
        """The k-th superdiagonal (zeros if not stored)."""
        if k in self._bands:
            return self._bands[k]
        return np.zeros(self._n - k, dtype=np.complex128)

    def entry(self, row, col):
        if not (0 <= row < self._n and 0 <= col < self._n):
            raise InvalidParameterError("index", f"({row}, {col}) outside {self._n} modes")
        if col >= row:
            k = col - row
            if k > self._bandwidth or k not in self._bands:
                return 0j
            return complex(self._bands[k][row])
        return complex(np.conj(self.entry(col, row)))

    def matvec(self, x):
        x = np.asarray(x, dtype=np.complex128)
        if x.shape != (self._n,):
            raise DimensionMismatchError(
                f"vector of length {x.size} against operator of size {self._n}"
            )
        y = self._bands[0] * x
        for k, b in self._bands.items():
            if k == 0:
                continue
            y[: self._n - k] += b * x[k:]
            y[k:] += np.conj(b) * x[: self._n - k]
        return y

    def to_dense(self):
        out = np.zeros((self._n, self._n), dtype=np.complex128)
        for k, b in self._bands.items():
            idx = np.arange(self._n - k)
            out[idx, idx + k] = b
            if k > 0:
                out[idx + k, idx] = np.conj(b)
        return out

    def as_sparse(self):
        offsets = []
        data = []
        for k, b in self._bands.items():
            offsets.append(k)
            data.append(b)
            if k > 0:
                offsets.append(-k)
                data.append(np.conj(b))
        mat = scipy.sparse.diags(
            data, offsets, shape=(self._n, self._n), format="csr", dtype=np.complex128
        )
        return mat

    def norm_bound(self):
        """Max absolute row sum, an upper bound on the operator norm."""
        row = np.abs(self._bands[0]).astype(np.float64)
        for k, b in self._bands.items():
            if k == 0:
                continue
            a = np.abs(b)
            row[: self._n - k] += a
            row[k:] += a
        return float(np.max(row))

    def max_abs(self):
        return max(float(np.max(np.abs(b))) for b in self._bands.values())

    @classmethod
    def from_dense(cls, mat, tol=1e-12):
        mat = np.asarray(mat, dtype=np.complex128)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise InvalidParameterError("mat", "expected a square matrix")
        n = mat.shape[0]
        scale = max(1.0, float(np.max(np.abs(mat))))
        if np.max(np.abs(mat - mat.conj().T)) > tol * scale:
            raise InvalidParameterError("mat", "matrix is not Hermitian within tolerance")
        bands = {0: np.diagonal(mat).copy()}
        for k in range(1, n):
            d = np.diagonal(mat, offset=k)
            if np.max(np.abs(d)) > tol * scale:
                bands[k] = d.copy()
        return cls(n, bands)


class PropagationStrategy(enum.Enum):
    """How exp(-i t A) is applied without densifying A."""

    SINE_DIAGONAL = "sine-transform-diagonal"
    GRID_MULTIPLICATION = "grid-multiplication"
    DENSE = "dense-eigendecomposition"


@dataclass(frozen=True, eq=False)
class SpectralModel:
    """A truncated (K0, A) pair plus the fast-propagation recipe for A.

    mode_index (torus models) holds the signed Fourier index of each
    storage position; grid_potential holds v on the collocation grid;
    corrector holds the diagonal gap corrector of the surrogate ladder.
    params records the build parameters for reporting.
    """

    name: str
    ladder: EigenLadder
    coupling: BandedHermitian
    strategy: PropagationStrategy
    lambda_shift: float
    params: dict = field(default_factory=dict)
    mode_index: Optional[np.ndarray] = None
    grid_potential: Optional[np.ndarray] = None
    corrector: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.ladder.n_modes != self.coupling.n:
            raise DimensionMismatchError(
                f"ladder has {self.ladder.n_modes} modes, coupling has {self.coupling.n}"
            )
        if not math.isfinite(self.coupling.norm_bound()):
            raise InvalidParameterError("coupling", "operator norm bound is not finite")
        if self.strategy is PropagationStrategy.SINE_DIAGONAL:
            b1 = self.coupling.band(1)
            if (
                self.coupling.bandwidth != 1
                or np.max(np.abs(self.coupling.band(0))) != 0.0
                or np.max(np.abs(b1.imag)) != 0.0
                or np.max(np.abs(b1 - b1[0])) != 0.0
            ):
                raise StrategyError(
                    "sine-transform diagonalization needs a real tridiagonal "
                    "coupling with zero diagonal and constant off-diagonal"
                )
        if self.strategy is PropagationStrategy.GRID_MULTIPLICATION:
            if self.mode_index is None or self.grid_potential is None:
                raise StrategyError(
                    "grid multiplication needs mode_index and grid_potential"
                )
        for attr in ("mode_index", "grid_potential", "corrector"):
            val = getattr(self, attr)
            if val is not None:
                dtype = np.int64 if attr == "mode_index" else np.float64
                object.__setattr__(self, attr, _frozen(val, dtype))

    @property
    def n_modes(self):
        return self.ladder.n_modes

    @property
    def basis_id(self):
        return f"{self.name}:n{self.n_modes}"

    def state(self, coeffs):
        """Wrap coefficients as a state tagged with this model's basis."""
        st = QuantumState(coeffs, self.basis_id)
        if st.n_modes != self.n_modes:
            raise DimensionMismatchError(
                f"{st.n_modes} coefficients for a model with {self.n_modes} modes"
            )
        return st

    def basis_state(self, n):
        """The unit vector on storage position n."""
        n = int(n)
        if not 0 <= n < self.n_modes:
            raise InvalidParameterError("n", f"mode {n} outside 0..{self.n_modes - 1}")
        c = np.zeros(self.n_modes, dtype=np.complex128)
        c[n] = 1.0
        return self.state(c)


def check_state(model, state):
    """Raise unless the state belongs to the model's basis."""
    if state.n_modes != model.n_modes:
        raise DimensionMismatchError(
            f"state has {state.n_modes} modes, model has {model.n_modes}"
        )
    if state.basis_id and state.basis_id != model.basis_id:
        raise DimensionMismatchError(
            f"state basis {state.basis_id!r} does not match model {model.basis_id!r}"
        )


def sobolev_norm(state, model, r):
    """Weighted norm (sum_n lambda_n^(2r) |psi_n|^2)^(1/2).

    r = 0 reduces to the Euclidean norm. The sum is accumulated with
    compensated summation because the weights span many orders of
    magnitude at large r and N.
    """
    check_state(model, state)
    r = float(r)
    if not math.isfinite(r):
        raise InvalidParameterError("r", "must be finite")
    if r < 0.0:
        raise InvalidParameterError("r", "negative orders are not supported")
    c = state.coeffs
    absq = c.real * c.real + c.imag * c.imag
    weights = np.power(model.ladder.values, 2.0 * r)
    return math.sqrt(math.fsum(weights * absq))


def conjugated_potential(model, t):
    """The rotating-frame potential V(t) built entrywise from ladder gaps.

    Hermitian with the same bandwidth as the coupling; 2*pi-periodic in t
    when the ladder has exact integer gaps.
    """
    t = float(t)
    if not math.isfinite(t):
        raise InvalidParameterError("t", "must be finite")
    lam = model.ladder.values
    a = model.coupling
    bands = {}
    for k in range(a.bandwidth + 1):
        b = a.band(k)
        if k == 0:
            bands[0] = b
            continue
        # gap lambda_m - lambda_{m+k} for row m
        bands[k] = b * np.exp(-1j * t * (lam[: lam.size - k] - lam[k:]))
    return BandedHermitian(model.n_modes, bands)


def apply_hamiltonian(model, state, t):
    """(K0 + V(t)) psi as diagonal scaling plus a banded multiply."""
    check_state(model, state)
    v = conjugated_potential(model, t)
    out = model.ladder.values * state.coeffs + v.matvec(state.coeffs)
    return model.state(out)
