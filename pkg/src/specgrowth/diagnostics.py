"""Growth-rate estimation and structural checks on the recorded runs.

The growth claim is a power law, so slopes are fitted on log-log samples
over a late window where lower-order polynomial terms no longer compete.
The symbol-matrix check applies finite forward differences along the
diagonal and looks for stabilizing decay constants; a finite domain can
support the order claim, never prove it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .core import sobolev_norm
from .errors import DegenerateStateError, InvalidParameterError
from .propagate import tail_mass_fraction

_STABLE_RATIO = 1.5
_TINY = 1e-30


@dataclass(frozen=True, eq=False)
class GrowthRecord:
    """Time series of weighted norms, tail leakage, and stepper error."""

    times: np.ndarray
    norms: dict
    leakage: np.ndarray
    oracle_error: Optional[np.ndarray] = None
    model_name: str = ""
    model_params: dict = field(default_factory=dict)
    scheme: str = "oracle"

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64).copy()
        if times.ndim != 1 or times.size < 1:
            raise InvalidParameterError("times", "expected a nonempty 1-d sequence")
        if times.size > 1 and np.any(np.diff(times) <= 0.0):
            raise InvalidParameterError("times", "sample times must increase strictly")
        times.setflags(write=False)
        object.__setattr__(self, "times", times)
        norms = {}
        for r, vals in self.norms.items():
            arr = np.asarray(vals, dtype=np.float64).copy()
            if arr.shape != times.shape:
                raise InvalidParameterError("norms", f"order {r}: one value per sample required")
            arr.setflags(write=False)
            norms[float(r)] = arr
        object.__setattr__(self, "norms", norms)
        leak = np.asarray(self.leakage, dtype=np.float64).copy()
        if leak.shape != times.shape:
            raise InvalidParameterError("leakage", "one value per sample required")
        if np.any(leak < -1e-12) or np.any(leak > 1.0 + 1e-12):
            raise InvalidParameterError("leakage", "values must lie in [0, 1]")
        leak.setflags(write=False)
        object.__setattr__(self, "leakage", leak)
        if self.oracle_error is not None:
            err = np.asarray(self.oracle_error, dtype=np.float64).copy()
            if err.shape != times.shape:
                raise InvalidParameterError("oracle_error", "one value per sample required")
            err.setflags(write=False)
            object.__setattr__(self, "oracle_error", err)

    @property
    def orders(self):
        return tuple(sorted(self.norms))

    @classmethod
    def from_trajectory(cls, traj, orders, tail_fraction=0.1, reference=None, scheme="oracle"):
        """Assemble a record from a trajectory (and an optional exact
        reference trajectory on the same sample times)."""
        model = traj.model
        norms = {
            float(r): np.array([sobolev_norm(st, model, r) for st in traj.states])
            for r in orders
        }
        leakage = np.array(
            [tail_mass_fraction(st.coeffs, tail_fraction) for st in traj.states]
        )
        err = None
        if reference is not None:
            if reference.times.shape != traj.times.shape or np.max(
                np.abs(reference.times - traj.times)
            ) > 1e-12 * max(1.0, float(traj.times[-1])):
                raise InvalidParameterError(
                    "reference", "reference trajectory must share the sample times"
                )
            err = np.array(
                [
                    float(np.linalg.norm(a.coeffs - b.coeffs))
                    / max(b.norm(), _TINY)
                    for a, b in zip(traj.states, reference.states)
                ]
            )
        return cls(
            times=traj.times,
            norms=norms,
            leakage=leakage,
            oracle_error=err,
            model_name=model.name,
            model_params=dict(model.params),
            scheme=scheme,
        )


@dataclass(frozen=True)
class FitReport:
    """Log-log least-squares fit of one norm order.

    ceiling is the upper-bound exponent r / (1 - rho) evaluated at
    rho = 0, i.e. r itself; a trustworthy fit stays at or below it.
    """

    r: float
    slope: float
    intercept: float
    residual: float
    window: tuple
    ceiling: float


def fit_growth_exponent(record, r, window=None):
    """Least-squares slope of log norm vs log t over the window.

    The window defaults to the last decade [t_end/10, t_end]. Requires at
    least 8 positive-time samples inside it and positive norms.
    """
    r = float(r)
    key = None
    for cand in record.norms:
        if cand == r or abs(cand - r) <= 1e-12:
            key = cand
            break
    if key is None:
        raise InvalidParameterError("r", f"order {r:g} was not recorded")
    times = record.times
    if window is None:
        window = (times[-1] / 10.0, float(times[-1]))
    t_min, t_max = float(window[0]), float(window[1])
    if not (t_min < t_max):
        raise InvalidParameterError("window", "empty window")
    if t_min > times[-1] or t_max < times[0]:
        raise InvalidParameterError("window", "window does not overlap the sampled range")
    mask = (times >= t_min) & (times <= t_max) & (times > 0.0)
    count = int(np.count_nonzero(mask))
    if count < 8:
        raise InvalidParameterError(
            "window", f"need at least 8 positive-time samples in the window, found {count}"
        )
    vals = record.norms[key][mask]
    if np.any(vals <= 0.0):
        raise DegenerateStateError("a recorded norm vanished inside the fit window")
    x = np.log(times[mask])
    y = np.log(vals)
    design = np.column_stack([np.ones_like(x), x])
    sol, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ sol
    return FitReport(
        r=r,
        slope=float(sol[1]),
        intercept=float(sol[0]),
        residual=float(np.sqrt(np.mean(resid**2))),
        window=(t_min, t_max),
        ceiling=r,
    )


def truncation_leakage(state, tail_fraction):
    """Euclidean mass fraction in the top tail_fraction of modes.

    The growth runs flag a run as truncation-limited when this crosses
    1e-10.
    """
    coeffs = getattr(state, "coeffs", state)
    return tail_mass_fraction(coeffs, tail_fraction)


@dataclass(frozen=True, eq=False)
class SymbolMatrixReport:
    """Finite-domain evidence for (or against) a symbol-matrix order.

    constants holds the smallest admissible C for each (gamma, N) at the
    full domain cap; ratios compares against the half cap. The verdict
    requires every ratio below 1.5 (stabilization under doubling).
    """

    rho: float
    gamma_max: int
    n_max: int
    domain_cap: int
    constants: dict
    ratios: dict
    consistent: bool

    @property
    def description(self):
        if self.consistent:
            return f"consistent with order {self.rho:g}"
        return f"fails order {self.rho:g}"


def _materialize(entries, size):
    if callable(entries):
        mm, nn = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
        return np.asarray(entries(mm, nn), dtype=np.complex128)
    arr = np.asarray(entries, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise InvalidParameterError("entries", "expected a square matrix or a callable")
    if arr.shape[0] < size:
        raise InvalidParameterError(
            "entries", f"matrix of size {arr.shape[0]} is smaller than the domain cap {size}"
        )
    return arr[:size, :size]


def _difference_constants(mat, rho, gamma_max, n_max):
    out = {}
    diff = mat
    for gamma in range(gamma_max + 1):
        size = diff.shape[0]
        mm, nn = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
        base = np.abs(diff) * (1.0 + mm + nn) ** (gamma - rho)
        dist = 1.0 + np.abs(mm - nn)
        for n in range(n_max + 1):
            out[(gamma, n)] = float(np.max(base))
            base = base * dist
        diff = diff[1:, 1:] - diff[:-1, :-1]
    return out


def chodosh_order_check(entries, rho, gamma_max=3, n_max=4, domain_cap=1024):
    """Test the decay/difference bounds defining a symbol matrix of order rho.

    For each number of diagonal differences gamma <= gamma_max and each
    off-diagonal decay power N <= n_max, the smallest admissible constant
    is computed on truncated index domains of size domain_cap/2 and
    domain_cap; the order claim is consistent when every constant
    stabilizes (ratio below 1.5) under that doubling.

    entries is a square array or a vectorized callable on index arrays.
    """
    rho = float(rho)
    gamma_max = int(gamma_max)
    n_max = int(n_max)
    domain_cap = int(domain_cap)
    if domain_cap < 64:
        raise InvalidParameterError("domain_cap", "must be at least 64")
    if gamma_max < 0 or n_max < 0:
        raise InvalidParameterError("gamma_max", "difference and decay orders must be >= 0")
    half = domain_cap // 2
    full_mat = _materialize(entries, domain_cap)
    at_half = _difference_constants(full_mat[:half, :half], rho, gamma_max, n_max)
    at_full = _difference_constants(full_mat, rho, gamma_max, n_max)
    ratios = {}
    consistent = True
    for key, c_full in at_full.items():
        c_half = at_half[key]
        if c_full <= _TINY and c_half <= _TINY:
            ratio = 1.0
        elif c_half <= _TINY:
            ratio = math.inf
        else:
            ratio = c_full / c_half
        ratios[key] = ratio
        if not ratio < _STABLE_RATIO:
            consistent = False
    return SymbolMatrixReport(
        rho=rho,
        gamma_max=gamma_max,
        n_max=n_max,
        domain_cap=domain_cap,
        constants=at_full,
        ratios=ratios,
        consistent=consistent,
    )


def egorov_rotated_symbol(a, t, x, xi):
    """Compose a phase-space symbol with the classical rotation of angle t.

    Returns samples of a(x cos t + xi sin t, -x sin t + xi cos t) on the
    tensor grid; the supplied function is evaluated at the rotated points
    in closed form, never interpolated. Both axes must be symmetric about
    the origin.
    """
    t = float(t)
    x = np.asarray(x, dtype=np.float64)
    xi = np.asarray(xi, dtype=np.float64)
    for name, axis in (("x", x), ("xi", xi)):
        if axis.ndim != 1 or axis.size < 2:
            raise InvalidParameterError(name, "expected a 1-d grid with >= 2 points")
        scale = max(1.0, float(np.max(np.abs(axis))))
        if np.max(np.abs(axis + axis[::-1])) > 1e-12 * scale:
            raise InvalidParameterError(name, "grid must be symmetric about the origin")
    grid_x, grid_xi = np.meshgrid(x, xi, indexing="ij")
    c, s = math.cos(t), math.sin(t)
    vals = np.asarray(a(c * grid_x + s * grid_xi, -s * grid_x + c * grid_xi), dtype=np.float64)
    if vals.shape != grid_x.shape:
        raise InvalidParameterError("a", "function must map grids to grids elementwise")
    return vals
