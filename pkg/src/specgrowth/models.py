"""Builders for the three concrete model families.

All three ladders have exact integer gaps, so the rotating-frame
potential is 2*pi-periodic for each of them:

* harmonic: lambda_n = n + 1/2 on the half-line ladder, tridiagonal
  nearest-neighbour coupling of strength delta.
* halfwave: lambda_j = |j| + shift on torus Fourier modes, coupling by
  multiplication with a real trigonometric polynomial v.
* zoll-surrogate: the halfwave coupling with the corrected ladder
  lambda_j = |j| (lambda_0 = 1) standing in for sqrt(j^2 + m^2); the
  difference is kept as a diagonal corrector of order -1.

Torus modes are stored interleaved, j = 0, +1, -1, +2, -2, ..., so the
ladder is nondecreasing and output ordering is deterministic.
"""

from __future__ import annotations

import math

import numpy as np

from .core import (
    BandedHermitian,
    EigenLadder,
    PropagationStrategy,
    SpectralModel,
)
from .errors import InvalidParameterError

_SYMMETRY_TOL = 1e-12


def cosine_potential(amplitude):
    """Fourier coefficients of v(x) = 2*amplitude*cos(x).

    Returned two-sided, ordered vhat_{-1}, vhat_0, vhat_{+1}.
    """
    amplitude = float(amplitude)
    return np.array([amplitude, 0.0, amplitude], dtype=np.complex128)


def build_harmonic(n_modes, delta):
    """Half-line ladder n + 1/2 with tridiagonal coupling of strength delta.

    The coupling acts as A e_0 = delta e_1 and
    A e_n = delta (e_{n+1} + e_{n-1}) for interior n. It is the Dirichlet
    nearest-neighbour matrix scaled by delta, diagonalized exactly by the
    type-I discrete sine transform with eigenvalues
    2 delta cos(pi k / (N+1)), k = 1..N.
    """
    n_modes = int(n_modes)
    if n_modes < 8:
        raise InvalidParameterError("n_modes", "need at least 8 modes")
    delta = float(delta)
    if not math.isfinite(delta) or delta == 0.0:
        raise InvalidParameterError("delta", "must be finite and nonzero")
    ladder = EigenLadder(np.arange(n_modes) + 0.5, exact_gaps=True)
    coupling = BandedHermitian(
        n_modes,
        {
            0: np.zeros(n_modes),
            1: np.full(n_modes - 1, delta, dtype=np.complex128),
        },
    )
    return SpectralModel(
        name="harmonic",
        ladder=ladder,
        coupling=coupling,
        strategy=PropagationStrategy.SINE_DIAGONAL,
        lambda_shift=0.5,
        params={"delta": delta, "n_modes": n_modes},
    )


def interleaved_modes(j_max):
    """Signed Fourier indices in storage order 0, +1, -1, ..., +J, -J."""
    j_max = int(j_max)
    jj = np.zeros(2 * j_max + 1, dtype=np.int64)
    jj[1::2] = np.arange(1, j_max + 1)
    jj[2::2] = -np.arange(1, j_max + 1)
    return jj


def _validated_coeffs(potential_coeffs, j_max):
    coeffs = np.asarray(potential_coeffs, dtype=np.complex128)
    if coeffs.ndim != 1 or coeffs.size % 2 == 0:
        raise InvalidParameterError(
            "potential_coeffs",
            "expected a two-sided sequence of odd length vhat_{-b}..vhat_{+b}",
        )
    half_band = coeffs.size // 2
    if half_band < 1:
        raise InvalidParameterError("potential_coeffs", "potential must have a nonzero band")
    if half_band > j_max:
        raise InvalidParameterError(
            "potential_coeffs", f"band {half_band} exceeds the mode cutoff {j_max}"
        )
    scale = max(1.0, float(np.max(np.abs(coeffs))))
    mirrored = np.conj(coeffs[::-1])
    if np.max(np.abs(coeffs - mirrored)) > _SYMMETRY_TOL * scale:
        raise InvalidParameterError(
            "potential_coeffs",
            "broken conjugate symmetry: the potential is not real-valued",
        )
    if np.max(np.abs(coeffs[half_band + 1 :])) == 0.0:
        raise InvalidParameterError(
            "potential_coeffs", "constant potential has no gradient and drives no growth"
        )
    return coeffs, half_band


def _multiplication_operator(jj, coeffs, half_band, j_max):
    """Matrix of multiplication by v on 2J+1 grid points, in storage order.

    Mode couplings wrap around the Fourier circle (the matrix is the
    exact operator of pointwise grid multiplication), and every coupling,
    corners included, sits within storage bandwidth 2*half_band.
    """
    n = jj.size
    bands = {0: np.full(n, coeffs[half_band])}
    for k in range(1, 2 * half_band + 1):
        d = jj[: n - k] - jj[k:]
        alias = ((d + j_max) % n) - j_max
        vals = np.zeros(n - k, dtype=np.complex128)
        inside = np.abs(alias) <= half_band
        vals[inside] = coeffs[half_band + alias[inside]]
        bands[k] = vals
    return BandedHermitian(n, bands)


def _grid_values(coeffs, half_band, n):
    spectrum = np.zeros(n, dtype=np.complex128)
    for ell in range(-half_band, half_band + 1):
        spectrum[ell % n] = coeffs[half_band + ell]
    values = np.fft.ifft(spectrum) * n
    if np.max(np.abs(values.imag)) > _SYMMETRY_TOL * max(1.0, np.max(np.abs(values))):
        raise InvalidParameterError("potential_coeffs", "potential is not real on the grid")
    return values.real.copy()


def build_halfwave(j_max, shift, potential_coeffs):
    """Torus ladder |j| + shift with multiplication coupling.

    potential_coeffs are the two-sided Fourier coefficients of a real,
    non-constant v with finite band; shift > 0 keeps the ladder positive.
    """
    j_max = int(j_max)
    if j_max < 4:
        raise InvalidParameterError("j_max", "need at least 4 positive modes")
    shift = float(shift)
    if not (math.isfinite(shift) and shift > 0.0):
        raise InvalidParameterError("shift", "must be positive")
    coeffs, half_band = _validated_coeffs(potential_coeffs, j_max)
    jj = interleaved_modes(j_max)
    n = jj.size
    ladder = EigenLadder(np.abs(jj) + shift, exact_gaps=True)
    coupling = _multiplication_operator(jj, coeffs, half_band, j_max)
    return SpectralModel(
        name="halfwave",
        ladder=ladder,
        coupling=coupling,
        strategy=PropagationStrategy.GRID_MULTIPLICATION,
        lambda_shift=shift,
        params={"lambda": shift, "j_max": j_max, "half_band": half_band},
        mode_index=jj,
        grid_potential=_grid_values(coeffs, half_band, n),
    )


def build_zoll_surrogate(j_max, mass, potential_coeffs):
    """Corrected torus ladder standing in for sqrt(j^2 + mass^2).

    The corrected eigenvalues are lambda_j = |j| for j != 0 and
    lambda_0 = 1, so gaps are exact integers and positivity holds. The
    diagonal corrector q_j = lambda_j - sqrt(j^2 + mass^2) is exposed on
    the model; it decays like -mass^2 / (2|j|). The coupling matches
    build_halfwave for identical potential_coeffs.
    """
    j_max = int(j_max)
    if j_max < 4:
        raise InvalidParameterError("j_max", "need at least 4 positive modes")
    mass = float(mass)
    if not (math.isfinite(mass) and mass > 0.0):
        raise InvalidParameterError("mass", "must be positive")
    coeffs, half_band = _validated_coeffs(potential_coeffs, j_max)
    jj = interleaved_modes(j_max)
    n = jj.size
    corrected = np.abs(jj).astype(np.float64)
    corrected[0] = 1.0
    raw = np.sqrt(jj.astype(np.float64) ** 2 + mass * mass)
    ladder = EigenLadder(corrected, exact_gaps=True)
    coupling = _multiplication_operator(jj, coeffs, half_band, j_max)
    return SpectralModel(
        name="zoll-surrogate",
        ladder=ladder,
        coupling=coupling,
        strategy=PropagationStrategy.GRID_MULTIPLICATION,
        lambda_shift=0.0,
        params={"mass": mass, "j_max": j_max, "half_band": half_band},
        mode_index=jj,
        grid_potential=_grid_values(coeffs, half_band, n),
        corrector=corrected - raw,
    )
