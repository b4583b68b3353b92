"""States, ladders, banded operators, norms, and the rotating-frame potential."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specgrowth import (
    BandedHermitian,
    DimensionMismatchError,
    EigenLadder,
    InvalidParameterError,
    QuantumState,
    StrategyError,
    apply_hamiltonian,
    conjugated_potential,
    sobolev_norm,
)
from conftest import DELTA, make_diagonal_stub, random_unit_state


# ---------------------------------------------------------------- states


def test_state_rejects_short_and_nonfinite():
    with pytest.raises(InvalidParameterError):
        QuantumState(np.array([1.0 + 0j]))
    with pytest.raises(InvalidParameterError):
        QuantumState(np.array([1.0, np.nan], dtype=complex))
    with pytest.raises(InvalidParameterError):
        QuantumState(np.array([[1.0, 0.0], [0.0, 1.0]], dtype=complex))


def test_state_coeffs_are_read_only():
    st_ = QuantumState(np.array([1.0, 0.0], dtype=complex))
    with pytest.raises(ValueError):
        st_.coeffs[0] = 2.0


def test_state_norm():
    st_ = QuantumState(np.array([3.0, 4.0], dtype=complex))
    assert st_.norm() == pytest.approx(5.0, abs=1e-15)


def test_model_state_checks_length(harmonic64):
    with pytest.raises(DimensionMismatchError):
        harmonic64.state(np.zeros(5, dtype=complex))


def test_foreign_basis_tag_rejected(harmonic64, halfwave32):
    psi = halfwave32.basis_state(0)
    with pytest.raises(DimensionMismatchError):
        sobolev_norm(psi, harmonic64, 1.0)


# ---------------------------------------------------------------- ladders


def test_ladder_rejects_nonpositive_and_decreasing():
    with pytest.raises(InvalidParameterError):
        EigenLadder(np.array([0.0, 1.0]))
    with pytest.raises(InvalidParameterError):
        EigenLadder(np.array([2.0, 1.0]))


def test_ladder_exact_gaps_flag():
    EigenLadder(np.array([0.5, 1.5, 3.5]), exact_gaps=True)
    with pytest.raises(InvalidParameterError):
        EigenLadder(np.array([0.5, 1.7]), exact_gaps=True)


# ---------------------------------------------------------------- banded storage


def test_banded_entry_and_dense_agree():
    n = 6
    rng = np.random.default_rng(3)
    diag = rng.normal(size=n)
    sup1 = rng.normal(size=n - 1) + 1j * rng.normal(size=n - 1)
    op = BandedHermitian(n, {0: diag, 1: sup1})
    dense = op.to_dense()
    for i in range(n):
        for j in range(n):
            assert op.entry(i, j) == pytest.approx(dense[i, j], abs=1e-15)
    assert np.max(np.abs(dense - dense.conj().T)) == 0.0


def test_banded_matvec_matches_dense():
    n = 17
    rng = np.random.default_rng(5)
    op = BandedHermitian(
        n,
        {
            0: rng.normal(size=n),
            1: rng.normal(size=n - 1) + 1j * rng.normal(size=n - 1),
            2: rng.normal(size=n - 2) + 1j * rng.normal(size=n - 2),
        },
    )
    x = rng.normal(size=n) + 1j * rng.normal(size=n)
    assert np.allclose(op.matvec(x), op.to_dense() @ x, atol=1e-13)


def test_banded_rejects_complex_diagonal():
    with pytest.raises(InvalidParameterError):
        BandedHermitian(4, {0: np.array([1j, 0, 0, 0])})


def test_banded_from_dense_roundtrip():
    n = 9
    rng = np.random.default_rng(11)
    m = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    m = np.triu(m, 1)
    m = m + m.conj().T + np.diag(rng.normal(size=n))
    m[np.abs(np.subtract.outer(np.arange(n), np.arange(n))) > 2] = 0.0
    op = BandedHermitian.from_dense(m)
    assert op.bandwidth == 2
    assert np.allclose(op.to_dense(), m, atol=1e-15)
    with pytest.raises(InvalidParameterError):
        BandedHermitian.from_dense(np.array([[0.0, 1.0], [0.5, 0.0]]))


def test_norm_bound_dominates_operator_norm():
    n = 24
    rng = np.random.default_rng(2)
    op = BandedHermitian(
        n, {0: rng.normal(size=n), 1: rng.normal(size=n - 1) + 1j * rng.normal(size=n - 1)}
    )
    spectral = np.max(np.abs(np.linalg.eigvalsh(op.to_dense())))
    assert op.norm_bound() >= spectral - 1e-12


# ---------------------------------------------------------------- sobolev norms


def test_sobolev_single_mode(harmonic64):
    # e_3 has ladder value 3.5, so the order-1 norm is exactly 3.5
    assert sobolev_norm(harmonic64.basis_state(3), harmonic64, 1.0) == pytest.approx(
        3.5, abs=1e-14
    )


def test_sobolev_mixed_state(harmonic64):
    c = np.zeros(64, dtype=complex)
    c[0] = c[1] = 1.0 / math.sqrt(2.0)
    expected = math.sqrt((0.5**4 + 1.5**4) / 2.0)  # 1.6007810...
    got = sobolev_norm(harmonic64.state(c), harmonic64, 2.0)
    assert got == pytest.approx(expected, rel=1e-14)
    assert got == pytest.approx(1.600781, abs=5e-7)


def test_sobolev_r_zero_is_euclidean(harmonic64):
    psi = random_unit_state(harmonic64, seed=1)
    assert sobolev_norm(psi, harmonic64, 0.0) == pytest.approx(1.0, abs=1e-14)


def test_sobolev_rejects_negative_r(harmonic64):
    with pytest.raises(InvalidParameterError):
        sobolev_norm(harmonic64.basis_state(0), harmonic64, -1.0)


def test_sobolev_monotone_in_r_when_ladder_above_one(zoll32):
    # the corrected torus ladder starts at 1, so higher orders weigh more
    assert np.min(zoll32.ladder.values) >= 1.0
    psi = random_unit_state(zoll32, seed=4)
    norms = [sobolev_norm(psi, zoll32, r) for r in (0.0, 0.5, 1.0, 2.0)]
    assert all(b >= a - 1e-13 for a, b in zip(norms, norms[1:]))


def test_sobolev_accepts_real_noninteger_r(harmonic64):
    psi = harmonic64.basis_state(5)
    assert sobolev_norm(psi, harmonic64, 0.5) == pytest.approx(math.sqrt(5.5), rel=1e-14)


# ---------------------------------------------------------------- conjugated potential


def test_potential_at_zero_equals_coupling(harmonic64):
    v = conjugated_potential(harmonic64, 0.0)
    a = harmonic64.coupling
    for k in range(a.bandwidth + 1):
        assert np.array_equal(v.band(k), a.band(k))


def test_potential_entry_phase(harmonic64):
    # gap between modes 1 and 0 is exactly 1, so entry (1,0) is delta*exp(-it)
    t = 0.83
    v = conjugated_potential(harmonic64, t)
    assert v.entry(1, 0) == pytest.approx(DELTA * np.exp(-1j * t), abs=1e-15)
    assert v.entry(0, 1) == pytest.approx(DELTA * np.exp(1j * t), abs=1e-15)


def test_potential_is_hermitian(all_models):
    for model in all_models.values():
        v = conjugated_potential(model, 2.137)
        dense = v.to_dense()
        assert np.max(np.abs(dense - dense.conj().T)) <= 1e-14


@settings(max_examples=100, deadline=None)
@given(t=st.floats(min_value=0.0, max_value=100.0, allow_nan=False))
def test_potential_periodicity_harmonic(t):
    from conftest import DELTA
    from specgrowth import build_harmonic

    model = build_harmonic(16, DELTA)
    v1 = conjugated_potential(model, t)
    v2 = conjugated_potential(model, t + 2.0 * math.pi)
    dev = max(
        float(np.max(np.abs(v1.band(k) - v2.band(k)))) for k in range(v1.bandwidth + 1)
    )
    assert dev <= 1e-12


def test_potential_periodicity_all_models(all_models):
    rng = np.random.default_rng(17)
    for model in all_models.values():
        for t in rng.uniform(0.0, 100.0, size=100):
            v1 = conjugated_potential(model, t)
            v2 = conjugated_potential(model, t + 2.0 * math.pi)
            dev = max(
                float(np.max(np.abs(v1.band(k) - v2.band(k))))
                for k in range(v1.bandwidth + 1)
            )
            assert dev <= 1e-12


def test_potential_same_bandwidth(all_models):
    for model in all_models.values():
        v = conjugated_potential(model, 1.0)
        assert v.bandwidth == model.coupling.bandwidth


# ---------------------------------------------------------------- hamiltonian action


def test_hamiltonian_on_ground_state(harmonic64):
    out = apply_hamiltonian(harmonic64, harmonic64.basis_state(0), 0.0)
    expected = np.zeros(64, dtype=complex)
    expected[0] = 0.5
    expected[1] = DELTA
    assert np.allclose(out.coeffs, expected, atol=1e-15)


def test_hamiltonian_zero_coupling_is_diagonal():
    stub = make_diagonal_stub(16)
    psi = random_unit_state(stub, seed=9)
    out = apply_hamiltonian(stub, psi, 3.0)
    assert np.allclose(out.coeffs, stub.ladder.values * psi.coeffs, atol=1e-15)


def test_hamiltonian_quadratic_form_is_real(all_models):
    for model in all_models.values():
        psi = random_unit_state(model, seed=13)
        h_psi = apply_hamiltonian(model, psi, 1.41)
        form = np.vdot(psi.coeffs, h_psi.coeffs)
        assert abs(form.imag) <= 1e-14


def test_hamiltonian_dimension_mismatch(harmonic64, halfwave32):
    with pytest.raises(DimensionMismatchError):
        apply_hamiltonian(harmonic64, halfwave32.basis_state(0), 0.0)


# ---------------------------------------------------------------- strategy validation


def test_sine_strategy_needs_constant_tridiagonal():
    from specgrowth import PropagationStrategy, SpectralModel

    n = 8
    ladder = EigenLadder(np.arange(n) + 0.5, exact_gaps=True)
    bad = BandedHermitian(n, {1: np.arange(1, n, dtype=float)})
    with pytest.raises(StrategyError):
        SpectralModel(
            name="bad",
            ladder=ladder,
            coupling=bad,
            strategy=PropagationStrategy.SINE_DIAGONAL,
            lambda_shift=0.5,
        )
