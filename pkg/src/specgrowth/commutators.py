"""Iterated commutator calculus for the truncated models.

With ad_A(B) = A B - B A, the driven norm admits a terminating Lie
expansion whenever some power of ad_A kills the ladder:

    ||psi(t)||_r^2 = sum_{M=0}^{2 r N*} (i t)^M / M! <ad_A^M(K0^{2r}) psi0, psi0>

where N* is the least order with ad_A^{N*+1}(K0) = 0. Truncation breaks
the identities within bandwidth * order of the boundary, so every
assertion here restricts to an interior row window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse

from .core import check_state
from .errors import (
    DegenerateStateError,
    ExpansionMismatchError,
    InvalidParameterError,
    SupportWindowError,
)

_REL_TOL = 1e-10
_ZERO_TOL = 1e-12


def _coupling_sparse(model):
    return model.coupling.as_sparse()


def _base_operator(model, use_surrogate):
    if use_surrogate:
        if model.mode_index is None:
            raise InvalidParameterError(
                "use_surrogate", "model carries no signed mode index"
            )
        diag = model.mode_index.astype(np.float64)
    else:
        diag = model.ladder.values
    return scipy.sparse.diags(diag.astype(np.complex128), format="csr")


def _bracket(a, b):
    return (a @ b - b @ a).tocsr()


def _interior_abs_max(mat, lo, hi):
    sub = mat[lo : hi + 1]
    if sub.nnz == 0:
        return 0.0
    return float(np.max(np.abs(sub.data)))


def _window(model, order):
    b = model.coupling.bandwidth
    n = model.n_modes
    if order * b >= n / 4:
        raise InvalidParameterError(
            "order",
            f"window exhausted: order {order} with bandwidth {b} needs more than "
            f"{n} modes",
        )
    return b * order, n - 1 - b * order


def iterated_commutator(model, j, *, use_surrogate=False):
    """ad_A^j applied to the ladder (or to the signed-index surrogate).

    Returns a sparse matrix, exact for the truncated operators; rows
    within bandwidth * j of either end carry truncation artifacts and are
    outside every identity asserted on the result.
    """
    j = int(j)
    if j < 0:
        raise InvalidParameterError("j", "must be >= 0")
    _window(model, max(j, 1))
    a = _coupling_sparse(model)
    term = _base_operator(model, use_surrogate)
    for _ in range(j):
        term = _bracket(a, term)
    return term


@dataclass(frozen=True, eq=False)
class CommutatorChain:
    """ad_A^0(K0) .. ad_A^jmax(K0) with the clean interior row window.

    Terms alternate Hermitian (even order) and anti-Hermitian (odd
    order); multiplying the j-th term by i^j would make all Hermitian.
    """

    terms: tuple
    interior_lo: int
    interior_hi: int
    bandwidth: int
    jmax: int

    @classmethod
    def build(cls, model, jmax, use_surrogate=False):
        jmax = int(jmax)
        if jmax < 0:
            raise InvalidParameterError("jmax", "must be >= 0")
        lo, hi = _window(model, max(jmax, 1))
        a = _coupling_sparse(model)
        terms = [_base_operator(model, use_surrogate)]
        for _ in range(jmax):
            terms.append(_bracket(a, terms[-1]))
        return cls(
            terms=tuple(terms),
            interior_lo=lo,
            interior_hi=hi,
            bandwidth=model.coupling.bandwidth,
            jmax=jmax,
        )

    def interior_max_abs(self, j):
        return _interior_abs_max(self.terms[j], self.interior_lo, self.interior_hi)


@dataclass(frozen=True)
class NilpotencyReport:
    """Outcome of the nilpotency scan.

    n_star is the least order whose successor commutator vanishes on
    interior rows, or None if no order up to n_max qualifies. commutes
    flags the no-growth case [A, K0'] = 0.
    """

    n_star: Optional[int]
    commutes: bool
    surrogate_used: bool
    residuals: tuple
    n_max: int


def verify_nilpotency(model, n_max=4, use_surrogate=None):
    """Scan for the least N* with ad_A^(N*+1)(K0') = 0 on interior rows.

    For torus models K0' defaults to the signed-index diagonal D: the
    ladder |j| + shift itself is not killed near j = 0, while D is and
    defines equivalent norms away from the central mode. The harmonic
    model uses its ladder directly.
    """
    n_max = int(n_max)
    if n_max < 1:
        raise InvalidParameterError("n_max", "must be >= 1")
    if use_surrogate is None:
        use_surrogate = model.mode_index is not None
    lo, hi = _window(model, n_max + 1)
    a = _coupling_sparse(model)
    term = _base_operator(model, use_surrogate)
    residuals = []
    for _ in range(n_max + 1):
        term = _bracket(a, term)
        residuals.append(_interior_abs_max(term, lo, hi))
    scale = max(1.0, max(residuals))
    n_star = None
    for i, res in enumerate(residuals):
        if res <= _ZERO_TOL * scale:
            n_star = i
            break
    return NilpotencyReport(
        n_star=n_star,
        commutes=(n_star == 0),
        surrogate_used=bool(use_surrogate),
        residuals=tuple(residuals),
        n_max=n_max,
    )


def _compositions(total, parts):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def _multinomial(total, parts):
    coef = math.factorial(total)
    for k in parts:
        coef //= math.factorial(k)
    return coef


def expand_ad_power(model, m, r):
    """ad_A^m(K0^{2r}) evaluated two ways and cross-checked.

    Route one commutes m times against the diagonal K0^{2r}; route two
    sums multinomially weighted products of the ad_A^k(K0) chain. The
    routes must agree to 1e-10 relative on interior rows; route one is
    returned.
    """
    m = int(m)
    r = int(r)
    if m < 0:
        raise InvalidParameterError("m", "must be >= 0")
    if r < 1:
        raise InvalidParameterError("r", "must be a positive integer")
    b = model.coupling.bandwidth
    n = model.n_modes
    if 2 * r * m * b >= n / 4:
        raise InvalidParameterError(
            "m", f"window exhausted: 2*r*m*bandwidth = {2 * r * m * b} must stay below n/4"
        )
    a = _coupling_sparse(model)
    lam = model.ladder.values
    direct = scipy.sparse.diags(
        np.power(lam, 2.0 * r).astype(np.complex128), format="csr"
    )
    for _ in range(m):
        direct = _bracket(a, direct)
    chain = CommutatorChain.build(model, m)
    total = None
    for parts in _compositions(m, 2 * r):
        prod = chain.terms[parts[0]]
        for k in parts[1:]:
            prod = prod @ chain.terms[k]
        prod = _multinomial(m, parts) * prod
        total = prod if total is None else total + prod
    total = total.tocsr()
    w = 2 * m * b + 2 * b
    lo, hi = w, n - 1 - w
    if lo > hi:
        raise InvalidParameterError("m", "interior comparison window is empty")
    direct_max = _interior_abs_max(direct, lo, hi)
    sum_max = _interior_abs_max(total, lo, hi)
    diff_max = _interior_abs_max((direct - total).tocsr(), lo, hi)
    scale = max(direct_max, sum_max)
    rel = diff_max / scale if scale > 0.0 else diff_max
    if rel > _REL_TOL:
        raise ExpansionMismatchError(
            f"iterated and multinomial routes differ by {rel:.3e} relative "
            f"on rows {lo}..{hi} (m = {m}, r = {r})"
        )
    return direct


def _integer_order(r, minimum):
    rf = float(r)
    if not (math.isfinite(rf) and rf >= minimum and rf == int(rf)):
        raise InvalidParameterError("r", f"must be an integer >= {minimum}")
    return int(rf)


def _quadratic_form(mat, coeffs):
    y = mat @ coeffs
    terms = y * np.conj(coeffs)
    return complex(math.fsum(terms.real), math.fsum(terms.imag))


def _support_window(model, psi0, degree):
    b = model.coupling.bandwidth
    w = degree * b + 4 * b
    idx = np.nonzero(np.abs(psi0.coeffs))[0]
    if idx.size == 0:
        return None
    if idx[0] < w or idx[-1] > model.n_modes - 1 - w:
        raise SupportWindowError(
            f"initial support must stay at least {w} positions away from both "
            f"ends of the {model.n_modes}-mode basis"
        )
    return w


def _polynomial_coefficients(model, psi0, r, degree):
    a = _coupling_sparse(model)
    lam = model.ladder.values
    term = scipy.sparse.diags(
        np.power(lam, 2.0 * r).astype(np.complex128), format="csr"
    )
    coeffs = []
    for m in range(degree + 1):
        coeffs.append(_quadratic_form(term, psi0.coeffs))
        if m < degree:
            term = _bracket(a, term)
    return coeffs


def _nilpotency_order(model):
    report = verify_nilpotency(model, n_max=4)
    if report.n_star is None:
        raise InvalidParameterError(
            "model", "no nilpotency order found up to 4; the polynomial form does not apply"
        )
    return report.n_star


def lie_norm_expansion(model, psi0, r, t):
    """The terminating polynomial equal to ||psi(t)||_r^2 before truncation.

    Requires the initial support to sit in the interior window so no
    coefficient touches boundary-corrupted rows. Output is real; the
    imaginary residue is checked below 1e-12 relative.
    """
    check_state(model, psi0)
    r = _integer_order(r, 0)
    t = float(t)
    if not math.isfinite(t):
        raise InvalidParameterError("t", "must be finite")
    absq = psi0.coeffs.real ** 2 + psi0.coeffs.imag ** 2
    if r == 0:
        return math.fsum(absq)
    n_star = _nilpotency_order(model)
    degree = 2 * r * n_star
    if _support_window(model, psi0, degree) is None:
        return 0.0
    cm = _polynomial_coefficients(model, psi0, r, degree)
    total = 0j
    for m, c in enumerate(cm):
        total += (1j * t) ** m / math.factorial(m) * c
    if abs(total.imag) > 1e-12 * max(1.0, abs(total.real)):
        raise ExpansionMismatchError(
            f"imaginary residue {total.imag:.3e} in a real-valued expansion"
        )
    return total.real


def growth_lower_constant(model, psi0, r):
    """Leading coefficient c* of the norm polynomial: ||psi(t)||_r^2 / t^(2 r N*) -> c*.

    Requires the top commutator not to annihilate psi0 (checked before
    the support window so kernel states are reported as degenerate, not
    as support violations). c* is nonnegative and vanishes exactly in the
    degenerate case.
    """
    check_state(model, psi0)
    r = _integer_order(r, 1)
    n_star = _nilpotency_order(model)
    degree = 2 * r * n_star
    top = iterated_commutator(model, n_star)
    y = psi0.coeffs
    for _ in range(r):
        y = top @ y
    row_norm = (
        float(np.max(np.asarray(np.abs(top).sum(axis=1)))) if top.nnz else 0.0
    )
    gauge = max(row_norm, 1e-30) ** r * psi0.norm()
    if float(np.linalg.norm(y)) <= 1e-12 * gauge:
        raise DegenerateStateError(
            "initial state is annihilated by the r-th power of the top "
            "commutator; the growth lower bound degenerates"
        )
    if n_star > 0 and _support_window(model, psi0, degree) is None:
        raise DegenerateStateError("initial state is zero")
    cm = _polynomial_coefficients(model, psi0, r, degree)
    lead = (1j) ** degree * cm[degree] / math.factorial(degree)
    if abs(lead.imag) > 1e-12 * max(1.0, abs(lead.real)):
        raise ExpansionMismatchError(
            f"imaginary residue {lead.imag:.3e} in the leading coefficient"
        )
    c_star = lead.real
    if c_star < 0.0:
        if c_star < -1e-10 * max(1.0, abs(cm[degree])):
            raise ExpansionMismatchError(
                f"leading coefficient {c_star:.3e} violates positivity"
            )
        c_star = 0.0
    return c_star
