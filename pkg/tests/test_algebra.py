import numpy as np
import pytest

from qcrb import algebra, liouvillian, model
from qcrb.errors import SingularMatrix


def test_solve_identity():
    b = np.array([1, 2, 3, 4], dtype=complex)
    x = algebra.solve_linear(np.eye(4), b)
    np.testing.assert_allclose(x, b, rtol=0, atol=1e-14)


def test_solve_diagonal():
    x = algebra.solve_linear(np.diag([2.0, 4.0]), np.array([2.0, 2.0]))
    np.testing.assert_allclose(x, [1.0, 0.5], atol=1e-14)


def test_solve_singular_raises():
    a = np.array([[1.0, 2.0], [2.0, 4.0]], dtype=complex)
    with pytest.raises(SingularMatrix):
        algebra.solve_linear(a, np.ones(2, dtype=complex))


def test_solve_steady_state_of_two_level():
    # Liouvillian with one row replaced by the trace functional; the
    # independent oracle is long-time integration of the master equation.
    m = model.two_level(0.0, 1.0, 0.5)
    sup = liouvillian.build_lindblad(m)
    a = sup.matrix.copy()
    a[0, :] = 0.0
    a[0, 0] = a[0, 3] = 1.0
    b = np.zeros(4, dtype=complex)
    b[0] = 1.0
    rho = liouvillian.unvec(algebra.solve_linear(a, b), 2)
    assert abs(rho[1, 1].real - 4.0 / 9.0) < 1e-12

    rho_long = liouvillian.unvec(
        algebra.propagate(sup.matrix, liouvillian.vec(np.diag([1.0, 0.0])), 200.0), 2)
    np.testing.assert_allclose(rho, rho_long, atol=1e-9)


@pytest.mark.parametrize("n", [8, 64, 256])
def test_solve_roundtrip_random(n):
    rng = np.random.default_rng(n)
    a = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
         + 3.0 * n ** 0.5 * np.eye(n))  # diagonally weighted: well-conditioned
    b = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    x = algebra.solve_linear(a, b)
    res = np.linalg.norm(a @ x - b)
    bound = 1e-10 * (np.linalg.norm(a, 2) * np.linalg.norm(x)
                     + np.linalg.norm(b))
    assert res <= bound


def test_eig_diagonal():
    dec = algebra.eig_general(np.diag([1.0, 2.0j, -3.0]))
    assert sorted(dec.eigenvalues, key=lambda z: (z.real, z.imag)) == \
        sorted([1.0, 2.0j, -3.0], key=lambda z: (z.real, z.imag))


def test_eig_defective_jordan_block():
    dec = algebra.eig_general(np.array([[0.0, 1.0], [0.0, 0.0]]))
    np.testing.assert_allclose(dec.eigenvalues, [0.0, 0.0], atol=1e-12)
    assert np.all(np.isfinite(dec.residual_norms))


def test_eig_residuals_small():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((12, 12)) + 1j * rng.standard_normal((12, 12))
    dec = algebra.eig_general(a)
    assert np.all(dec.residual_norms <= 1e-9 * np.linalg.norm(a, 2))


def _char_poly_roots(a):
    """Faddeev-LeVerrier characteristic polynomial, then polynomial roots."""
    n = a.shape[0]
    coeffs = [1.0 + 0j]
    mat = np.zeros_like(a)
    for k in range(1, n + 1):
        mat = a @ mat + coeffs[-1] * np.eye(n)
        coeffs.append(-np.trace(a @ mat) / k)
    return np.roots(coeffs)


def test_eig_two_level_liouvillian_vs_charpoly():
    m = model.two_level(0.0, 1.0, 0.5)
    a = liouvillian.build_lindblad(m).matrix
    dec = algebra.eig_general(a)
    got = np.sort_complex(dec.eigenvalues)
    want = np.sort_complex(_char_poly_roots(a))
    np.testing.assert_allclose(got, want, atol=1e-8)
    # unique zero, all others strictly damped
    zero = np.abs(dec.eigenvalues) < 1e-10
    assert zero.sum() == 1
    assert np.all(dec.eigenvalues.real[~zero] <= -0.2)


def test_eig_invariant_under_unitary_similarity():
    rng = np.random.default_rng(11)
    a = rng.standard_normal((9, 9)) + 1j * rng.standard_normal((9, 9))
    q, _ = np.linalg.qr(rng.standard_normal((9, 9))
                        + 1j * rng.standard_normal((9, 9)))
    v1 = np.sort_complex(algebra.eig_general(a).eigenvalues)
    v2 = np.sort_complex(algebra.eig_general(q @ a @ q.conj().T).eigenvalues)
    np.testing.assert_allclose(v1, v2, atol=1e-8)


def test_propagate_zero_generator():
    v = np.array([1.0, 2.0j, -1.0])
    np.testing.assert_array_equal(algebra.propagate(np.zeros((3, 3)), v, 7.0), v)


def test_propagate_scalar_decay():
    out = algebra.propagate(np.array([[-1.0]]), np.array([1.0]), 1.0)
    assert abs(out[0] - np.exp(-1.0)) < 1e-12


def test_propagate_to_steady_state():
    m = model.two_level(0.0, 1.0, 0.5)
    sup = liouvillian.build_lindblad(m)
    v0 = liouvillian.vec(np.diag([1.0, 0.0]))
    rho = liouvillian.unvec(algebra.propagate(sup.matrix, v0, 50.0), 2)
    assert abs(rho[1, 1].real - 4.0 / 9.0) < 1e-6


def test_propagate_semigroup():
    rng = np.random.default_rng(5)
    a = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    a -= 2.0 * np.eye(6)  # keep norms tame
    v = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    direct = algebra.propagate(a, v, 1.7)
    stepped = algebra.propagate(a, algebra.propagate(a, v, 0.9), 0.8)
    assert np.linalg.norm(direct - stepped) <= 1e-7 * np.linalg.norm(direct)
