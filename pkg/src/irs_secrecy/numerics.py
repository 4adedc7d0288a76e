"""Dense complex-Hermitian kernels used by all solvers.

Everything here is a pure function of its arguments. Matrices documented as
Hermitian are symmetrized on entry.
"""

import numpy as np

from .errors import InvalidInputError, NumericalError

HERMITIAN_TOL = 1e-10
PSD_TOL = 1e-9
PINV_RTOL = 1e-10
LN2 = np.log(2.0)


def _check_square(a):
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise InvalidInputError(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError("matrix has non-finite entries")
    return a


def symmetrize(a):
    """Return (A + A^H) / 2."""
    a = np.asarray(a)
    return 0.5 * (a + a.conj().T)


def hermitian_part(a, tol=HERMITIAN_TOL):
    """Check that `a` is Hermitian within `tol` (scaled by its magnitude) and symmetrize it."""
    a = _check_square(a)
    scale = max(1.0, float(np.max(np.abs(a))))
    if np.max(np.abs(a - a.conj().T)) > tol * scale:
        raise InvalidInputError("matrix is not Hermitian within tolerance")
    return symmetrize(a)


def logdet_psd_nats(a):
    """Natural-log determinant of a Hermitian positive-definite matrix."""
    a = hermitian_part(a)
    w = np.linalg.eigvalsh(a)
    if w[0] <= 0.0:
        raise NumericalError("log-determinant of a singular or indefinite matrix")
    return float(np.sum(np.log(w)))


def logdet_psd(a):
    """log2 det(A) for Hermitian PD `A`, in bits."""
    return logdet_psd_nats(a) / LN2


def logdet_pd_fast(a):
    """Natural-log determinant through Cholesky, no validation.

    Used in inner loops where the argument is PD by construction
    (identity plus a Gram matrix, or a noise covariance).
    """
    c = np.linalg.cholesky(symmetrize(a))
    return 2.0 * float(np.sum(np.log(np.real(np.diag(c)))))


def hermitian_eig(a):
    """Eigen-decomposition of a Hermitian matrix.

    Returns
    -------
    w : ndarray
        Eigenvalues in descending order.
    p : ndarray
        Unitary matrix whose columns are the matching eigenvectors.
    """
    a = hermitian_part(a)
    w, p = np.linalg.eigh(a)
    return w[::-1].copy(), p[:, ::-1].copy()


def shifted_pinv(a, lam):
    """Pseudo-inverse of A + lam*I for Hermitian PSD `A`.

    Eigenvalues of A + lam*I at or below PINV_RTOL times the largest one are
    treated as zero.
    """
    if not np.isfinite(lam) or lam < 0:
        raise InvalidInputError(f"shift must be a finite non-negative number, got {lam}")
    w, p = hermitian_eig(a)
    w = w + lam
    top = w[0] if w.size else 0.0
    if top <= 0.0:
        return np.zeros_like(p)
    keep = w > PINV_RTOL * top
    inv = np.zeros_like(w)
    inv[keep] = 1.0 / w[keep]
    return (p * inv) @ p.conj().T


def min_eig_ratio(a):
    """Smallest eigenvalue of Hermitian `a` divided by its spectral norm (0 for the zero matrix)."""
    w = np.linalg.eigvalsh(symmetrize(a))
    norm = max(abs(w[0]), abs(w[-1]))
    return 0.0 if norm == 0.0 else float(w[0] / norm)


def solve_pd(a, b):
    """Solve A X = B for Hermitian PD `A` via Cholesky."""
    c = np.linalg.cholesky(symmetrize(a))
    y = np.linalg.solve(c, b)
    return np.linalg.solve(c.conj().T, y)


def inv_pd(a):
    """Inverse of a Hermitian PD matrix, returned exactly Hermitian."""
    n = a.shape[0]
    return symmetrize(solve_pd(a, np.eye(n, dtype=complex)))
