"""Dense complex linear algebra on small Hilbert spaces.

Operators are plain ``numpy`` complex arrays. Composite spaces are described
by a tuple of local dimensions, first factor slowest (``np.kron`` order).
"""

from typing import Sequence

import numpy as np

from .errors import InvalidInputError, NumericalError

HERMITIAN_RTOL = 1e-10


def as_cmatrix(a) -> np.ndarray:
    """Validate ``a`` as a finite square complex matrix and return a copy."""
    m = np.array(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise InvalidInputError(f"expected a non-empty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidInputError("matrix has non-finite entries")
    return m


def check_dims(dims: Sequence[int], size: int = None) -> tuple:
    dims = tuple(int(d) for d in dims)
    if not dims or any(d < 2 for d in dims):
        raise InvalidInputError(f"local dimensions must all be >= 2, got {dims}")
    if size is not None and int(np.prod(dims)) != size:
        raise InvalidInputError(f"dims {dims} do not multiply to matrix dimension {size}")
    return dims


def hermitian_part(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.conj().T)


def _require_hermitian(a: np.ndarray) -> np.ndarray:
    a = as_cmatrix(a)
    scale = np.max(np.abs(a))
    dev = np.max(np.abs(a - a.conj().T))
    if dev > HERMITIAN_RTOL * max(scale, 1.0):
        raise InvalidInputError(f"matrix is not Hermitian (deviation {dev:.3e})")
    return hermitian_part(a)


def kron(a, b) -> np.ndarray:
    return np.kron(as_cmatrix(a), as_cmatrix(b))


def partial_trace(rho, dims: Sequence[int], keep) -> np.ndarray:
    """Trace out every factor not listed in ``keep``.

    Kept factors appear in ascending order in the result.
    """
    rho = as_cmatrix(rho)
    dims = check_dims(dims, rho.shape[0])
    keep = sorted(set(int(k) for k in keep))
    if not keep or keep[0] < 0 or keep[-1] >= len(dims):
        raise InvalidInputError(f"invalid subsystem selection {keep} for {len(dims)} factors")
    n = len(dims)
    if len(keep) == n:
        return rho.copy()
    t = rho.reshape(dims + dims)
    # contract each traced row index against its column index
    row = list(range(n))
    col = [i + n if i in keep else i for i in range(n)]
    out = [i for i in keep] + [i + n for i in keep]
    red = np.einsum(t, row + col, out)
    d = int(np.prod([dims[i] for i in keep]))
    return red.reshape(d, d)


def partial_transpose(rho, dims: Sequence[int], subsystem: int) -> np.ndarray:
    rho = as_cmatrix(rho)
    dims = check_dims(dims, rho.shape[0])
    if not 0 <= subsystem < len(dims):
        raise InvalidInputError(f"subsystem index {subsystem} out of range")
    n = len(dims)
    t = rho.reshape(dims + dims)
    axes = list(range(2 * n))
    axes[subsystem], axes[subsystem + n] = axes[subsystem + n], axes[subsystem]
    return t.transpose(axes).reshape(rho.shape)


def herm_eig(a):
    """Eigen-decomposition of a Hermitian matrix.

    Returns ascending real eigenvalues and the unitary matrix of eigenvectors
    (columns). Inputs within round-off of Hermitian are symmetrised first.
    """
    h = _require_hermitian(a)
    w, v = np.linalg.eigh(h)
    return w, v


def expm_unitary(h, t: float) -> np.ndarray:
    """``exp(-i h t)`` for Hermitian ``h`` (rad/s) and time ``t`` (s)."""
    w, v = herm_eig(h)
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def general_eig(a):
    """Eigenvalues and right eigenvectors of an arbitrary square matrix.

    Output is sorted by real part, then imaginary part, so identical inputs
    always give identical ordering.
    """
    a = as_cmatrix(a)
    try:
        w, v = np.linalg.eig(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver failed to converge for a {a.shape[0]}x{a.shape[0]} matrix: {exc}") from exc
    order = np.lexsort((np.round(w.imag, 12), np.round(w.real, 12)))
    return w[order], v[:, order]


def trace_norm(a) -> float:
    w, _ = herm_eig(a)
    return float(np.sum(np.abs(w)))
