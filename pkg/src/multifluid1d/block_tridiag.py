"""Block Thomas elimination for block-tridiagonal linear systems.

Solves A x = b where A has N x N blocks on three diagonals:

    | D[0]  U[0]                     |
    | L[1]  D[1]  U[1]               |
    |       L[2]  D[2]  U[2]         |
    |             ...                |
    |                  L[m-1] D[m-1] |

L[0] and U[m-1] are ignored.  Forward elimination factors each pivot with a
dense LU solve (N is small), then back substitution recovers the unknowns.
"""

from __future__ import annotations

import numpy as np


def block_thomas(sub: np.ndarray, diag: np.ndarray, sup: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve a block-tridiagonal system.

    sub, diag, sup: (m, N, N) block arrays, rhs: (m, N).  Returns x of shape
    (m, N).  Raises numpy.linalg.LinAlgError on a singular pivot, which for
    the solvers in this package indicates an internal error (their systems
    are nonsingular by construction).
    """
    m, n = rhs.shape
    if m < 2:
        raise ValueError("block_thomas needs at least two block rows")
    gain = np.empty((m - 1, n, n))
    carry = np.empty((m, n))
    aug = np.empty((n, n + 1))

    aug[:, :n] = sup[0]
    aug[:, n] = rhs[0]
    sol = np.linalg.solve(diag[0], aug)
    gain[0] = sol[:, :n]
    carry[0] = sol[:, n]

    for k in range(1, m - 1):
        pivot = diag[k] - sub[k] @ gain[k - 1]
        aug[:, :n] = sup[k]
        aug[:, n] = rhs[k] - sub[k] @ carry[k - 1]
        sol = np.linalg.solve(pivot, aug)
        gain[k] = sol[:, :n]
        carry[k] = sol[:, n]

    pivot = diag[m - 1] - sub[m - 1] @ gain[m - 2]
    carry[m - 1] = np.linalg.solve(pivot, rhs[m - 1] - sub[m - 1] @ carry[m - 2])

    x = np.empty((m, n))
    x[m - 1] = carry[m - 1]
    for k in range(m - 2, -1, -1):
        x[k] = carry[k] - gain[k] @ x[k + 1]
    return x
