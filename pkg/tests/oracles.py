"""Dense real-space matrices for small grids.

Nodal arrays of shape (n, n, n) are flattened in C order, so the axis-0
operator is kron(D, I, I), and so on.  Nothing here calls the package's
FFT-based operators.
"""
import numpy as np


def d1_matrix(n):
    """Spectral first derivative on [0, 1) (cot formula; Nyquist mode dropped)."""
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                D[i, j] = np.pi * (-1) ** (i - j) / np.tan(np.pi * (i - j) / n)
    return D


def d2_matrix(n):
    """Spectral second derivative on [0, 1), Nyquist mode included (n even)."""
    h = 2 * np.pi / n
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i == j:
                D[i, j] = -np.pi**2 / (3 * h**2) - 1.0 / 6
            else:
                D[i, j] = -0.5 * (-1) ** (i - j) / np.sin((i - j) * h / 2) ** 2
    return D * (2 * np.pi) ** 2


def axis_op(D, axis):
    n = D.shape[0]
    eye = np.eye(n)
    mats = [eye, eye, eye]
    mats[axis] = D
    return np.kron(np.kron(mats[0], mats[1]), mats[2])


def dft_matrix(n):
    j = np.arange(n)
    F1 = np.exp(-2j * np.pi * np.outer(j, j) / n)
    return np.kron(np.kron(F1, F1), F1)


def wavenumbers(n):
    s = np.fft.fftfreq(n, 1.0 / n)
    return np.array(np.meshgrid(s, s, s, indexing="ij")).reshape(3, -1)


def dealias_matrix(n):
    F = dft_matrix(n)
    mask = np.all(3 * np.abs(wavenumbers(n)) <= n, axis=0).astype(float)
    return np.real(np.linalg.inv(F) @ np.diag(mask) @ F)


def convolution_matrix(n, hat):
    """Circulant matrix of f -> kernel * f, with kernel(x) = sum_k hat(k) exp(2 pi i k.x)."""
    F = dft_matrix(n)
    kernel = np.real(np.linalg.inv(F) @ np.asarray(hat, dtype=complex).ravel()) * n**3
    idx = np.array(np.unravel_index(np.arange(n**3), (n, n, n)))
    C = np.empty((n**3, n**3))
    for row in range(n**3):
        diff = (idx[:, row][:, None] - idx) % n
        C[row] = kernel[np.ravel_multi_index(diff, (n, n, n))] / n**3
    return C


def operator_A_matrix(n, p, eta_hat=None, xi_hat=None):
    """Dense 3n^3 x 3n^3 matrix of A (component-major unknown ordering)."""
    D1 = [axis_op(d1_matrix(n), a) for a in range(3)]
    D2 = [axis_op(d2_matrix(n), a) for a in range(3)]
    N = n**3
    lap = D2[0] + D2[1] + D2[2]
    lap_t = D2[0] + D2[1] + (1 + p.theta) * D2[2]
    Ceta = convolution_matrix(n, eta_hat) if eta_hat is not None else np.zeros((N, N))
    Cxi = convolution_matrix(n, xi_hat) if xi_hat is not None else np.zeros((N, N))
    A = np.zeros((3 * N, 3 * N))
    for i in range(3):
        for j in range(3):
            blk = (p.mu + p.lam) * D1[i] @ D1[j] + Cxi @ D1[i] @ D1[j]
            if i == j:
                blk = blk + p.mu * lap_t + Ceta @ lap
            A[i * N:(i + 1) * N, j * N:(j + 1) * N] = blk
    return A


def mean_projector(N, blocks=1):
    P = np.zeros((blocks * N, blocks * N))
    for b in range(blocks):
        P[b * N:(b + 1) * N, b * N:(b + 1) * N] = 1.0 / N
    return P


def solve_minus_A(n, p, f_nodal, eta_hat=None, xi_hat=None):
    """Mean-zero w with -A w = f, by LU on -A + (projector onto constants)."""
    N = n**3
    A = operator_A_matrix(n, p, eta_hat, xi_hat)
    rhs = f_nodal.reshape(3, -1)
    rhs = (rhs - rhs.mean(axis=1, keepdims=True)).ravel()
    w = np.linalg.solve(-A + mean_projector(N, 3), rhs)
    return w.reshape((3, n, n, n))


def transport_matrix(n, w_nodal, eps, delta):
    """Dense matrix of rho -> -eps Delta rho + delta rho + div P(rho w)."""
    D1 = [axis_op(d1_matrix(n), a) for a in range(3)]
    lap = sum(axis_op(d2_matrix(n), a) for a in range(3))
    P = dealias_matrix(n)
    T = -eps * lap + delta * np.eye(n**3)
    for i in range(3):
        T = T + D1[i] @ P @ np.diag(w_nodal[i].ravel())
    return T


def solve_transport_dense(n, w_nodal, M, eps, delta):
    T = transport_matrix(n, w_nodal, eps, delta)
    rho = np.linalg.solve(T, delta * M * np.ones(n**3))
    return rho.reshape((n, n, n))
