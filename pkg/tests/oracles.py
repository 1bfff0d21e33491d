"""Independent reference implementations used only by the tests.

None of these share code with the package: products are plain loops,
exponentials are power series or scipy's expm/logm.
"""
import numpy as np
import scipy.linalg


def circular_product(A, B):
    """t-product by explicit circular convolution of the frontal slices."""
    n1, _, n3 = A.shape
    C = np.zeros((n1, B.shape[1], n3))
    for k in range(n3):
        for s in range(n3):
            C[:, :, k] += A[:, :, (k - s) % n3] @ B[:, :, s]
    return C


def dft_loop(x):
    n = len(x)
    return np.array([sum(x[t] * np.exp(-2j * np.pi * t * k / n) for t in range(n)) for k in range(n)])


def series_exp(X, terms=20):
    """sum_{j < terms} X^j / j! with t-product powers."""
    n, _, n3 = X.shape
    term = np.zeros_like(X)
    term[:, :, 0] = np.eye(n)
    total = term.copy()
    for j in range(1, terms):
        term = circular_product(term, X) / j
        total = total + term
    return total


def random_pd_faces(rng, d, N, floor=0.1, complex_=True):
    Z = rng.standard_normal((d, N, N))
    if complex_:
        Z = Z + 1j * rng.standard_normal((d, N, N))
    return Z @ np.conj(np.swapaxes(Z, 1, 2)) / N + floor * np.eye(N)


def random_pd_tensor(rng, n, n3, floor=0.5):
    """Real tensor whose Fourier faces are Hermitian PD: B * B^T + floor * I."""
    B = rng.standard_normal((n, n, n3))
    Bt = B.transpose(1, 0, 2)[:, :, np.r_[0, np.arange(n3 - 1, 0, -1)]]
    X = circular_product(B, Bt) / n
    X[:, :, 0] += floor * np.eye(n)
    return X


def matrix_eg_step(W, L, eta, budget):
    """Matrix exponentiated gradient with trace renormalization (scipy expm/logm)."""
    W_new = scipy.linalg.expm(scipy.linalg.logm(W) - eta * L)
    W_new = 0.5 * (W_new + W_new.conj().T)
    tr = np.trace(W_new).real
    return W_new * (budget / tr) if tr > budget else W_new


def scalar_eg(w0, losses, eta, budget):
    """Diagonal EG: w_i <- w_i exp(-eta l_i), rescaled onto sum(w) <= budget."""
    w = np.array(w0, dtype=float)
    out = [w.copy()]
    for l in losses:
        w = w * np.exp(-eta * np.asarray(l))
        if w.sum() > budget:
            w = w * budget / w.sum()
        out.append(w.copy())
    return out
