"""Regenerate the small SPD test matrices in this directory.

Run from anywhere: ``python3 data/matrices/generate.py``.  Output is
deterministic (fixed seeds).
"""

from pathlib import Path

import numpy as np

from bbstab.quadratic_io import SparseMatrix, write_matrix_market

HERE = Path(__file__).resolve().parent


def laplacian_2d(m, shift=0.0):
    n = m * m
    rows, cols, vals = [], [], []
    for i in range(m):
        for j in range(m):
            p = i * m + j
            rows.append(p), cols.append(p), vals.append(4.0 + shift)
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                ii, jj = i + di, j + dj
                if 0 <= ii < m and 0 <= jj < m:
                    rows.append(p), cols.append(ii * m + jj), vals.append(-1.0)
    return SparseMatrix.from_coo(n, rows, cols, vals)


def fem_1d(n, h=0.05, reaction=40.0):
    # stiffness/h + reaction*h*mass for linear elements
    main = 2.0 / h + reaction * 4.0 * h / 6.0
    off = -1.0 / h + reaction * h / 6.0
    a = np.diag(np.full(n, main)) + np.diag(np.full(n - 1, off), 1) + np.diag(np.full(n - 1, off), -1)
    return SparseMatrix.from_dense(a)


def random_diag_dominant(n, density, seed):
    rng = np.random.default_rng(seed)
    a = np.zeros((n, n))
    mask = np.tril(rng.random((n, n)) < density, -1)
    a[mask] = rng.uniform(-1.0, 1.0, mask.sum())
    a = a + a.T
    a[np.diag_indices(n)] = np.abs(a).sum(axis=1) + rng.uniform(0.5, 2.0, n)
    return SparseMatrix.from_dense(a)


def log_diagonal(n, kappa):
    return SparseMatrix.from_dense(np.diag(np.geomspace(1.0, kappa, n)))


def pentadiagonal(n):
    a = 6.0 * np.eye(n) - 1.5 * (np.eye(n, k=1) + np.eye(n, k=-1)) + 0.5 * (np.eye(n, k=2) + np.eye(n, k=-2))
    return SparseMatrix.from_dense(a)


def main():
    write_matrix_market(laplacian_2d(8, shift=0.2), HERE / "lap2d_8.mtx", comment="shifted 5-point Laplacian, 8x8 grid")
    write_matrix_market(fem_1d(60), HERE / "fem1d_60.mtx", comment="1D linear FEM reaction-diffusion")
    write_matrix_market(random_diag_dominant(40, 0.15, seed=7), HERE / "randdd_40.mtx", comment="random sparse diagonally dominant, seed 7")
    write_matrix_market(log_diagonal(30, 80.0), HERE / "logdiag_30.mtx", comment="diagonal, eigenvalues geomspace(1, 80)")
    write_matrix_market(pentadiagonal(25), HERE / "penta_general_25.mtx", symmetric=False, comment="pentadiagonal stored with a general header")


if __name__ == "__main__":
    main()
