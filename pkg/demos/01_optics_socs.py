"""
Partially coherent imaging and its SOCS decomposition
======================================================

Builds the transmission cross coefficient operator for the 193 nm, NA 1
system with a nearly coherent source, decomposes it into coherent
kernels and shows how fast the spectrum decays.
"""

import numpy as np

from phaseilt.optics import GridSpec, OpticalSystem, build_tcc, decompose_socs

system = OpticalSystem(lambda_nm=193.0, na=1.0, sigma_c=0.067)
grid = GridSpec(n=32, dx_nm=25.0)
print(system)
print(grid)

# The operator is Hermitian and positive semidefinite; on a small grid we
# can afford to materialize it and look at the whole spectrum.
tcc = build_tcc(system, grid)
h = tcc.to_dense()
print("matrix size", h.shape, " Hermitian defect", np.abs(h - h.conj().T).max())

model = decompose_socs(tcc, n0=10)
print("leading eigenvalues:")
for i, s in enumerate(model.sigma):
    print(f"  sigma_{i + 1:<2d} {s:.6e}  ({s / model.sigma[0]:.3e} of the first)")

# Dropping modes loses the tail of the spectrum; the operator error of the
# truncation is the first neglected eigenvalue.
full = np.linalg.eigvalsh(h)[::-1]
err = np.linalg.norm(model.truncated_matrix() - h, 2)
print(f"||H - H_10||_2 = {err:.3e},  sigma_11 = {full[10]:.3e}")
