"""
Checking every gradient against finite differences
==================================================

The optimizer relies on hand-derived adjoint gradients.  This script runs
the same check as ``phaseilt gradcheck``: each functional's analytic
gradient is compared with a central-difference gradient on a random
phase field.
"""

from phaseilt.optics import GridSpec, OpticalSystem, socs_from
from phaseilt.workbench.experiments import gradient_check

model = socs_from(OpticalSystem(193.0, 1.0, 0.067), GridSpec(16, 25.0), n0=10)
for name, err in gradient_check(model, seed=0).items():
    print(f"{name:20s} relative l2 error {err:.2e}")
