"""
Threshold stability versus regularizer weight
=============================================

Optimizes the four-feature target with three weights of the
threshold-stability regularizer and tabulates the stability metric
d_min together with the topology of the printed pattern under threshold
shifts.  Takes a few minutes.
"""

from phaseilt.analysis import stability_metric, threshold_sweep
from phaseilt.forward_model import intensity
from phaseilt.workbench import config as wc
from phaseilt.workbench.experiments import run_optimization

hvars = (-0.5, 0.0, 0.5, 2.5, 3.5)
for c in (0.0, 5e-4, 2e-3):
    cfg = wc.desk_config(target=wc.TargetSpec("target2_like"))
    cfg = cfg.replace(functional=wc.FunctionalSection(c=c))
    trace, report, setup = run_optimization(cfg)
    b = intensity(setup.model, trace.u)
    print(f"c = {c:g}: d_min = {stability_metric(b)[1]:.2f} %")
    for rep in threshold_sweep(b, 1.0, hvars, setup.target):
        row = rep.row()
        print(f"   hvar {row['hvar']:+.1f}%  pixel err {row['pixel_err']:4d}  "
              f"components {row['components']}  holes {row['holes']}")
