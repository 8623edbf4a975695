"""Phase-field inverse lithography with a threshold-stability regularizer.

The package is organised around the imaging pipeline:

* :mod:`phaseilt.optics` builds the transmission cross coefficients and
  their truncated eigen (SOCS) decomposition;
* :mod:`phaseilt.forward_model` turns a phase field into an intensity and
  its spatial derivatives;
* :mod:`phaseilt.functionals` and :mod:`phaseilt.gradients` evaluate the
  objective and its adjoint gradient;
* :mod:`phaseilt.optimizer` runs projected descent with continuation;
* :mod:`phaseilt.analysis` extracts exposed patterns and stability metrics;
* :mod:`phaseilt.workbench` holds configuration, file formats and the CLI.
"""

from .optics import GridSpec, OpticalSystem, SocsModel, build_tcc, decompose_socs, socs_from
from .forward_model import IntensityBundle, intensity
from .functionals import FunctionalConfig, RegProfile, total_objective
from .gradients import grad_total, objective_and_gradient
from .optimizer import Schedule, make_initial_guess, run
from .analysis import TargetPattern, default_threshold, expose, stability_metric, threshold_sweep

__version__ = "0.1.0"
