"""Run one benchmark experiment and read its report.

Fits the noisy cubic test function at sample size 500 over five seeds,
using the registered study settings (noise level, model-order cap, fit and
evaluation windows, optimizer budget). The evaluation window extends past
the fitting window, so the reported distances measure extrapolation, not
just interpolation.
"""

import warnings

from stochtaylor import UnderdeterminedWarning, default_spec, run_experiment
from stochtaylor.bench import report_to_csv

spec = default_spec("cubic", K=500)
print(f"function={spec.function} K={spec.K} sigma={spec.sigma} m_max={spec.m_max}")
print(f"fit window {spec.fit_lower}..{spec.fit_upper}, "
      f"eval window {spec.eval_lower}..{spec.eval_upper}, {spec.n_seeds} seeds")
print()

with warnings.catch_warnings():
    warnings.simplefilter("ignore", UnderdeterminedWarning)
    report = run_experiment(spec)

print(report_to_csv(report), end="")
print()
med = report.medians
print(f"median chosen_m = {med['chosen_m']:g}")
print(f"median integrated squared distance = {med['d_sq']:.4g}")
print(f"median wall time per seed = {med['wall_time_s']:.2f}s")
