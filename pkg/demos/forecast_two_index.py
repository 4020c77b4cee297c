"""Forecasting workflow on the packaged two-index series.

The dataset records a response y against a time index t and a smooth
driver x(t). The workflow: hold out the final 12.5% of the time range,
fit a model on the rest, then forecast the held-out segment and compare
the error of the early portion of the forecast against the in-sample
error. Only time extrapolates; the driver stays inside its training
range.
"""

import warnings
from importlib.resources import files

import numpy as np

from stochtaylor import (
    Dataset,
    FitConfig,
    UnderdeterminedWarning,
    predict_grid,
    select_model,
)

csv_path = files("stochtaylor") / "data" / "two_index.csv"
rows = np.loadtxt(str(csv_path), delimiter=",", skiprows=1)
t, x, y = rows[:, 0], rows[:, 1], rows[:, 2]
X = rows[:, :2]

t_split = t.min() + 0.875 * (t.max() - t.min())
train = t <= t_split
print(f"{train.sum()} training rows (t <= {t_split:.3f}), {(~train).sum()} held out")

with warnings.catch_warnings():
    warnings.simplefilter("ignore", UnderdeterminedWarning)
    sel = select_model(Dataset(X=X[train], y=y[train]), 4, FitConfig(seed=0))
model = sel.chosen.model
print(f"chosen M = {sel.chosen_m}, rss = {sel.chosen.rss:.5g}, "
      f"origin = ({model.x0[0]:.4f}, {model.x0[1]:.4f})")

rmse_in = float(np.sqrt(np.mean((predict_grid(model, X[train]) - y[train]) ** 2)))
print(f"in-sample RMSE = {rmse_in:.5f}")

# Forecast quality along the held-out span, in thirds.
held_span = t.max() - t_split
print()
print("held-out forecast RMSE by segment:")
for lo_frac, hi_frac in ((0.0, 1 / 3), (1 / 3, 2 / 3), (2 / 3, 1.0)):
    seg = (t > t_split + lo_frac * held_span) & (t <= t_split + hi_frac * held_span)
    rmse = float(np.sqrt(np.mean((predict_grid(model, X[seg]) - y[seg]) ** 2)))
    print(f"  t in ({t_split + lo_frac * held_span:.3f}, "
          f"{t_split + hi_frac * held_span:.3f}]: RMSE = {rmse:.5f} "
          f"({rmse / rmse_in:.2f}x in-sample)")
