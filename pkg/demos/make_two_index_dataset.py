"""Regenerate the packaged two-index demo dataset.

The series mimics a measurement y recorded against two indices: a time
index t and a smooth driver x that itself evolves with t. The surface is
bilinear, y = 0.6 + 0.25 t + 0.15 x + 0.05 t x, observed with Gaussian
noise of standard deviation 0.02 at 1200 time points on [0, 2]. The
driver path x(t) = 1 + 0.3 sin(1.7 t) + 0.2 t keeps the held-out segment
of the forecasting demo inside the driver range seen during training, so
only the time coordinate extrapolates.

Writing is deterministic: the same seed always reproduces the shipped
file byte for byte.
"""

import argparse
from importlib.resources import files

import numpy as np

from stochtaylor import RngStream
from stochtaylor.model import atomic_write_text

SEED = 20260815
N_ROWS = 1200


def generate() -> np.ndarray:
    gen = RngStream(SEED, 0).generator()
    t = np.sort(gen.uniform(0.0, 2.0, N_ROWS))
    x = 1.0 + 0.3 * np.sin(1.7 * t) + 0.2 * t
    y = 0.6 + 0.25 * t + 0.15 * x + 0.05 * t * x
    y = y + 0.02 * gen.standard_normal(N_ROWS)
    return np.column_stack([t, x, y])


def to_csv(rows: np.ndarray) -> str:
    lines = ["t,x,y"]
    for row in rows:
        lines.append(",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def main() -> None:
    default_out = str(files("stochtaylor") / "data" / "two_index.csv")
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default=default_out, help="output CSV path")
    args = parser.parse_args()
    atomic_write_text(args.out, to_csv(generate()))
    print(f"wrote {N_ROWS} rows to {args.out}")


if __name__ == "__main__":
    main()
