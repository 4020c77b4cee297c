"""Regenerate the packaged identity-function sample dataset.

500 locations drawn uniformly on (0, 5], sorted, with y = x plus Gaussian
noise of standard deviation 1e-5 — the near-noiseless case where model
selection should settle on a single component. The file feeds the
command-line walkthrough in the README (fit with --m-max 15) and the test
suite. Deterministic per seed.
"""

import argparse
from importlib.resources import files

from stochtaylor import RngStream
from stochtaylor.bench import get_test_function, make_dataset
from stochtaylor.model import atomic_write_text


def to_csv(X, y) -> str:
    lines = ["x_1,y"]
    for xr, yr in zip(X[:, 0], y):
        lines.append(f"{float(xr)!r},{float(yr)!r}")
    return "\n".join(lines) + "\n"


def main() -> None:
    default_out = str(files("stochtaylor") / "data" / "identity_sample.csv")
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default=default_out, help="output CSV path")
    args = parser.parse_args()
    fn = get_test_function("identity")
    data = make_dataset(fn, 500, fn.sigma, RngStream(0, 0))
    atomic_write_text(args.out, to_csv(data.X, data.y))
    print(f"wrote {data.K} rows to {args.out}")


if __name__ == "__main__":
    main()
