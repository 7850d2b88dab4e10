"""Regenerate the bundled synthetic NHANES-shaped fixture (200 rows).

Columns follow the NHANES 2017-18 names; marginal ranges mimic the
descriptive statistics of the real extract. The target is a relative fat
mass style rule plus noise, so it is learnable but not exact.
"""

import csv
import sys
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "gggp" / "data" / "synthetic_nhanes.csv"

# column: (mean, std, min, max)
RANGES = {
    "RIDAGEYR": (38.1, 12.6, 18.0, 59.0),
    "BMXWT": (79.7, 20.4, 36.2, 176.5),
    "BMXHT": (166.6, 9.3, 138.3, 190.2),
    "BMXLEG": (39.5, 3.6, 26.0, 50.0),
    "BMXARML": (37.0, 2.7, 29.6, 45.5),
    "BMXARMC": (33.1, 5.1, 20.7, 52.7),
    "BMXWAIST": (96.0, 16.3, 56.4, 154.9),
    "BMXHIP": (104.6, 12.8, 77.8, 168.5),
}


def main(n=200, seed=20171018):
    rng = np.random.default_rng(seed)
    gender = (rng.random(n) < 0.482).astype(int)
    cols = {}
    for name, (mu, sd, lo, hi) in RANGES.items():
        v = np.clip(rng.normal(mu, sd, n), lo, hi)
        cols[name] = np.round(v, 0 if name == "RIDAGEYR" else 1)
    fat = 64.0 - 20.0 * cols["BMXHT"] / cols["BMXWAIST"] + 12.0 * (1 - gender)
    fat = np.round(np.clip(fat + rng.normal(0.0, 3.0, n), 12.1, 56.1), 1)
    header = ["SEQN", "RIAGENDR", *RANGES, "DXDTOPF", "RIDEXPRG"]
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else OUT
    with out.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(n):
            row = [93703 + i, gender[i], *(f"{cols[c][i]:g}" for c in RANGES),
                   f"{fat[i]:g}", "" if gender[i] == 1 else 2]
            w.writerow(row)


if __name__ == "__main__":
    main()
