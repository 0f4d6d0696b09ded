#!/usr/bin/env python3
"""Generate data/tract_basis.csv: the shipped 10-mode vocal-tract area basis.

Mean area is a uniform 3.0 cm^2 tube of 44 sections x 0.4 cm (17.6 cm).
Mode j is a Gaussian bump of unit peak (cm^2 per unit articulation)
centred on section (j + 0.5) * 4.4 with a standard deviation of 2.5
sections. The bumps are smooth, local and linearly independent.
"""
import argparse
import math

SECTIONS = 44
MODES = 10
MEAN_AREA = 3.0
WIDTH = 2.5


def basis():
    rows = []
    for i in range(SECTIONS):
        x = i + 0.5
        row = []
        for j in range(MODES):
            c = (j + 0.5) * SECTIONS / MODES
            row.append(math.exp(-0.5 * ((x - c) / WIDTH) ** 2))
        rows.append(row)
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out", nargs="?", default="data/tract_basis.csv")
    args = ap.parse_args()
    with open(args.out, "w", newline="\n") as f:
        f.write("section_index,mean_area_cm2," + ",".join(f"b{j + 1}" for j in range(MODES)) + "\n")
        for i, row in enumerate(basis()):
            f.write(f"{i},{MEAN_AREA:.17g}," + ",".join(f"{v:.17g}" for v in row) + "\n")


if __name__ == "__main__":
    main()
