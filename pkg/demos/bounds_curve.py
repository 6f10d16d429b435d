"""Print the randomized selector's closed-form guarantee curve.

The expected fraction of the optimal objective falls off linearly in the
sampling parameter eps, while the probability of actually achieving that
fraction collapses to zero at eps = e^(-mu) - 1/e and recovers on either
side. The table below makes the cliff visible; the CSV twin is

    goodfeat bounds --out bounds.csv
"""

import math

from goodfeat import ExperimentSpec, run_bounds_curve


def main():
    spec = ExperimentSpec(kind="bounds_curve", bounds_k=450, bounds_mu=0.8)
    report = run_bounds_curve(spec)
    zero = math.exp(-spec.bounds_mu) - math.exp(-1.0)

    print(f"k = {spec.bounds_k}, mu = {spec.bounds_mu}, "
          f"zero point at eps = {zero:.6f}\n")
    print(f"{'eps':>10} {'E[ratio]':>10} {'P(success)':>12}")
    for row in report.rows:
        note = "  <- zero point" if row["epsilon"] == zero else ""
        print(f"{row['epsilon']:>10.4f} {row['ratio_expectation']:>10.4f} "
              f"{row['probability']:>12.3e}{note}")


if __name__ == "__main__":
    main()
