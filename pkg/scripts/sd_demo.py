"""Print dyadic scaling-degree estimates for a handful of kernels."""

import math

from egren import DistributionKernel, scaling_degree_estimate

CASES = [
    ("delta''", None, 1, [{"alpha": [2], "coeff": 1.0}], 3.0),
    ("|x|^-1/2", "pow(abs(x1), -0.5)", 1, None, 0.5),
    ("log|x| (+log corr.)", "log(abs(x1))", 1, None, 0.0),
    ("|x|^-3/2 on R^2", "pow(x1^2 + x2^2, -0.75)", 2, None, 1.5),
]


def main():
    print(f"{"kernel":20s} {'estimate':>10s} {'expected':>9s} {'residual':>10s}")
    for name, text, dim, delta, expected in CASES:
        t = DistributionKernel.from_dsl(text or "0", dim, delta=delta)
        rep = scaling_degree_estimate(t, n_max=24)
        print(f"{name:20s} {rep.estimate:10.4f} {expected:9.2f} {rep.residual:10.2e}")
        assert math.isfinite(rep.estimate)


if __name__ == "__main__":
    main()
