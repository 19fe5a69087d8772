"""The five-sampler replication experiment on the correlated Gaussian.

Compares random-walk Metropolis, the two adaptive schemes (equi-energy
and importance resampling), and the MCMC samplers built from their
limiting kernels, by mean-squared error of the first two moments at the
cold level over independent replications.

The default run uses 20 replications to stay quick; pass ``--full`` for
the 100-replication setup of the bundled config (a few minutes).

Run from the repository root:

    python demos/table1_replication.py [--full] [--jobs 2]
"""

import argparse

import numpy as np

from eesampler import (
    MomentEstimand,
    SamplerSpec,
    TemperatureLadder,
    ladder_configs,
    make_gaussian_target,
    mse_harness,
)

parser = argparse.ArgumentParser()
parser.add_argument("--full", action="store_true", help="100 replications instead of 20")
parser.add_argument("--jobs", type=int, default=2)
args = parser.parse_args()

SIGMA = np.array([[0.96, 2.44], [2.44, 7.04]])
target = make_gaussian_target(SIGMA)
ladder = TemperatureLadder((10.0, 5.0, 2.0, 1.0), thetas=(0.5, 0.5, 0.5))
configs = ladder_configs(ladder, proposal_covariance=np.eye(2))

estimands = [
    MomentEstimand("E[X1]", 0.0, component=0, power=1),
    MomentEstimand("E[X2]", 0.0, component=1, power=1),
    MomentEstimand("E[X1^2]", float(SIGMA[0, 0]), component=0, power=2),
    MomentEstimand("E[X2^2]", float(SIGMA[1, 1]), component=1, power=2),
]
kinds = ("rwm", "ir", "ir_limit", "ee", "ee_limit")
specs = [SamplerSpec(k, k, target, ladder, configs) for k in kinds]

replications = 100 if args.full else 20
print(f"running {len(kinds)} samplers x {replications} replications x 10000 iterations ...")
table = mse_harness(
    specs, estimands, replications=replications, iterations=10_000,
    master_seed=20100127, jobs=args.jobs,
)
print()
print(table.to_text())
print(
    "\nreading the table: the limiting-kernel samplers crush the plain "
    "random walk,\nwhile the adaptive schemes that merely converge to those "
    "kernels are held back\nby the slow hottest chain they resample from "
    "(its history enters every level)."
)
