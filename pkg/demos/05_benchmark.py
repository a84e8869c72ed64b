"""A small, fully reproducible benchmark grid.

Runs both estimators on shared replicate data (paired design) and prints
the mean subspace-distance curve per method.  The same grid is available
from the command line:

    psmm benchmark --models 1 --methods psmm,psvm --n 100:300:100 \
        --d 4 --replicates 5 --seed 1 --output results.csv

Identical seeds give byte-identical CSVs regardless of --jobs.
"""

import numpy as np

from psmm import PsmmConfig, run_benchmark

result = run_benchmark(
    models=[1],
    methods=["psmm", "psvm"],
    n_grid=[100, 200, 300],
    d_grid=[4],
    replicates=5,
    config=PsmmConfig(slices=10, lam=100.0),
    seed=1,
)

print(f"{len(result.rows)} rows")
print("\nmean distance by method and sample size:")
for method in ("psmm", "psvm"):
    line = [f"{method}:"]
    for n in (100, 200, 300):
        cell = [r.distance for r in result.rows if r.method == method and r.n == n]
        line.append(f"n={n}: {np.mean(cell):.3f}")
    print("  " + "  ".join(line))

result.to_csv("benchmark_demo.csv")
print("\nwrote benchmark_demo.csv")
