"""Why clustering instead of per-object matching: runtime scaling of
minimum-cost assignment versus the graph-clustering pipeline.

Run: python3 demos/04_matching_benchmark.py  (takes ~30 s)
"""

import supercut as sc

rows = sc.bench_matching([(200, 200), (1000, 1000), (2000, 2000)],
                         repeats=3, seed=0)
print("method      n_true  n_pred  median_seconds")
for method, nt, np_, sec in rows:
    print(f"{method:<11} {nt:<7} {np_:<7} {sec:.4f}")
