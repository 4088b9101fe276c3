"""Parameter grid search over the regularization strength.

Evaluates mean PQ over a few seeded scenes for each (lambda, eta,
epsilon) cell and reports the best cell.

Run: python3 demos/03_grid_search.py
"""

import supercut as sc

scenes = [sc.generate_scene(sc.SceneSpec(n_objects=20, seed=s))
          for s in range(4)]
table = sc.default_class_table()
config = sc.PipelineConfig(table=table)

best, rows = sc.grid_search(scenes, lambda_grid=[5.0, 10.0, 20.0],
                            eta_grid=[5e-2], epsilon_grid=[1e-4],
                            config=config)
print("lambda   eta     epsilon  mean_pq")
for lam, eta, eps, pq in rows:
    print(f"{lam:<8g} {eta:<7g} {eps:<8g} {pq:.2f}")
print(f"best cell: lambda={best.lam} eta={best.eta} epsilon={best.epsilon}")
