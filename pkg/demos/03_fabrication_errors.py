"""How fabrication spread degrades compiled unitaries.

Each node is an MZI built from two static splitters that miss the ideal
50:50 ratio by a Gaussian error of spread sigma. An imperfect node can no
longer reach every reflectivity, so some targets must be clipped. This
sweep measures how often that happens and what it costs.
"""

from mzmesh.experiments import fidelity_sweep

sizes = [5, 10, 16]
sigmas = [0.01, 0.025, 0.05, 0.1]
trials = 150

print(f"{trials} Haar targets per cell, square mesh")
print(f"{'N':>4} {'sigma':>6} {'affected':>9} {'mean infid':>11} "
      f"{'mean dev':>9} {'max dev':>9}")
for rec in fidelity_sweep(sizes, sigmas, trials=trials, kind="square", seed=0):
    print(f"{rec.n_modes:>4} {rec.sigma:>6} {rec.affected_fraction:>9.3f} "
          f"{rec.mean_infidelity_affected:>11.3e} "
          f"{rec.mean_rel_deviation:>9.4f} {rec.max_rel_deviation:>9.4f}")

print("\naffected = fraction of targets needing at least one clipped node")
print("deviations are relative errors of the transition probabilities,")
print("averaged over the affected targets only")
