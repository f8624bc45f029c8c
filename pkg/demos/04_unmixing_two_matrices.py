"""Recovering both constituents of an entry-level mixture.

Each observed entry of the data matrix belongs to exactly one of two hidden
rank-r matrices, but the labels are not given.  Starting from slightly
perturbed versions of the true column spaces, the alternating scheme
(cluster entries by erasure against each basis, then complete each cluster)
separates the entries and reconstructs both matrices to near machine
precision.  The demo prints the alternation trace: reassignment counts per
sweep, final assignment accuracy, and per-component errors.

Command-line equivalent: mmc run --in <file> --k 2 --r <rank> --init-dir <dir>
"""

import numpy as np

from mmc.ammc import AmmcOptions, run_ammc
from mmc.harness import classification_error, match_and_score
from mmc.synth import SynthConfig, generate_mixture, perturb_subspaces


def main():
    cfg = SynthConfig(d=60, n=60, r=3, k=2, p=1.0, delta=0.0, seed=12)
    problem = generate_mixture(cfg)
    obs = problem.observed
    print(
        f"mixture of {cfg.k} rank-{cfg.r} matrices, {cfg.d}x{cfg.n}, "
        f"{int(obs.observed.sum())} observed entries\n"
    )

    true_bases = [
        np.linalg.svd(x, full_matrices=False)[0][:, : cfg.r] for x in problem.truth
    ]
    init = perturb_subspaces(true_bases, delta=0.05, seed=99)

    opts = AmmcOptions(k=cfg.k, rank=cfg.r, seed=0)
    result = run_ammc(obs, init, opts)

    print(f"converged: {result.converged} in {result.outer_iters} sweeps")
    print(f"entries reassigned per sweep: {list(result.history)}")

    match = match_and_score(problem.truth, result.state.completions)
    print(f"component matching produced permutation {tuple(match.perm)}")
    for k, err in enumerate(match.errors):
        print(f"   component {k}: relative reconstruction error {err:.2e}")

    cls = classification_error(
        problem.assignments, result.state.assignments, match.perm
    )
    print(f"fraction of entries assigned to the wrong component: {cls:.1%}")


if __name__ == "__main__":
    main()
