"""Two different rank-1 pairs that explain the same observed mixture.

This is the package's embedded 5x4 instance showing why mixture completion
needs more than low rank: the observed entries admit a second, entirely
different pair of rank-1 matrices that reproduces every observation exactly,
but splits the entries between components differently.  Identifiability has
to come from the sampling pattern, not from rank alone.

Also available on the command line as: mmc example1
"""

import numpy as np

from mmc.harness import counterexample_instance, run_counterexample_suite
from mmc.ammc import verify_mixture


def show(name, matrix):
    print(f"{name}:")
    for row in matrix:
        print("   " + "  ".join(f"{v:7.3f}" for v in row))


def main():
    problem, false_pair, false_assignment = counterexample_instance()
    truth = problem.truth
    obs = problem.observed

    print("Observed entries (zeros are unobserved):")
    show("X restricted to the sampled set", np.where(obs.observed, obs.values, 0.0))
    print()

    show("generating component 1", truth[0])
    show("generating component 2", truth[1])
    print()
    show("alternative component 1", false_pair[0])
    show("alternative component 2", false_pair[1])
    print()

    for label, pair in (("generating", truth), ("alternative", false_pair)):
        ok, assignment = verify_mixture(pair, obs, r=1)
        n_first = int(assignment.masks[0].sum())
        print(
            f"{label} pair: explains all observations = {ok}; "
            f"{n_first} entries credited to its first component"
        )

    same = np.array_equal(problem.assignments.masks[0], false_assignment.masks[0])
    print(f"\nThe two explanations assign entries identically: {same}")

    print("\nFull check suite:")
    for line in run_counterexample_suite().lines():
        print("  " + line)


if __name__ == "__main__":
    main()
