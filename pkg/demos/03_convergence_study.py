"""Convergence of the reconstruction under mesh refinement.

For an ill-posed continuation problem there is no a priori rate: the
attainable order in the target region depends on the geometry of the
measurement set and on the conditional-stability exponent.  The study
runs a benchmark over the mesh ladder N = 8..128 and fits log-log slopes
for the relative errors on B and for the regularization norms.
"""

from ucfem.experiments import get_case, run_case

for name in ("ex1-const", "ex3-const"):
    case = get_case(name)
    table = run_case(case)
    print(f"== {name} ==")
    print(table.to_csv_string(), end="")
    for column, fit in table.rates.items():
        steps = ", ".join(f"{s:+.2f}" for s in fit.per_step)
        print(f"rate[{column}] = {fit.slope:+.3f}   per step: {steps}")
    print()

# the s-norm of the error pair (pi_h u - u_h, z_h) is the quantity the
# a priori analysis controls; it converges at or above first order even
# when the L2/H1 errors on B converge slowly
