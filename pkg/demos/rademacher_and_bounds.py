"""
Rademacher complexity and the two generalization bounds
=======================================================

For heads with ||beta|| <= C_b on orthonormal encoders the supremum over the
class has a closed form, (C_b / m) * ||sum_i sigma_i p_M(x_i)||, so the
empirical Rademacher complexity is computed without any optimisation. The
bounds are then evaluated term by term on a random linear instance.
"""

from modalbound import ExperimentSpec, ModalitySubset, rademacher_linear_exact
from modalbound.harness import bound_trial, random_linear_instance

inst = random_linear_instance([2, 2, 2], seed=11, m=1000, noise_var=0.25)
for k in (1, 2, 3):
    subset = ModalitySubset.first(inst.train.schema, k)
    rad = rademacher_linear_exact(inst.train, subset, C_b=1.0, n_draws=200, seed=0)
    print(f"R_S({subset.label:9s}) = {rad.mean:.4f} +- {rad.standard_error:.4f}")

# quadrupling the sample roughly halves the complexity
big = random_linear_instance([2, 2, 2], seed=11, m=4000, noise_var=0.25)
full = ModalitySubset.full(big.train.schema)
ratio = (rademacher_linear_exact(big.train, full, 1.0).mean
         / rademacher_linear_exact(inst.train, full, 1.0).mean)
print(f"R(4m) / R(m) = {ratio:.3f}")

trial = bound_trial(ExperimentSpec("bound_suite"), seed=11)
for name, report in trial["reports"].items():
    terms = ", ".join(f"{k}={v:.3g}" for k, v in report.components.items())
    print(f"{name}: lhs={report.lhs:.4f} <= rhs={report.rhs:.2f} ({terms}) holds={report.holds}")
