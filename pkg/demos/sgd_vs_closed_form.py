"""
Training a late-fusion network with momentum SGD
================================================

One linear encoder per modality, summed latents and a linear head, trained
with minibatch SGD (lr 0.01, momentum 0.9). With identity activations this
class equals the linear composite class, so exact least squares gives the
target risk.
"""

from modalbound import (ModelSpec, ModalitySubset, OverlapConfig, TrainConfig, erm_linear_closed_form,
                        erm_train, eta_empirical, generate_overlap, two_stage_train)

train, test = generate_overlap(OverlapConfig(w=0.5, n_samples=10_000, dim=10, seed=2)).split(0.8)
subset = ModalitySubset.first(train.schema, 2)

exact = erm_linear_closed_form(train, subset, n=10)
config = TrainConfig(subset, lr=0.01, momentum=0.9, batch_size=1000, steps=2000, seed=0)
sgd = erm_train(train, ModelSpec("mlp", latent_dim=10), config)
two = two_stage_train(train, subset, ModelSpec("mlp", latent_dim=10), config)

print("closed form train risk:", exact.empirical_risk)
print("SGD train risk        :", sgd.empirical_risk)
print("SGD trajectory (every 500 steps):", [round(r, 3) for s, r in sgd.trajectory if s % 500 == 0])
for name, result in (("closed form", exact), ("joint SGD", sgd), ("two-stage", two)):
    eta = eta_empirical(result.model, subset, test, train, oracle_risk=0.0)
    print(f"{name:12s} eta = {eta.value:.3f} +- {eta.standard_error:.3f}   (oracle 2 * 10 * 0.25 = 5)")
