"""
Latent quality of a linear encoder in closed form
=================================================

For y = beta*^T A*^T x + eps the excess risk of the best head on an encoder A
is the Schur complement of the joint covariance of (A^T x, A*^T x), read at
beta*. Below, the full-modality ERM encoder has zero excess risk while a
masked one does not, so gamma (their difference) is negative.
"""

import numpy as np

from modalbound import (LinearGenConfig, ModalitySubset, covariance_blocks, erm_linear_closed_form,
                        eta_closed_form, eta_empirical, gamma, generate_linear, random_orthonormal,
                        random_spd, schur_complement)

dims = (2, 2, 2)
d = sum(dims)
A_star = random_orthonormal(d, d, seed=3)
beta_star = np.random.default_rng(3).standard_normal(d)
Sigma = random_spd(d, seed=3)
config = LinearGenConfig(dims, A_star, beta_star, noise_var=0.25, n_samples=2000, seed=3, Sigma=Sigma)
train = generate_linear(config)

full = ModalitySubset.full(train.schema)
first_two = ModalitySubset.first(train.schema, 2)
enc_M = erm_linear_closed_form(train, full).model
enc_N = erm_linear_closed_form(train, first_two).model

eta_M = eta_closed_form(enc_M.A, A_star, beta_star, Sigma)
eta_N = eta_closed_form(enc_N.effective_matrix(first_two), A_star, beta_star, Sigma)
print("eta(full)      =", eta_M.value)
print("eta(m1+m2)     =", eta_N.value)
print("gamma          =", gamma(eta_M, eta_N))

sch = schur_complement(covariance_blocks(enc_N.effective_matrix(first_two), A_star, Sigma))
print("Schur eigenvalues (PSD):", np.round(np.linalg.eigvalsh(sch), 6) + 0.0)

# the same quantity measured by refitting a head on fresh samples
test = generate_linear(LinearGenConfig(dims, A_star, beta_star, 0.25, 100_000, 4, Sigma))
print("empirical eta(m1+m2) =", eta_empirical(enc_N, first_two, test, train, 0.25).value)
