"""
More modalities, better latents
===============================

Overlap-controlled data: four Gaussian blocks where blocks 2-4 are pulled
towards block 1 with weight w, and the label sums every coordinate. Fitting
on the first k blocks leaves (4 - k) * dim * (1 - w)^2 of label variance that
no head can recover, and eta measures exactly that.
"""

from modalbound import (ModalitySubset, OverlapConfig, erm_linear_closed_form, eta_empirical,
                        generate_overlap)

dim = 20
for w in (0.0, 0.5, 0.8, 1.0):
    config = OverlapConfig(w=w, n_samples=20_000, dim=dim, seed=1)
    train, test = generate_overlap(config).split(0.8)
    row = []
    for k in range(1, 5):
        subset = ModalitySubset.first(train.schema, k)
        encoder = erm_linear_closed_form(train, subset, n=10).model
        # freeze the encoder, refit the head on train, score on test
        eta = eta_empirical(encoder, subset, test, train, oracle_risk=0.0)
        row.append(f"{eta.value:7.2f} ({config.oracle_residual(k):6.1f})")
    print(f"w={w:.1f}  " + "  ".join(row))

# at w=1 every block is a copy of block 1, so extra modalities add nothing
