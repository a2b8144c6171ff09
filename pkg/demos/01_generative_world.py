"""Build a world and look at how interactions shape the observation likelihood.

Every latent variable owns key and query vectors per observation dimension.
The query of one variable dotted with the key of another is their
interaction, which sets the phase of a sinusoidal likelihood over
realizations.

    python demos/01_generative_world.py
"""
import numpy as np

from cogworld.generator import (
    build_likelihood,
    context_interactions,
    create_embeddings,
    expand_phase_vector,
    marginal_likelihood,
)

space = create_embeddings(seed=0, S=500, d_o=5, d_E=30)
print(f"{space.S} variables, {space.d_o} observation dimensions, embeddings in R^{space.d_E}")

gram = space.keys[0] @ space.keys[0].T
print("keys of variable 0 are orthonormal:", np.allclose(gram, np.eye(5)))

inter = context_interactions(space, (12, 345))
print("\ninteractions z[i, c, c'] for dimension 0:\n", np.round(inter.z[0], 3))

v = expand_phase_vector(inter.z[0, 0, 1], R=10, lam=2.0)
print("\nphase vector v_12 over 10 realizations:", np.round(v, 2))

ell = build_likelihood(inter, R=10, lam=2.0)
print("\nP(o_0 = 1 | r_1, r_2) for the first 4 x 4 cells:\n", np.round(ell.ell[0, :4, :4], 2))

m = marginal_likelihood(ell, 0)
print("\nafter averaging over r_2 the likelihood of r_1 flattens:")
print("  joint range    ", np.round(np.ptp(ell.ell[0]), 3))
print("  marginal range ", np.round(np.ptp(m[0]), 3))
