import numpy as np

from qmcorr import linop
from qmcorr.quantum import Povm, State
from qmcorr.scheme import Coupling, MeasurementScheme


def random_scheme(rng, ds, da, sharp=True, channel=False):
    """Random coupling, random apparatus state and a rotated pointer basis."""
    u = linop.random_unitary(da, rng)
    if sharp:
        mats = [linop.projector(u[:, k]) for k in range(da)]
    else:
        w = rng.dirichlet(np.ones(da), size=da)  # row k: spread of basis vector k over outcomes
        mats = [u @ np.diag(w[:, j]) @ linop.dagger(u) for j in range(da)]
    pointer = Povm.from_matrices(mats)
    t_a = State(linop.random_density(da, rng))
    if channel:
        k = 2
        big = linop.random_unitary(ds * da * k, rng)[:, : ds * da]
        coupling = Coupling.channel([big[j * ds * da:(j + 1) * ds * da] for j in range(k)])
    else:
        coupling = Coupling.unitary(linop.random_unitary(ds * da, rng))
    return MeasurementScheme(ds, da, pointer, t_a, coupling)
