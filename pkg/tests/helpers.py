import numpy as np

from morlie.fitting import ReducedSnapshotMatrix


def sg_from_coeffs(coeffs, basis, dt=1.0):
    """One-trajectory reduced snapshot matrix with the given columns."""
    c = np.atleast_2d(np.asarray(coeffs, float))
    n = len(c)
    return ReducedSnapshotMatrix(c, np.zeros(n, int), np.arange(n), np.arange(n) * dt, basis, n * dt)
