"""One-sided finite-difference helpers shared by the test modules."""

import numpy as np


def fd_value_and_deriv(f, h, npts=5):
    """Extrapolate f(0) and f'(0) from samples f(h), f(2h), ..., f(npts*h).

    Quartic (npts=5) one-sided stencils keep both extrapolations at
    O(h^4) without ever evaluating at 0 itself, which matters when 0 sits
    on an interface where the field is only one-sidedly defined.
    """
    j = np.arange(1, npts + 1, dtype=float)
    V = np.vander(j, npts, increasing=True).T  # rows: j^0 .. j^{npts-1}
    ev = np.zeros(npts)
    ev[0] = 1.0
    ed = np.zeros(npts)
    ed[1] = 1.0
    bv = np.linalg.solve(V, ev)
    bd = np.linalg.solve(V, ed)
    samples = np.array([f(k * h) for k in j])
    return samples @ bv, samples @ bd / h
