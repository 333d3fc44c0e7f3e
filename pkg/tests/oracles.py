"""Independent numerical oracles shared by the test modules.

Everything here is deliberately dumb and derivative-free on the code path it
checks: finite differences of plain integrations stand in for the sensitivity
system, and finite differences over weights stand in for analytic gradients.
"""

import numpy as np

from sirbayes.ode import ParamVector, integrate


def fd_sensitivities(c, population, times, eps=1e-4, step=0.01):
    """Central finite differences of plain integrations over each free parameter.

    Returns an array of shape (len(times), 3 * n_free) laid out like the
    sensitivity block of the extended state.
    """
    times = np.atleast_1d(times)
    free = c.free
    out = np.empty((times.size, 3 * c.n_free))
    for j in range(c.n_free):
        bump = np.zeros_like(free)
        bump[j] = eps
        hi = integrate(ParamVector.from_free(free + bump, c.fixed_i0), population, times)
        lo = integrate(ParamVector.from_free(free - bump, c.fixed_i0), population, times)
        out[:, 3 * j : 3 * j + 3] = (hi.states - lo.states) / (2 * eps)
    return out


def central_difference(f, x, eps):
    """Gradient of scalar f at x by central differences, one coordinate at a time."""
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    for i in range(x.size):
        bump = np.zeros_like(x)
        bump[i] = eps
        grad[i] = (f(x + bump) - f(x - bump)) / (2 * eps)
    return grad
