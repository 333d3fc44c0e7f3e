"""Bayesian SIR parameter inference via neural ODE surrogates and a Laplace posterior.

Pipeline: build a collocation grid over (t, parameters), generate numerically
integrated training targets, train small tanh networks on them, then run
gradient-based MAP finding with a Gaussian (Laplace) posterior. A random-walk
Metropolis-Hastings sampler over the exact numerical likelihood serves as the
benchmark.
"""

from sirbayes.ode import ParamVector, Trajectory, integrate, integrate_batch

__all__ = ["ParamVector", "Trajectory", "integrate", "integrate_batch"]
__version__ = "0.1.0"
