"""Numerical toolkit for k-Hessian operators and the quadratic Hessian equation
sigma_2(D^2 u) = f: algebra, explicit barriers, a Dirichlet solver and
verification experiments.
"""
__version__ = "0.1.0"
