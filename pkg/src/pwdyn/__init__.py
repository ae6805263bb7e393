"""Piecewise dynamics: open-system evolutions interrupted by renewal-timed channels.

Subpackages and modules:

* ``qstate``      states, operator basis, transfer and Choi matrices
* ``renewal``     waiting-time laws, counting statistics, jump sampling
* ``blocks``      inter-jump map families and jump channels
* ``engines``     Volterra, closed-form, Monte Carlo and master-equation solvers
* ``witness``     trace-distance growth witnesses and parameter surfaces
* ``cli``         command-line front end
"""
__version__ = "0.1.0"
