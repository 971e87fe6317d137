"""Toolkit for one-parameter families of weighted Cauchy-Riemann operators on C
and their nonisotropic counterparts on polynomial models in C^2.

Submodules
----------
poly     exact algebra for real polynomials p(z) in (z, zbar)
geom     size functions, twist, nonisotropic pseudodistance and calibration
expr     sparse exact polynomial expressions in (z, zbar, w, wbar, t, tau)
fields   weighted vector fields, exact identity suite, grid realizations
kernels  model kernels and numerical condition checkers
bridge   partial Fourier transform between kernel families and their models
dbar     weighted dbar solvers and estimate checks
cli      batch front end
"""

__version__ = "0.1.0"

from . import poly, geom, expr, fields, kernels, bridge, dbar  # noqa: F401,E402
