"""Physical constants (CODATA 2018, SI units).

Centralized so every module computes with identical values. All internal
frequencies are angular [rad/s]; file formats use ordinary Hz and convert
exactly once at the I/O boundary.
"""

import math

HBAR = 1.054571817e-34  # reduced Planck constant [J s]
KB = 1.380649e-23       # Boltzmann constant [J/K], exact
C_LIGHT = 299792458.0   # speed of light in vacuum [m/s], exact
EV = 1.602176634e-19    # electron volt [J], exact

TWO_PI = 2.0 * math.pi
