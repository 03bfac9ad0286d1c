"""Numerical laboratory for matter-wave interferometry.

Modules
-------
twomode
    Exact two-site Bose-Hubbard model: spectra, evolution, spin observables.
meanfield
    Mean-field bosonic Josephson junction dynamics.
tofexpand
    Time-of-flight expansion and double-well interference.
luttinger
    Split one-dimensional gases as Luttinger liquids.
fringelab
    Interferogram synthesis, fringe fitting and contrast statistics.
beamoptics
    Closed-form calculators for beam interferometers.
cli
    Command-line front end.
"""

__version__ = "0.1.0"
