"""Physical constants and species masses (SI units).

Fundamental constants are the CODATA values shipped with
:mod:`scipy.constants`. Atomic masses are for the most abundant (or the
commonly cooled) isotope of each species.

Values are module attributes read at call time by the physics modules,
so :func:`override` can patch them temporarily, e.g. in unit tests or from
a CLI configuration file.
"""

from __future__ import annotations

import contextlib
import math
from typing import Iterator

from scipy import constants as _sc

HBAR = _sc.hbar
H = _sc.h
K_B = _sc.k
AMU = _sc.physical_constants["atomic mass constant"][0]
EPS0 = _sc.epsilon_0
E_CHARGE = _sc.e

# isotope masses in atomic mass units
_SPECIES_AMU = {
    "Li": 7.0160034366,  # 7Li
    "Na": 22.98976928,  # 23Na
    "K": 38.9637064864,  # 39K
    "Ar": 39.9623831237,  # 40Ar
    "Rb-87": 86.909180531,  # 87Rb
    "Cs": 132.905451961,  # 133Cs
}

_ALIASES = {
    "li": "Li", "li7": "Li", "li-7": "Li", "7li": "Li",
    "na": "Na", "na23": "Na", "na-23": "Na", "23na": "Na",
    "k": "K", "k39": "K", "k-39": "K", "39k": "K",
    "ar": "Ar", "ar40": "Ar", "ar-40": "Ar", "40ar": "Ar",
    "rb87": "Rb-87", "rb-87": "Rb-87", "87rb": "Rb-87", "rb": "Rb-87",
    "cs": "Cs", "cs133": "Cs", "cs-133": "Cs", "133cs": "Cs",
}

SPECIES_MASS = {name: amu * AMU for name, amu in _SPECIES_AMU.items()}

_OVERRIDABLE = ("HBAR", "H", "K_B", "AMU", "EPS0", "E_CHARGE")


def species_names() -> list[str]:
    """Canonical names of the built-in species."""
    return list(SPECIES_MASS)


def canonical_species(name: str) -> str:
    """Return the canonical spelling of a species name.

    Raises
    ------
    KeyError
        If the species is unknown.
    """
    if name in SPECIES_MASS:
        return name
    key = name.strip().lower()
    if key in _ALIASES:
        return _ALIASES[key]
    raise KeyError(f"unknown species {name!r}; known: {', '.join(SPECIES_MASS)}")


def mass(name: str) -> float:
    """Atomic mass of a species in kg."""
    return SPECIES_MASS[canonical_species(name)]


@contextlib.contextmanager
def override(**values: float) -> Iterator[None]:
    """Temporarily replace constants or species masses.

    Keys are attribute names (``HBAR``, ``K_B``, ...) or species names with
    masses in kg.

    Examples
    --------
    >>> from mwlab import constants
    >>> with constants.override(HBAR=1.0):
    ...     constants.HBAR
    1.0
    """
    g = globals()
    saved_attrs: dict[str, float] = {}
    saved_masses: dict[str, float] = {}
    try:
        for key, value in values.items():
            value = float(value)
            if not math.isfinite(value) or value <= 0:
                raise ValueError(f"constant {key} must be positive and finite")
            if key.upper() in _OVERRIDABLE:
                name = key.upper()
                saved_attrs[name] = g[name]
                g[name] = value
            else:
                name = canonical_species(key)
                saved_masses[name] = SPECIES_MASS[name]
                SPECIES_MASS[name] = value
        yield
    finally:
        g.update(saved_attrs)
        SPECIES_MASS.update(saved_masses)
