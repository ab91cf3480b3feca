"""Thermodynamic formalism on subshifts of finite type.

Transfer operators and Gibbs measures, the complex operators ``L_ab`` with a
Dolgopyat-type contraction harness, suspension semiflow correlations, and
periodic-orbit counting with truncated Ruelle zeta functions.
"""

from .errors import ConfigError, InputError, NotPrimitiveError, NumericalError, ThermolabError
from .potentials import CylinderFunction, SeriesPotential, TablePotential
from .subshift import SubshiftModel

__version__ = "0.1.0"

__all__ = ["ConfigError", "InputError", "NotPrimitiveError", "NumericalError", "ThermolabError",
           "CylinderFunction", "SeriesPotential", "TablePotential", "SubshiftModel", "__version__"]
