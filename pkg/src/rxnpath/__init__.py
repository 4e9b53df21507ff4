"""rxnpath: reaction representation pretraining and reaction-path generation."""

from .chem import Molecule, canonicalize, get_backend, parse_molecule
from .errors import *  # noqa: F401,F403
from .reaction import Reaction, parse_reaction, read_reactions, write_reactions

__version__ = "0.1.0"
