"""Forward-reaction predictor interface and a small SMARTS-template implementation."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Protocol, Sequence, Tuple

from .chem import canonicalize, get_backend
from .errors import ParseError, PredictFailure
from .reaction import Reaction, parse_reaction

logger = logging.getLogger(__name__)

SUB_REACTANT = "sub-reactant"
REAGENT = "reagent"
ROLES = (SUB_REACTANT, REAGENT)


@dataclass(frozen=True)
class Response:
    smiles: str
    role: str = SUB_REACTANT

    def to_dict(self):
        return {"smiles": self.smiles, "role": self.role}


class ForwardPredictor(Protocol):
    def predict(self, main: str, responses: Sequence[Response]) -> str: ...


# (name, reaction SMARTS); bimolecular, tried in both slot orders
TEMPLATES: Tuple[Tuple[str, str], ...] = (
    ("amide_coupling", "[C:1](=[O:2])[OX2H1].[NX3;H2,H1;!$(NC=O);!$(N-a):3]>>[C:1](=[O:2])[N:3]"),
    ("esterification", "[C:1](=[O:2])[OX2H1].[OX2H1:3][CX4:4]>>[C:1](=[O:2])[O:3][C:4]"),
    ("n_alkylation", "[NX3;H2,H1;!$(NC=O);!$(N-a):1].[Cl,Br,I][CX4:2]>>[N:1][C:2]"),
    ("reductive_amination", "[CX3H1:1](=O)[#6:2].[NX3;H2,H1;!$(NC=O);!$(N-a):3]>>[C:1]([#6:2])[N:3]"),
    ("williamson_ether", "[OX2H1:1][#6;!$(C=O):2].[Cl,Br,I][CX4:3]>>[O:1]([#6:2])[C:3]"),
)


@dataclass(frozen=True)
class Outcome:
    template: str
    product: str
    mapped_reaction: str  # "main.partner>>product" with maps on surviving atoms


class TemplatePredictor:
    """Deterministic toy predictor: tries every template on (main, sub-reactant) pairs.

    Reagent-role responses never enter a template.  Among all products the
    lexicographically smallest canonical SMILES wins, so the result does not
    depend on response order.
    """

    def __init__(self, templates: Sequence[Tuple[str, str]] = TEMPLATES):
        self.templates = tuple(templates)
        self._cache: Dict[Tuple[str, Tuple[str, ...]], Optional[Outcome]] = {}

    def outcomes(self, main: str, partner: str) -> List[Outcome]:
        backend = get_backend()
        found = []
        for name, smarts in self.templates:
            for pair in ((main, partner), (partner, main)):
                try:
                    res = backend.apply_template(smarts, pair)
                except ParseError:
                    continue
                for r in res:
                    if pair[0] == partner:
                        # keep the main reactant first in the mapped string
                        lhs, rhs = r.mapped_reaction.split(">>")
                        a, b = lhs.split(".")
                        mapped = f"{b}.{a}>>{rhs}"
                    else:
                        mapped = r.mapped_reaction
                    found.append(Outcome(name, r.product, mapped))
        return found

    def best(self, main: str, responses: Sequence[Response]) -> Outcome:
        main_c = canonicalize(main)
        partners = tuple(sorted({canonicalize(r.smiles) for r in responses if r.role == SUB_REACTANT}))
        key = (main_c, partners)
        if key not in self._cache:
            cands = []
            for p in partners:
                for o in self.outcomes(main_c, p):
                    # an echoed reactant is not a prediction
                    if o.product not in (main_c, p):
                        cands.append(o)
            self._cache[key] = min(cands, key=lambda o: (o.product, o.template)) if cands else None
        out = self._cache[key]
        if out is None:
            raise PredictFailure(f"no template applies to {main_c} with {list(partners)}")
        return out

    def predict(self, main: str, responses: Sequence[Response]) -> str:
        return self.best(main, responses).product

    def predict_reaction(self, main: str, responses: Sequence[Response], class_label: Optional[str] = None) -> Reaction:
        """Atom-mapped reaction record for the predicted step, reagents appended unmapped."""
        o = self.best(main, responses)
        lhs, rhs = o.mapped_reaction.split(">>")
        reagents = ".".join(sorted(canonicalize(r.smiles) for r in responses if r.role == REAGENT))
        return parse_reaction(f"{lhs}>{reagents}>{rhs}", class_label=class_label or o.template)
