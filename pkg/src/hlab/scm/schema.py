"""JSON schema for discrete SCMs with table-valued structural functions.

Format:
    {
      "name": "...",
      "exogenous": [{"name": "gene", "values": [...], "probs": [...]}],
      "variables": [{"name": "cured", "parents": ["drug"], "exo": ["gene"],
                     "table": {"A|1": 1, "A|0": 1, ...}}],
      "treatment": "drug", "outcome": "cured", "treatment_values": [1, 0]
    }

Table keys join the parent values then the exogenous values with "|",
stringified; every reachable input combination must be present.
"""

from __future__ import annotations

import json
from pathlib import Path

from .model import ExoVar, Scm, ScmVariable

__all__ = ["scm_from_dict", "load_scm"]


def _table_fn(name: str, parents: tuple, exo: tuple, table: dict):
    def fn(**kwargs):
        key = "|".join(str(kwargs[k]) for k in (*parents, *exo))
        if key not in table:
            raise KeyError(f"{name}: no table entry for inputs {key!r}")
        return table[key]
    return fn


def scm_from_dict(spec: dict) -> Scm:
    exos = [ExoVar(e["name"], tuple(e["values"]), tuple(e["probs"]))
            for e in spec["exogenous"]]
    variables = []
    for v in spec["variables"]:
        parents = tuple(v.get("parents", ()))
        exo = tuple(v.get("exo", ()))
        variables.append(ScmVariable(
            v["name"], parents=parents, exo=exo,
            fn=_table_fn(v["name"], parents, exo, v["table"])))
    return Scm(exogenous=exos, variables=variables,
               treatment=spec.get("treatment"),
               outcome=spec.get("outcome"),
               treatment_values=tuple(spec.get("treatment_values", (1, 0))),
               name=spec.get("name", ""))


def load_scm(path: str | Path) -> Scm:
    return scm_from_dict(json.loads(Path(path).read_text()))
