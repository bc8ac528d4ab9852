"""JSON documents written by the command-line tools.

Clusters are stored as sorted lists of variable names so a document does not
depend on the column order of its input.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from typing import Optional, Sequence

from .engine import Hierarchy, MergeStep, auto_partition, cumulative_curve, cut
from .errors import InvalidArgumentError
from .measures import Hyperparams, Measure, SimilaritySpec
from .partition import Partition

__all__ = [
    "FORMAT",
    "HierarchyDocument",
    "PARTITION_FORMAT",
    "dumps",
    "load_partition",
    "partition_document",
    "schema",
]

FORMAT = "bahc-hierarchy/1"
PARTITION_FORMAT = "bahc-partition/1"


def schema(name: str = "hierarchy") -> dict:
    """Published JSON schema (``"hierarchy"`` or ``"partition"``)."""
    text = (resources.files("bahc") / "schemas" / f"{name}.schema.json").read_text()
    return json.loads(text)


def dumps(doc: dict) -> str:
    """Canonical serialization: sorted keys, two-space indent, trailing newline."""
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _named(names: Sequence[str], cluster) -> list[str]:
    return sorted(names[i] for i in cluster)


def _partition_names(names: Sequence[str], p: Partition) -> list[list[str]]:
    return sorted(_named(names, b) for b in p.blocks)


@dataclass(frozen=True)
class HierarchyDocument:
    variables: tuple[str, ...]
    input: dict
    method: dict
    steps: tuple[dict, ...]
    stopped_early: bool
    partition_rule: str
    partition: tuple[tuple[str, ...], ...]
    cumulative_curve: Optional[tuple[dict, ...]]

    @classmethod
    def build(cls, h: Hierarchy, names: Sequence[str], input_desc: dict, method_name: str,
              spec: SimilaritySpec, stop: str, seed: int) -> "HierarchyDocument":
        names = tuple(str(x) for x in names)
        if len(names) != h.d:
            raise InvalidArgumentError(f"{len(names)} names for {h.d} variables")
        if len(set(names)) != len(names):
            raise InvalidArgumentError("variable names must be unique")
        steps = []
        for st in h.steps:
            # order the two sides by name so the document ignores column order
            left, right = sorted((_named(names, st.left), _named(names, st.right)))
            steps.append({
                "step": st.step,
                "left": left,
                "right": right,
                "similarity": st.similarity,
                "cumulative_log_bf": st.cumulative_log_bf,
                "ties": st.ties_broken,
            })
        if stop.startswith("k="):
            part = cut(h, int(stop[2:]))
        elif h.measure.has_log_bf:
            part = auto_partition(h)
        else:
            part = h.partition_at(len(h.steps))
        curve = None
        if h.measure.has_log_bf:
            curve = tuple({"level": lv, "ln": ln, "log10": lg} for lv, ln, lg in cumulative_curve(h))
        method = {
            "name": method_name,
            "measure": spec.measure.value,
            "use_abs": spec.use_abs,
            "stop": stop,
            "seed": seed,
            "hyperparameters": spec.hyper.to_dict() if spec.hyper is not None else None,
        }
        return cls(names, dict(input_desc), method, tuple(steps), h.stopped_early,
                   stop if stop.startswith("k=") else ("auto" if h.measure.has_log_bf else "full"),
                   tuple(tuple(b) for b in _partition_names(names, part)), curve)

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "variables": list(self.variables),
            "input": dict(self.input),
            "method": dict(self.method),
            "steps": [dict(s) for s in self.steps],
            "stopped_early": self.stopped_early,
            "partition_rule": self.partition_rule,
            "partition": [list(b) for b in self.partition],
            "cumulative_curve": None if self.cumulative_curve is None else [dict(c) for c in self.cumulative_curve],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "HierarchyDocument":
        if doc.get("format") != FORMAT:
            raise InvalidArgumentError(f"not a hierarchy document (format={doc.get('format')!r})")
        curve = doc.get("cumulative_curve")
        return cls(
            tuple(doc["variables"]),
            dict(doc["input"]),
            dict(doc["method"]),
            tuple(dict(s) for s in doc["steps"]),
            bool(doc["stopped_early"]),
            doc["partition_rule"],
            tuple(tuple(b) for b in doc["partition"]),
            None if curve is None else tuple(dict(c) for c in curve),
        )

    def partition_obj(self) -> Partition:
        index = {name: k for k, name in enumerate(self.variables)}
        return Partition(len(self.variables), tuple(tuple(index[x] for x in b) for b in self.partition))

    def hierarchy(self) -> Hierarchy:
        """Rebuild the merge trace (index-based) from the document."""
        index = {name: k for k, name in enumerate(self.variables)}
        steps = tuple(
            MergeStep(s["step"], tuple(sorted(index[x] for x in s["left"])),
                      tuple(sorted(index[x] for x in s["right"])), s["similarity"],
                      s["cumulative_log_bf"], s["ties"])
            for s in self.steps
        )
        return Hierarchy(len(self.variables), steps, Measure(self.method["measure"]), self.stopped_early,
                         len(steps) if self.method["stop"] == "auto" else None)

    def hyperparams(self) -> Optional[Hyperparams]:
        h = self.method.get("hyperparameters")
        if h is None:
            return None
        return Hyperparams(h["nu"], tuple(h["lambda_diag"]), h["variant"], h["omega_scale"])


def partition_document(names: Sequence[str], p: Partition, **extra) -> dict:
    return {"format": PARTITION_FORMAT, "variables": list(names),
            "partition": _partition_names(names, p), **extra}


def load_partition(doc: dict) -> tuple[tuple[str, ...], Partition]:
    """Variable names and partition from a hierarchy or partition document."""
    fmt = doc.get("format") if isinstance(doc, dict) else None
    if fmt not in (FORMAT, PARTITION_FORMAT):
        raise InvalidArgumentError(f"unrecognized document format {fmt!r}")
    names = tuple(doc["variables"])
    index = {name: k for k, name in enumerate(names)}
    try:
        blocks = tuple(tuple(index[x] for x in b) for b in doc["partition"])
    except KeyError as exc:
        raise InvalidArgumentError(f"partition names unknown variable {exc.args[0]!r}") from None
    return names, Partition(len(names), blocks)

