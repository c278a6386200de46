"""Combinatorial generation of factor specifications from a variable pool.

Every specification pairs exactly one activity variant with a subset of
control variants (including the empty and full sets).  Families restrict
which controls are admissible; specifications whose content coincides
across families are de-duplicated, keeping the first family's instance.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Sequence

from .vintages import VariableDef

SPEC_ID_LEN = 12


class SpecConfigError(Exception):
    """Invalid pool or family configuration."""


@dataclass(frozen=True)
class FamilyRule:
    """A family admits all controls except those excluded by base name."""

    name: str
    exclude_controls: tuple[str, ...] = ()


@dataclass(frozen=True)
class FactorSpec:
    spec_id: str
    family: str
    dependent: str
    activity: str
    controls: tuple[str, ...]

    def variables(self) -> tuple[str, ...]:
        return (self.activity,) + self.controls


def variant_name(base: str, extra_differencing: int) -> str:
    """Differencing suffix convention: level unmarked, then (d), (dd), ..."""
    if extra_differencing == 0:
        return base
    return f"{base} ({'d' * extra_differencing})"


def base_name(name: str) -> str:
    """Strip a trailing differencing suffix, if present."""
    if name.endswith(")"):
        head, _, tail = name.rpartition(" (")
        if head and tail[:-1] and set(tail[:-1]) == {"d"}:
            return head
    return name


def spec_id_of(dependent: str, activity: str, controls: Sequence[str]) -> str:
    """Stable content hash, invariant to control ordering."""
    payload = "|".join([dependent, activity, ";".join(sorted(controls))])
    return hashlib.sha1(payload.encode("utf-8")).hexdigest()[:SPEC_ID_LEN]


def generate_specs(
    pool: Sequence[VariableDef], families: Sequence[FamilyRule]
) -> list[FactorSpec]:
    """Enumerate (activity variant) x (control-variant subset) per family.

    The result is de-duplicated by specification content across families and
    deterministically ordered by spec_id.
    """
    dependents = [v for v in pool if v.role == "dependent"]
    activities = [v for v in pool if v.role == "factor"]
    controls = [v for v in pool if v.role == "control"]
    if len(dependents) != 1:
        raise SpecConfigError(f"expected exactly one dependent, found {len(dependents)}")
    if not activities:
        raise SpecConfigError("activity pool is empty")
    if not families:
        raise SpecConfigError("no families configured")
    dependent = dependents[0].name
    activities = sorted(activities, key=lambda v: v.name)
    controls = sorted(controls, key=lambda v: v.name)

    seen: set[str] = set()
    specs: list[FactorSpec] = []
    for family in families:
        allowed = [c for c in controls if base_name(c.name) not in family.exclude_controls]
        names = [c.name for c in allowed]
        k = len(names)
        for activity in activities:
            for mask in range(1 << k):
                subset = tuple(names[i] for i in range(k) if mask >> i & 1)
                sid = spec_id_of(dependent, activity.name, subset)
                if sid in seen:
                    continue
                seen.add(sid)
                specs.append(
                    FactorSpec(
                        spec_id=sid,
                        family=family.name,
                        dependent=dependent,
                        activity=activity.name,
                        controls=subset,
                    )
                )
    specs.sort(key=lambda s: s.spec_id)
    return specs


def family_counts(specs: Sequence[FactorSpec]) -> dict[str, int]:
    out: dict[str, int] = {}
    for s in specs:
        out[s.family] = out.get(s.family, 0) + 1
    return out


def write_specs_csv(path, specs: Sequence[FactorSpec]) -> None:
    """Spec list export: ``spec_id,family,activity,controls`` (controls ;-joined)."""
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["spec_id", "family", "activity", "controls"])
        for s in specs:
            writer.writerow([s.spec_id, s.family, s.activity, ";".join(s.controls)])
