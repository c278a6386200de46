"""Combinatorial specification generation."""

import pytest

from latentpc.config import load_reference_universe
from latentpc.specgen import (
    FamilyRule,
    SpecConfigError,
    base_name,
    family_counts,
    generate_specs,
    spec_id_of,
    variant_name,
)
from latentpc.vintages import TransformSpec, VariableDef


def var(name, role):
    return VariableDef(
        name=name, sources=("s",), transform=TransformSpec(), role=role
    )


def pool_of(n_activity, n_controls):
    pool = [var("dep", "dependent")]
    pool += [var(f"act{i}", "factor") for i in range(n_activity)]
    pool += [var(f"ctl{i}", "control") for i in range(n_controls)]
    return pool


class TestNames:
    def test_variant_suffixes(self):
        assert variant_name("Output gap", 0) == "Output gap"
        assert variant_name("Output gap", 1) == "Output gap (d)"
        assert variant_name("Output gap", 2) == "Output gap (dd)"

    def test_base_name_round_trip(self):
        for k in (0, 1, 2, 3):
            assert base_name(variant_name("Cleveland Fed infl. exp. (2y)", k)) == (
                "Cleveland Fed infl. exp. (2y)"
            )


class TestGenerate:
    def test_power_set_small(self):
        specs = generate_specs(pool_of(1, 2), [FamilyRule("f")])
        assert len(specs) == 4
        sizes = sorted(len(s.controls) for s in specs)
        assert sizes == [0, 1, 1, 2]

    def test_two_activities_no_controls(self):
        specs = generate_specs(pool_of(2, 0), [FamilyRule("f")])
        assert len(specs) == 2

    def test_counting_identity(self):
        # For families with disjoint control pools the count identity
        # |specs| = sum over families of (#activities * 2^#controls) is exact.
        pool = [var("dep", "dependent")]
        pool += [var(f"act{i}", "factor") for i in range(3)]
        pool += [var(f"ctlA{i}", "control") for i in range(2)]
        pool += [var(f"ctlB{i}", "control") for i in range(3)]
        families = [
            FamilyRule("a", exclude_controls=("ctlB0", "ctlB1", "ctlB2")),
            FamilyRule("b", exclude_controls=("ctlA0", "ctlA1")),
        ]
        specs = generate_specs(pool, families)
        counts = family_counts(specs)
        assert counts["a"] == 3 * 2**2
        # Family b's empty-control specs duplicate family a's.
        assert counts["b"] == 3 * 2**3 - 3
        assert len(specs) == counts["a"] + counts["b"]

    def test_spec_ids_stable_under_permutation(self):
        pool = pool_of(2, 3)
        specs1 = generate_specs(pool, [FamilyRule("f")])
        specs2 = generate_specs(list(reversed(pool)), [FamilyRule("f")])
        assert {s.spec_id for s in specs1} == {s.spec_id for s in specs2}

    def test_spec_id_control_order_invariant(self):
        a = spec_id_of("dep", "act", ["c1", "c2"])
        b = spec_id_of("dep", "act", ["c2", "c1"])
        assert a == b

    def test_empty_activity_pool_rejected(self):
        with pytest.raises(SpecConfigError):
            generate_specs(pool_of(0, 2), [FamilyRule("f")])

    def test_deterministic_order(self):
        pool = pool_of(3, 3)
        specs1 = generate_specs(pool, [FamilyRule("f")])
        specs2 = generate_specs(pool, [FamilyRule("f")])
        assert [s.spec_id for s in specs1] == [s.spec_id for s in specs2]
        assert [s.spec_id for s in specs1] == sorted(s.spec_id for s in specs1)


class TestReferenceUniverse:
    def test_paper_counts(self):
        pool, families = load_reference_universe()
        specs = generate_specs(pool, families)
        counts = family_counts(specs)
        assert counts == {"standard": 2048, "sticky-flexible": 1920}
        assert len(specs) == 3968

    def test_exactly_one_activity_per_spec(self):
        pool, families = load_reference_universe()
        factors = {v.name for v in pool if v.role == "factor"}
        specs = generate_specs(pool, families)
        for s in specs[:200]:
            assert s.activity in factors
            assert not any(c in factors for c in s.controls)

    def test_family_restriction(self):
        pool, families = load_reference_universe()
        specs = generate_specs(pool, families)
        for s in specs:
            bases = {base_name(c) for c in s.controls}
            if s.family == "standard":
                assert not bases & {"Sticky price CPI", "Flexible price CPI"}
            else:
                assert bases & {"Sticky price CPI", "Flexible price CPI"}
