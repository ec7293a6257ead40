import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from catfair.annotations import AnnotationTable
from catfair.errors import ConfigError, ParseError
from catfair.planner import (SAME_SIZE, BalancePlan, CountTable, PlanCell, apply_plan,
                             check_criteria, plan_supplement, read_counts, read_plan,
                             resampling_baseline, tabulate_counts, write_counts, write_plan)

FAMILY = (("Black_Hair", "Blond_Hair"),)


def make_table(rows, attrs=("Male", "Blond_Hair", "Black_Hair", "Smiling")):
    rows = np.asarray(rows)
    return AnnotationTable([f"{i:06d}.jpg" for i in range(len(rows))], attrs, rows)


def random_table(rng, n, attrs=("Male", "Blond_Hair", "Black_Hair", "Smiling")):
    vals = rng.integers(0, 2, (n, len(attrs)))
    return make_table(vals, attrs)


def blond_fixture():
    """100 females with 24% blond, 100 males with 2% blond."""
    rows = [[0, 1, 0, 0]] * 24 + [[0, 0, 0, 0]] * 76 + [[1, 1, 0, 0]] * 2 + [[1, 0, 0, 0]] * 98
    return make_table(rows)


# -- tables and criteria --------------------------------------------------------------

def test_tabulate_blond_fixture():
    ct = tabulate_counts(blond_fixture(), "Male", ["Blond_Hair"])
    assert ct.quad("Blond_Hair") == (24, 76, 2, 98)
    assert ct.group_totals.tolist() == [100, 100]


def test_tabulate_empty():
    ct = tabulate_counts(make_table(np.zeros((0, 4))), "Male", ["Smiling"])
    assert ct.quad("Smiling") == (0, 0, 0, 0)


def test_tabulate_matches_row_scan(rng):
    ann = random_table(rng, 300)
    ct = tabulate_counts(ann, "male", ["blond hair", "Smiling"])
    for a in ("Blond_Hair", "Smiling"):
        for g, y in itertools.product((0, 1), repeat=2):
            scan = sum(1 for r in ann.values if r[0] == g and r[ann.attributes.index(a)] == y)
            assert ct.counts[a][g, y] == scan


def test_tabulate_rejects_protected_as_aoi():
    with pytest.raises(ConfigError):
        tabulate_counts(blond_fixture(), "Male", ["Male"])


def test_check_criteria_cases():
    rep = check_criteria(CountTable.from_quads("Male", {"B": (24, 76, 2, 98)}))
    assert not rep.attributes["B"].eo_ok
    assert rep.attributes["B"].deficits["positive"] == 22
    rep = check_criteria(CountTable.from_quads("Male", {"B": (5, 5, 5, 5)}))
    assert rep.dp_ok and rep.all_eodds
    rep = check_criteria(CountTable.from_quads("Male", {"B": (5, 5, 5, 9)}))
    a = rep.attributes["B"]
    assert a.eo_ok and not a.eodds_ok and not rep.dp_ok


def test_count_table_validates():
    with pytest.raises(ConfigError):
        CountTable("Male", [3, 3], {"B": [[1, 1], [1, 1]]})


def test_counts_file_round_trip(tmp_path):
    ct = CountTable.from_quads("Male", {"B": (24, 76, 2, 98), "C": (1, 99, 50, 50)})
    assert read_counts(write_counts(tmp_path / "c.json", ct)) == ct


# -- supplement plans -----------------------------------------------------------------

def test_supplement_blond_fixture():
    ct = CountTable.from_quads("Male", {"Blond_Hair": (24, 76, 2, 98)})
    plan = plan_supplement(ct)
    assert {(c.group, c.assignments, c.count) for c in plan.cells} == {
        (1, (("Blond_Hair", 1),), 22), (0, (("Blond_Hair", 0),), 22)}
    after = check_criteria(apply_plan(plan))
    assert after.all_eodds and after.dp_ok


def test_supplement_group_total_fixture():
    ct = CountTable("Male", [26248 + 1000, 1000])
    plan = plan_supplement(ct)
    assert plan.total == 26248
    assert [(c.group, c.assignments) for c in plan.cells] == [(1, ())]
    assert check_criteria(apply_plan(plan)).dp_ok


def test_balanced_table_gives_empty_plan():
    assert plan_supplement(CountTable.from_quads("Male", {"B": (5, 7, 5, 7)})).cells == ()


@st.composite
def count_tables(draw):
    totals = [draw(st.integers(0, 300)), draw(st.integers(0, 300))]
    names = draw(st.lists(st.sampled_from("ABCD"), min_size=1, max_size=4, unique=True))
    counts = {}
    for a in names:
        pos = [draw(st.integers(0, t)) for t in totals]
        counts[a] = [[totals[g] - pos[g], pos[g]] for g in (0, 1)]
    return CountTable("Male", totals, counts)


@given(count_tables())
def test_supplement_sound_and_minimal(ct):
    plan = plan_supplement(ct)
    for a in ct.attributes:
        assert check_criteria(apply_plan(plan, a)).attributes[a].eodds_ok
    for i, cell in enumerate(plan.cells):
        cells = list(plan.cells)
        cells[i] = PlanCell(cell.group, cell.assignments, cell.count - 1)
        smaller = BalancePlan(plan.mode, plan.protected, plan.attributes, tuple(cells), plan.base)
        attr = cell.assignments[0][0]
        assert not check_criteria(apply_plan(smaller, attr)).attributes[attr].eodds_ok


def test_plan_file_round_trip(tmp_path):
    plan = plan_supplement(CountTable.from_quads("Male", {"B": (24, 76, 2, 98)}), seed=4)
    path = write_plan(tmp_path / "plan.json", plan, extra={"note": "x"})
    assert read_plan(path) == plan


def test_plan_file_rejects_other_formats(tmp_path):
    p = tmp_path / "x.json"
    p.write_text('{"format": "something"}')
    with pytest.raises(ParseError):
        read_plan(p)


def test_unknown_mode():
    with pytest.raises(ConfigError):
        plan_supplement(CountTable("Male", [1, 1]), "remove")


# -- joint and same-size plans ----------------------------------------------------------

def test_joint_plan_balances_every_label_vector(rng):
    ann = random_table(rng, 400)
    attrs = ["Blond_Hair", "Smiling"]
    plan = plan_supplement(tabulate_counts(ann, "Male", attrs), ann=ann, joint=True)
    assert plan.joint
    joint = np.zeros((2, 2, 2), dtype=int)
    for r in ann.values:
        joint[r[0], r[1], r[3]] += 1
    for c in plan.cells:
        a = c.assignment
        joint[c.group, a["Blond_Hair"], a["Smiling"]] += c.count
    assert np.array_equal(joint[0], joint[1])
    after = apply_plan(plan)
    assert check_criteria(after).all_eodds and check_criteria(after).dp_ok


def test_joint_limits():
    ann = blond_fixture()
    ct = tabulate_counts(ann, "Male", ["Blond_Hair"])
    with pytest.raises(ConfigError):
        plan_supplement(ct, joint=True)
    big = CountTable("Male", [1, 1], {a: [[1, 0], [1, 0]] for a in "ABCD"})
    with pytest.raises(ConfigError):
        plan_supplement(big, ann=ann, joint=True)


def test_joint_rejects_exclusive_family():
    rows = [[0, 1, 1, 0]] * 3 + [[1, 0, 0, 0]] * 3
    ann = make_table(rows)
    ct = tabulate_counts(ann, "Male", ["Blond_Hair", "Black_Hair"])
    with pytest.raises(ConfigError, match="exclusive"):
        plan_supplement(ct, ann=ann, joint=True, exclusive_families=FAMILY)


def test_joint_falls_back_when_signatures_overlap():
    class Overlapping:
        def conflicts(self, keys):
            return [(0, 0)]

    ann = blond_fixture()
    ct = tabulate_counts(ann, "Male", ["Blond_Hair", "Smiling"])
    with pytest.warns(UserWarning, match="marginally"):
        plan = plan_supplement(ct, ann=ann, joint=True, registry=Overlapping())
    assert not plan.joint
    assert all(len(c.assignments) == 1 for c in plan.cells)


def test_same_size_blond_fixture():
    ann = make_table(blond_fixture().values.tolist() + [[0, 0, 0, 1]] * 50)
    ct = tabulate_counts(ann, "Male", ["Blond_Hair"])
    plan = plan_supplement(ct, SAME_SIZE, ann=ann, seed=9)
    assert [len(plan.retained_original[g]) for g in (0, 1)] == [50, 50]
    after = apply_plan(plan)
    assert after.group_totals.tolist() == [100, 100]
    assert check_criteria(after).all_eodds
    again = plan_supplement(ct, SAME_SIZE, ann=ann, seed=9)
    assert again == plan


def test_same_size_joint_with_family(rng):
    ann = random_table(rng, 300)
    vals = np.array(ann.values)
    vals[vals[:, 1] == 1, 2] = 0  # nobody is both blond and black-haired
    ann = make_table(vals)
    ct = tabulate_counts(ann, "Male", ["Blond_Hair", "Black_Hair"])
    plan = plan_supplement(ct, SAME_SIZE, ann=ann, joint=True, seed=1, exclusive_families=FAMILY)
    after = apply_plan(plan)
    assert after.group_totals[0] == after.group_totals[1]
    assert check_criteria(after).all_eodds
    assert all(not (c.assignment["Blond_Hair"] and c.assignment["Black_Hair"]) for c in plan.cells)


def test_same_size_needs_joint_for_several_attributes(rng):
    ann = random_table(rng, 50)
    ct = tabulate_counts(ann, "Male", ["Blond_Hair", "Smiling"])
    with pytest.raises(ConfigError):
        plan_supplement(ct, SAME_SIZE, ann=ann)


# -- resampling baseline --------------------------------------------------------------

def test_resampling_baseline():
    rows = [[0, 0, 0, 0]] * 150 + [[1, 0, 0, 0]] * 100
    ann = make_table(rows)
    sel = resampling_baseline(ann, "Male", np.random.default_rng(0))
    assert [sel[g].size for g in (0, 1)] == [100, 100]
    assert np.array_equal(sel[1], np.arange(150, 250))
    again = resampling_baseline(ann, "Male", np.random.default_rng(0))
    assert np.array_equal(sel[0], again[0])


def test_resampling_baseline_equal_and_empty():
    ann = make_table([[0, 0, 0, 0], [1, 0, 0, 0]])
    sel = resampling_baseline(ann, "Male", np.random.default_rng(0))
    assert sel[0].tolist() == [0] and sel[1].tolist() == [1]
    with pytest.raises(ConfigError):
        resampling_baseline(make_table([[0, 0, 0, 0]]), "Male", np.random.default_rng(0))
