import numpy as np
import pytest
from scipy import stats

from catfair.discovery import discover, ground_truth_signature
from catfair.errors import ConfigError, SignatureConflictError, UnknownSignatureError
from catfair.latent import LayeredLatent, LayerRange, sample_identity_seeds
from catfair.planner import BalancePlan, CountTable, PlanCell
from catfair.synthesis import (SignatureRegistry, apply_attribute, apply_attributes,
                               read_synthetic_dataset, synthesize_batch, write_synthetic_dataset)
from catfair.toy import (ToyAttribute, ToyGenerator, ToyGeneratorSpec, pooled_features, read_toy_spec, toy_render, toy_seed_sets,
                         write_toy_spec)


def signatures(spec, rng, names=("Male", "Blond_Hair")):
    sigs = []
    for name in names:
        pos, neg = toy_seed_sets(spec, name, 20, 20, rng)
        layers = spec.attribute(name).layers
        sigs += [discover(pos, neg, layers), discover(neg, pos, layers)]
    return SignatureRegistry(sigs)


def plan_for(cells, protected="Male", attrs=("Blond_Hair",)):
    base = CountTable(protected, [0, 0], {a: np.zeros((2, 2)) for a in attrs})
    return BalancePlan("supplement", protected, tuple(attrs), tuple(cells), base)


# -- toy generator ------------------------------------------------------------------

def test_spec_rejects_shared_cells():
    a = ToyAttribute("A", (0, 1), LayerRange(0, 0))
    b = ToyAttribute("B", (1, 2), LayerRange(0, 1))
    with pytest.raises(ConfigError):
        ToyGeneratorSpec(2, 8, (a, b))


def test_spec_rejects_bad_threshold():
    with pytest.raises(ConfigError):
        ToyAttribute("A", (0,), LayerRange(0, 0), shift=1.0, threshold=2.0)


def test_spec_json_round_trip(toy_spec, tmp_path):
    back = read_toy_spec(write_toy_spec(tmp_path / "toy.json", toy_spec))
    assert back == toy_spec
    assert np.array_equal(back.mixing, toy_spec.mixing)


def test_render_is_pure_function_of_latent(toy_spec, rng):
    z = LayeredLatent(rng.standard_normal(toy_spec.shape))
    a = toy_render(z, toy_spec)
    assert a.shape == (toy_spec.output_dim,)
    assert np.array_equal(a, toy_render(LayeredLatent(z.values.copy()), toy_spec))


def test_pooled_feature_is_block_mean(toy_spec):
    v = np.zeros(toy_spec.shape)
    v[2, 10:16] = np.arange(6.0)
    assert pooled_features(v, toy_spec).tolist() == [0.0, 2.5, 0.0]


def test_oracle_annotate_on_seed_sets(toy_spec, rng):
    gen = ToyGenerator(toy_spec)
    pos, neg = toy_seed_sets(toy_spec, "Smiling", 10, 10, rng)
    assert all(gen.annotate(gen.render(z))["Smiling"] == 1 for z in pos.members)
    assert all(gen.annotate(gen.render(z))["Smiling"] == 0 for z in neg.members)


def test_render_shape_mismatch(toy_spec):
    with pytest.raises(ConfigError):
        toy_render(LayeredLatent(np.zeros((2, 2))), toy_spec)


# -- attribute assignment ---------------------------------------------------------

def test_apply_attribute_only_touches_signature_cells(toy_spec, rng):
    pos, _ = toy_seed_sets(toy_spec, "Male", 4, 4, rng)
    sig = ground_truth_signature("Male", pos, LayerRange(1, 1), range(6))
    identity = LayeredLatent(rng.standard_normal(toy_spec.shape))
    out = apply_attribute(identity, sig, pos[2])
    mask = sig.cell_mask()
    assert np.array_equal(out.values[mask], pos[2].values[mask])
    assert np.array_equal(out.values[~mask], identity.values[~mask])


def test_apply_attribute_rejects_foreign_donor(toy_spec, rng):
    pos, neg = toy_seed_sets(toy_spec, "Male", 4, 4, rng)
    sig = ground_truth_signature("Male", pos, LayerRange(1, 1), range(6))
    with pytest.raises(ConfigError):
        apply_attribute(pos[0], sig, neg[0])


def test_apply_attributes_conflict(toy_spec, rng):
    pos, _ = toy_seed_sets(toy_spec, "Male", 4, 4, rng)
    a = ground_truth_signature("Male", pos, LayerRange(1, 1), range(6))
    b = ground_truth_signature("Other", pos, LayerRange(1, 2), [5, 7])
    with pytest.raises(SignatureConflictError) as err:
        apply_attributes(pos[0], [a, b], [pos[1], pos[1]])
    assert err.value.cells == ((1, 5),)


def test_apply_attributes_disjoint_commute(toy_spec, rng):
    pos, _ = toy_seed_sets(toy_spec, "Male", 4, 4, rng)
    a = ground_truth_signature("A", pos, LayerRange(1, 1), range(6))
    b = ground_truth_signature("B", pos, LayerRange(2, 3), [9])
    z = LayeredLatent(rng.standard_normal(toy_spec.shape))
    assert apply_attributes(z, [a, b], [pos[0], pos[3]]) == apply_attributes(z, [b, a], [pos[3], pos[0]])


# -- batches ------------------------------------------------------------------------

def test_registry_unknown_and_duplicate(toy_spec, rng):
    reg = signatures(toy_spec, rng, ("Male",))
    with pytest.raises(UnknownSignatureError):
        reg[("Smiling", 1)]
    with pytest.raises(ConfigError):
        reg.add(reg[("Male", 1)])


def test_batch_counts_labels_and_determinism(toy_spec, rng):
    reg = signatures(toy_spec, rng)
    gen = ToyGenerator(toy_spec)
    cells = [PlanCell(1, (("Blond_Hair", 1),), 3), PlanCell(0, (("Blond_Hair", 0),), 2)]
    plan = plan_for(cells)
    a = synthesize_batch(plan, reg, gen, seed=7)
    b = synthesize_batch(plan, reg, gen, seed=7)
    assert [(s.protected, s.labels) for s in a] == [(1, {"Blond_Hair": 1})] * 3 + [
        (0, {"Blond_Hair": 0})] * 2
    assert all(x.latent == y.latent for x, y in zip(a, b))
    assert any(x.latent != y.latent for x, y in zip(a, synthesize_batch(plan, reg, gen, seed=8)))


def test_batch_missing_signature(toy_spec, rng):
    reg = signatures(toy_spec, rng, ("Male",))
    plan = plan_for([PlanCell(0, (("Blond_Hair", 1),), 1)])
    with pytest.raises(UnknownSignatureError):
        synthesize_batch(plan, reg, ToyGenerator(toy_spec))


def test_paired_mode_shares_identities(toy_spec, rng):
    reg = signatures(toy_spec, rng)
    cells = [PlanCell(0, (("Blond_Hair", 1),), 4), PlanCell(1, (("Blond_Hair", 1),), 4)]
    out = synthesize_batch(plan_for(cells), reg, ToyGenerator(toy_spec), seed=3, paired=True)
    smile = (3, slice(20, 26))
    for j in range(4):
        assert np.array_equal(out[j].latent.values[smile], out[4 + j].latent.values[smile])


def test_label_fidelity_small(toy_spec, rng):
    reg = signatures(toy_spec, rng)
    gen = ToyGenerator(toy_spec)
    cells = [PlanCell(g, (("Blond_Hair", y),), 50) for g in (0, 1) for y in (0, 1)]
    for s in synthesize_batch(plan_for(cells), reg, gen, seed=1):
        got = gen.annotate(s.image)
        assert got["Male"] == s.protected and got["Blond_Hair"] == s.labels["Blond_Hair"]


def test_unassigned_feature_matches_identity(toy_spec, rng):
    reg = signatures(toy_spec, rng)
    gen = ToyGenerator(toy_spec)
    cells = [PlanCell(g, (("Blond_Hair", 1),), 200) for g in (0, 1)]
    synth = [s.image[2] for s in synthesize_batch(plan_for(cells), reg, gen, seed=2)]
    raw = [gen.render(z)[2] for z in sample_identity_seeds(400, gen.config, rng).members]
    assert stats.ks_2samp(synth, raw).pvalue > 0.01


# -- dataset files ------------------------------------------------------------------

def test_dataset_round_trip_and_append(toy_spec, rng, tmp_path):
    reg = signatures(toy_spec, rng)
    gen = ToyGenerator(toy_spec)
    plan = plan_for([PlanCell(1, (("Blond_Hair", 1),), 3)])
    first = synthesize_batch(plan, reg, gen, seed=0)
    second = synthesize_batch(plan, reg, gen, seed=1)
    out = write_synthetic_dataset(tmp_path / "ds", first, "Male", {"run": 1})
    before = (out / "latents.f32").read_bytes()
    write_synthetic_dataset(out, second, "Male", append=True)
    records, latents, images = read_synthetic_dataset(out)
    assert [r["index"] for r in records] == list(range(6))
    assert (out / "latents.f32").read_bytes().startswith(before)
    assert records[0]["protected"] == {"Male": 1}
    assert records[4]["labels"] == {"Blond_Hair": 1}
    expect = np.stack([s.latent.values for s in first + second]).astype(np.float32)
    assert np.array_equal(latents, expect)
    assert np.array_equal(images[5], second[2].image.astype(np.float32))
