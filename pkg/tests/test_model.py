import json

import numpy as np
import pytest

from qcrb import model
from qcrb.errors import (
    DimensionMismatch,
    InvalidParameter,
    NonHermitianHamiltonian,
    SchemaError,
    StepTooLarge,
)


def test_two_level_matrices():
    m = model.two_level(0.0, 1.0, 0.5)
    np.testing.assert_allclose(m.h(), [[0.0, 0.5], [0.5, 0.0]], atol=0)
    (jump,) = m.jump_ops()
    np.testing.assert_allclose(jump, [[0.0, np.sqrt(0.5)], [0.0, 0.0]], atol=0)
    np.testing.assert_allclose(
        m.h_eff(), [[0.0, 0.5], [0.5, -0.25j]], atol=1e-15)


def test_two_level_detuned():
    m = model.two_level(2.0, 1.0, 0.5)
    np.testing.assert_allclose(m.h(), [[0.0, 0.5], [0.5, 2.0]], atol=0)


def test_two_level_rejects_nonpositive_kappa():
    with pytest.raises(InvalidParameter):
        model.two_level(0.0, 1.0, 0.0)
    with pytest.raises(InvalidParameter):
        model.two_level(0.0, 1.0, -1.0)


def test_dephasing_qubit():
    m = model.dephasing_qubit(1.0)
    np.testing.assert_allclose(m.h(), np.diag([-0.5, 0.5]), atol=0)
    assert m.jumps == ()
    np.testing.assert_allclose(np.abs(m.initial_state), [2 ** -0.5] * 2)


def test_parameter_vector_perturbed():
    pv = model.ParameterVector(("a", "b"), [1.0, 2.0])
    qv = pv.perturbed(1, 0.5)
    assert qv.values[1] == 2.5 and pv.values[1] == 2.0
    assert pv.index("b") == 1
    with pytest.raises(ValueError):
        model.ParameterVector(("a", "a"), [1.0, 2.0])


def test_effect_operators_values():
    m = model.two_level(0.0, 1.0, 0.5)
    eff = model.effect_operators(m, m.params, 1e-3)
    want = np.eye(2) - 1j * 1e-3 * np.array([[0.0, 0.5], [0.5, -0.25j]])
    np.testing.assert_allclose(eff.no_jump, want, atol=1e-18)
    np.testing.assert_allclose(
        eff.jumps[0], np.sqrt(1e-3) * np.array([[0, np.sqrt(0.5)], [0, 0]]),
        atol=1e-18)


def test_effect_operators_step_guard():
    m = model.two_level(0.0, 1.0, 0.5)
    with pytest.raises(StepTooLarge):
        model.effect_operators(m, m.params, 0.2)
    with pytest.raises(StepTooLarge):
        model.effect_operators(m, m.params, -1e-3)


def test_povm_completeness_second_order():
    # || sum Omega^dag Omega - 1 || must scale as dt^2 with bounded constant
    m = model.two_level(1.0, 1.0, 0.5)
    ratios = []
    for dt in (1e-2, 1e-3, 1e-4):
        eff = model.effect_operators(m, m.params, dt)
        total = sum(op.conj().T @ op for op in eff.all_ops())
        defect = np.linalg.norm(total - np.eye(2), 2)
        ratios.append(defect / dt ** 2)
    ratios = np.array(ratios)
    # first-order truncation: defect = dt^2 ||H_eff^dag H_eff||, dt-independent
    assert ratios.max() <= 1.05 * ratios.min()
    assert ratios.max() < 10.0


def test_effect_operators_random_parameters():
    rng = np.random.default_rng(7)
    for _ in range(20):
        d, om, k = rng.uniform(-3, 3), rng.uniform(0.1, 3), rng.uniform(0.1, 2)
        m = model.two_level(d, om, k)
        eff = model.effect_operators(m, m.params, 1e-3)
        heff = np.array([[0, om / 2], [om / 2, d - 0.5j * k]])
        np.testing.assert_allclose(eff.no_jump, np.eye(2) - 1j * 1e-3 * heff,
                                   atol=1e-15)
        assert eff.jumps[0][0, 1] == pytest.approx(np.sqrt(1e-3 * k))


def _affine_entry(re=0.0, im=0.0, terms=()):
    return {"re": re, "im": im, "terms": list(terms)}


def _document():
    z = _affine_entry()
    return {
        "name": "loaded",
        "dimension": 2,
        "parameters": [{"name": "g", "value": 0.7}],
        "hamiltonian": [
            [z, _affine_entry(terms=[{"param": "g", "coeff_re": 0.5,
                                      "coeff_im": 0.0}])],
            [_affine_entry(terms=[{"param": "g", "coeff_re": 0.5,
                                   "coeff_im": 0.0}]), z],
        ],
        "jumps": [[[z, _affine_entry(re=0.6)], [z, z]]],
        "initial_state": "steady",
    }


def test_load_model_affine_document():
    m = model.load_model(_document())
    assert m.dimension == 2
    assert m.params.names == ("g",)
    np.testing.assert_allclose(m.h(), [[0, 0.35], [0.35, 0]], atol=1e-15)
    np.testing.assert_allclose(m.h([2.0]), [[0, 1.0], [1.0, 0]], atol=1e-15)
    np.testing.assert_allclose(m.jump_ops()[0], [[0, 0.6], [0, 0]], atol=0)


def test_load_model_json_text_and_builtin():
    m = model.load_model(json.dumps({"builtin": "two_level",
                                     "params": {"delta": 1.0}}))
    assert m.name == "two_level"
    assert m.params.as_dict() == {"delta": 1.0, "omega": 1.0, "kappa": 0.5}


def test_load_model_rejects_non_hermitian():
    doc = _document()
    doc["hamiltonian"][0][1] = _affine_entry(re=1.0)  # upper entry only
    with pytest.raises(NonHermitianHamiltonian):
        model.load_model(doc)


def test_load_model_rejects_non_hermitian_coefficient():
    doc = _document()
    doc["hamiltonian"][0][1]["terms"][0]["coeff_im"] = 0.3
    with pytest.raises(NonHermitianHamiltonian):
        model.load_model(doc)


def test_load_model_dimension_mismatch():
    doc = _document()
    doc["jumps"] = [[[_affine_entry()] * 3] * 3]
    with pytest.raises(DimensionMismatch):
        model.load_model(doc)


def test_load_model_schema_errors():
    with pytest.raises(SchemaError):
        model.load_model("{not json")
    with pytest.raises(SchemaError):
        model.load_model({"dimension": 2})
    doc = _document()
    doc["hamiltonian"][0][0] = {"re": 0.0}  # missing "im"
    with pytest.raises(SchemaError):
        model.load_model(doc)
    doc = _document()
    doc["hamiltonian"][0][1]["terms"][0]["param"] = "nope"
    with pytest.raises(SchemaError):
        model.load_model(doc)


def test_save_model_roundtrip_document():
    doc = _document()
    m = model.load_model(doc)
    assert model.save_model(m) == doc
    m2 = model.load_model(model.save_model(m))
    np.testing.assert_allclose(m2.h([1.3]), m.h([1.3]), atol=0)


def test_save_model_freezes_builtin():
    m = model.two_level(0.5, 1.0, 0.5)
    doc = model.save_model(m)
    m2 = model.load_model(doc)
    np.testing.assert_allclose(m2.h(), m.h(), atol=0)
    np.testing.assert_allclose(m2.jump_ops()[0], m.jump_ops()[0], atol=0)
    # the frozen document is affine, so the sqrt(kappa) dependence is lost:
    # operators agree at the freezing point, by construction only there
    assert m2.params.as_dict() == m.params.as_dict()


def test_initial_state_parsing():
    doc = _document()
    doc["initial_state"] = {"pure": [{"re": 1.0, "im": 0.0},
                                     {"re": 1.0, "im": 0.0}]}
    m = model.load_model(doc)
    np.testing.assert_allclose(m.initial_state, [2 ** -0.5] * 2, atol=1e-15)

    doc["initial_state"] = {"density": [
        [{"re": 0.5, "im": 0.0}, {"re": 0.0, "im": 0.0}],
        [{"re": 0.0, "im": 0.0}, {"re": 0.5, "im": 0.0}]]}
    m = model.load_model(doc)
    np.testing.assert_allclose(m.initial_state, np.eye(2) / 2, atol=0)

    doc["initial_state"] = {"pure": [{"re": 0.0, "im": 0.0}] * 2}
    with pytest.raises(SchemaError):
        model.load_model(doc)
