import json

import numpy as np
import pytest

from builders import random_net
from tropdiv import io
from tropdiv.exceptions import DimensionError
from tropdiv.network import (TropicalPart, TwoLayerNet, activated_vertex, activation_patterns,
                             check_divisibility, decompose, part_to_polynomial, part_value,
                             preactivation)
from tropdiv.tropical import TropicalPolynomial, evaluate

HAND_NET = TwoLayerNet([[1.0], [1.0]], [0.0, -1.0], [1.0, 1.0], 0.0)
HAND_PART = TropicalPart([1.0, 1.0], [[1.0], [1.0]], [0.0, -1.0])


def test_preactivation_examples():
    assert preactivation(HAND_NET, [2.0]) == 3.0
    net = TwoLayerNet([[1.0], [1.0]], [0.0, -1.0], [1.0, 1.0], 0.7)
    assert preactivation(net, [-4.0]) == 0.7
    flat = TwoLayerNet(np.ones((3, 2)), np.zeros(3), np.zeros(3), -1.5)
    np.testing.assert_array_equal(preactivation(flat, np.random.default_rng(0).normal(size=(5, 2))),
                                  np.full(5, -1.5))


def test_net_validation():
    with pytest.raises(DimensionError):
        TwoLayerNet(np.ones((2, 3)), np.zeros(3), np.ones(2), 0.0)
    with pytest.raises(ValueError):
        TwoLayerNet(np.ones((1, 1)), [np.nan], [1.0], 0.0)
    with pytest.raises(DimensionError):
        preactivation(HAND_NET, [[1.0, 2.0]])


def test_decompose_examples():
    net = TwoLayerNet([[1.0], [2.0]], [0.0, 0.0], [1.0, -2.0], 0.5)
    p_plus, p_minus, b = decompose(net)
    assert p_plus.scales.tolist() == [1.0] and p_plus.neurons == (0,)
    assert p_minus.scales.tolist() == [2.0] and p_minus.neurons == (1,)
    assert b == 0.5
    _, empty, _ = decompose(HAND_NET)
    assert empty.n_units == 0
    np.testing.assert_array_equal(part_value(empty, np.linspace(-3, 3, 7)), np.zeros(7))


def test_decompose_identity_random_nets():
    rng = np.random.default_rng(0)
    for _ in range(10):
        net = random_net(rng)
        X = rng.normal(scale=3, size=(1000, net.n_features))
        p_plus, p_minus, b = decompose(net)
        diff = part_value(p_plus, X) - part_value(p_minus, X) + b - preactivation(net, X)
        assert np.abs(diff).max() <= 1e-9


def test_activated_vertex_examples():
    v = activated_vertex(HAND_PART, [2.0])
    np.testing.assert_array_equal(v.extended, [2.0, -1.0])
    assert v.pattern == np.packbits([True, True]).tobytes()
    v = activated_vertex(HAND_PART, [-1.0])
    np.testing.assert_array_equal(v.extended, [0.0, 0.0])
    scaled = TropicalPart([2.0, 0.0], [[1.0], [1.0]], [0.0, -1.0])
    np.testing.assert_array_equal(activated_vertex(scaled, [2.0]).extended, [2.0, 0.0])


def test_zero_preactivation_is_inactive():
    assert not activation_patterns(HAND_PART, [[1.0]])[0, 1]


def test_activated_vertex_certificate_and_envelope():
    rng = np.random.default_rng(1)
    net = random_net(rng, d=3, n1=12)
    part, _, _ = decompose(net)
    X = rng.normal(scale=2, size=(300, 3))
    verts = np.array([activated_vertex(part, x).extended for x in X])
    values = part_value(part, X)
    np.testing.assert_allclose(np.sum(verts[:, :-1] * X, axis=1) + verts[:, -1], values, atol=1e-9)
    # the part is the upper envelope of the observed vertex functions
    envelope = (X @ verts[:, :-1].T + verts[:, -1]).max(axis=1)
    np.testing.assert_allclose(envelope, values, atol=1e-9)


def test_part_polynomial_expansion_matches_value():
    rng = np.random.default_rng(2)
    net = random_net(rng, d=2, n1=6)
    for part in decompose(net)[:2]:
        P = part_to_polynomial(part)
        X = rng.normal(size=(200, 2))
        np.testing.assert_allclose(evaluate(P, X), part_value(part, X), atol=1e-9)
    with pytest.raises(ValueError):
        part_to_polynomial(TropicalPart(np.ones(20), np.ones((20, 1)), np.zeros(20)))


def test_check_divisibility_examples():
    rng = np.random.default_rng(3)
    for _ in range(10):
        part, _, _ = decompose(random_net(rng))
        for i in range(part.n_units):
            assert check_divisibility(part, i, samples=200, rng=i)
    single = TropicalPart([1.5], [[2.0, -1.0]], [0.3])
    assert check_divisibility(single, 0, samples=1000, rng=0)


def test_check_divisibility_rejects_foreign_segment():
    part = TropicalPart([1.0, 2.0], [[1.0, 0.0], [0.0, 1.0]], [0.0, 0.5])
    foreign = TropicalPolynomial([[1.3, 0.2], [0.0, 0.0]], [0.1, 0.0], 2)
    assert not check_divisibility(part, 0, samples=1000, rng=0, divisor=foreign)
    with pytest.raises(IndexError):
        check_divisibility(part, 5)
    with pytest.raises(ValueError):
        check_divisibility(TropicalPart([0.0], [[1.0, 0.0]], [0.0]), 0)


def test_model_json_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(4)
    net = TwoLayerNet(rng.normal(size=(7, 3)) * 1e-7, rng.normal(size=7), rng.normal(size=7),
                      float(np.nextafter(0.1, 1)))
    path = tmp_path / "m.json"
    io.write_json(path, io.model_to_json(net))
    back = io.read_model(path)
    assert back == net
    assert back.W1.tobytes() == net.W1.tobytes()


def test_model_json_errors():
    with pytest.raises(io.SchemaError, match="b2"):
        io.model_from_json({"W1": [[1.0]], "b1": [0.0], "w2": [1.0]})
    with pytest.raises(io.SchemaError, match="W1"):
        io.model_from_json({"W1": [1.0], "b1": [0.0], "w2": [1.0], "b2": 0.0})
    with pytest.raises(io.SchemaError):
        io.model_from_json(json.loads('{"W1": [[1.0]], "b1": [0.0, 1.0], "w2": [1.0], "b2": 0}'))
