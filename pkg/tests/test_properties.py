"""Property-based checks of the core invariants."""
import math

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from tropdiv import io
from tropdiv.compress import budget_split, compress
from tropdiv.division import divide, erosion, verify_inequality
from tropdiv.network import TwoLayerNet, decompose, part_value, preactivation
from tropdiv.tropical import TropicalPolynomial, as_lattice, tropical_product

coeff = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


@st.composite
def lattice_polys(draw, dim, max_degree, max_terms=5):
    degree = st.tuples(*[st.integers(0, max_degree)] * dim)
    terms = draw(st.dictionaries(degree, coeff, min_size=1, max_size=max_terms))
    return TropicalPolynomial(np.array(list(terms), float), list(terms.values()), dim)


@st.composite
def division_pairs(draw):
    dim = draw(st.integers(1, 2))
    return draw(lattice_polys(dim, 5)), draw(lattice_polys(dim, 2, 3))


settings.register_profile("props", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
props = settings.get_profile("props")


@props
@given(division_pairs(), st.integers(0, 2 ** 32 - 1))
def test_division_never_overshoots(pair, seed):
    p, d = pair
    res = divide(p, d)
    assert verify_inequality(p, res.quotient, d, res.remainder, samples=200, rng=seed)


@props
@given(division_pairs())
def test_quotient_is_the_erosion(pair):
    p, d = pair
    res = divide(p, d)
    eroded = erosion(as_lattice(p), as_lattice(d))
    for c, v in res.quotient.items():
        assert abs(v - eroded[c]) <= 1e-9


@props
@given(division_pairs())
def test_products_divide_exactly(pair):
    q, d = pair
    res = divide(tropical_product(q, d), d)
    assert res.exact
    assert res.remainder.is_bottom


@props
@given(division_pairs())
def test_division_is_shift_equivariant(pair):
    p, d = pair
    lifted = TropicalPolynomial(p.degrees, p.coeffs + 1.5, p.dim)
    base, moved = divide(p, d), divide(lifted, d)
    assert moved.quotient.keys() == base.quotient.keys()
    for c, v in base.quotient.items():
        assert abs(moved.quotient.coeffs[c] - v - 1.5) <= 1e-9


@st.composite
def nets(draw):
    d = draw(st.integers(1, 5))
    n1 = draw(st.integers(1, 12))
    rng = np.random.default_rng(draw(st.integers(0, 2 ** 32 - 1)))
    return TwoLayerNet(rng.normal(size=(n1, d)), rng.normal(size=n1),
                       rng.normal(size=n1), float(rng.normal())), rng


@props
@given(nets())
def test_decomposition_reproduces_network(drawn):
    net, rng = drawn
    X = rng.normal(scale=3, size=(100, net.n_features))
    p_plus, p_minus, b = decompose(net)
    diff = part_value(p_plus, X) - part_value(p_minus, X) + b - preactivation(net, X)
    assert np.abs(diff).max() <= 1e-9


@props
@given(nets(), st.floats(0.05, 1.0))
def test_compress_output_shape(drawn, fraction):
    net, rng = drawn
    X = rng.normal(size=(50, net.n_features))
    try:
        small, report = compress(net, X, fraction)
    except ValueError as exc:
        assert "part" in str(exc)
        return
    assert small.n_hidden == math.ceil(fraction * net.n_hidden - 1e-12)
    assert set(np.abs(small.w2)) <= {1.0}
    assert report.positive_neurons + report.negative_neurons == small.n_hidden


@given(st.integers(0, 200), st.integers(0, 100), st.integers(0, 100))
def test_budget_split_adds_up(total, n_plus, n_minus):
    k_plus, k_minus = budget_split(total, n_plus, n_minus)
    if n_plus + n_minus == 0:
        assert (k_plus, k_minus) == (0, 0)
        return
    assert k_plus + k_minus == total
    share = total * n_plus / (n_plus + n_minus)
    assert abs(k_plus - share) < 1


@props
@given(division_pairs())
def test_polynomial_json_round_trip(pair):
    p, _ = pair
    back = io.polynomial_from_json(io.polynomial_to_json(p))
    assert back == p
