"""Instances shared by the test modules."""
import itertools
from pathlib import Path

import numpy as np

from tropdiv.network import TwoLayerNet
from tropdiv.polytope import NewtonPolytope, valid_shifts
from tropdiv.tropical import TropicalPolynomial

DATA_DIR = Path(__file__).resolve().parent.parent / "data" / "mnist5k"
TRAIN_IMAGES = DATA_DIR / "train-images-idx3-ubyte.gz"
TRAIN_LABELS = DATA_DIR / "train-labels-idx1-ubyte.gz"
TEST_IMAGES = DATA_DIR / "t10k-images-idx3-ubyte.gz"
TEST_LABELS = DATA_DIR / "t10k-labels-idx1-ubyte.gz"


def poly(terms, dim=None):
    """``poly([((3,), 0), ((2,), 1.5)])`` or with scalar degrees for dim 1."""
    return TropicalPolynomial.from_terms([(np.atleast_1d(a), b) for a, b in terms], dim)


CUBIC = poly([(3, 0.0), (2, 1.5), (1, 1.0), (0, 0.0)])
SHIFTED_RAMP = poly([(1, 1.0), (0, 0.0)])
RAMP = poly([(1, 0.0), (0, 0.0)])
PLANE_P = poly([((2, 0), 0.0), ((1, 1), 1.0), ((1, 0), 1.0), ((0, 1), 1.0), ((0, 0), 1.0)])
PLANE_D = poly([((1, 0), 0.0), ((0, 0), 0.0)])


def random_lattice_poly(rng, dim, max_degree, n_terms, coeff_range=5.0):
    box = list(itertools.product(range(max_degree + 1), repeat=dim))
    n_terms = min(n_terms, len(box))
    picks = rng.choice(len(box), size=n_terms, replace=False)
    degrees = np.array([box[k] for k in picks], dtype=float)
    coeffs = rng.uniform(-coeff_range, coeff_range, size=n_terms)
    return TropicalPolynomial(degrees, coeffs, dim)


def random_division_instance(rng, dim, max_degree=6, divisor_degree=3):
    """Dividend with degrees <= ``max_degree`` and a divisor that fits at least once."""
    while True:
        p = random_lattice_poly(rng, dim, max_degree, int(rng.integers(2, 7)))
        d = random_lattice_poly(rng, dim, divisor_degree, int(rng.integers(1, 4)))
        if valid_shifts(NewtonPolytope(d.degrees), NewtonPolytope(p.degrees)):
            return p, d


def random_net(rng, d=None, n1=None):
    d = int(rng.integers(1, 11)) if d is None else d
    n1 = int(rng.integers(1, 65)) if n1 is None else n1
    return TwoLayerNet(rng.normal(size=(n1, d)), rng.normal(size=n1),
                       rng.normal(size=n1), float(rng.normal()))


def upper_hull_1d(points):
    """Monotone-chain upper hull of ``(x, y)`` pairs, as a list sorted by x."""
    pts = sorted(set(points))
    # keep only the highest point per x
    best = {}
    for x, y in pts:
        best[x] = max(y, best.get(x, -np.inf))
    pts = sorted(best.items())
    hull = []
    for p in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (x2 - x1) * (p[1] - y1) - (y2 - y1) * (p[0] - x1) >= 0:
                hull.pop()
            else:
                break
        hull.append(p)
    return hull


def hull_height_1d(points, j):
    hull = upper_hull_1d(points)
    xs = [x for x, _ in hull]
    if j < xs[0] or j > xs[-1]:
        return None
    return float(np.interp(j, xs, [y for _, y in hull]))
