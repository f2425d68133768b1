import itertools
import math

import numpy as np
import pytest

from linpert.calculus import SmoothMap, cos, sin
from linpert.geometry import Chart, ChartedManifold, box

ARCS = ((-0.3, math.pi + 0.3), (math.pi - 0.3, 2 * math.pi + 0.3))


def circle_component(tag, height):
    """Angle charts on a unit circle placed at z = height of the model space R^3."""
    param = SmoothMap(lambda t: [cos(t[0]), sin(t[0]), height], 1, 3, 2, name=f"arc_{tag}")
    return [Chart(f"{tag}{i}", box(r), param) for i, r in enumerate(ARCS)]


def tangent_circles():
    """Two unit circles in R^2 centred at (-1, 0) and (1, 0), touching at the origin.

    Returns ``(N, f)`` with ``N`` two disjoint circles and ``f`` injective.
    """
    man = ChartedManifold(1, tuple(circle_component("a", 0.0) + circle_component("b", 5.0)), True, "tangent_circles")
    f = SmoothMap(lambda x: [x[0] - 1.0 + 0.4 * x[2], x[1]], 3, 2, 2, name="tangent_pair")
    return man, f


def figure_eight_F():
    """F(x, y) = (y, x y): sends the unit circle onto a figure eight crossing at 0."""
    return SmoothMap(lambda x: [x[1], x[0] * x[1]], 2, 2, 2, name="gerono")


def random_polynomial_map(rng, n, l, degree=3):
    exps = [e for e in itertools.product(range(degree + 1), repeat=n) if sum(e) <= degree]
    coeffs = rng.standard_normal((l, len(exps))).tolist()

    def func(x):
        out = []
        for row in coeffs:
            acc = 0.0
            for c, e in zip(row, exps):
                term = c
                for xi, k in zip(x, e):
                    if k:
                        term = term * xi**k
                acc = acc + term
            out.append(acc)
        return out

    return SmoothMap(func, n, l, 2, name="poly")


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)
