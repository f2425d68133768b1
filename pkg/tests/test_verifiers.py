import json

import numpy as np
import pytest

from linpert.calculus import SmoothMap
from linpert.errors import ArgumentError, PredicateError
from linpert.geometry import builtin, chart_local, target_map
from linpert.perturbation import LinearPerturbation, compose_chartwise, perturb, sample_perturbation
from linpert.verifiers import (
    Budget,
    Tolerances,
    delta_transversality,
    find_critical_points,
    search_multiple_points,
    transverse_to_sigma_k_at,
    verify_corank_bound,
    verify_embedding,
    verify_immersion,
    verify_injective,
    verify_morse,
    verify_normal_crossings,
)

from conftest import figure_eight_F, tangent_circles

VERDICT_KEYS = {"property", "pass", "key_metric", "evidence", "tolerances", "sample_budget", "seed", "notes"}


def morse_setup(alpha):
    man, f = builtin("circle_in_R2")
    return perturb(target_map("height_cubed", 2), alpha), f, man


def counterexamples(verdict):
    return [e for e in verdict.evidence if e.get("counterexample")]


# -- Morse ---------------------------------------------------------------------


def test_morse_fails_unperturbed_with_degenerate_witness():
    v = verify_morse(*morse_setup(LinearPerturbation.zero(2, 1)), seed=0)
    assert not v.passed
    bad = counterexamples(v)
    assert len(bad) == 2
    for e in bad:
        assert abs(abs(e["point"][0]) - 1.0) < 1e-6 and abs(e["point"][1]) < 1e-6
    good = [e for e in v.evidence if not e["counterexample"]]
    assert sorted(round(e["point"][1]) for e in good) == [-1, 1]


def test_morse_passes_for_random_perturbations():
    for i in range(10):
        v = verify_morse(*morse_setup(sample_perturbation(2, 1, 1.0, seed=12, index=i)), seed=i)
        assert v.passed and v.key_metric > 1e-3
        # a Morse function on the circle has an even number >= 2 of critical points
        assert len(v.evidence) >= 2 and len(v.evidence) % 2 == 0


def test_morse_witness_survives_tighter_newton_tolerance():
    F, f, man = morse_setup(LinearPerturbation.zero(2, 1))
    tight = Tolerances(newton_tol=1e-11)
    v = verify_morse(F, f, man, seed=0, tol=tight)
    assert not v.passed and counterexamples(v)


def test_morse_needs_scalar_target():
    man, f = builtin("circle_in_R2")
    with pytest.raises(PredicateError):
        verify_morse(target_map("identity", 2), f, man)


def test_morse_agrees_with_sigma_one_check():
    for alpha in [LinearPerturbation.zero(2, 1)] + [sample_perturbation(2, 1, 1.0, 3, i) for i in range(5)]:
        F, f, man = morse_setup(alpha)
        for chart in man.charts:
            g = compose_chartwise(F, f, chart)
            for cp in find_critical_points(g, chart, 12, seed=0):
                status = transverse_to_sigma_k_at(g, cp.t, 1).status
                assert status == ("transverse" if cp.nondegenerate else "fail")


# -- Sigma^k -------------------------------------------------------------------


@pytest.mark.parametrize(
    "func, t, k, status",
    [
        (lambda t: [t[0] ** 2, t[1]], [0.0, 0.0], 1, "transverse"),
        (lambda t: [t[0] ** 2, t[1]], [1.0, 0.0], 1, "not_in_stratum"),
        (lambda t: [t[0] ** 3, t[1]], [0.0, 0.0], 1, "fail"),
        # corank 2 in a 2x2 Jacobian has codimension 4 > n = 2
        (lambda t: [t[0] ** 2, t[1] ** 2], [0.0, 0.0], 2, "fail"),
        # Whitney umbrella jet: (x, y) -> (x, x y, y^2) has corank 1 at 0, codim 2
        (lambda t: [t[0], t[0] * t[1], t[1] ** 2], [0.0, 0.0], 1, "transverse"),
    ],
)
def test_sigma_examples(func, t, k, status):
    dom = len(t)
    g = SmoothMap(func, dom, len(func([0.0] * dom)))
    assert transverse_to_sigma_k_at(g, t, k).status == status


def test_sigma_rejects_bad_corank():
    g = SmoothMap(lambda t: [t[0]], 1, 1)
    with pytest.raises(ArgumentError):
        transverse_to_sigma_k_at(g, [0.0], 2)


# -- immersion, corank, injective, embedding ----------------------------------


def test_immersion_constant_target():
    man, f = builtin("circle_in_R3")
    F = target_map("constant", 3, 2)
    v0 = verify_immersion(perturb(F, LinearPerturbation.zero(3, 2)), f, man, seed=0)
    assert not v0.passed and counterexamples(v0)
    for i in range(5):
        v = verify_immersion(perturb(F, sample_perturbation(3, 2, 1.0, 7, i)), f, man, seed=i)
        assert v.passed and v.key_metric > 1e-8


def test_immersion_notes_regime():
    man, f = builtin("circle_in_R2")
    v = verify_immersion(target_map("height", 2), f, man, Budget(samples=32), seed=0)
    assert not v.passed
    assert any("2n" in note for note in v.notes)


def test_corank_bound_on_torus():
    man, f = builtin("torus_in_R3")
    F = target_map("constant", 3, 2)
    v0 = verify_corank_bound(perturb(F, LinearPerturbation.zero(3, 2)), f, man, Budget(samples=64), seed=0)
    assert not v0.passed
    v = verify_corank_bound(perturb(F, sample_perturbation(3, 2, 1.0, 2, 0)), f, man, Budget(samples=64), seed=0)
    assert v.passed


def test_corank_bound_trivial_when_k0_equals_nu():
    man, f = builtin("circle_in_R2")
    v = verify_corank_bound(target_map("constant", 2, 2), f, man)
    assert v.passed and v.evidence[0]["kind"] == "trivial"


def test_injective_collapse_map():
    man, f = builtin("circle_in_R3")
    F = target_map("collapse_xy", 3, 3)
    v0 = verify_injective(perturb(F, LinearPerturbation.zero(3, 3)), f, man, seed=0)
    assert not v0.passed
    pair = counterexamples(v0)[0]
    assert pair["min_separation"] >= 1e-4 and pair["energy"] <= 1e-16
    v = verify_injective(perturb(F, sample_perturbation(3, 3, 1.0, 5, 0)), f, man, seed=0)
    assert v.passed and v.key_metric > 1e-8


def test_larger_budget_keeps_counterexample():
    man, f = builtin("circle_in_R3")
    F = perturb(target_map("collapse_xy", 3, 3), LinearPerturbation.zero(3, 3))
    for samples in (16, 64, 256):
        assert not verify_injective(F, f, man, Budget(samples=samples, starts_per_chart=2), seed=1).passed
    G = perturb(target_map("constant", 3, 2), LinearPerturbation.zero(3, 2))
    for samples in (8, 32, 128):
        assert not verify_immersion(G, f, man, Budget(samples=samples, starts_per_chart=2), seed=1).passed


def test_embedding():
    man, f = builtin("circle_in_R3")
    F = perturb(target_map("collapse_xy", 3, 3), sample_perturbation(3, 3, 1.0, 9, 0))
    v = verify_embedding(F, f, man, seed=0)
    assert v.passed and v.key_metric > 0
    assert {e["leg"] for e in v.evidence} == {"immersion", "injective"}
    nman, nf = builtin("moment_curve_in_R3")
    with pytest.raises(PredicateError):
        verify_embedding(target_map("identity", 3), nf, nman)


# -- multiple points -----------------------------------------------------------


def test_delta_transversality_unit_cases():
    assert delta_transversality([np.array([[1.0], [0.0]]), np.array([[0.0], [1.0]])])["transverse"]
    assert not delta_transversality([np.array([[1.0], [0.0]]), np.array([[2.0], [0.0]])])["transverse"]


def test_search_finds_figure_eight_double_point():
    man, f = builtin("circle_in_R2")
    recs = search_multiple_points(figure_eight_F(), f, man, 2, 8, seed=0)
    hits = [r for r in recs if r["energy"] < 1e-20 and r["min_separation"] > 1e-4]
    assert hits
    pts = sorted(tuple(np.round(man.point(c, np.asarray(t)), 6)) for c, t in zip(hits[0]["charts"], hits[0]["t"]))
    assert pts == [(-1.0, 0.0), (1.0, 0.0)]


def test_normal_crossings_figure_eight_passes_with_full_m2_rank():
    man, f = builtin("circle_in_R2")
    v = verify_normal_crossings(figure_eight_F(), f, man, 2, seed=0)
    assert v.passed
    doubles = [e for e in v.evidence if e["kind"] == "multiple_point"]
    assert len(doubles) == 1
    assert doubles[0]["transverse"] and doubles[0]["m2_rank"] == doubles[0]["m2_required"] == 4
    assert any("assumed" in n for n in v.notes)


def test_normal_crossings_catalog_figure_eight():
    man, f = builtin("figure_eight_immersion_R2")
    v = verify_normal_crossings(target_map("identity", 2), f, man, 2, seed=0)
    assert v.passed
    assert sum(e["kind"] == "multiple_point" for e in v.evidence) == 1


def test_normal_crossings_tangent_circles_fail():
    man, f = tangent_circles()
    v = verify_normal_crossings(target_map("identity", 2), f, man, 2, seed=0)
    assert not v.passed
    bad = counterexamples(v)
    assert bad and not bad[0]["transverse"]
    q = [man.point(c, np.asarray(t)) for c, t in zip(bad[0]["charts"], bad[0]["t"])]
    for qi in q:
        assert np.linalg.norm(f(qi)) < 1e-6


def test_normal_crossings_empty_clause():
    # n = 1, l = 3, s_f = 2: (s_f - 1) l > n s_f, so any double point is a failure
    man, f = builtin("circle_in_R3")
    F = target_map("collapse_xy", 3, 3)
    v = verify_normal_crossings(perturb(F, LinearPerturbation.zero(3, 3)), f, man, 2, Budget(starts_per_chart=4), seed=0)
    assert not v.passed
    assert any("reason" in e for e in counterexamples(v))


# -- verdict record ------------------------------------------------------------


def test_verdict_serializes():
    v = verify_morse(*morse_setup(sample_perturbation(2, 1, 1.0, 1, 0)), seed=3)
    d = v.to_dict()
    assert set(d) == VERDICT_KEYS
    assert d["seed"] == 3 and d["tolerances"]["newton_tol"] == 1e-10
    json.dumps(d, allow_nan=False)


def test_verifiers_are_deterministic():
    man, f = builtin("circle_in_R3")
    F = perturb(target_map("collapse_xy", 3, 3), sample_perturbation(3, 3, 1.0, 5, 1))
    a = verify_injective(F, f, man, Budget(samples=64), seed=2).to_dict()
    b = verify_injective(F, f, man, Budget(samples=64), seed=2).to_dict()
    assert json.dumps(a) == json.dumps(b)
