import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rigidlim.config import bundled_path, parse_config
from rigidlim.errors import ConstructionRejectedError, DomainEscapeError
from rigidlim.ifs import (
    Box,
    Deformation,
    DistortionConstants,
    FunctionMap,
    IFSystem,
    Similarity,
    ball_fraction_inside,
    build_conjugated,
    check_ball_inclusions,
    compose,
    compose_batch,
    conformality_defect,
    conorm,
    distortion_constants,
    operator_norm,
    validate_boundary_density,
    validate_f1,
    validate_f3,
    validate_osc,
    word_sup_norm,
)
from rigidlim.ifs.maps import smoothstep5
from rigidlim.ifs.system import representatives


def raw(name):
    return json.loads(bundled_path(name).read_text())


def variant(name, **changes):
    data = raw(name)
    data.update(changes)
    return parse_config(data, name=name).build()


# -- compose -------------------------------------------------------------------


def test_compose_cantor_word(systems):
    val, jac = compose(systems["cantor"], (0, 1), np.array([0.0]))
    assert val[0] == pytest.approx(2 / 9, abs=1e-15)
    assert jac[0, 0] == pytest.approx(1 / 9, abs=1e-15)


def test_compose_empty_word(systems):
    x = np.array([0.3, 0.7])
    val, jac = compose(systems["koch"], (), x)
    assert np.array_equal(val, x) and np.array_equal(jac, np.eye(2))


def test_compose_dust_singular_values(systems):
    _, jac = compose(systems["dust"], (0, 5, 7, 2), np.full(3, 0.5))
    assert np.allclose(np.linalg.svd(jac, compute_uv=False), 3.0**-4, rtol=1e-13)


def test_compose_domain_escape(systems):
    with pytest.raises(DomainEscapeError):
        compose(systems["cantor"], (0,), np.array([100.0]))


def test_compose_batch_matches_compose(systems):
    system = systems["conjugated_dust"]
    rng = np.random.default_rng(3)
    words = rng.integers(0, 8, size=(6, 3))
    pts = system.sample_seed(6, rng)
    vals, jacs = compose_batch(system, words, pts)
    for w, p, v, j in zip(words, pts, vals, jacs):
        v1, j1 = compose(system, tuple(w), p)
        assert np.allclose(v, v1, atol=1e-14) and np.allclose(j, j1, atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(
    name=st.sampled_from(["koch", "conjugated_dust", "sierpinski"]),
    i=st.lists(st.integers(0, 7), min_size=1, max_size=3),
    j=st.lists(st.integers(0, 7), min_size=1, max_size=3),
    seed=st.integers(0, 2**16),
)
def test_chain_rule(systems, name, i, j, seed):
    system = systems[name]
    i = tuple(s % system.size for s in i)
    j = tuple(s % system.size for s in j)
    x = system.sample_seed(1, np.random.default_rng(seed))[0]
    _, jij = compose(system, i + j, x)
    y, jj = compose(system, j, x)
    _, ji = compose(system, i, y)
    assert np.allclose(jij, ji @ jj, rtol=1e-10, atol=1e-10 * np.abs(jij).max())


@settings(max_examples=25, deadline=None)
@given(word=st.lists(st.integers(0, 7), min_size=1, max_size=4), seed=st.integers(0, 2**16))
def test_f1_propagation(systems, word, seed):
    system = systems["conjugated_dust"]
    x = system.sample_omega(4, np.random.default_rng(seed))
    _, jac = compose(system, tuple(word), x, check=False)
    n = len(word)
    assert np.all(operator_norm(jac) <= system.s_up**n)
    assert np.all(conorm(jac) >= system.s_low**n)


# -- maps ------------------------------------------------------------------------


def test_similarity_rejects_bad_orthogonal():
    with pytest.raises(ValueError):
        Similarity(0.5, [[1.0, 0.1], [0.0, 1.0]], [0.0, 0.0])
    with pytest.raises(ValueError):
        Similarity(1.5, None, [0.0])


def test_profile_shape():
    h = Deformation(2.0)
    z = np.linspace(-0.5, 1.5, 4001)
    g, dg = h.g(z), h.dg(z)
    assert np.all(np.diff(g) >= 0)
    assert np.all(g[z <= 1 / 3] == 1.0) and np.all(g[z >= 2 / 3] == 2.0)
    assert np.all(dg[(z <= 1 / 3) | (z >= 2 / 3)] == 0.0)
    # sup g' attained at the midpoint of the band
    assert h.dg(0.5) == pytest.approx(h.sup_dg, rel=1e-14)
    assert dg.max() <= h.sup_dg * (1 + 1e-14)
    # C^2 junctions: g', g'' vanish approaching the plateaus
    for z0, side in ((1 / 3, 1), (2 / 3, -1)):
        for eps in (1e-4, 1e-6):
            assert abs(h.dg(z0 + side * eps)) < 1e3 * eps**2 and h.dg(z0 - side * eps) == 0.0
            assert abs(h.d2g(z0 + side * eps)) < 1e4 * eps and h.d2g(z0 - side * eps) == 0.0
    assert smoothstep5(0.5) == 0.5


def test_deformation_derivatives_by_finite_differences():
    h = Deformation(1.3)
    rng = np.random.default_rng(1)
    x = rng.uniform(-0.1, 1.1, size=(20, 3))
    eps = 1e-6
    for k in range(3):
        e = np.zeros(3)
        e[k] = eps
        fd = (h(x + e) - h(x - e)) / (2 * eps)
        assert np.allclose(h.jacobian(x)[..., :, k], fd, atol=1e-7)
    z = np.linspace(0.2, 0.8, 50)
    fd = (h.dg(z + eps) - h.dg(z - eps)) / (2 * eps)
    assert np.allclose(h.d2g(z), fd, atol=1e-5)


def test_deformation_inverse_round_trip():
    h = Deformation(1.005)
    rng = np.random.default_rng(2)
    x = rng.uniform(-0.1, 1.1, size=(200, 3))
    assert np.max(np.abs(h.inverse(h(x)) - x)) < 1e-11
    assert np.allclose(h.jacobian_inverse(x) @ h.jacobian(x), np.eye(3), atol=1e-14)


def test_norms_match_svd():
    rng = np.random.default_rng(4)
    a = rng.standard_normal((50, 3, 3))
    sv = np.linalg.svd(a, compute_uv=False)
    assert np.allclose(operator_norm(a), sv[:, 0], rtol=1e-12)
    assert np.allclose(conorm(a), sv[:, -1], rtol=1e-12)


# -- validators --------------------------------------------------------------------


def test_f1_examples(systems):
    assert validate_f1(variant("cantor", s_low=0.3, s_up=0.35), 64, 0)["ok"]
    rep = validate_f1(variant("cantor", s_low=0.5, s_up=0.6), 64, 0)
    assert not rep["ok"]
    assert rep["worst_lower"] == pytest.approx(1 / 3, abs=1e-15)
    assert validate_f1(systems["conjugated_dust"], 200, 0)["ok"]


def test_f3_examples(systems):
    for name in ("cantor", "koch", "dust"):
        assert validate_f3(systems[name], 3, 1e-12)["max_defect"] == pytest.approx(0.0, abs=1e-12)
    rep = validate_f3(systems["conjugated_dust"], 5, 1e-6)
    assert rep["ok"], rep


def test_f3_anisotropic_map():
    lin = np.diag([1 / 3, 1 / 4])
    fmap = FunctionMap(lambda x: x @ lin.T, lambda x: np.broadcast_to(lin, x.shape[:-1] + (2, 2)), 2)
    system = IFSystem((fmap, fmap), Box([0, 0], [1, 1]), 0.1, 0.2, 0.4)
    rep = validate_f3(system, 1, 1e-6)
    assert rep["max_defect"] == pytest.approx(1 / 3, rel=1e-12)
    assert not rep["ok"]


def test_conformality_defect_off_the_set(systems):
    system = systems["conjugated_dust"]
    # in the transition band the conjugated maps are not conformal
    x = system.from_base(np.array([[0.5, 0.5, 0.5], [0.3, 0.7, 0.45]]))
    defects = [conformality_defect(m.jacobian(x)).max() for m in system.maps]
    assert max(defects) > 1e-4


def test_osc_examples(systems):
    rep = validate_osc(systems["cantor"], 5)
    assert rep["ok"] and rep["mode"] == "certified"
    rep = validate_osc(systems["dust"], 5)
    assert rep["ok"] and rep["mode"] == "certified"
    overlap = IFSystem(
        (Similarity(0.5, None, [0.0]), Similarity(0.5, None, [0.25])), Box([0.0], [1.0]), 0.1, 0.25, 0.5
    )
    rep = validate_osc(overlap, 5)
    assert not rep["ok"]
    w = rep["overlap_pairs"][0]["witness"][0]
    assert 0.25 < w < 0.5


def test_osc_sampled_for_conjugated(systems):
    rep = validate_osc(systems["conjugated_dust"], 5)
    assert rep["ok"] and rep["mode"] == "sampled"


def test_boundary_fractions():
    cube = IFSystem((Similarity(0.5, None, [0.0] * 3),) * 2, Box([0] * 3, [1] * 3), 0.1, 0.25, 0.5)
    rng = np.random.default_rng(5)
    face = ball_fraction_inside(cube, [0.5, 0.5, 0.0], 0.2, 20000, rng)
    corner = ball_fraction_inside(cube, [0.0, 0.0, 0.0], 0.2, 20000, rng)
    assert face == pytest.approx(0.5, abs=1e-12)  # antithetic pairs make half-spaces exact
    assert corner == pytest.approx(1 / 8, abs=0.02)
    line = IFSystem((Similarity(0.5, None, [0.0]),) * 2, Box([0.0], [1.0]), 0.1, 0.25, 0.5)
    assert ball_fraction_inside(line, [0.0], 0.3, 1000, rng) == 0.5


def test_boundary_density_fixtures(systems):
    for name in ("cantor", "dust", "conjugated_dust"):
        assert validate_boundary_density(systems[name], 3, 8, 0)["ok"], name


# -- distortion and ball inclusions --------------------------------------------------


def test_similarity_constants(systems):
    c = distortion_constants(systems["cantor"], 3, 50, 0)
    assert (c.c_hat, c.k0_hat, c.d_hat) == (0.0, 1.0, 1.0)
    c = distortion_constants(systems["dust"], 3, 50, 0)
    assert c.c_hat == 0.0 and c.k0_hat == 1.0
    assert c.d_hat == pytest.approx(np.sqrt(3.0), rel=1e-15)


def test_conjugated_constants(systems):
    c = distortion_constants(systems["conjugated_dust"], 5, 200, 0)
    assert np.isfinite([c.c_hat, c.k0_hat, c.d_hat]).all()
    assert c.c_hat > 0 and 1.0 <= c.k0_hat < 1.2
    # frozen values from the build; sampling is seeded
    assert c.c_hat == pytest.approx(0.3252, rel=0.05)
    assert c.k0_hat == pytest.approx(1.0393, rel=0.01)


@settings(max_examples=20, deadline=None)
@given(
    word=st.lists(st.integers(0, 7), min_size=1, max_size=3),
    seed=st.integers(0, 2**16),
)
def test_bounded_distortion_consequence(systems, word, seed):
    system = systems["conjugated_dust"]
    k0 = system.constants().k0_hat
    rng = np.random.default_rng(seed)
    x = system.sample_omega(6, rng)
    y = system.sample_omega(6, rng)
    _, jx = compose(system, tuple(word), x, check=False)
    _, jy = compose(system, tuple(word), y, check=False)
    assert np.all(operator_norm(jx) <= k0 * conorm(jy) * (1 + 1e-9))


@settings(max_examples=20, deadline=None)
@given(i=st.lists(st.integers(0, 3), min_size=1, max_size=3), j=st.lists(st.integers(0, 3), min_size=1, max_size=2))
def test_image_diameters_nest(systems, i, j):
    system = systems["koch"]
    grid = system.box.grid(5)

    def diam(word):
        pts, _ = compose(system, tuple(word), grid)
        return np.max(np.linalg.norm(pts[:, None] - pts[None], axis=-1))

    assert diam(i + j) <= diam(i) * (1 + 1e-12)
    assert diam(i) <= system.constants().d_hat * word_sup_norm(system, i) * (1 + 1e-12)


@pytest.mark.parametrize("name", ["cantor", "two_ratio", "koch", "sierpinski", "line_cantor", "dust", "conjugated_dust"])
def test_ball_inclusions_hold(systems, name):
    system = systems[name]
    rep = check_ball_inclusions(system, system.constants().inflated(1.05), 2000, 11)
    assert rep["violations"] == []


def test_understated_k0_is_caught(systems):
    fake = DistortionConstants(0.0, 0.5, 1.0, 3, 0)
    rep = check_ball_inclusions(systems["cantor"], fake, 200, 0)
    assert rep["violations"] and rep["violations"][0]["kind"] == "inner"


# -- conjugated builder -------------------------------------------------------------


def test_conjugated_accepted(systems):
    norms = systems["conjugated_dust"].meta["conjugation"]
    assert norms["bound"] == pytest.approx(10 / 9, rel=1e-12)
    assert 1.0 <= norms["product"] <= 1.11
    assert norms["sup_g_prime"] == pytest.approx(0.005 * 45 / 8)


def test_conjugated_rejected():
    base = parse_config(raw("dust")).build()
    with pytest.raises(ConstructionRejectedError) as info:
        build_conjugated(base, 2.0, 0.3, 0.5)
    assert info.value.norms["product"] > 1.2
    assert info.value.norms["bound"] == pytest.approx(10 / 9)


def test_identity_deformation():
    base = parse_config(raw("dust")).build()
    system = build_conjugated(base, 1.0, 0.3, 0.5)
    norms = system.meta["conjugation"]
    assert norms["sup_h_prime"] * norms["sup_h_inverse_prime"] == pytest.approx(1.0, abs=1e-15)
    pts = representatives(system, 2)
    assert np.allclose(pts, representatives(base, 2), atol=1e-15)


def test_conjugated_representatives_are_h_images(systems):
    system = systems["conjugated_dust"]
    base = parse_config(raw("dust")).build()
    dev = np.abs(representatives(system, 4) - system.chart(representatives(base, 4)))
    assert dev.max() < 1e-12
