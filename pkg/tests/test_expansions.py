import math

import numpy as np
import pytest

from helmlayer.errors import DomainError, FarFieldError
from helmlayer.medium import (
    Dir,
    PolarizedPair,
    ReactionComponentId,
    polarized_distance,
    sound_soft_halfspace,
    acoustic,
)
from helmlayer.quadrature import (
    ContourSpec,
    Segment,
    adaptive_segments,
    evaluate_component,
    free_space_green,
)
from helmlayer.sigma import sigma_component_batch
from helmlayer.special import branch_sqrt_arr, hsq, w_from_h
from helmlayer.expansions import (
    choose_truncation,
    fit_rate,
    fs_l2l,
    fs_le_eval,
    fs_m2l,
    fs_m2m,
    fs_me,
    fs_me_eval,
    l2l,
    le_coeffs_direct,
    le_eval,
    m2l,
    m2l_apply,
    m2m,
    me_coeffs,
    me_eval,
    me_expansion_functions,
    partial_sum_errors,
)

SOFT = sound_soft_halfspace(1.0)
TWO_LAYER = acoustic((0.0,), (1.0, 1.5))
UPUP = ReactionComponentId(0, 0, Dir.UP, Dir.UP)
SPEC = ContourSpec(rtol=1e-11)

RNG = np.random.default_rng(50)
X_C = (0.0, 0.6)
SRC = np.column_stack(
    [X_C[0] + 0.45 * np.cos(np.linspace(0, 2 * np.pi, 5, endpoint=False)),
     X_C[1] + 0.45 * np.sin(np.linspace(0, 2 * np.pi, 5, endpoint=False))]
)
Q = RNG.uniform(0.5, 1.5, 5)


def direct_sum(medium, cid, target, sources, strengths, rtol=1e-12):
    spec = ContourSpec(rtol=rtol)
    return sum(
        q * evaluate_component(medium, cid, target, tuple(s), spec)
        for s, q in zip(sources, strengths)
    )


class TestMeCoeffs:
    def test_source_at_center(self):
        me = me_coeffs(SOFT, UPUP, X_C, [X_C], [2.5], 8)
        assert me.coeffs[7] == pytest.approx(2.5)
        others = np.delete(me.coeffs, 7)
        assert np.max(np.abs(others)) == 0.0

    def test_parity_conjugation(self):
        me = me_coeffs(SOFT, UPUP, X_C, [(0.3, 0.8)], [1.0], 12)
        P = 12
        for p in range(1, P):
            lhs = me.coeffs[-p + P - 1]
            rhs = (-1) ** p * np.conj(me.coeffs[p + P - 1])
            assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_direction_flip_conjugates_phase(self):
        m = acoustic((0.0, -2.0), (1.0, 1.2, 1.0))
        up_id = ReactionComponentId(1, 1, Dir.UP, Dir.UP)
        dn_id = ReactionComponentId(1, 1, Dir.UP, Dir.DOWN)
        src = [(0.4, -1.2)]
        me_up = me_coeffs(m, up_id, (0.0, -1.0), src, [1.0], 10)
        me_dn = me_coeffs(m, dn_id, (0.0, -1.0), src, [1.0], 10)
        # tau flip negates the phase angle: coefficients conjugate up to
        # the (real) Bessel factor
        np.testing.assert_allclose(me_dn.coeffs, np.conj(me_up.coeffs), rtol=1e-12)

    def test_wrong_side_rejected(self):
        with pytest.raises(DomainError):
            me_coeffs(SOFT, UPUP, X_C, [(0.0, -0.5)], [1.0], 8)


class TestMeEval:
    def test_matches_direct_sums(self):
        target = (0.3, 1.9)
        me = me_coeffs(SOFT, UPUP, X_C, SRC, Q, 20)
        got = me_eval(SOFT, me, target, SPEC)
        ref = direct_sum(SOFT, UPUP, target, SRC, Q)
        assert abs(got - ref) < 1e-8 * abs(ref)

    def test_far_field_guard(self):
        # note the guard is on the POLARIZED distance: a target just above
        # the interface has a nearby image even if it is Euclidean-far
        me = me_coeffs(SOFT, UPUP, X_C, SRC, Q, 12)
        with pytest.raises(FarFieldError):
            me_eval(SOFT, me, (0.0, 0.25), SPEC)

    def test_rate_follows_polarized_distance(self):
        # equal Euclidean distance from the center, polarized distances
        # differing 1.5x: the larger D decays strictly faster
        src = [(0.18, 0.62), (-0.2, 0.75), (0.05, 0.45)]
        qs = [1.0, 0.7, 1.3]
        rad = max(math.hypot(s[0] - X_C[0], s[1] - X_C[1]) for s in src)
        t_a = (0.0, 1.4)
        y_b = 0.4742
        x_b = math.sqrt(0.64 - (y_b - 0.6) ** 2)
        t_b = (x_b, y_b)
        d_euclid_a = math.hypot(t_a[0] - X_C[0], t_a[1] - X_C[1])
        d_euclid_b = math.hypot(t_b[0] - X_C[0], t_b[1] - X_C[1])
        assert d_euclid_a == pytest.approx(d_euclid_b, rel=1e-3)
        D_a = polarized_distance(SOFT, PolarizedPair(t_a, X_C, UPUP))
        D_b = polarized_distance(SOFT, PolarizedPair(t_b, X_C, UPUP))
        assert D_a / D_b == pytest.approx(1.5, rel=1e-2)
        Pmax = 30
        me = me_coeffs(SOFT, UPUP, X_C, src, qs, Pmax)
        slopes = {}
        for label, tgt in (("a", t_a), ("b", t_b)):
            ip = me_expansion_functions(SOFT, UPUP, tgt, X_C, Pmax, SPEC)
            ref = direct_sum(SOFT, UPUP, tgt, src, qs)
            errs = partial_sum_errors(ip * me.coeffs, ref, np.arange(2, Pmax + 1))
            slopes[label] = fit_rate(np.arange(2, Pmax + 1), errs)
        assert slopes["a"] < slopes["b"] - 0.05  # farther image, steeper decay


class TestLocalExpansion:
    def test_value_at_center_is_l0(self):
        x_cl = (0.1, 1.1)
        le = le_coeffs_direct(SOFT, UPUP, x_cl, SRC, Q, 14, SPEC)
        got = le_eval(le, x_cl)
        assert got == pytest.approx(le.coeffs[13], rel=1e-12)

    def test_matches_direct(self):
        x_cl = (0.3, 1.9)
        le = le_coeffs_direct(SOFT, UPUP, x_cl, SRC, Q, 20, SPEC)
        probe = (0.32, 1.85)
        got = le_eval(le, probe)
        ref = direct_sum(SOFT, UPUP, probe, SRC, Q)
        assert abs(got - ref) < 1e-8 * abs(ref)

    def test_far_field_guard(self):
        x_cl = (0.3, 1.9)
        le = le_coeffs_direct(SOFT, UPUP, x_cl, SRC, Q, 10, SPEC)
        with pytest.raises(FarFieldError):
            le_eval(le, (0.3, 0.3))


class TestM2L:
    def test_composition_matches_direct(self):
        x_cl = (0.3, 1.9)
        me = me_coeffs(SOFT, UPUP, X_C, SRC, Q, 20)
        tm = m2l(SOFT, UPUP, x_cl, X_C, 20, 20, SPEC, source_radius=me.radius)
        le = m2l_apply(tm, me)
        probe = (0.32, 1.85)
        ref = direct_sum(SOFT, UPUP, probe, SRC, Q)
        assert abs(le_eval(le, probe) - ref) < 1e-8 * abs(ref)

    def test_matches_le_direct(self):
        x_cl = (0.3, 1.9)
        me = me_coeffs(SOFT, UPUP, X_C, SRC, Q, 24)
        tm = m2l(SOFT, UPUP, x_cl, X_C, 16, 24, SPEC)
        le_t = m2l_apply(tm, me)
        le_d = le_coeffs_direct(SOFT, UPUP, x_cl, SRC, Q, 16, SPEC)
        scale = np.max(np.abs(le_d.coeffs))
        np.testing.assert_allclose(le_t.coeffs, le_d.coeffs, atol=2e-8 * scale)

    def test_tail_truncation_stability(self):
        # doubling the tail cutoff leaves the matrix unchanged
        tm1 = m2l(SOFT, UPUP, (0.0, 1.9), X_C, 8, 8, ContourSpec(rtol=1e-10))
        tm2 = m2l(
            SOFT, UPUP, (0.0, 1.9), X_C, 8, 8,
            ContourSpec(rtol=1e-10, lam_max=200.0),
        )
        scale = np.max(np.abs(tm1.matrix))
        assert np.max(np.abs(tm1.matrix - tm2.matrix)) < 1e-9 * scale

    def test_far_field_guard(self):
        # local center hugging the interface: its polarized distance to
        # the source center is below c0 * radius
        with pytest.raises(FarFieldError):
            m2l(SOFT, UPUP, (0.0, 0.25), X_C, 8, 8, SPEC, source_radius=0.45)


class TestL2L:
    def test_zero_shift_identity(self):
        x_cl = (0.3, 1.9)
        le = le_coeffs_direct(SOFT, UPUP, x_cl, SRC, Q, 12, SPEC)
        le2 = l2l(le, x_cl, 12)
        np.testing.assert_allclose(le2.coeffs, le.coeffs, atol=1e-14)

    def test_shifted_evaluation(self):
        x_cl = (0.3, 1.9)
        le = le_coeffs_direct(SOFT, UPUP, x_cl, SRC, Q, 24, SPEC)
        new_c = (0.38, 1.84)
        le2 = l2l(le, new_c, 24)
        probe = (0.4, 1.86)
        ref = direct_sum(SOFT, UPUP, probe, SRC, Q)
        assert abs(le_eval(le2, probe) - ref) < 1e-8 * abs(ref)

    def test_shift_beyond_reach_rejected(self):
        le = le_coeffs_direct(SOFT, UPUP, (0.3, 1.9), SRC, Q, 8, SPEC)
        with pytest.raises(FarFieldError):
            l2l(le, (0.3, 8.0), 8)


class TestM2M:
    def test_zero_shift_identity(self):
        me = me_coeffs(SOFT, UPUP, X_C, SRC, Q, 14)
        me2 = m2m(me, X_C)
        np.testing.assert_allclose(me2.coeffs, me.coeffs, atol=1e-14)

    def test_single_source_recentred(self):
        src = [(0.2, 0.7)]
        me = me_coeffs(SOFT, UPUP, X_C, src, [1.0], 16)
        new_c = (0.1, 0.72)
        me2 = m2m(me, new_c)
        me_direct = me_coeffs(SOFT, UPUP, new_c, src, [1.0], 16)
        np.testing.assert_allclose(me2.coeffs, me_direct.coeffs, atol=1e-10)

    def test_eval_after_shift(self):
        me = me_coeffs(SOFT, UPUP, X_C, SRC, Q, 22)
        new_c = (0.05, 0.66)
        me2 = m2m(me, new_c)
        me_re = me_coeffs(SOFT, UPUP, new_c, SRC, Q, 22)
        target = (0.3, 2.4)
        v1 = me_eval(SOFT, me2, target, SPEC)
        v2 = me_eval(SOFT, me_re, target, SPEC)
        assert abs(v1 - v2) < 1e-9 * abs(v2)

    def test_side_violation(self):
        me = me_coeffs(SOFT, UPUP, X_C, SRC, Q, 8)
        with pytest.raises(DomainError):
            m2m(me, (0.0, -0.5))


class TestChooseTruncation:
    def test_worked_example(self):
        assert choose_truncation(0.5, 1e-8, 1.0, 0.01) == 37

    def test_vanishing_ratio_keeps_onset_bounds(self):
        assert choose_truncation(1e-6, 1e-4, 2.0, 3.0) == math.ceil(math.e * 6.0)
        assert choose_truncation(1e-6, 1e-1, 0.5, 0.01) == 8

    def test_lower_bounds_always_hold(self):
        rng = np.random.default_rng(51)
        for _ in range(50):
            ratio = rng.uniform(0.01, 0.5)
            eps = 10.0 ** rng.uniform(-12, -2)
            k = rng.uniform(0.3, 3.0)
            rho = rng.uniform(0.01, 4.0)
            P = choose_truncation(ratio, eps, k, rho)
            assert P >= 8
            assert P >= math.ceil(math.e * k * rho)

    def test_domain(self):
        with pytest.raises(DomainError):
            choose_truncation(0.7, 1e-8, 1.0, 1.0)


class TestInvariants:
    def test_horizontal_translation_symmetry(self):
        shift = 1.7
        target = (0.3, 1.9)
        me1 = me_coeffs(SOFT, UPUP, X_C, SRC, Q, 16)
        v1 = me_eval(SOFT, me1, target, SPEC)
        src2 = SRC + np.array([shift, 0.0])
        me2 = me_coeffs(SOFT, UPUP, (X_C[0] + shift, X_C[1]), src2, Q, 16)
        v2 = me_eval(SOFT, me2, (target[0] + shift, target[1]), SPEC)
        assert abs(v1 - v2) < 1e-10 * abs(v1)

    def test_half_line_matches_full_line(self):
        # I_p from the symmetrized half line equals brute-force full-line
        # quadrature
        x, x_c = (0.25, 1.8), X_C
        P = 6
        ip_half = me_expansion_functions(SOFT, UPUP, x, x_c, P, ContourSpec(rtol=1e-11))
        k = 1.0
        alpha, beta, X = x[1], x_c[1], x[0] - x_c[0]
        p_orders = np.arange(-(P - 1), P)

        def f_full(lam, dinfo=None):
            lam = np.asarray(lam, dtype=float)
            h = branch_sqrt_arr(hsq(lam, k, dinfo))
            w = w_from_h(lam, h, k)
            sig = sigma_component_batch(SOFT, lam, UPUP, dinfo=dinfo)
            base = sig * np.exp(-h * (alpha + beta) + 1j * lam * X)
            return base[:, None] * (-1j * w[:, None]) ** p_orders[None, :]

        lam_max = 60.0
        # split the band at both branch points
        segs = [
            Segment(f_full, -lam_max, -k, "right", 4),
            Segment(f_full, -k, 0.0, "left", 4),
            Segment(f_full, 0.0, k, "right", 4),
            Segment(f_full, k, lam_max, "left", 4),
        ]
        full = adaptive_segments(segs, 1e-11).value
        scale = np.max(np.abs(full))
        np.testing.assert_allclose(ip_half, full, atol=1e-10 * scale)

    def test_composition_chain_error_budget(self):
        # ME -> M2L -> L2L -> eval within 3x the sum of the single-stage
        # errors on the same geometry
        x_cl = (0.3, 1.9)
        new_c = (0.36, 1.86)
        probe = (0.38, 1.88)
        P = 18
        me = me_coeffs(SOFT, UPUP, X_C, SRC, Q, P)
        tm = m2l(SOFT, UPUP, x_cl, X_C, P, P, SPEC)
        chain = le_eval(l2l(m2l_apply(tm, me), new_c, P), probe)
        ref = direct_sum(SOFT, UPUP, probe, SRC, Q)
        chain_err = abs(chain - ref)

        # single-stage errors
        e_me = abs(me_eval(SOFT, me, probe, SPEC) - ref)
        le_d = le_coeffs_direct(SOFT, UPUP, x_cl, SRC, Q, P, SPEC)
        e_m2l = abs(le_eval(m2l_apply(tm, me), probe) - le_eval(le_d, probe))
        le_shift_d = le_coeffs_direct(SOFT, UPUP, new_c, SRC, Q, P, SPEC)
        e_l2l = abs(le_eval(l2l(le_d, new_c, P), probe) - le_eval(le_shift_d, probe))
        e_le = abs(le_eval(le_shift_d, probe) - ref)
        budget = 3.0 * (e_me + e_m2l + e_l2l + e_le) + 1e-13 * abs(ref)
        assert chain_err <= budget


class TestFreeSpace:
    def test_point_source_at_center(self):
        fsme = fs_me([(0.0, 0.0)], [1.0], (0.0, 0.0), 1.3, 6)
        assert fsme.coeffs[5] == pytest.approx(1.0)
        val = fs_me_eval(fsme, (2.0, 0.5))
        ref = free_space_green(1.3, (2.0, 0.5), (0.0, 0.0))
        assert val == pytest.approx(ref, rel=1e-13)

    def test_cluster_matches_direct(self):
        rng = np.random.default_rng(52)
        src = rng.uniform(-0.5, 0.5, (10, 2))
        q = rng.uniform(0.1, 1.0, 10)
        fsme = fs_me(src, q, (0.0, 0.0), 1.0, 25)
        tgt = (1.6, 1.2)
        ref = sum(qq * free_space_green(1.0, tgt, tuple(s)) for s, qq in zip(src, q))
        assert abs(fs_me_eval(fsme, tgt) - ref) < 1e-10 * abs(ref)

    def test_geometric_rate(self):
        # sources on a common circle so a single geometric ratio governs
        rng = np.random.default_rng(53)
        ang = rng.uniform(0, 2 * math.pi, 6)
        src = 0.5 * np.column_stack([np.cos(ang), np.sin(ang)])
        q = rng.uniform(0.5, 1.0, 6)
        rad = float(np.max(np.hypot(src[:, 0], src[:, 1])))
        tgt = (2.2, 0.9)
        rho_c = math.hypot(*tgt)
        ref = sum(qq * free_space_green(1.0, tgt, tuple(s)) for s, qq in zip(src, q))
        errs = []
        Ps = np.arange(2, 36)
        for P in Ps:
            fsme = fs_me(src, q, (0.0, 0.0), 1.0, int(P))
            errs.append(abs(fs_me_eval(fsme, tgt) - ref) / abs(ref))
        slope = fit_rate(Ps, np.array(errs))
        pred = math.log10(rad / rho_c)
        assert abs(slope - pred) < 0.15 * abs(pred)

    def test_translations_match_direct(self):
        rng = np.random.default_rng(54)
        src = rng.uniform(-0.4, 0.4, (8, 2))
        q = rng.uniform(0.5, 1.5, 8)
        k = 1.1
        fsme = fs_me(src, q, (0.0, 0.0), k, 26)
        fsme_shift = fs_m2m(fsme, (0.1, -0.08))
        local = fs_m2l(fsme_shift, (2.6, 1.4), 26)
        local2 = fs_l2l(local, (2.68, 1.33))
        probe = (2.75, 1.38)
        ref = sum(qq * free_space_green(k, probe, tuple(s)) for s, qq in zip(src, q))
        assert abs(fs_le_eval(local2, probe) - ref) < 1e-9 * abs(ref)

    def test_separation_guard(self):
        fsme = fs_me([(0.4, 0.0)], [1.0], (0.0, 0.0), 1.0, 8)
        with pytest.raises(FarFieldError):
            fs_me_eval(fsme, (0.6, 0.0))
