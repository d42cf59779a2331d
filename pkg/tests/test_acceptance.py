"""Acceptance suite: every shipped capability at its stated tolerance.

Each test prints one [PASS]/[FAIL] line (visible with pytest -s or -v);
tolerances are pinned here and nowhere else.  The FMM benchmark is the
long pole: a few minutes for the N=2000 direct reference.
"""

import math

import numpy as np
import pytest

from fdtools import fd_value_and_deriv
from helmlayer.medium import (
    Dir,
    PolarizedPair,
    ReactionComponentId,
    acoustic,
    polarized_distance,
    sound_soft_halfspace,
)
from helmlayer.quadrature import (
    CdHMap,
    ContourSpec,
    cdh_phi,
    cdh_phi_inv,
    evaluate_component,
    free_space_green,
    green,
    real_axis_tails,
    sommerfeld_identity_check,
    tail_integral_cdh,
)
from helmlayer.sigma import PoleInfo
from helmlayer.quadrature import integrate_with_pole
from helmlayer.special import bessel_j, generating_partial_sum, hankel1
from helmlayer.expansions import (
    fit_rate,
    l2l,
    le_coeffs_direct,
    le_eval,
    m2l,
    me_coeffs,
    me_expansion_functions,
    partial_sum_errors,
    regular_orders,
)
from helmlayer.fmm import (
    FmmConfig,
    direct_sum,
    evaluate_all,
    fitted_scaling_exponent,
    measure_scaling,
    random_two_layer_cloud,
)

SOFT = sound_soft_halfspace(1.0)
ACOUSTIC2 = acoustic((0.0,), (1.0, 1.5))
SLAB = acoustic((0.0, -1.0), (1.0, 2.0, 1.0))
UPUP = ReactionComponentId(0, 0, Dir.UP, Dir.UP)


def report(name, ok, detail=""):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f": {detail}" if detail else ""))
    assert ok, f"{name} failed: {detail}"


class TestCriterion1Sommerfeld:
    def test_sommerfeld_identity_random_geometries(self):
        rng = np.random.default_rng(101)
        worst = 0.0
        for _ in range(50):
            k = float(rng.choice([0.5, 1.0, 2.0]))
            dy = rng.uniform(0.2, 5.0)
            dx = rng.uniform(-5.0, 5.0)
            resid = sommerfeld_identity_check(k, (dx, dy), (0.0, 0.0))
            rho = math.hypot(dx, dy)
            scale = abs(0.25j * hankel1(0, k * rho))
            worst = max(worst, resid / scale)
        report("criterion 1 (Sommerfeld identity, 50 geometries)", worst < 1e-8,
               f"worst relative residual {worst:.2e}")


class TestCriterion2ImageOracle:
    def test_sound_soft_reaction_equals_mirror_source(self):
        rng = np.random.default_rng(102)
        worst = 0.0
        for _ in range(20):
            x = (rng.uniform(-3, 3), rng.uniform(0.1, 3.0))
            xp = (rng.uniform(-3, 3), rng.uniform(0.1, 3.0))
            got = evaluate_component(SOFT, UPUP, x, xp, ContourSpec(rtol=1e-10))
            want = -free_space_green(1.0, x, (xp[0], -xp[1]))
            worst = max(worst, abs(got - want) / abs(want))
        report("criterion 2 (sound-soft image oracle, 20 pairs)", worst < 1e-8,
               f"worst relative error {worst:.2e}")


class TestCriterion3Interface:
    def test_jump_conditions_at_interface(self):
        h = 5e-3
        xp = (0.0, 0.45)
        spec = ContourSpec(rtol=1e-10)
        rng = np.random.default_rng(103)
        worst = 0.0
        for xt in rng.uniform(-1.5, 1.5, 10):
            gu, du = fd_value_and_deriv(
                lambda e: green(ACOUSTIC2, (xt, 0.0 + e), xp, spec), h
            )
            gl, dl_e = fd_value_and_deriv(
                lambda e: green(ACOUSTIC2, (xt, 0.0 - e), xp, spec), h
            )
            worst = max(worst, abs(gu - gl), abs(du - (-dl_e)))
        report("criterion 3a (acoustic jump conditions, 10 points)", worst < 1e-6,
               f"worst residual {worst:.2e}")

    def test_reciprocity(self):
        spec = ContourSpec(rtol=1e-10)
        worst = 0.0
        for x, xp in (
            ((0.4, 0.9), (-0.3, 0.35)),
            ((0.4, 0.9), (-0.3, -0.6)),
            ((0.2, -1.1), (0.9, -0.2)),
            ((1.4, 0.2), (-1.1, -1.3)),
        ):
            a = green(ACOUSTIC2, x, xp, spec)
            b = green(ACOUSTIC2, xp, x, spec)
            worst = max(worst, abs(a - b) / abs(a))
        report("criterion 3b (reciprocity)", worst < 1e-7,
               f"worst relative asymmetry {worst:.2e}")


RATE_SPEC = ContourSpec(rtol=1e-12)


def _me_rates():
    rng = np.random.default_rng(104)
    x_c = (0.0, 0.6)
    ang = np.linspace(0, 2 * math.pi, 8, endpoint=False) + 0.19
    src = np.column_stack([x_c[0] + 0.5 * np.cos(ang), x_c[1] + 0.5 * np.sin(ang)])
    q = rng.uniform(0.5, 1.5, 8)
    rad = float(np.max(np.hypot(src[:, 0] - x_c[0], src[:, 1] - x_c[1])))
    Pmax = 42
    out = {}
    for ratio in (0.25, 0.4, 0.5):
        target = (0.0, rad / ratio - 0.6)
        me = me_coeffs(SOFT, UPUP, x_c, src, q, Pmax)
        ip = me_expansion_functions(SOFT, UPUP, target, x_c, Pmax, RATE_SPEC)
        ref = sum(
            qq * evaluate_component(SOFT, UPUP, target, tuple(s), RATE_SPEC)
            for s, qq in zip(src, q)
        )
        errs = partial_sum_errors(ip * me.coeffs, ref, np.arange(2, Pmax + 1))
        out[ratio] = (fit_rate(np.arange(2, Pmax + 1), errs), float(np.min(errs)))
    return out


def _le_rates():
    x_cl = (0.0, 0.28)
    probe = (x_cl[0] + 0.25 * math.cos(0.4), x_cl[1] + 0.25 * math.sin(0.4))
    rt = math.hypot(probe[0] - x_cl[0], probe[1] - x_cl[1])
    Mmax = 40
    out = {}
    for ratio in (0.25, 0.4, 0.5):
        D = rt / ratio
        ys = 0.1
        xs = math.sqrt(D**2 - (x_cl[1] + ys) ** 2)
        le = le_coeffs_direct(SOFT, UPUP, x_cl, [(xs, ys)], [1.0], Mmax, RATE_SPEC)
        ref = evaluate_component(SOFT, UPUP, probe, (xs, ys), RATE_SPEC)
        K = regular_orders(
            (probe[0] - x_cl[0], probe[1] - x_cl[1]), 1.0, Mmax - 1, tau=1.0
        )
        errs = partial_sum_errors(le.coeffs * K, ref, np.arange(2, Mmax + 1))
        out[ratio] = (fit_rate(np.arange(2, Mmax + 1), errs), float(np.min(errs)))
    return out


def _m2l_rates():
    # the M2L estimate is per LE coefficient; the m=0 coefficient has no
    # (P+m)!/P! polynomial prefactor drifting the finite-window slope
    rng = np.random.default_rng(105)
    x_c = (0.0, 0.6)
    ang = np.linspace(0, 2 * math.pi, 8, endpoint=False) + 0.19
    src = np.column_stack([x_c[0] + 0.5 * np.cos(ang), x_c[1] + 0.5 * np.sin(ang)])
    q = rng.uniform(0.5, 1.5, 8)
    Mfix, Pmax = 8, 42
    out = {}
    for ratio in (0.25, 0.4, 0.5):
        x_cl = (0.0, 0.5 / ratio - 0.6)
        me = me_coeffs(SOFT, UPUP, x_c, src, q, Pmax)
        tm = m2l(SOFT, UPUP, x_cl, x_c, Mfix, Pmax, RATE_SPEC)
        le_ref = le_coeffs_direct(SOFT, UPUP, x_cl, src, q, Mfix, RATE_SPEC)
        m0 = Mfix - 1
        Ps = np.arange(2, Pmax + 1)
        errs = []
        for P in Ps:
            sl = slice(Pmax - P, Pmax + P - 1)
            L0 = tm.matrix[m0, sl] @ me.coeffs[sl]
            errs.append(abs(L0 - le_ref.coeffs[m0]) / abs(le_ref.coeffs[m0]))
        out[ratio] = (fit_rate(Ps, np.array(errs)), float(np.min(errs)))
    return out


def _l2l_rates():
    x_cl = (0.0, 1.2)
    sdir = (math.cos(1.1), math.sin(1.1))
    Mfix = 36
    out = {}
    for ratio in (0.25, 0.4, 0.5):
        src1 = (0.9, 0.4)
        D = polarized_distance(SOFT, PolarizedPair(x_cl, src1, UPUP))
        new_c = (x_cl[0] + ratio * D * sdir[0], x_cl[1] + ratio * D * sdir[1])
        le = le_coeffs_direct(SOFT, UPUP, x_cl, [src1], [1.0], Mfix, RATE_SPEC)
        probe = (new_c[0] + 0.02, new_c[1] + 0.03)
        ref = evaluate_component(SOFT, UPUP, probe, src1, RATE_SPEC)
        Ps = np.arange(2, Mfix + 1)
        errs = []
        for P in Ps:
            le2 = l2l(le, new_c, int(P))
            errs.append(abs(le_eval(le2, probe, c0=1.0) - ref) / abs(ref))
        out[ratio] = (fit_rate(Ps, np.array(errs)), float(np.min(errs)))
    return out


class TestCriterion4Rates:
    @pytest.mark.parametrize(
        "name,measure",
        [("ME", _me_rates), ("LE", _le_rates), ("M2L", _m2l_rates), ("L2L", _l2l_rates)],
    )
    def test_operator_rate(self, name, measure):
        rates = measure()
        for ratio, (slope, floor) in rates.items():
            pred = math.log10(ratio)
            rel = abs(slope - pred) / abs(pred)
            report(
                f"criterion 4 ({name} @ ratio {ratio})",
                rel <= 0.15 and floor < 1e-10,
                f"slope {slope:.4f} vs {pred:.4f} ({100*rel:.1f}%), floor {floor:.1e}",
            )


class TestCriterion5PolarizedGovernance:
    def test_rate_set_by_polarized_distance(self):
        # equal Euclidean distance from the source center; polarized
        # distances differ by 1.5x
        x_c = (0.0, 0.6)
        src = [(0.18, 0.62), (-0.2, 0.75), (0.05, 0.45)]
        qs = [1.0, 0.7, 1.3]
        t_a = (0.0, 1.4)
        y_b = 0.4742
        t_b = (math.sqrt(0.64 - (y_b - 0.6) ** 2), y_b)
        D_a = polarized_distance(SOFT, PolarizedPair(t_a, x_c, UPUP))
        D_b = polarized_distance(SOFT, PolarizedPair(t_b, x_c, UPUP))
        assert D_a / D_b == pytest.approx(1.5, rel=1e-2)
        d_e_a = math.hypot(t_a[0] - x_c[0], t_a[1] - x_c[1])
        d_e_b = math.hypot(t_b[0] - x_c[0], t_b[1] - x_c[1])
        assert d_e_a == pytest.approx(d_e_b, rel=1e-3)
        Pmax = 30
        me = me_coeffs(SOFT, UPUP, x_c, src, qs, Pmax)
        slopes = {}
        for label, tgt in (("far_image", t_a), ("near_image", t_b)):
            ip = me_expansion_functions(SOFT, UPUP, tgt, x_c, Pmax, RATE_SPEC)
            ref = sum(
                qq * evaluate_component(SOFT, UPUP, tgt, tuple(s), RATE_SPEC)
                for s, qq in zip(src, qs)
            )
            errs = partial_sum_errors(ip * me.coeffs, ref, np.arange(2, Pmax + 1))
            slopes[label] = fit_rate(np.arange(2, Pmax + 1), errs)
        report(
            "criterion 5 (polarized distance governs the rate)",
            slopes["far_image"] < slopes["near_image"],
            f"far-image slope {slopes['far_image']:.3f} < "
            f"near-image slope {slopes['near_image']:.3f} "
            f"(equal Euclidean distance {d_e_a:.3f})",
        )


class TestCriterion6PoleFormula:
    def test_analytic_half_residue(self):
        val_p = integrate_with_pole(
            lambda l: np.ones_like(l),
            lambda l: 1.0 / (l - 2.0),
            PoleInfo(2.0, 1.0 + 0j, +1),
            (1.0, 3.0),
        )
        val_m = integrate_with_pole(
            lambda l: np.ones_like(l),
            lambda l: 1.0 / (l - 2.0),
            PoleInfo(2.0, 1.0 + 0j, -1),
            (1.0, 3.0),
        )
        ok = abs(val_p - 1j * math.pi) < 1e-10 and abs(val_m + 1j * math.pi) < 1e-10
        report("criterion 6a (analytic pole case returns +-i pi)", ok,
               f"errors {abs(val_p - 1j*math.pi):.1e}, {abs(val_m + 1j*math.pi):.1e}")

    def test_corrected_vs_lossy_extrapolation(self):
        worst = 0.0
        for x, xp in (((0.9, 0.4), (0.0, 0.6)), ((2.0, 0.8), (-0.4, 0.3))):
            vc = evaluate_component(SLAB, UPUP, x, xp, ContourSpec(rtol=1e-10))
            vp = evaluate_component(
                SLAB, UPUP, x, xp, ContourSpec(rtol=1e-9, pole_mode="perturbed")
            )
            worst = max(worst, abs(vc - vp) / abs(vc))
        report("criterion 6b (corrected vs lossy-limit oracle)", worst < 1e-4,
               f"worst relative disagreement {worst:.2e}")


class TestCriterion7CdH:
    def test_roundtrip_and_signs(self):
        m = CdHMap(beta=0.7, k=1.3)
        rng = np.random.default_rng(107)
        worst = 0.0
        signs_ok = True
        for _ in range(1000):
            lp = m.k + rng.uniform(1e-3, 8.0)
            w = complex(cdh_phi(m, lp)) + rng.uniform(1e-6, 8.0)
            z = cdh_phi_inv(m, w)
            worst = max(worst, abs(cdh_phi(m, z) - w) / max(1.0, abs(w)))
            zm = complex(
                lp * math.cos(m.beta),
                -math.sqrt(lp**2 - m.k**2) * math.sin(m.beta),
            ) + rng.uniform(1e-9, 8.0)
            if zm.imag < 0:
                phi = cdh_phi(m, zm)
                signs_ok = signs_ok and phi.real > 0 and phi.imag > 0
        report("criterion 7a (CdH round trip, 1000 points)", worst < 1e-12,
               f"worst {worst:.2e}")
        report("criterion 7b (CdH image in the open first quadrant)", signs_ok)

    def test_tails_agree_on_half_space(self):
        spec = ContourSpec(rtol=1e-10)
        worst = 0.0
        for x, xp in (((1.5, 0.5), (0.0, 0.3)), ((-2.0, 0.8), (0.3, 0.6))):
            rc = tail_integral_cdh(SOFT, UPUP, x, xp, spec)
            rr = real_axis_tails(SOFT, UPUP, x, xp, spec)
            worst = max(worst, abs(rc.value - rr.value) / max(1.0, abs(rr.value)))
        report("criterion 7c (CdH tail equals real-axis tail)", worst < 1e-9,
               f"worst {worst:.2e}")


class TestCriterion8Fmm:
    def test_equivalence_and_scaling(self):
        rng = np.random.default_rng(108)
        src, tgt = random_two_layer_cloud(ACOUSTIC2, 2000, rng)
        config = FmmConfig(eps=1e-6)
        fmm_vals = evaluate_all(ACOUSTIC2, src, tgt, config)
        ref = direct_sum(ACOUSTIC2, src, tgt, rtol=1e-8)
        rel = float(np.linalg.norm(fmm_vals - ref) / np.linalg.norm(ref))
        report("criterion 8a (N=2000 FMM vs direct)", rel < 1e-6,
               f"relative L2 error {rel:.2e}")

        sizes = (500, 1000, 2000, 4000)
        secs = measure_scaling(ACOUSTIC2, sizes, seed=42, config=config)
        expo = fitted_scaling_exponent(sizes, secs)
        report(
            "criterion 8b (near-linear runtime scaling)",
            expo < 1.3,
            "fitted exponent {:.2f} over N={} with times {}".format(
                expo, sizes, [f"{t:.1f}s" for t in secs]
            ),
        )


class TestCriterion9SpecialFunctions:
    def test_bessel_bound_large_sample(self):
        rng = np.random.default_rng(109)
        n = 10_000
        ps = rng.integers(-40, 41, size=n)
        zs = rng.uniform(-40, 40, size=n) + 1j * rng.uniform(-40, 40, size=n)
        violations = 0
        for p, z in zip(ps, zs):
            p = int(p)
            if p == 0 and z == 0:
                continue
            ap = abs(p)
            bound = (
                (abs(z) / 2.0) ** ap / math.factorial(ap) * math.exp(abs(z.imag))
            )
            if math.isinf(bound):
                continue
            if abs(bessel_j(p, z)) > bound * (1 + 1e-12):
                violations += 1
        report("criterion 9a (growth bound over 10^4 samples)", violations == 0,
               f"{violations} violations")

    def test_generating_function_partial_sums(self):
        rng = np.random.default_rng(110)
        worst = 0.0
        for _ in range(100):
            z = complex(rng.uniform(-2, 2), rng.uniform(-2, 2))
            if abs(z) > 2:
                z *= 2.0 / abs(z)
            om = rng.uniform(0.5, 2.0) * np.exp(1j * rng.uniform(0, 2 * math.pi))
            want = np.exp(0.5 * z * (om - 1.0 / om))
            got = generating_partial_sum(z, om, 60)
            worst = max(worst, abs(got - want) / max(1.0, abs(want)))
        report("criterion 9b (generating series at P=60, |z|<=2)", worst < 1e-12,
               f"worst {worst:.2e}")
