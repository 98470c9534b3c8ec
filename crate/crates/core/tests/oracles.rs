//! Closed-form and numerical results checked against independent oracles.

use approx::assert_relative_eq;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use routerlab::bifurcation::{
    cusp_asymptote, n_expert_contrast_eigenvalue, n_expert_uniform_score, n_expert_vector_field,
};
use routerlab::model::{load_difference, potential, vector_field, vector_field_derivatives};
use routerlab::moe::{sample_batch, HardMoe, SoftMoe, HARD_PARAMS, SOFT_PARAMS};
use routerlab::simulator::{integrate_mean_field, run_rng};
use routerlab::{find_equilibria, hysteresis_boundary, RouterParams, RouterState, Stability};

/// Plain field written out without the library's stable helpers.
fn naive_field(y: f64, a: f64, gamma: f64, temp: f64, h: f64) -> f64 {
    a * (y / (2.0 * temp)).tanh() - gamma * y + h
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Sign changes of the naive field on a dense grid.
fn brute_root_count(a: f64, gamma: f64, temp: f64, h: f64) -> usize {
    let l = (a + h.abs()) / gamma + 2.0;
    let n = 200_000;
    let mut count = 0;
    let mut prev = naive_field(-l, a, gamma, temp, h);
    for k in 1..=n {
        let y = -l + 2.0 * l * k as f64 / n as f64;
        let v = naive_field(y, a, gamma, temp, h);
        if (prev > 0.0) != (v > 0.0) {
            count += 1;
        }
        prev = v;
    }
    count
}

#[test]
fn symmetric_roots_match_bisection() {
    for &(a, gamma, temp) in &[
        (4.0, 1.0, 1.0),
        (3.0, 0.5, 2.0),
        (10.0, 2.0, 0.3),
        (2.5, 1.0, 1.0),
    ] {
        let p = RouterParams::new(a, gamma, temp, 0.0).unwrap();
        let set = find_equilibria(&p);
        let ystar = bisect(
            |y| naive_field(y, a, gamma, temp, 0.0),
            1e-6,
            a / gamma + 1.0,
        );
        assert_eq!(set.len(), 3);
        assert_relative_eq!(set.equilibria[2].y, ystar, epsilon = 1e-10);
        assert_relative_eq!(set.equilibria[0].y, -ystar, epsilon = 1e-10);
        assert_eq!(set.equilibria[1].y, 0.0);
    }
}

#[test]
fn hysteresis_boundary_matches_root_count_transition() {
    for &a in &[2.2, 3.0, 4.0, 6.0] {
        let predicted = hysteresis_boundary(a, 1.0, 1.0).unwrap();
        // Binary search over the 1e-4 grid for the last h with three roots.
        let step = 1e-4;
        let (mut lo, mut hi) = (0usize, ((a + 1.0) / step) as usize);
        assert_eq!(brute_root_count(a, 1.0, 1.0, 0.0), 3);
        assert_eq!(brute_root_count(a, 1.0, 1.0, hi as f64 * step), 1);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if brute_root_count(a, 1.0, 1.0, mid as f64 * step) == 3 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let measured = (lo as f64 + 0.5) * step;
        assert!(
            (measured - predicted).abs() < 2e-4,
            "a={a}: {measured} vs {predicted}"
        );
    }
}

#[test]
fn known_boundary_values() {
    assert_relative_eq!(
        hysteresis_boundary(4.0, 1.0, 1.0).unwrap(),
        2.0 * (2f64.sqrt() - (1.0 + 2f64.sqrt()).ln()),
        epsilon = 1e-12
    );
    assert_eq!(hysteresis_boundary(2.0, 1.0, 1.0).unwrap(), 0.0);
    assert_eq!(hysteresis_boundary(1.0, 1.0, 1.0).unwrap(), 0.0);
}

#[test]
fn cusp_asymptote_is_leading_order() {
    for &(gamma, temp) in &[(1.0, 1.0), (0.5, 2.0), (3.0, 0.2)] {
        let mu = 1e-5;
        let a = 2.0 * temp * (gamma + mu);
        let exact = hysteresis_boundary(a, gamma, temp).unwrap();
        assert_relative_eq!(exact, cusp_asymptote(mu, gamma, temp), max_relative = 1e-3);
    }
}

#[test]
fn derivatives_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let a = rng.random_range(0.1..10.0);
        let gamma = rng.random_range(0.1..5.0);
        let temp = rng.random_range(0.2..5.0);
        let h = rng.random_range(-2.0..2.0);
        let y = rng.random_range(-6.0..6.0) * temp;
        let p = RouterParams::new(a, gamma, temp, h).unwrap();
        let d = vector_field_derivatives(y, &p);
        let e = 1e-4 * temp;
        let f = |y| vector_field(y, &p);
        let fy = (f(y + e) - f(y - e)) / (2.0 * e);
        let fyy = (f(y + e) - 2.0 * f(y) + f(y - e)) / (e * e);
        let g = |y| vector_field_derivatives(y, &p).f_yy;
        let fyyy = (g(y + e) - g(y - e)) / (2.0 * e);
        let scale = a / temp + gamma;
        assert!((d.f_y - fy).abs() < 1e-7 * scale);
        assert!((d.f_yy - fyy).abs() < 1e-4 * scale / temp);
        assert!((d.f_yyy - fyyy).abs() < 1e-6 * scale / (temp * temp));
        // V' = -F
        let v = |y| potential(y, &p);
        let dv = (v(y + e) - v(y - e)) / (2.0 * e);
        assert!((dv + f(y)).abs() < 1e-6 * (1.0 + scale * temp));
    }
}

#[test]
fn stability_matches_derivative_sign() {
    let p = RouterParams::new(5.0, 1.0, 1.0, 0.3).unwrap();
    for e in &find_equilibria(&p).equilibria {
        let fy = vector_field_derivatives(e.y, &p).f_y;
        let expected = if fy < 0.0 {
            Stability::Stable
        } else {
            Stability::Unstable
        };
        assert_eq!(e.stability, expected);
    }
}

fn numeric_jacobian(n: usize, a: f64, gamma: f64, temp: f64) -> DMatrix<f64> {
    let r0 = vec![n_expert_uniform_score(n, a, gamma).unwrap(); n];
    let drifts = vec![0.0; n];
    let e = 1e-5;
    let mut jac = DMatrix::zeros(n, n);
    for j in 0..n {
        let (mut rp, mut rm) = (r0.clone(), r0.clone());
        rp[j] += e;
        rm[j] -= e;
        let fp = n_expert_vector_field(&rp, &drifts, a, gamma, temp);
        let fm = n_expert_vector_field(&rm, &drifts, a, gamma, temp);
        for i in 0..n {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * e);
        }
    }
    jac
}

#[test]
fn n_expert_uniform_state_is_equilibrium() {
    for n in [2, 3, 5] {
        let r = vec![n_expert_uniform_score(n, 3.0, 0.7).unwrap(); n];
        let f = n_expert_vector_field(&r, &vec![0.0; n], 3.0, 0.7, 1.3);
        assert!(f.iter().all(|v| v.abs() < 1e-12));
    }
}

#[test]
fn n_expert_jacobian_spectrum() {
    for &(a, gamma, temp) in &[(3.0, 1.0, 1.0), (1.0, 0.4, 0.5), (7.0, 2.0, 0.8)] {
        for n in [2usize, 3, 5] {
            let jac = numeric_jacobian(n, a, gamma, temp);
            let asym = (&jac - jac.transpose()).abs().max();
            assert!(asym < 1e-8);
            let sym = (&jac + jac.transpose()) * 0.5;
            let mut eig: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
            eig.sort_by(f64::total_cmp);
            let contrast = n_expert_contrast_eigenvalue(n, a, gamma, temp).unwrap();
            let mut expected = vec![contrast; n - 1];
            expected.push(-gamma);
            expected.sort_by(f64::total_cmp);
            for (got, want) in eig.iter().zip(&expected) {
                assert!((got - want).abs() < 1e-6, "n={n}: {eig:?} vs {expected:?}");
            }
        }
    }
}

fn rel_close(analytic: f64, numeric: f64, tol: f64) -> bool {
    let scale = analytic.abs().max(numeric.abs()).max(1e-6);
    (analytic - numeric).abs() <= tol * scale
}

#[test]
fn soft_gradient_matches_central_differences() {
    let mut rng = run_rng(21, 0);
    for _ in 0..20 {
        let h = rng.random_range(-1.0..1.0);
        let temp = rng.random_range(0.2..2.0);
        let reg = rng.random_range(0.0..0.05);
        let mut model = SoftMoe::random(&mut rng, h, temp, 0.05, reg);
        model.beta = rng.random_range(-0.5..0.5);
        let batch = sample_batch(&mut rng, 32);
        let (_, grad) = model.loss_and_grad(&batch);
        let base = model.params();
        for k in 0..SOFT_PARAMS {
            let e = 1e-6;
            let mut plus = model;
            let mut minus = model;
            let (mut pp, mut pm) = (base, base);
            pp[k] += e;
            pm[k] -= e;
            plus.set_params(pp);
            minus.set_params(pm);
            let fd = (plus.loss(&batch) - minus.loss(&batch)) / (2.0 * e);
            assert!(
                rel_close(grad[k], fd, 1e-5),
                "param {k}: {} vs {fd}",
                grad[k]
            );
        }
    }
}

#[test]
fn hard_gradient_matches_straight_through_surrogate() {
    let mut rng = run_rng(22, 0);
    for _ in 0..20 {
        let h = rng.random_range(-1.0..1.0);
        let temp = rng.random_range(0.3..2.0);
        let lambda = rng.random_range(0.0..3.0);
        let model =
            HardMoe::random(&mut rng, h, temp, 0.05, lambda).with_reg(rng.random_range(0.0..0.05));
        let batch = sample_batch(&mut rng, 32);
        let (_, grad) = model.stats_and_grad(&batch);
        let base = model.params();
        for k in 0..HARD_PARAMS {
            let e = 1e-6;
            let mut plus = model;
            let mut minus = model;
            let (mut pp, mut pm) = (base, base);
            pp[k] += e;
            pm[k] -= e;
            plus.set_params(pp);
            minus.set_params(pm);
            let fd = (plus.straight_through_objective(&model, &batch)
                - minus.straight_through_objective(&model, &batch))
                / (2.0 * e);
            assert!(
                rel_close(grad[k], fd, 1e-5),
                "param {k}: {} vs {fd}",
                grad[k]
            );
        }
    }
}

#[test]
fn rk4_matches_linear_solution() {
    // a = 0: r_i(t) = b_i/gamma + (r_i(0) - b_i/gamma) e^{-gamma t}
    let p = RouterParams::with_drifts(0.0, 0.8, 1.0, 0.4, -0.2).unwrap();
    let path = integrate_mean_field(&p, 0.0, RouterState::new(1.0, -2.0), 3.0, 0.01).unwrap();
    let s = path.last();
    let decay = (-0.8f64 * 3.0).exp();
    assert_relative_eq!(s.r1, 0.5 + 0.5 * decay, epsilon = 1e-9);
    assert_relative_eq!(s.r2, -0.25 + (-2.0 + 0.25) * decay, epsilon = 1e-9);
}

#[test]
fn mean_field_settles_on_stable_equilibrium() {
    let p = RouterParams::new(4.0, 1.0, 1.0, 0.0).unwrap();
    let path =
        integrate_mean_field(&p, 0.0, RouterState::from_difference(0.1), 40.0, 0.01).unwrap();
    let ystar = bisect(|y| naive_field(y, 4.0, 1.0, 1.0, 0.0), 1e-3, 6.0);
    assert_relative_eq!(path.last().y(), ystar, epsilon = 1e-8);
    assert_relative_eq!(
        *path.u().last().unwrap(),
        load_difference(ystar, 1.0),
        epsilon = 1e-8
    );
}
