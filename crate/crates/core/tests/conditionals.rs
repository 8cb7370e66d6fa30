mod common;

use ppp::model::normal_log_pdf;
use ppp::priors::{self, log_p1, Hyperparams};
use ppp::{rng, Dataset, MixtureParams};

#[test]
fn conjugate_conditionals_match_closed_form_moments() {
    let failures: Vec<String> = common::conditional_moment_checks()
        .into_iter()
        .filter_map(Result::err)
        .collect();
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn allocation_frequencies_match_responsibilities() {
    let data = Dataset::new(vec![-1.0, 0.4, 1.0, 2.5], "alloc").unwrap();
    let params = MixtureParams::new(
        vec![0.2, 0.5, 0.3],
        vec![-0.5, 1.0, 2.0],
        vec![0.5, 1.0, 2.0],
    )
    .unwrap();
    let mut r = rng::seeded(1);
    let draws = 100_000;
    let mut counts = vec![[0usize; 3]; data.n()];
    for _ in 0..draws {
        let alloc = priors::sample_allocations(&data, &params, &mut r);
        for (i, &z) in alloc.labels().iter().enumerate() {
            counts[i][z] += 1;
        }
    }
    for (i, &y) in data.observations().iter().enumerate() {
        let dens: Vec<f64> = (0..3)
            .map(|c| {
                let v = params.variances[c];
                params.weights[c] * (-(y - params.means[c]).powi(2) / (2.0 * v)).exp()
                    / (2.0 * std::f64::consts::PI * v).sqrt()
            })
            .collect();
        let total: f64 = dens.iter().sum();
        for c in 0..3 {
            let p = dens[c] / total;
            let freq = counts[i][c] as f64 / draws as f64;
            let se = (p * (1.0 - p) / draws as f64).sqrt();
            assert!((freq - p).abs() < 3.0 * se, "y={y} c={c}: {freq} vs {p}");
        }
    }
}

/// Composite Simpson rule on [a, b] with `n` (even) intervals.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn base() -> (MixtureParams, Hyperparams) {
    let params = MixtureParams::new(vec![0.4, 0.6], vec![0.5, 2.0], vec![1.0, 0.6]).unwrap();
    let hyper = Hyperparams {
        xi: 1.0,
        kappa: 0.3,
        alpha: 2.0,
        g: 2.0,
        h: 0.5,
        dirichlet_delta: 2.0,
    };
    (params, hyper)
}

#[test]
fn prior_factor_mean_term_integrates() {
    let (params, hyper) = base();
    let beta = 0.8;
    let at = |x: f64| {
        let mut p = params.clone();
        p.means[0] = x;
        log_p1(&p, beta, &hyper)
    };
    let anchor = at(hyper.xi);
    let sd = (1.0 / hyper.kappa).sqrt();
    let z = simpson(
        |x| (at(x) - anchor).exp(),
        hyper.xi - 14.0 * sd,
        hyper.xi + 14.0 * sd,
        200_000,
    );
    let exact = (2.0 * std::f64::consts::PI / hyper.kappa).sqrt();
    assert!((z / exact - 1.0).abs() < 1e-8, "{z} vs {exact}");
    // The same term is a normal density.
    let d = at(0.0) - at(hyper.xi);
    assert!(
        (d - (normal_log_pdf(0.0, hyper.xi, 1.0 / hyper.kappa)
            - normal_log_pdf(hyper.xi, hyper.xi, 1.0 / hyper.kappa)))
        .abs()
            < 1e-12
    );
}

#[test]
fn prior_factor_variance_term_integrates() {
    // alpha = 2: inverse-gamma density beta^2 v^-3 exp(-beta/v).
    let (params, hyper) = base();
    let beta = 0.8;
    let at = |v: f64| {
        let mut p = params.clone();
        p.variances[0] = v;
        log_p1(&p, beta, &hyper)
    };
    let v0 = 0.5;
    let anchor = at(v0);
    // Substitute t = 1/v, dv = dt / t^2.
    let z = simpson(
        |t: f64| {
            if t == 0.0 {
                0.0
            } else {
                (at(1.0 / t) - anchor).exp() / (t * t)
            }
        },
        0.0,
        80.0 / beta,
        400_000,
    );
    let density = beta * beta * v0.powi(-3) * (-beta / v0).exp();
    assert!((z * density - 1.0).abs() < 1e-8, "{}", z * density);
}

#[test]
fn prior_factor_weight_term_integrates() {
    // K = 2, delta = 2: density 6 w (1 - w).
    let (params, hyper) = base();
    let at = |w: f64| {
        let mut p = params.clone();
        p.weights = vec![w, 1.0 - w];
        log_p1(&p, 0.8, &hyper)
    };
    let anchor = at(0.5);
    let z = simpson(
        |w| {
            if w <= 0.0 || w >= 1.0 {
                0.0
            } else {
                (at(w) - anchor).exp()
            }
        },
        0.0,
        1.0,
        20_000,
    );
    assert!((z * 1.5 - 1.0).abs() < 1e-8, "{}", z * 1.5);
}

#[test]
fn prior_factor_beta_terms_integrate() {
    // K = 1, alpha = 2, g = 2: beta enters as beta^(g + K alpha - 1) exp(-(h + 1/s2) beta).
    let (_, hyper) = base();
    let params = MixtureParams::new(vec![1.0], vec![0.3], vec![0.9]).unwrap();
    let at = |b: f64| log_p1(&params, b, &hyper);
    let b0 = 1.0;
    let anchor = at(b0);
    let rate = hyper.h + 1.0 / 0.9;
    let z = simpson(
        |b| {
            if b == 0.0 {
                0.0
            } else {
                (at(b) - anchor).exp()
            }
        },
        0.0,
        90.0 / rate,
        400_000,
    );
    // Gamma(4) / rate^4 divided by the kernel at b0.
    let exact = 6.0 / rate.powi(4) / (b0.powi(3) * (-rate * b0).exp());
    assert!((z / exact - 1.0).abs() < 1e-8, "{z} vs {exact}");
}
