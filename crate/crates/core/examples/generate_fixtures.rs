//! Freezes oracle values into the shipped fixture file.
//!
//! cargo run --release -p covprior --example generate_fixtures > crates/core/fixtures/oracle_fixtures.txt

use covprior::casestudies::{gauss_stdmean, marginalization, multinomial, multinormal, neyman_scott, stein};
use covprior::fixture::{Fixture, FixtureEntry, FIXTURE_VERSION};
use covprior::oracle::{mc_mean_vec, IntegrationSpec, OracleRng};
use rand_distr::{Distribution, StandardNormal};

type Res<T> = Result<T, Box<dyn std::error::Error>>;

fn q(rel: f64) -> IntegrationSpec<f64> {
    IntegrationSpec::quadrature(rel)
}

/// Quadrature tolerance: the reported error bound, floored at `rel`·|v|.
fn quad_tol(value: f64, error: f64, rel: f64) -> f64 {
    (4.0 * error).max(rel * value.abs())
}

fn s(v: impl ToString) -> String {
    v.to_string()
}

fn main() -> Res<()> {
    let mut entries = Vec::new();

    for (name, n) in [("gauss.evidence_mu", 5usize), ("gauss.evidence_lambda", 4)] {
        let ev = if name.ends_with("mu") {
            gauss_stdmean::evidence_mu_by_quadrature(n, &q(1e-10))?
        } else {
            gauss_stdmean::evidence_lambda_by_quadrature(n, &q(1e-10))?
        };
        let v = ev.ln_value.exp();
        entries.push(FixtureEntry::new(
            name,
            &[("n", s(n))],
            v,
            quad_tol(v, v * ev.ln_error, 1e-8),
            0,
        ));
    }

    let one = multinormal::credible_interval_by_quadrature(12, &q(1e-12))?;
    entries.push(FixtureEntry::new(
        "multinormal.ball",
        &[("q", s(1)), ("mn", s(12))],
        one.value,
        quad_tol(one.value, one.error, 1e-10),
        0,
    ));
    for (qq, mn) in [(5usize, 12usize), (3, 40)] {
        let b = multinormal::credible_ball_by_quadrature(qq, mn, &q(1e-12))?;
        entries.push(FixtureEntry::new(
            "multinormal.ball",
            &[("q", s(qq)), ("mn", s(mn))],
            b.value,
            quad_tol(b.value, b.error, 1e-10),
            0,
        ));
    }

    let counts = [2u64, 1, 5];
    for (m, seed) in [(3usize, 7u64), (6, 11)] {
        let mc = multinomial::evidence_by_monte_carlo(&counts, m, 1_000_000, seed)?;
        entries.push(FixtureEntry::new(
            "multinomial.evidence",
            &[("counts", s("2,1,5")), ("m", s(m))],
            mc.value,
            4.0 * mc.error,
            seed,
        ));
    }

    let xs = vec![1.4, -0.3, 0.9, 2.2, 0.1];
    let xs_text = xs.iter().map(|v: &f64| v.to_string()).collect::<Vec<_>>().join(",");
    let input = stein::SteinInput::new(xs.clone())?;
    let xi = input.x[3];
    let mu = stein::average_over_hyperparameters(&input, |b, a| (a * a * xi + b) / (1.0 + a * a), &q(1e-9))?;
    let mu2 = stein::average_over_hyperparameters(&input, |b, a| stein::conditional_mu2(xi, b, a * a), &q(1e-9))?;
    let th = stein::average_over_hyperparameters(
        &input,
        |b, a| xs.iter().map(|&v| stein::conditional_mu2(v, b, a * a)).sum::<f64>() / xs.len() as f64,
        &q(1e-9),
    )?;
    for (name, est) in [("stein.averaged_mu", &mu), ("stein.averaged_mu2", &mu2)] {
        entries.push(FixtureEntry::new(
            name,
            &[("x", xs_text.clone()), ("i", s(3))],
            est.value,
            quad_tol(est.value, est.error, 1e-7),
            0,
        ));
    }
    entries.push(FixtureEntry::new(
        "stein.averaged_theta2",
        &[("x", xs_text.clone())],
        th.value,
        quad_tol(th.value, th.error, 1e-7),
        0,
    ));

    for (m, s2) in [(5usize, 1.0f64), (20, 0.7)] {
        let est = neyman_scott::averaged_mean_by_quadrature(m, s2, &q(1e-10))?;
        entries.push(FixtureEntry::new(
            "neyman_scott.averaged_mean",
            &[("m", s(m)), ("s2", s(s2))],
            est.value,
            quad_tol(est.value, est.error, 1e-6),
            0,
        ));
    }
    for (m, s2, z0) in [(4usize, 1.0f64, 0.5f64), (10, 2.0, 3.0)] {
        let ev = neyman_scott::evidence_by_quadrature(m, s2, z0, &q(1e-10))?;
        let v = ev.ln_value.exp();
        entries.push(FixtureEntry::new(
            "neyman_scott.evidence",
            &[("m", s(m)), ("s2", s(s2)), ("zeta0", s(z0))],
            v,
            quad_tol(v, v * ev.ln_error, 1e-7),
            0,
        ));
    }

    for (m, s2) in [(6usize, 1.5f64), (12, 0.4)] {
        let mo = marginalization::moments_by_quadrature(m, s2, 2, &q(1e-12))?;
        let var = mo[2].value / mo[0].value - (mo[1].value / mo[0].value).powi(2);
        let err = mo[2].error + 2.0 * mo[1].value.abs() * mo[1].error + var.abs() * mo[0].error;
        entries.push(FixtureEntry::new(
            "marginalization.variance",
            &[("m", s(m)), ("s2", s(s2))],
            var,
            quad_tol(var, err, 1e-6),
            0,
        ));
    }

    // Fisher information of N(μ, σ) as the score covariance by Monte Carlo.
    let (mu0, sigma) = (0.3f64, 1.7f64);
    let seed = 2024u64;
    let draw = |rng: &mut OracleRng| {
        let z: f64 = StandardNormal.sample(rng);
        let sm = z / sigma;
        let ss = (z * z - 1.0) / sigma;
        vec![sm * sm, sm * ss, ss * ss]
    };
    let est = mc_mean_vec(draw, 3, 2_000_000, seed)?;
    for (k, (r, c)) in [(0usize, (0usize, 0usize)), (1, (0, 1)), (2, (1, 1))] {
        entries.push(FixtureEntry::new(
            "fisher.gaussian",
            &[("mu", s(mu0)), ("sigma", s(sigma)), ("row", s(r)), ("col", s(c))],
            est[k].value,
            4.0 * est[k].error,
            seed,
        ));
    }

    let fixture = Fixture {
        version: FIXTURE_VERSION,
        entries,
    };
    print!("{}", fixture.render());
    Ok(())
}
