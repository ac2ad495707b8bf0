use covadj::trial_simulator::*;
use covadj::Probability;

fn alpha05() -> Probability {
    Probability::new(0.05).unwrap()
}

fn base() -> SimConfig {
    SimConfig {
        n_subjects: 126,
        tau: 0.5,
        sigma: 1.0,
        rho: 0.0,
        alpha: alpha05(),
        n_reps: 1000,
        seed: 20240917,
        test_kind: TestKind::StudentT,
        adjust: true,
    }
}

/// Pools `reps` trials of `n` rows, returning per-arm (x, y) columns.
fn pooled(config: &SimConfig, reps: u64) -> [(Vec<f64>, Vec<f64>); 2] {
    let mut arms: [(Vec<f64>, Vec<f64>); 2] = Default::default();
    for rep in 0..reps {
        for o in generate_trial(config, rep).unwrap() {
            let arm = &mut arms[o.treated as usize];
            arm.0.push(o.covariate);
            arm.1.push(o.outcome);
        }
    }
    arms
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn cov(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - ma) * (y - mb))
        .sum::<f64>()
        / (a.len() - 1) as f64
}

#[test]
fn generated_moments() {
    // 1000 trials × 1000 rows = 10⁶ pooled rows per configuration.
    let independent = SimConfig {
        n_subjects: 1000,
        rho: 0.0,
        ..base()
    };
    let arms = pooled(&independent, 1000);
    for (x, y) in &arms {
        let corr = cov(x, y) / (cov(x, x) * cov(y, y)).sqrt();
        assert!(corr.abs() < 0.005, "corr = {corr}");
    }

    let correlated = SimConfig {
        n_subjects: 1000,
        rho: 0.5,
        ..base()
    };
    let arms = pooled(&correlated, 1000);
    let pooled_var = (cov(&arms[0].1, &arms[0].1) + cov(&arms[1].1, &arms[1].1)) / 2.0;
    assert!(
        (pooled_var.sqrt() - 1.0).abs() < 0.005,
        "sd = {}",
        pooled_var.sqrt()
    );
    for (x, y) in &arms {
        let corr = cov(x, y) / (cov(x, x) * cov(y, y)).sqrt();
        assert!((corr - 0.5).abs() < 0.005, "corr = {corr}");
        assert!(mean(x).abs() < 0.005);
    }
    let diff = mean(&arms[1].1) - mean(&arms[0].1);
    assert!((diff - 0.5).abs() < 0.01, "diff = {diff}");
}

/// Cramer's-rule inverse of a 3×3 matrix.
fn inverse3(m: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let cof = |r: usize, c: usize| {
        let rows: Vec<usize> = (0..3).filter(|&i| i != r).collect();
        let cols: Vec<usize> = (0..3).filter(|&j| j != c).collect();
        let det2 =
            m[rows[0]][cols[0]] * m[rows[1]][cols[1]] - m[rows[0]][cols[1]] * m[rows[1]][cols[0]];
        if (r + c).is_multiple_of(2) {
            det2
        } else {
            -det2
        }
    };
    let det: f64 = (0..3).map(|j| m[0][j] * cof(0, j)).sum();
    let mut inv = [[0.0; 3]; 3];
    for (i, row) in inv.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = cof(j, i) / det;
        }
    }
    inv
}

#[test]
fn ancova_matches_brute_force_minimizer() {
    let data: Vec<Observation> = (0..12)
        .map(|i| {
            let x = ((i * 37 % 11) as f64 - 5.0) / 3.0;
            let treated = i % 2 == 1;
            let wiggle = ((i * i * 7 % 13) as f64 - 6.0) / 10.0;
            Observation {
                treated,
                covariate: x,
                outcome: 1.0 + if treated { 0.8 } else { 0.0 } + 0.6 * x + wiggle,
            }
        })
        .collect();
    let fit = fit_ancova(&data).unwrap();

    // Gradient descent on the residual sum of squares.
    let rows: Vec<([f64; 3], f64)> = data
        .iter()
        .map(|o| ([1.0, o.treated as u8 as f64, o.covariate], o.outcome))
        .collect();
    let mut beta = [0.0; 3];
    let step = 0.01;
    for _ in 0..200_000 {
        let mut grad = [0.0; 3];
        for (x, y) in &rows {
            let r = x.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>() - y;
            for k in 0..3 {
                grad[k] += 2.0 * r * x[k];
            }
        }
        for k in 0..3 {
            beta[k] -= step * grad[k];
        }
    }
    assert!(
        (fit.tau_hat - beta[1]).abs() < 1e-6,
        "{} vs {}",
        fit.tau_hat,
        beta[1]
    );

    let mut gram = [[0.0; 3]; 3];
    for (x, _) in &rows {
        for i in 0..3 {
            for j in 0..3 {
                gram[i][j] += x[i] * x[j];
            }
        }
    }
    let rss: f64 = rows
        .iter()
        .map(|(x, y)| (y - x.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>()).powi(2))
        .sum();
    let se = (rss / 9.0 * inverse3(gram)[1][1]).sqrt();
    assert!(
        (fit.se_tau_hat - se).abs() < 1e-6,
        "{} vs {se}",
        fit.se_tau_hat
    );
    assert_eq!(fit.df, 9);
}

#[test]
fn ancova_and_unadjusted_agree_without_correlation() {
    let config = SimConfig {
        n_subjects: 10_000,
        rho: 0.0,
        ..base()
    };
    let data = generate_trial(&config, 0).unwrap();
    let adj = fit_ancova(&data).unwrap();
    let unadj = fit_unadjusted(&data).unwrap();
    // Difference is the covariate slope times the covariate imbalance, both O(n^-1/2).
    assert!((adj.tau_hat - unadj.tau_hat).abs() < 2e-3);
    assert!((adj.se_tau_hat / unadj.se_tau_hat - 1.0).abs() < 2e-3);
    assert_eq!(unadj.df, 9998);
    assert_eq!(adj.df, 9997);
}

#[test]
fn t_critical_values() {
    // df = 1: P(|T| > t) = 1 − (2/π)·atan(t)
    let df1 = (std::f64::consts::PI * 0.95 / 2.0).tan();
    // df = 2: P(|T| > t) = 1 − t/√(2 + t²)
    let df2 = 0.95 * (2.0 / (1.0 - 0.95f64 * 0.95)).sqrt();
    assert!((df1 - 12.7062).abs() < 1e-3);
    assert!((df2 - 4.30265).abs() < 1e-3);
    let got1 = student_t_critical(alpha05(), 1).unwrap();
    let got2 = student_t_critical(alpha05(), 2).unwrap();
    assert!((got1 - df1).abs() < 1e-8 * df1, "{got1} vs {df1}");
    assert!((got2 - df2).abs() < 1e-8 * df2, "{got2} vs {df2}");

    let big = student_t_critical(alpha05(), 1_000_000).unwrap();
    assert!((big - 1.95996).abs() < 1e-4);

    let mut prev = f64::INFINITY;
    for df in [1, 2, 3, 5, 10, 30, 123, 1000, 100_000] {
        let c = student_t_critical(alpha05(), df).unwrap();
        assert!(c < prev && c > 1.959963984540054);
        prev = c;
    }
}

#[test]
fn t_tail_closed_forms() {
    for t in [0.1, 0.7, 1.5, 3.0, 10.0] {
        let df1 = 1.0 - 2.0 / std::f64::consts::PI * f64::atan(t);
        let df2 = 1.0 - t / (2.0 + t * t).sqrt();
        assert!((student_t_two_sided_tail(t, 1.0).unwrap() - df1).abs() < 1e-13);
        assert!((student_t_two_sided_tail(t, 2.0).unwrap() - df2).abs() < 1e-13);
    }
}

#[test]
fn campaign_is_deterministic_across_schedules() {
    let config = SimConfig {
        n_reps: 3000,
        rho: 0.4,
        ..base()
    };
    let reference = run_campaign_with(&config, Parallelism::Sequential).unwrap();
    for par in [
        Parallelism::Global,
        Parallelism::Threads(1),
        Parallelism::Threads(3),
    ] {
        let other = run_campaign_with(&config, par).unwrap();
        assert_eq!(reference, other, "{par:?}");
        assert_eq!(
            reference.empirical_se_tau_hat.to_bits(),
            other.empirical_se_tau_hat.to_bits()
        );
    }
    let reseeded = run_campaign(&SimConfig {
        seed: config.seed + 1,
        ..config
    })
    .unwrap();
    assert_ne!(reference, reseeded);
}

#[test]
fn campaign_result_invariants() {
    let r = run_campaign(&SimConfig {
        n_reps: 500,
        ..base()
    })
    .unwrap();
    let rate = r.rejection_rate.value();
    assert!((0.0..=1.0).contains(&rate));
    assert!((r.mc_stderr - (rate * (1.0 - rate) / 500.0).sqrt()).abs() < 1e-12);
    assert_eq!(r.n_reps_completed + r.n_reps_skipped, 500);
}

#[test]
fn wald_type_one_error() {
    let config = SimConfig {
        n_subjects: 200,
        tau: 0.0,
        n_reps: 100_000,
        test_kind: TestKind::WaldZ,
        adjust: false,
        ..base()
    };
    let r = run_campaign(&config).unwrap();
    let rate = r.rejection_rate.value();
    assert!((rate - 0.05).abs() < 0.005, "{rate}");
}

#[test]
fn student_t_calibration_small_trial() {
    let config = SimConfig {
        n_subjects: 50,
        tau: 0.0,
        rho: 0.5,
        n_reps: 100_000,
        ..base()
    };
    let r = run_campaign(&config).unwrap();
    let rate = r.rejection_rate.value();
    assert!(
        (rate - 0.05).abs() <= 3.0 * r.mc_stderr,
        "{rate} ± {}",
        r.mc_stderr
    );
}

#[test]
fn variance_matches_analytic_and_adjustment_agrees_at_zero_rho() {
    let adjusted0 = run_campaign(&SimConfig {
        n_reps: 100_000,
        ..base()
    })
    .unwrap();
    let adjusted5 = run_campaign(&SimConfig {
        n_reps: 100_000,
        rho: 0.5,
        ..base()
    })
    .unwrap();
    for r in [&adjusted0, &adjusted5] {
        let ratio = r.empirical_se_tau_hat / r.analytic_se;
        assert!((ratio - 1.0).abs() < 0.02, "ratio {ratio}");
        assert!(
            (r.mean_tau_hat - 0.5).abs() < 3.0 * r.empirical_se_tau_hat / (1e5f64).sqrt() + 1e-3
        );
    }
    assert!((adjusted5.analytic_se - (4.0 * 0.75 / 126.0f64).sqrt()).abs() < 1e-15);

    let unadjusted0 = run_campaign(&SimConfig {
        n_reps: 100_000,
        adjust: false,
        ..base()
    })
    .unwrap();
    let combined = (adjusted0.mc_stderr.powi(2) + unadjusted0.mc_stderr.powi(2)).sqrt();
    let gap = (adjusted0.rejection_rate.value() - unadjusted0.rejection_rate.value()).abs();
    assert!(gap <= 3.0 * combined, "gap {gap} vs {combined}");
}

#[test]
fn power_increases_with_correlation() {
    let rates: Vec<SimResult> = [0.0, 0.3, 0.5, 0.7]
        .iter()
        .map(|&rho| {
            run_campaign(&SimConfig {
                n_reps: 20_000,
                rho,
                ..base()
            })
            .unwrap()
        })
        .collect();
    for w in rates.windows(2) {
        let combined = (w[0].mc_stderr.powi(2) + w[1].mc_stderr.powi(2)).sqrt();
        assert!(
            w[1].rejection_rate.value() >= w[0].rejection_rate.value() - 3.0 * combined,
            "{:?} then {:?}",
            w[0].rejection_rate,
            w[1].rejection_rate
        );
    }
}

#[test]
fn invalid_campaigns() {
    assert!(matches!(
        run_campaign(&SimConfig {
            n_subjects: 125,
            ..base()
        }),
        Err(covadj::Error::Usage(_))
    ));
    assert!(matches!(
        generate_trial(
            &SimConfig {
                rho: -1.0,
                ..base()
            },
            0
        ),
        Err(covadj::Error::Domain(_))
    ));
}
