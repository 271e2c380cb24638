use voidplace::gp_prior::sample_field;
use voidplace::ingest::synth_generate;
use voidplace::lgcp_fit::log_marginal_likelihood;
use voidplace::{laplace_fit, GaussianFieldPosterior, Grid1D, MaternParams};

#[test]
fn recovers_high_count_field() {
    let grid = Grid1D::new(0.0, 50.0, 60).unwrap();
    let prior = MaternParams::new(0.25, 1.5, 150.0).unwrap();
    // exp(0)·50 = 50 expected events per cell.
    let truth = sample_field(&GaussianFieldPosterior::prior(grid, &prior, 0.0, 0.0).unwrap(), 17);
    let counts = synth_generate(&truth, &grid, 18, 1.0).unwrap();
    let fit = laplace_fit(&counts, 0.0, &prior, 0.0).unwrap();
    let rmse = (fit.posterior.mean().iter().zip(&truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / 60.0).sqrt();
    assert!(rmse < 0.15, "rmse {rmse}");
    assert!(fit.diagnostics.grad_max_norm < 1e-6);
}

#[test]
fn evidence_prefers_generating_range() {
    let grid = Grid1D::new(0.0, 50.0, 60).unwrap();
    let a = MaternParams::new(0.5, 1.5, 150.0).unwrap();
    let b = a.with_beta(1500.0).unwrap();
    let prior_a = GaussianFieldPosterior::prior(grid, &a, -2.0, 0.0).unwrap();
    let mut wins = 0;
    for rep in 0..50u64 {
        let truth = sample_field(&prior_a, 1000 + rep);
        let counts = synth_generate(&truth, &grid, 5000 + rep, 1.0).unwrap();
        let ea = log_marginal_likelihood(&counts, -2.0, &a, 0.0).unwrap();
        let eb = log_marginal_likelihood(&counts, -2.0, &b, 0.0).unwrap();
        if ea > eb {
            wins += 1;
        }
    }
    assert!(wins >= 45, "generating prior preferred in only {wins}/50 replications");
}
