//! Monte-Carlo checks of the spike-vanishing analysis: binary spike moments,
//! the subthreshold potential variance, and the firing-rate bound, including
//! a low threshold where the bound is actually exercised.
//!
//! cargo run --release --example spike_vanishing_theory

use sdqn::theory::{
    epsilon_bound, predicted_variance, verify_lemma1, verify_spike_moments, verify_theorem1, verify_theorem1_sweep,
    LemmaConfig, TheoryReport, WeightDraw,
};

fn show(r: &TheoryReport) {
    println!("{} -> {}", r.name, if r.pass { "pass" } else { "FAIL" });
    for c in &r.checks {
        println!(
            "  {:<48} predicted {:>10.6} empirical {:>10.6} (se {:.1e})",
            c.label, c.predicted, c.empirical, c.standard_error
        );
    }
}

fn main() -> sdqn::Result<()> {
    for p in [0.0, 0.25, 0.5, 1.0] {
        show(&verify_spike_moments(p, 100_000, 0)?);
    }
    let cfg = LemmaConfig::default();
    println!("closed-form D(u_4) = {:.6}", predicted_variance(&cfg));
    show(&verify_lemma1(&cfg)?);
    // Sharing one weight across the trial adds cross terms the sum of squares misses.
    show(&verify_lemma1(&LemmaConfig {
        weights: WeightDraw::PerTrial,
        ..cfg
    })?);
    show(&verify_theorem1_sweep(&cfg, 1.0, &[0.1, 0.5, 1.0], &[0.1, 0.5, 0.9])?);
    println!("epsilon at k=1, V_th=0.3: {:.4}", epsilon_bound(1.0, 0.3));
    show(&verify_theorem1(&cfg, 0.3)?);
    Ok(())
}
