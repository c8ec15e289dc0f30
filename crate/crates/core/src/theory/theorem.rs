use serde_json::json;

use super::lemma::simulate;
use super::{predicted_variance, weight_variance, LemmaConfig, TheoryCheck, TheoryReport};
use crate::error::{Error, Result};

/// `ε = D(W) / (2·V_th²)`
pub fn epsilon_bound(k: f64, v_th: f64) -> f64 {
    weight_variance(k) / (2.0 * v_th * v_th)
}

fn checks_for(cfg: &LemmaConfig, v_th: f64, prefix: &str) -> Vec<TheoryCheck> {
    let (_, fired, _) = simulate(cfg, Some(v_th));
    let n = fired.len() as f64;
    let rate = fired.iter().sum::<f64>() / n;
    let se = (rate * (1.0 - rate) / n).sqrt();
    let eps = epsilon_bound(cfg.k, v_th);
    let expected_inputs = (cfg.fan_in * (cfg.t + 1)) as f64 * cfg.p;
    let o = format!("E(o_{})", cfg.t + 1);
    vec![
        TheoryCheck::upper_bound(
            format!("{prefix}{o} <= eps*E[sum o_i]"),
            eps * expected_inputs,
            rate,
            se,
        ),
        TheoryCheck::upper_bound(
            format!("{prefix}{o} <= D(u_{})/(2 V_th^2)", cfg.t + 1),
            predicted_variance(cfg) / (2.0 * v_th * v_th),
            rate,
            se,
        ),
    ]
}

fn check_v_th(v_th: f64) -> Result<()> {
    if !(v_th.is_finite() && v_th > 0.0) {
        return Err(Error::invalid(format!("v_th must be positive, got {v_th}")));
    }
    Ok(())
}

/// Simulates the neuron with threshold and reset (`V_reset = 0`) and checks
/// that its firing probability at step `t + 1` stays under
/// `ε·E[Σ_{i=0..t} o_i]`, and under the intermediate Chebyshev bound.
pub fn verify_theorem1(cfg: &LemmaConfig, v_th: f64) -> Result<TheoryReport> {
    cfg.validate()?;
    check_v_th(v_th)?;
    let config = json!({
        "lemma": cfg,
        "v_th": v_th,
        "epsilon": epsilon_bound(cfg.k, v_th),
    });
    Ok(TheoryReport::new(
        "theorem-firing-bound",
        config,
        checks_for(cfg, v_th, ""),
    ))
}

/// [`verify_theorem1`] over the grid `ks × ps`; each grid point reseeds from `cfg.seed`.
pub fn verify_theorem1_sweep(cfg: &LemmaConfig, v_th: f64, ks: &[f64], ps: &[f64]) -> Result<TheoryReport> {
    check_v_th(v_th)?;
    let mut checks = Vec::new();
    for &k in ks {
        for &p in ps {
            let c = LemmaConfig { k, p, ..*cfg };
            c.validate()?;
            checks.extend(checks_for(&c, v_th, &format!("k={k} p={p}: ")));
        }
    }
    let config = json!({ "lemma": cfg, "v_th": v_th, "k": ks, "p": ps });
    Ok(TheoryReport::new("theorem-firing-bound-sweep", config, checks))
}
