//! Layer-wise active fractions of random-init deep networks on Catch
//! observations, with and without pbLN, over ten seeds.
//!
//! cargo run --release --example firing_sweep -- [catch|gridview|natural]

use sdqn::envs::EnvKind;
use sdqn::qnet::Architecture;
use sdqn::theory::{compare_firing, firing_sweep, InputSource, SweepConfig};

fn main() -> sdqn::Result<()> {
    let source: InputSource = std::env::args().nth(1).as_deref().unwrap_or("catch").parse()?;
    let cfg = SweepConfig {
        arch: Architecture::desk_deep(EnvKind::Catch.make(0).n_actions()),
        source,
        n_seeds: 10,
        base_seed: 0,
        observations: 8,
    };
    let off = firing_sweep(&cfg, false)?;
    let on = firing_sweep(&cfg, true)?;
    println!("source {}", source.name());
    print!("{:<6}", "seed");
    for l in &on.layers {
        print!(" {:>16}", format!("{l} off/on"));
    }
    println!();
    for (i, seed) in on.seeds.iter().enumerate() {
        print!("{seed:<6}");
        for (a, b) in off.per_seed[i].iter().zip(&on.per_seed[i]) {
            print!(" {:>7.4}/{:<8.4}", a, b);
        }
        println!();
    }
    let report = compare_firing(&off, &on)?;
    for c in &report.checks {
        println!(
            "{} {} (need {}, got {})",
            if c.pass { "ok  " } else { "FAIL" },
            c.label,
            c.predicted,
            c.empirical
        );
    }
    Ok(())
}
