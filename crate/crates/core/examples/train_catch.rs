//! Trains the spiking Q network on Catch and reports the greedy return.
//!
//! cargo run --release --example train_catch -- [frames] [on|off] [seed]

use std::time::Instant;

use sdqn::envs::{Catch, CatchSpec};
use sdqn::qnet::Architecture;
use sdqn::rl::{TrainConfig, Trainer};

fn main() -> sdqn::Result<()> {
    let mut args = std::env::args().skip(1);
    let frames: usize = args
        .next()
        .map_or(Ok(50_000), |s| s.parse())
        .expect("frames must be an integer");
    let pbln = args.next().is_none_or(|s| s != "off");
    let seed: u64 = args
        .next()
        .map_or(Ok(0), |s| s.parse())
        .expect("seed must be an integer");
    let cfg = TrainConfig {
        frames,
        pbln,
        seed,
        stop_return: Some(0.9),
        ..TrainConfig::default()
    };
    let mut env = Catch::new(CatchSpec::default(), 0);
    let mut trainer = Trainer::new(cfg, &Architecture::desk_small(3), &mut env)?;
    let start = Instant::now();
    let mut shown = 0;
    println!(
        "{:>7} {:>6} {:>8} {:>9} {:>6} {:>22}",
        "frame", "ep", "return", "loss", "eps", "fire conv1/conv2/fc"
    );
    while !trainer.is_finished() {
        trainer.step()?;
        if trainer.metrics().len() > shown {
            shown = trainer.metrics().len();
            let r = trainer.metrics().last().expect("row just logged");
            let f = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
            println!(
                "{:>7} {:>6} {:>8} {:>9} {:>6.3} {:>22}",
                r.frame,
                r.episode,
                f(r.episode_return),
                f(r.loss),
                r.epsilon,
                format!(
                    "{}/{}/{}",
                    f(r.fire_frac_conv[0]),
                    f(r.fire_frac_conv[1]),
                    f(r.fire_frac_fc)
                )
            );
        }
    }
    let out = trainer.run()?;
    for e in &out.summary.evals {
        println!("eval at frame {}: {:.3} ± {:.3}", e.frame, e.result.mean, e.result.std);
    }
    if let Some(e) = &out.summary.final_eval {
        println!(
            "greedy return {:.3} ± {:.3} after {} frames",
            e.mean, e.std, out.summary.frames
        );
    }
    println!("wall time {:.0} s", start.elapsed().as_secs_f64());
    Ok(())
}
