//! Saves a network to disk, loads it back, and checks the restored network
//! gives bitwise-identical Q-values.
//!
//! cargo run --example checkpoint_roundtrip

use sdqn::envs::{EnvKind, FrameStack};
use sdqn::qnet::{init_params, load_checkpoint, q_values, save_checkpoint, Architecture};

fn main() -> sdqn::Result<()> {
    let mut env = EnvKind::Catch.make(4);
    let arch = Architecture::desk_small(env.n_actions());
    let params = init_params(&arch, 4)?;
    let dir = std::env::temp_dir().join("sdqn-checkpoint-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("model.ckpt");
    save_checkpoint(&path, &arch, &params)?;
    println!("wrote {} ({} bytes)", path.display(), std::fs::metadata(&path)?.len());

    let (arch2, params2) = load_checkpoint(&path)?;
    assert_eq!(arch, arch2);
    let obs = FrameStack::new(arch.input_shape[0])?.reset(env.reset())?.to_tensor();
    let q = q_values(&obs, &params, &arch)?;
    let q2 = q_values(&obs, &params2, &arch2)?;
    println!("Q before {:?}", q.data());
    println!("Q after  {:?}", q2.data());
    println!("identical: {}", q == q2 && params == params2);
    std::fs::remove_file(&path)?;
    Ok(())
}
