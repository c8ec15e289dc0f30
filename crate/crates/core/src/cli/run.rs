use std::path::{Component, Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use super::config::{Command, PbLnMode, RunConfig, RESOLVED_FILE};
use crate::error::{Error, Result};
use crate::qnet::{load_checkpoint, save_checkpoint};
use crate::rl::{evaluate, metrics_csv, train, TrainOutcome};
use crate::theory::{
    compare_firing, firing_sweep, verify_lemma1, verify_spike_moments, verify_theorem1_sweep, TheoryReport,
};

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// What a command produced.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunStatus {
    /// False when any verification report failed.
    pub pass: bool,
    pub artifacts: Vec<PathBuf>,
    /// Human-readable result lines.
    pub lines: Vec<String>,
}

/// Writes strictly inside the output directory.
struct OutDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutDir {
    fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root)
            .map_err(|e| Error::from(e).context(format!("output directory {}", root.display())))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn path(&self, rel: &str) -> Result<PathBuf> {
        let p = Path::new(rel);
        if !p.components().all(|c| matches!(c, Component::Normal(_))) {
            return Err(Error::invalid(format!("`{rel}` would leave the output directory")));
        }
        let full = self.root.join(p);
        if let Some(parent) = full.parent() {
            std::fs::create_dir_all(parent)?;
        }
        Ok(full)
    }

    fn write(&mut self, rel: &str, bytes: impl AsRef<[u8]>) -> Result<PathBuf> {
        let full = self.path(rel)?;
        std::fs::write(&full, bytes).map_err(|e| Error::from(e).context(format!("writing {}", full.display())))?;
        self.written.push(full.clone());
        Ok(full)
    }

    fn json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(rel, text)
    }
}

fn report_lines(r: &TheoryReport) -> Vec<String> {
    let mut out = vec![format!("{}: {}", r.name, if r.pass { "PASS" } else { "FAIL" })];
    for c in &r.checks {
        out.push(format!(
            "  {} {}: predicted {:.6e}, empirical {:.6e}, se {:.2e}",
            if c.pass { "ok  " } else { "FAIL" },
            c.label,
            c.predicted,
            c.empirical,
            c.standard_error
        ));
    }
    out
}

/// Executes the configured command and writes its artifacts under `cfg.out`.
pub fn run(cfg: &RunConfig) -> Result<RunStatus> {
    cfg.validate()?;
    let mut out = OutDir::create(&cfg.out)?;
    out.write(RESOLVED_FILE, cfg.resolved())?;
    let mut status = RunStatus {
        pass: true,
        ..RunStatus::default()
    };
    let ctx = cfg.command.name();
    match cfg.command {
        Command::Train => run_train(cfg, &mut out, &mut status).map_err(|e| e.context(ctx))?,
        Command::Eval => run_eval(cfg, &mut out, &mut status).map_err(|e| e.context(ctx))?,
        Command::VerifyLemma => {
            let r = verify_lemma1(&cfg.lemma()).map_err(|e| e.context(ctx))?;
            theory_output(&mut out, &mut status, "lemma.json", &[r])?;
        }
        Command::VerifyTheorem => {
            let t = &cfg.theory;
            let r = verify_theorem1_sweep(&cfg.lemma(), t.v_th, &t.sweep_k, &t.sweep_p).map_err(|e| e.context(ctx))?;
            theory_output(&mut out, &mut status, "theorem.json", &[r])?;
        }
        Command::VerifyMoments => {
            let trials = cfg.theory.lemma.trials;
            let reports = cfg
                .theory
                .moment_p
                .iter()
                .map(|&p| verify_spike_moments(p, trials, cfg.seed))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| e.context(ctx))?;
            theory_output(&mut out, &mut status, "moments.json", &reports)?;
        }
        Command::SweepFiring => run_sweep(cfg, &mut out, &mut status).map_err(|e| e.context(ctx))?,
    }
    status.artifacts = out.written;
    Ok(status)
}

fn theory_output(out: &mut OutDir, status: &mut RunStatus, file: &str, reports: &[TheoryReport]) -> Result<()> {
    for r in reports {
        status.pass &= r.pass;
        status.lines.extend(report_lines(r));
    }
    if reports.len() == 1 {
        out.json(file, &reports[0])?;
    } else {
        out.json(file, &reports)?;
    }
    Ok(())
}

fn arm_dir(mode: PbLnMode, pbln: bool) -> String {
    match mode {
        PbLnMode::Both => format!("pbln_{}/", if pbln { "on" } else { "off" }),
        _ => String::new(),
    }
}

fn run_train(cfg: &RunConfig, out: &mut OutDir, status: &mut RunStatus) -> Result<()> {
    let base = cfg.architecture();
    let mut finals = Vec::new();
    for pbln in cfg.pbln.arms() {
        let tc = cfg.train_config(pbln);
        let mut env = cfg.env.make(0);
        let TrainOutcome {
            arch,
            params,
            metrics,
            summary,
        } = train(&tc, &base, env.as_mut())?;
        let dir = arm_dir(cfg.pbln, pbln);
        out.write(&format!("{dir}{METRICS_FILE}"), metrics_csv(&metrics))?;
        let ckpt = out.path(&format!("{dir}{CHECKPOINT_FILE}"))?;
        save_checkpoint(&ckpt, &arch, &params)?;
        out.written.push(ckpt);
        out.json(
            &format!("{dir}{SUMMARY_FILE}"),
            &json!({ "env": cfg.env, "seed": cfg.seed, "pbln": pbln, "summary": summary }),
        )?;
        let final_mean = summary.final_eval.as_ref().map(|e| (e.mean, e.std));
        status.lines.push(match final_mean {
            Some((m, s)) => format!(
                "pbln {}: {} frames, {} updates, greedy return {m:.3} ± {s:.3}",
                if pbln { "on" } else { "off" },
                summary.frames,
                summary.updates
            ),
            None => format!("pbln {}: no frames trained", if pbln { "on" } else { "off" }),
        });
        finals.push((pbln, final_mean.map(|(m, _)| m)));
    }
    if cfg.pbln == PbLnMode::Both {
        out.json(
            "comparison.json",
            &json!({
                "seed": cfg.seed,
                "final_mean_return": {
                    "pbln_on": finals[0].1,
                    "pbln_off": finals[1].1,
                },
            }),
        )?;
    }
    Ok(())
}

fn run_eval(cfg: &RunConfig, out: &mut OutDir, status: &mut RunStatus) -> Result<()> {
    if cfg.pbln == PbLnMode::Both {
        return Err(Error::invalid("eval takes a single checkpoint; use --pbln on or off"));
    }
    let path = match &cfg.eval.checkpoint {
        Some(p) => p.clone(),
        None => cfg.out.join(CHECKPOINT_FILE),
    };
    let (arch, params) = load_checkpoint(&path).map_err(|e| e.context(format!("checkpoint {}", path.display())))?;
    let mut env = cfg.env.make(0);
    let result = evaluate(&params, &arch, env.as_mut(), cfg.eval.episodes, cfg.seed)?;
    status.lines.push(format!(
        "{} episodes: return {:.3} ± {:.3}",
        cfg.eval.episodes, result.mean, result.std
    ));
    out.json(
        "eval.json",
        &json!({
            "env": cfg.env,
            "seed": cfg.seed,
            "checkpoint": path.display().to_string(),
            "result": result,
        }),
    )?;
    Ok(())
}

fn run_sweep(cfg: &RunConfig, out: &mut OutDir, status: &mut RunStatus) -> Result<()> {
    let sc = cfg.sweep_config();
    let mut sweeps = Vec::new();
    for pbln in cfg.pbln.arms() {
        let s = firing_sweep(&sc, pbln)?;
        let tag = if pbln { "on" } else { "off" };
        let means: Vec<String> = s
            .layers
            .iter()
            .zip(&s.mean)
            .map(|(l, m)| format!("{l} {m:.4}"))
            .collect();
        status
            .lines
            .push(format!("pbln {tag}: mean active fraction {}", means.join(", ")));
        out.json(&format!("firing_pbln_{tag}.json"), &s)?;
        sweeps.push(s);
    }
    if let [on, off] = &sweeps[..] {
        let r = compare_firing(off, on)?;
        status.pass &= r.pass;
        status.lines.extend(report_lines(&r));
        out.json("firing_contrast.json", &r)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::config::Overrides;
    use crate::cli::resolve;

    #[test]
    fn escaping_paths_are_refused() {
        let dir = tempfile::tempdir().unwrap();
        let out = OutDir::create(dir.path()).unwrap();
        assert!(out.path("../x").is_err());
        assert!(out.path("/tmp/x").is_err());
        assert!(out.path("a/b.json").is_ok());
    }

    #[test]
    fn verify_moments_writes_a_report() {
        let dir = tempfile::tempdir().unwrap();
        let flags = Overrides {
            out: Some(dir.path().join("m")),
            set: vec!["theory.trials=20000".into()],
            ..Overrides::default()
        };
        let cfg = resolve(Command::VerifyMoments, &flags, None).unwrap();
        let s = run(&cfg).unwrap();
        assert!(s.pass);
        let names: Vec<_> = s.artifacts.iter().map(|p| p.file_name().unwrap().to_owned()).collect();
        assert_eq!(names, ["config.resolved", "moments.json"]);
        assert!(s.artifacts.iter().all(|p| p.starts_with(dir.path())));
    }
}
