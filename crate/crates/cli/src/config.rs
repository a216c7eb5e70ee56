//! Settings resolution: command-line flags override the TOML file, which
//! overrides the built-in defaults.

use std::path::Path;

use clap::Args;
use mnselect::experiments::ExperimentConfig;
use mnselect::{CriterionParams, NmfParams, SearchParams};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub refine: Option<bool>,
    #[serde(default)]
    pub criterion: CriterionSection,
    #[serde(default)]
    pub nmf: NmfSection,
    #[serde(default)]
    pub search: SearchSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriterionSection {
    pub s: Option<f64>,
    pub gamma: Option<f64>,
    pub q: Option<f64>,
    pub tau: Option<f64>,
    pub near_tie: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NmfSection {
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
    pub restarts: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSection {
    pub max_sweeps: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub kmin: Option<usize>,
    pub kmax: Option<usize>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Input(format!("config {}: {e}", path.display())))
    }
}

/// Flags shared by every subcommand that runs the selection pipeline.
#[derive(Debug, Clone, Default, Args)]
pub struct PipelineArgs {
    /// TOML file with defaults for any of these settings.
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Penalty exponent on the cluster trial totals.
    #[arg(long)]
    pub s: Option<f64>,
    /// Penalty scale.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Lq exponent in (0, 1]; 1 is maximum likelihood.
    #[arg(long)]
    pub q: Option<f64>,
    /// Relative threshold below which a prototype entry counts as zero.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Relative slack under which the smaller K wins.
    #[arg(long = "near-tie")]
    pub near_tie: Option<f64>,
    #[arg(long = "max-iters")]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Random starts beyond the first.
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long = "max-sweeps")]
    pub max_sweeps: Option<usize>,
    /// Skip the label search; score the NMF assignment directly.
    #[arg(long = "no-refine")]
    pub no_refine: bool,
}

/// Fully resolved settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolved {
    pub experiment: ExperimentConfig,
    pub reps: Option<usize>,
    pub kmin: Option<usize>,
    pub kmax: Option<usize>,
}

fn pick<T: Copy>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

impl PipelineArgs {
    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let file = FileConfig::load(self.config.as_deref())?;
        let dc = CriterionParams::default();
        let criterion = CriterionParams {
            s: pick(self.s, file.criterion.s, dc.s),
            gamma: pick(self.gamma, file.criterion.gamma, dc.gamma),
            q: pick(self.q, file.criterion.q, dc.q),
            zero_threshold: pick(self.tau, file.criterion.tau, dc.zero_threshold),
            near_tie_rel: pick(self.near_tie, file.criterion.near_tie, dc.near_tie_rel),
        };
        let seed = pick(self.seed, file.seed, 0);
        let dn = NmfParams::default();
        let nmf = NmfParams {
            max_iters: pick(self.max_iters, file.nmf.max_iters, dn.max_iters),
            tol: pick(self.tol, file.nmf.tol, dn.tol),
            restarts: pick(self.restarts, file.nmf.restarts, dn.restarts),
            seed,
        };
        let ds = SearchParams::default();
        let search = SearchParams {
            q: criterion.q,
            max_sweeps: pick(self.max_sweeps, file.search.max_sweeps, ds.max_sweeps),
            seed,
        };
        let refine = if self.no_refine { false } else { file.refine.unwrap_or(true) };
        criterion.validate().map_err(CliError::from)?;
        nmf.validate().map_err(CliError::from)?;
        search.validate().map_err(CliError::from)?;
        Ok(Resolved {
            experiment: ExperimentConfig { criterion, nmf, search, refine, seed },
            reps: file.reps,
            kmin: file.sweep.kmin,
            kmax: file.sweep.kmax,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_config(name: &str, body: &str) -> std::path::PathBuf {
        let path = std::env::temp_dir().join(format!("mnselect-config-{}-{name}.toml", std::process::id()));
        std::fs::write(&path, body).unwrap();
        path
    }

    #[test]
    fn defaults_without_file_or_flags() {
        let r = PipelineArgs::default().resolve().unwrap();
        assert_eq!(r.experiment.criterion, CriterionParams::default());
        assert!(r.experiment.refine);
        assert_eq!(r.experiment.seed, 0);
    }

    #[test]
    fn flags_override_file_override_defaults() {
        let path = write_config("precedence", "seed = 5\nrefine = false\n[criterion]\ns = 0.5\ngamma = 3.0\n[nmf]\nrestarts = 1\n");
        let args = PipelineArgs { config: Some(path.clone()), gamma: Some(2.0), ..Default::default() };
        let r = args.resolve().unwrap();
        std::fs::remove_file(path).ok();
        assert_eq!(r.experiment.criterion.s, 0.5);
        assert_eq!(r.experiment.criterion.gamma, 2.0);
        assert_eq!(r.experiment.criterion.q, 1.0);
        assert_eq!(r.experiment.nmf.restarts, 1);
        assert_eq!(r.experiment.seed, 5);
        assert!(!r.experiment.refine);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_input_errors() {
        let path = write_config("unknown", "[criterion]\nsigma = 1\n");
        let err = PipelineArgs { config: Some(path.clone()), ..Default::default() }.resolve().unwrap_err();
        std::fs::remove_file(path).ok();
        assert!(matches!(err, CliError::Input(_)));
        let err = PipelineArgs { q: Some(1.5), ..Default::default() }.resolve().unwrap_err();
        assert!(matches!(err, CliError::Input(_)));
    }
}
