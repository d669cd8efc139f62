//! Experiment command registry. Each experiment implements [`Command`] and
//! is selected by name from the CLI; configs carry the same names.

mod curve;
mod gp_ntk;
mod mnist;
mod normality;
mod sample;
mod srank_gaussian;
mod toy_training;

pub use curve::CurveCommand;
pub use gp_ntk::GpNtkCommand;
pub use mnist::MnistCommand;
pub use normality::NormalityCommand;
pub use sample::SampleCommand;
pub use srank_gaussian::SrankGaussianCommand;
pub use toy_training::ToyTrainingCommand;

use crate::{io_config_err, CliError};
use std::io::Write;
use std::path::{Path, PathBuf};

pub struct RunContext {
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl RunContext {
    pub fn new(seed: u64, out_dir: PathBuf) -> Result<Self, CliError> {
        std::fs::create_dir_all(&out_dir).map_err(io_config_err)?;
        Ok(RunContext { seed, out_dir })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

pub trait Command: Sync {
    fn name(&self) -> &'static str;
    fn about(&self) -> &'static str;
    fn run(&self, ctx: &RunContext, params: &serde_json::Value) -> Result<(), CliError>;
}

pub static SRANK_GAUSSIAN: SrankGaussianCommand = SrankGaussianCommand;
pub static NORMALITY: NormalityCommand = NormalityCommand;
pub static GP_NTK: GpNtkCommand = GpNtkCommand;
pub static CURVE: CurveCommand = CurveCommand;
pub static TOY_TRAINING: ToyTrainingCommand = ToyTrainingCommand;
pub static MNIST: MnistCommand = MnistCommand;
pub static SAMPLE: SampleCommand = SampleCommand;

/// All registered experiment commands.
pub static COMMANDS: [&'static dyn Command; 7] = [
    &SRANK_GAUSSIAN,
    &NORMALITY,
    &GP_NTK,
    &CURVE,
    &TOY_TRAINING,
    &MNIST,
    &SAMPLE,
];

pub fn lookup(name: &str) -> Option<&'static dyn Command> {
    COMMANDS.iter().copied().find(|c| c.name() == name)
}

/// Write a CSV file with a declared header; the float formatting is the
/// shortest round-trip form, so reruns are byte-identical.
pub fn write_csv(path: &Path, header: &str, lines: &[String]) -> Result<(), CliError> {
    let mut f =
        std::io::BufWriter::new(std::fs::File::create(path).map_err(io_config_err)?);
    writeln!(f, "{header}").map_err(io_config_err)?;
    for line in lines {
        writeln!(f, "{line}").map_err(io_config_err)?;
    }
    f.flush().map_err(io_config_err)?;
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Config(format!("serializing {}: {e}", path.display())))?;
    std::fs::write(path, text + "\n").map_err(io_config_err)
}

/// Declared header schemas of every CSV an experiment can emit; the schema
/// test checks emitted files against this table. Snapshot files with
/// width-dependent coordinate columns declare their fixed prefix.
pub fn csv_schemas() -> Vec<(&'static str, &'static str)> {
    vec![
        ("srank_gaussian.csv", srank_gaussian::SUMMARY_HEADER),
        ("srank_gaussian_draws.csv", srank_gaussian::DRAWS_HEADER),
        ("normality_summary.csv", normality::SUMMARY_HEADER),
        ("normality_qq_left.csv", normality::QQ_HEADER),
        ("normality_qq_right.csv", normality::QQ_HEADER),
        ("normality_qq_simultaneous.csv", normality::QQ_HEADER),
        ("normality_width_comparison.csv", normality::COMPARISON_HEADER),
        ("gp_pairs.csv", gp_ntk::GP_PAIRS_HEADER),
        ("ntk_pairs.csv", gp_ntk::NTK_PAIRS_HEADER),
        ("ntk_drift.csv", gp_ntk::DRIFT_HEADER),
        ("curve_lengths.csv", curve::LENGTHS_HEADER),
        ("curve_theory.csv", curve::THEORY_HEADER),
        ("toy_training.csv", toy_training::HISTORY_HEADER),
        ("mnist_noise_fit.csv", mnist::NOISE_HEADER),
        ("mnist_regularization.csv", mnist::REGULARIZATION_HEADER),
    ]
}
