use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use aerogh_vision::augment::augment;
use aerogh_vision::imaging::{load_dataset, save_dataset};
use aerogh_vision::split::DEFAULT_RATIOS;
use aerogh_vision::synth::synthesize_dataset;
use aerogh_vision::train::train_on;
use aerogh_vision::{evaluate, split, Architecture, ClassifierModel, EvalReport, LabeledImage, TrainConfig};

use crate::fail::{CliResult, Failure};

/// Where images come from: a `<class>/<image>` directory tree, or
/// `synthetic:N` for N generated leaves per class.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Dir(PathBuf),
    Synthetic(usize),
}

impl FromStr for DataSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.strip_prefix("synthetic:") {
            Some(n) => match n.parse::<usize>() {
                Ok(n) if n > 0 => Ok(Self::Synthetic(n)),
                _ => Err(format!("synthetic:N needs a positive count, got {n:?}")),
            },
            None => Ok(Self::Dir(PathBuf::from(s))),
        }
    }
}

impl DataSource {
    fn load(&self, seed: u64) -> CliResult<Vec<LabeledImage>> {
        let images = match self {
            Self::Dir(p) => load_dataset(p)?,
            Self::Synthetic(n) => synthesize_dataset(*n, seed),
        };
        if images.is_empty() {
            return Err(Failure::validation(anyhow::anyhow!("dataset is empty")));
        }
        Ok(images)
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> CliResult {
    let text = serde_json::to_string_pretty(value).map_err(Failure::runtime)?;
    fs::write(path, text + "\n").map_err(|e| Failure::runtime(e).context(format!("writing {}", path.display())))
}

pub fn synth(out: &Path, per_class: usize, seed: u64, format: &str) -> CliResult {
    if per_class == 0 {
        return Err(Failure::validation(anyhow::anyhow!("--per-class must be >= 1")));
    }
    if !matches!(format, "ppm" | "png") {
        return Err(Failure::validation(anyhow::anyhow!("--format must be ppm or png")));
    }
    let images = synthesize_dataset(per_class, seed);
    save_dataset(out, &images, format).map_err(Failure::runtime)?;
    println!("wrote {} images to {}", images.len(), out.display());
    Ok(())
}

pub struct TrainArgs {
    pub data: DataSource,
    pub model: PathBuf,
    pub report: Option<PathBuf>,
    pub augment_to: Option<usize>,
    pub config: TrainConfig,
}

pub fn train(args: TrainArgs) -> CliResult {
    let seed = args.config.seed;
    args.config.validate()?;
    let images = args.data.load(seed)?;
    let parts = split(&images, DEFAULT_RATIOS, seed)?;
    let c = parts.counts();
    println!("split train {} / val {} / test {}", c.train, c.val, c.test);
    // only the training part is augmented, so no copy of a test leaf is seen
    let train_set = match args.augment_to {
        Some(n) => augment(&parts.train, n, seed)?,
        None => parts.train.clone(),
    };
    if train_set.len() != parts.train.len() {
        println!("augmented training set to {}", train_set.len());
    }
    let first = &train_set[0];
    let arch = Architecture { input_width: first.width, input_height: first.height, ..Architecture::default() };
    let mut model = ClassifierModel::new(arch, seed)?;
    let history = train_on(&mut model, &train_set, &parts.val, &args.config)?;
    model.save(&args.model).map_err(|e| Failure::runtime(e).context(format!("saving {}", args.model.display())))?;
    let mut report = evaluate(&model, &parts.test)?;
    report.train_curve = history.train_curve;
    report.val_curve = history.val_curve;
    println!("{}", report.render());
    println!("model {}", args.model.display());
    if let Some(path) = &args.report {
        write_json(path, &report)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Subset {
    /// The test part of the same seeded split `train` used.
    Test,
    All,
}

pub fn eval(model: &Path, data: &DataSource, subset: Subset, seed: u64, report_path: Option<&Path>) -> CliResult<EvalReport> {
    let model = ClassifierModel::load(model).map_err(|e| Failure::from(e).context(format!("loading model {}", model.display())))?;
    let images = data.load(seed)?;
    let images = match subset {
        Subset::Test => split(&images, DEFAULT_RATIOS, seed)?.test,
        Subset::All => images,
    };
    let report = evaluate(&model, &images)?;
    println!("{}", report.render());
    if let Some(path) = report_path {
        write_json(path, &report)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn data_source_forms() {
        assert_eq!("synthetic:400".parse(), Ok(DataSource::Synthetic(400)));
        assert_eq!("leaves/".parse(), Ok(DataSource::Dir(PathBuf::from("leaves/"))));
        assert!("synthetic:0".parse::<DataSource>().is_err());
        assert!("synthetic:many".parse::<DataSource>().is_err());
    }
}
