//! Loading samples for a command from a manifest or a feature CSV.

use std::path::Path;

use wildreid::dataio::{load_features_csv, DatasetManifest, SplitSpec};
use wildreid::Dataset;

use crate::config::DataConfig;
use crate::error::{CliError, ExitCode, Stage};
use crate::report::{hash_file, hash_files, OutDir};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Train,
    Test,
    All,
}

pub fn read_split(path: &Path) -> Result<SplitSpec, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::new(ExitCode::Ingestion, format!("reading split {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::new(ExitCode::Ingestion, format!("split {}: {e}", path.display())))
}

/// Loads the requested part, recording input hashes in `out`. Labels keep
/// their original class ids. Without a split file every part is the full
/// data set.
pub fn load(cfg: &DataConfig, part: Part, out: &mut OutDir) -> Result<Dataset, CliError> {
    let split = match &cfg.split {
        Some(p) if part != Part::All => {
            out.input("split", hash_file(p, ExitCode::Ingestion)?);
            Some(read_split(p)?)
        }
        _ => None,
    };
    let classes = split.as_ref().map(|s| match part {
        Part::Test => s.test_classes.clone(),
        _ => s.train_classes.clone(),
    });
    match (&cfg.features, &cfg.manifest) {
        (Some(features), None) => {
            out.input("features", hash_file(features, ExitCode::Ingestion)?);
            let data = load_features_csv(features).stage(ExitCode::Ingestion)?;
            Ok(match classes {
                Some(c) => data.filter_classes(&c),
                None => data,
            })
        }
        (None, Some(manifest)) => {
            out.input("manifest", hash_file(manifest, ExitCode::Ingestion)?);
            let m = DatasetManifest::read_csv(manifest).stage(ExitCode::Ingestion)?;
            let wanted: Vec<_> = m
                .records
                .iter()
                .filter(|r| classes.as_ref().is_none_or(|c| c.contains(&r.class_id)))
                .map(|r| r.path.as_path())
                .collect();
            out.input("images", hash_files(wanted, ExitCode::Ingestion)?);
            let samples = m.load_samples(classes.as_deref(), cfg.range).stage(ExitCode::Ingestion)?;
            if samples.is_empty() {
                return Ok(Dataset {
                    x: wildreid::Matrix::zeros(0, wildreid::dataio::IMAGE_PIXELS),
                    labels: Vec::new(),
                });
            }
            Dataset::from_samples(&samples).stage(ExitCode::Ingestion)
        }
        (Some(_), Some(_)) => Err(CliError::new(
            ExitCode::Ingestion,
            "give either a manifest or a feature file, not both",
        )),
        (None, None) => Err(CliError::new(
            ExitCode::Ingestion,
            "no data source: pass --manifest or --features (or set them under [data])",
        )),
    }
}
