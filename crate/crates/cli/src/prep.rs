use serde::Serialize;
use wildreid::dataio::{class_disjoint_split, load_manifest, SplitSpec};

use crate::config::PrepConfig;
use crate::error::{CliError, ExitCode, Stage};
use crate::report::{hash_files, OutDir};
use crate::{Common, Resolved};

#[derive(Serialize)]
struct PrepResult {
    n_classes: usize,
    n_images: usize,
    skipped: usize,
    class_names: Vec<String>,
    class_counts: Vec<usize>,
    split: SplitSpec,
    train_images: usize,
    test_images: usize,
}

pub fn run(common: &Common, seed: u64, cfg: &PrepConfig) -> Result<(), CliError> {
    let root = cfg
        .root
        .as_deref()
        .ok_or_else(|| CliError::new(ExitCode::Ingestion, "prep needs --root (or [prep] root)"))?;
    let manifest = load_manifest(root).stage(ExitCode::Ingestion)?;
    let n = manifest.n_classes();
    let split = if cfg.test_classes == 0 {
        SplitSpec {
            seed,
            train_classes: (0..n).collect(),
            test_classes: Vec::new(),
        }
    } else {
        class_disjoint_split(n, cfg.test_classes, seed).stage(ExitCode::Ingestion)?
    };

    let mut out = OutDir::create(&common.out)?;
    out.input(
        "images",
        hash_files(manifest.records.iter().map(|r| r.path.as_path()), ExitCode::Ingestion)?,
    );
    manifest
        .write_csv(&out.path("manifest.csv"))
        .stage(ExitCode::Other)?;
    out.record("manifest.csv")?;
    let split_json = serde_json::to_string_pretty(&split)
        .map_err(|e| CliError::new(ExitCode::Other, format!("serialising split: {e}")))?;
    out.write("split.json", format!("{split_json}\n").as_bytes())?;

    let counts = manifest.class_counts();
    let test_images: usize = split.test_classes.iter().map(|&c| counts[c]).sum();
    let result = PrepResult {
        n_classes: n,
        n_images: manifest.records.len(),
        skipped: manifest.skipped,
        class_names: manifest.class_names.clone(),
        class_counts: counts,
        train_images: manifest.records.len() - test_images,
        test_images,
        split,
    };
    println!(
        "{} classes, {} images ({} skipped); {} train / {} test classes",
        result.n_classes,
        result.n_images,
        result.skipped,
        result.split.train_classes.len(),
        result.split.test_classes.len()
    );
    out.finish("prep", seed, &Resolved { data: None, settings: cfg }, &result)?;
    Ok(())
}
