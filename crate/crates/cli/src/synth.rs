use serde::Serialize;
use wildreid::dataio::write_features_csv;
use wildreid::synth::{blob_images, gaussian_clusters, sign_pattern, write_image_tree};

use crate::config::{SynthConfig, SynthKind};
use crate::error::{CliError, ExitCode, Stage};
use crate::report::{hash_files, OutDir};
use crate::{Common, Resolved};

#[derive(Serialize)]
struct SynthResult {
    kind: SynthKind,
    n_samples: usize,
    n_classes: usize,
    dim: usize,
}

pub fn run(common: &Common, seed: u64, cfg: &SynthConfig) -> Result<(), CliError> {
    let mut out = OutDir::create(&common.out)?;
    let result = match cfg.kind {
        SynthKind::Blobs => {
            let images = blob_images(&cfg.blobs, seed).stage(ExitCode::Other)?;
            let root = out.path("images");
            write_image_tree(&root, &images).stage(ExitCode::Other)?;
            let paths: Vec<_> = images
                .iter()
                .enumerate()
                .map(|(i, (_, label))| root.join(format!("class_{label:02}")).join(format!("img_{i:04}.pgm")))
                .collect();
            let digest = hash_files(paths.iter().map(|p| p.as_path()), ExitCode::Other)?;
            out.provenance.outputs.insert("images".into(), digest);
            let dim = images.first().map_or(0, |(r, _)| r.width * r.height);
            SynthResult {
                kind: cfg.kind,
                n_samples: images.len(),
                n_classes: cfg.blobs.n_classes,
                dim,
            }
        }
        SynthKind::SignPattern | SynthKind::DuplicateClusters => {
            let data = if cfg.kind == SynthKind::SignPattern {
                sign_pattern(&cfg.sign_pattern, seed)
            } else {
                gaussian_clusters(&cfg.duplicate_clusters, seed)
            }
            .stage(ExitCode::Other)?;
            write_features_csv(&out.path("features.csv"), &data).stage(ExitCode::Other)?;
            out.record("features.csv")?;
            SynthResult {
                kind: cfg.kind,
                n_samples: data.len(),
                n_classes: data.n_classes(),
                dim: data.dim(),
            }
        }
    };
    println!(
        "{} samples, {} classes, {} dimensions",
        result.n_samples, result.n_classes, result.dim
    );
    out.finish("synth", seed, &Resolved { data: None, settings: cfg }, &result)?;
    Ok(())
}
