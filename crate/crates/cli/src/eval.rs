use serde::Serialize;
use wildreid::metrics::{random_baseline_map_at_r, BaselineSummary};
use wildreid::nn::{embed, load_model};
use wildreid::{map_at_r, Averaging, MetricsReport};

use crate::config::{DataConfig, EvalConfig};
use crate::data::{load, Part};
use crate::error::{CliError, ExitCode, Stage};
use crate::report::{hash_file, OutDir};
use crate::{Common, Resolved};

#[derive(Serialize)]
struct EvalResult {
    n_samples: usize,
    n_classes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    per_class: Option<MetricsReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    global: Option<MetricsReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    random_baseline: Option<BaselineSummary>,
}

pub fn run(common: &Common, seed: u64, data_cfg: &DataConfig, cfg: &EvalConfig) -> Result<(), CliError> {
    let mut out = OutDir::create(&common.out)?;
    let data = load(data_cfg, Part::Test, &mut out)?;
    if data.len() < 2 {
        return Err(CliError::new(
            ExitCode::Evaluation,
            format!("evaluation needs at least 2 samples, found {}", data.len()),
        ));
    }
    if cfg.model.is_none() && cfg.random_baseline == 0 {
        return Err(CliError::new(
            ExitCode::Evaluation,
            "nothing to evaluate: pass --model and/or --random-baseline",
        ));
    }
    let mut classes = data.labels.clone();
    classes.sort_unstable();
    classes.dedup();

    let (mut per_class, mut global) = (None, None);
    if let Some(path) = &cfg.model {
        out.input("model", hash_file(path, ExitCode::Ingestion)?);
        let model = load_model(path).stage(ExitCode::Ingestion)?;
        let emb = embed(&model, &data.x, &data.labels).stage(ExitCode::Evaluation)?;
        let pc = map_at_r(&emb, Averaging::PerClass).stage(ExitCode::Evaluation)?;
        let gl = map_at_r(&emb, Averaging::Global).stage(ExitCode::Evaluation)?;
        println!(
            "MAP@R {:.4} (per-class) {:.4} (global); R-precision {:.4}; P@1 {:.4}",
            pc.map_at_r, gl.map_at_r, pc.r_precision, pc.precision_at_1
        );
        per_class = Some(pc);
        global = Some(gl);
    }
    let random_baseline = if cfg.random_baseline > 0 {
        let b = random_baseline_map_at_r(
            &data,
            &cfg.baseline_hidden,
            cfg.random_baseline,
            seed,
            Averaging::PerClass,
        )
        .stage(ExitCode::Evaluation)?;
        println!(
            "untrained baseline MAP@R {:.4} (min {:.4}, max {:.4}) over {} seeds",
            b.mean,
            b.min,
            b.max,
            b.seeds.len()
        );
        Some(b)
    } else {
        None
    };

    let result = EvalResult {
        n_samples: data.len(),
        n_classes: classes.len(),
        per_class,
        global,
        random_baseline,
    };
    out.finish(
        "eval",
        seed,
        &Resolved {
            data: Some(data_cfg),
            settings: cfg,
        },
        &result,
    )?;
    Ok(())
}
