use serde::Serialize;

use super::config::{BaseKind, GenConfig, GenKind};
use super::record::{write_json, ResultRecord};
use super::{Context, EXIT_OK};
use crate::dataset::{
    generate_cube_base, generate_figure1_with, generate_planted, generate_simplex_base, write_csv,
    LabeledDataset, PlantedBase, PlantedModel,
};
use crate::error::Result;
use crate::spectral::SymMatrix;

#[derive(Serialize)]
struct GenSummary {
    file: String,
    n: usize,
    d: usize,
    k: usize,
    projection_file: Option<String>,
}

pub(crate) fn cmd_gen(ctx: &Context, cfg: GenConfig) -> Result<i32> {
    let (ds, pi): (LabeledDataset, Option<SymMatrix>) = match cfg.kind {
        GenKind::TwoPoint => (
            LabeledDataset::from_rows(&[vec![1.0, 0.0], vec![-1.0, 0.0]], vec![1, 2])?,
            None,
        ),
        GenKind::Simplex => (generate_simplex_base(cfg.r, cfg.d)?, None),
        GenKind::Cube => (generate_cube_base(cfg.r, cfg.d)?, None),
        GenKind::Planted => {
            let base = match cfg.base {
                BaseKind::Simplex => PlantedBase::Simplex,
                BaseKind::Cube => PlantedBase::Cube,
            };
            let model = PlantedModel::new(base, cfg.d, cfg.r, cfg.b, cfg.sigma)?;
            let (ds, pi) = generate_planted(&model, ctx.seed)?;
            (ds, Some(pi))
        }
        GenKind::Figure1 => {
            let fig = generate_figure1_with(cfg.figure1, ctx.seed)?;
            (fig.dataset, Some(fig.pi))
        }
    };
    let stem = cfg.name.clone().unwrap_or_else(|| {
        serde_json::to_value(cfg.kind)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_else(|| "data".into())
    });
    let file = format!("{stem}.csv");
    write_csv(&ds, ctx.out_path(&file))?;
    let projection_file = match &pi {
        Some(pi) => {
            let name = format!("{stem}_pi.json");
            write_json(&ctx.out_path(&name), pi)?;
            Some(name)
        }
        None => None,
    };
    println!(
        "wrote {} ({} points, d = {})",
        ctx.out_path(&file).display(),
        ds.n(),
        ds.d()
    );
    let mut record = ResultRecord::new("gen", ctx.seed, &cfg)?;
    record.push_trial(&GenSummary {
        file,
        n: ds.n(),
        d: ds.d(),
        k: ds.k(),
        projection_file,
    })?;
    ctx.finish(record)?;
    Ok(EXIT_OK)
}
