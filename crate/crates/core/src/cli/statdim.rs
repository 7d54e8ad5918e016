use serde::Serialize;

use super::config::{ConeKind, StatdimConfig};
use super::plot::{write_figure, Figure, Series, Style};
use super::record::{trial_seed, write_table, ResultRecord};
use super::{Context, EXIT_OK};
use crate::analysis::{estimate_stat_dim, ConeSpec, StatDimEstimate};
use crate::error::{Error, Result};

#[derive(Serialize)]
struct StatdimRow {
    n: usize,
    #[serde(flatten)]
    estimate: StatDimEstimate,
    ratio: f64,
}

pub(crate) fn cmd_statdim(ctx: &Context, cfg: StatdimConfig) -> Result<i32> {
    if cfg.n.is_empty() {
        return Err(Error::invalid("no dimensions given"));
    }
    let mut record = ResultRecord::new("statdim", ctx.seed, &cfg)?;
    let mut table = Vec::new();
    let mut curve = Vec::new();
    for (k, &n) in cfg.n.iter().enumerate() {
        let cone = match cfg.cone {
            ConeKind::Orthant => ConeSpec::Orthant { n },
            ConeKind::Capped => ConeSpec::Capped { n, c1: cfg.c1 },
            ConeKind::Full => ConeSpec::Full { n },
        };
        let est = estimate_stat_dim(cone, cfg.trials, trial_seed(ctx.seed, k as u64))?;
        let ratio = est.estimate / n as f64;
        println!(
            "n = {n}: {:.4} ± {:.4} (ratio {:.4}){}",
            est.estimate,
            est.stderr,
            ratio,
            if est.reliable {
                ""
            } else {
                ", some projections hit the cycle cap"
            }
        );
        table.push(vec![
            n.to_string(),
            format!("{:?}", est.estimate),
            format!("{:?}", est.stderr),
            format!("{ratio:?}"),
            est.reliable.to_string(),
        ]);
        curve.push((n as f64, ratio));
        record.push_trial(&StatdimRow {
            n,
            estimate: est,
            ratio,
        })?;
    }
    write_table(
        &ctx.out_path("table.csv"),
        &["n", "estimate", "stderr", "ratio", "reliable"],
        &table,
    )?;
    if curve.len() > 1 {
        write_figure(
            &ctx.out,
            "statdim",
            &Figure {
                title: "statistical dimension",
                x_label: "n",
                y_label: "estimate / n",
                style: Style::Line,
                series: vec![Series {
                    name: "estimate / n".into(),
                    points: curve,
                }],
            },
        )?;
    }
    ctx.finish(record)?;
    Ok(EXIT_OK)
}
