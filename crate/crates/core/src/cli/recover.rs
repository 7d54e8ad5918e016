use rayon::prelude::*;
use serde::Serialize;

use super::config::{BaseKind, RecoverConfig, RecoverPreset};
use super::plot::{write_figure, Figure, Series, Style};
use super::record::{trial_seed, write_table, ResultRecord};
use super::{squeeze_config, Context, EXIT_OK};
use crate::analysis::{
    figure1_trial, planted_lambda, planted_trial, sigma_sq_for_snr, snr, Figure1Trial, PlantedTrial,
};
use crate::baselines::pca;
use crate::dataset::{generate_figure1_with, PlantedBase, PlantedModel};
use crate::error::{Error, Result};
use crate::solver::Mode;
use crate::spectral::eig_sym;

#[derive(Serialize)]
struct PlantedRow {
    /// `null` for noiseless runs.
    snr: Option<f64>,
    sigma: f64,
    trial: usize,
    #[serde(flatten)]
    result: PlantedTrial,
}

pub(crate) fn cmd_recover(ctx: &Context, cfg: RecoverConfig) -> Result<i32> {
    if cfg.trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    match cfg.preset {
        RecoverPreset::Planted => planted(ctx, cfg),
        RecoverPreset::Figure1 => figure1(ctx, cfg),
    }
}

fn planted(ctx: &Context, cfg: RecoverConfig) -> Result<i32> {
    let base = match cfg.base {
        BaseKind::Simplex => PlantedBase::Simplex,
        BaseKind::Cube => PlantedBase::Cube,
    };
    let template = PlantedModel::new(base, cfg.d, cfg.r, cfg.b, 0.0)?;
    let lambda = planted_lambda(&template)?;

    // (snr, sigma) per sweep point.
    let levels: Vec<(Option<f64>, f64)> = match cfg.sigma {
        Some(sigma) if sigma > 0.0 => vec![(Some(snr(lambda, cfg.r, sigma * sigma)?), sigma)],
        Some(sigma) => vec![(None, sigma)],
        None => cfg
            .snr
            .iter()
            .map(|&v| Ok((Some(v), sigma_sq_for_snr(lambda, cfg.r, v)?.sqrt())))
            .collect::<Result<_>>()?,
    };
    if levels.is_empty() {
        return Err(Error::invalid("no SNR values given"));
    }
    let config = squeeze_config(Mode::Hard, template.delta, 1.0, &cfg.solver);

    let mut record = ResultRecord::new("recover", ctx.seed, &cfg)?;
    record.notes.push(format!(
        "lambda_min_nonzero of the base contacts = {lambda}"
    ));
    let mut table = Vec::new();
    let mut curve = Vec::new();
    for &(level_snr, sigma) in &levels {
        let model = PlantedModel {
            sigma,
            ..template.clone()
        };
        let trials: Vec<PlantedTrial> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| planted_trial(&model, trial_seed(ctx.seed, t as u64), cfg.s_init, &config))
            .collect::<Result<_>>()?;
        let successes = trials.iter().filter(|t| t.report.success).count();
        let rate = successes as f64 / trials.len() as f64;
        let fro: Vec<f64> = trials.iter().map(|t| t.report.frobenius).collect();
        let angle: Vec<f64> = trials
            .iter()
            .map(|t| t.report.max_principal_angle_deg)
            .collect();
        let key = level_snr.map_or_else(|| "sigma0".to_string(), |v| format!("snr={v}"));
        record.aggregate(&format!("success@{key}"), &success_values(&trials));
        record.aggregate(&format!("frobenius@{key}"), &fro);
        for (t, result) in trials.into_iter().enumerate() {
            record.push_trial(&PlantedRow {
                snr: level_snr,
                sigma,
                trial: t,
                result,
            })?;
        }
        let agg = &record.aggregates[&format!("frobenius@{key}")];
        println!(
            "{key}: sigma {sigma:.6}, {successes}/{} recovered, median frobenius {:.4}",
            cfg.trials, agg.median
        );
        table.push(vec![
            level_snr.map_or("inf".into(), |v| format!("{v:?}")),
            format!("{sigma:?}"),
            cfg.trials.to_string(),
            successes.to_string(),
            format!("{rate:?}"),
            format!("{:?}", agg.median),
            format!("{:?}", super::record::Aggregate::of(&angle).median),
        ]);
        if let Some(v) = level_snr {
            curve.push((v.log10(), rate));
        }
    }
    write_table(
        &ctx.out_path("table.csv"),
        &[
            "snr",
            "sigma",
            "trials",
            "successes",
            "success_rate",
            "median_frobenius",
            "median_angle_deg",
        ],
        &table,
    )?;
    if curve.len() > 1 {
        write_figure(
            &ctx.out,
            "phase",
            &Figure {
                title: "planted recovery",
                x_label: "log10 SNR",
                y_label: "success rate",
                style: Style::Line,
                series: vec![Series {
                    name: "success rate".into(),
                    points: curve,
                }],
            },
        )?;
    }
    ctx.finish(record)?;
    Ok(EXIT_OK)
}

fn success_values(trials: &[PlantedTrial]) -> Vec<f64> {
    trials
        .iter()
        .map(|t| if t.report.success { 1.0 } else { 0.0 })
        .collect()
}

fn figure1(ctx: &Context, cfg: RecoverConfig) -> Result<i32> {
    let config = squeeze_config(Mode::Hard, cfg.figure1.margin, 1.0, &cfg.solver);
    let trials: Vec<Figure1Trial> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| figure1_trial(cfg.figure1, trial_seed(ctx.seed, t as u64), &config))
        .collect::<Result<_>>()?;
    let sq: Vec<f64> = trials.iter().map(|t| t.squeeze_angle_deg).collect();
    let pc: Vec<f64> = trials.iter().map(|t| t.pca_angle_deg).collect();

    let mut record = ResultRecord::new("recover", ctx.seed, &cfg)?;
    record.aggregate("squeezefit_angle_deg", &sq);
    record.aggregate("pca_angle_deg", &pc);
    let table: Vec<Vec<String>> = trials
        .iter()
        .enumerate()
        .map(|(t, r)| {
            vec![
                t.to_string(),
                r.seed.to_string(),
                r.rank.to_string(),
                format!("{:?}", r.squeeze_angle_deg),
                format!("{:?}", r.pca_angle_deg),
            ]
        })
        .collect();
    for t in &trials {
        record.push_trial(t)?;
    }
    write_table(
        &ctx.out_path("table.csv"),
        &[
            "trial",
            "seed",
            "rank",
            "squeezefit_angle_deg",
            "pca_angle_deg",
        ],
        &table,
    )?;
    println!(
        "median angle to the planted direction: squeezefit {:.3} deg, pca {:.3} deg ({} trials)",
        record.aggregates["squeezefit_angle_deg"].median,
        record.aggregates["pca_angle_deg"].median,
        cfg.trials
    );

    // Scatter of the first draw: planted coordinate against PCA coordinate.
    let fig = generate_figure1_with(cfg.figure1, trial_seed(ctx.seed, 0))?;
    let pc_dir = eig_sym(&pca(&fig.dataset, 1)?)?
        .eigenvectors
        .column(0)
        .into_owned();
    let mut series: Vec<Series> = Vec::new();
    for (label, idx) in fig.dataset.class_indices() {
        let points = idx
            .iter()
            .map(|&i| {
                let x = fig.dataset.point(i);
                let a: f64 = x.iter().zip(&fig.direction).map(|(u, v)| u * v).sum();
                let b: f64 = x.iter().zip(pc_dir.iter()).map(|(u, v)| u * v).sum();
                (a, b)
            })
            .collect();
        series.push(Series {
            name: format!("label {label}"),
            points,
        });
    }
    write_figure(
        &ctx.out,
        "figure1",
        &Figure {
            title: "first draw: planted vs principal coordinate",
            x_label: "planted direction",
            y_label: "top principal direction",
            style: Style::Scatter,
            series,
        },
    )?;
    ctx.finish(record)?;
    Ok(EXIT_OK)
}
