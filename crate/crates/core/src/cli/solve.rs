use std::path::Path;

use serde::Serialize;

use super::config::{json_format_error, CertifyConfig, SolveConfig};
use super::plot::{write_figure, Figure, Series, Style};
use super::record::{write_json, ResultRecord};
use super::{load_source, squeeze_config, Context, EXIT_OK, EXIT_VERIFICATION};
use crate::dataset::{build_constraints_full, build_constraints_nn};
use crate::duality::{certify_with, CertificateReport, CertifyOptions, DualCertificate, Verdict};
use crate::error::{Error, Result};
use crate::solver::{solve, Mode};
use crate::spectral::{rank_round, SymMatrix};

#[derive(Serialize)]
struct SolveTrial {
    mode: Mode,
    delta: f64,
    lambda: f64,
    constraints: usize,
    objective: f64,
    worst_violation: f64,
    hinge_value: Option<f64>,
    rank: usize,
    iterations: usize,
    converged: bool,
}

pub(crate) fn read_matrix(path: &Path) -> Result<SymMatrix> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(json_format_error)
}

fn print_report(r: &CertificateReport) {
    let verdict = match r.verdict {
        Verdict::Certified => "certified",
        Verdict::GapOnly => "gap only",
        Verdict::Failed => "failed",
    };
    println!("verdict          {verdict}");
    println!("primal (tr M)    {:.9}", r.primal_value);
    println!("dual value       {:.9}", r.dual_value);
    println!("relative gap     {:.3e}", r.gap);
    println!("min length       {:.9} (delta {})", r.min_length, r.delta);
    println!("tight pairs      {}", r.tight_set_size);
    println!("fixed space dim  {}", r.fixed_space_dim);
    if let Some(res) = &r.residuals {
        println!("max residual     {:.3e}", res.max());
    }
    if let Some((i, j)) = r.violating_pair {
        println!("violating pair   ({i}, {j})");
    }
    if let Some(note) = &r.note {
        println!("note             {note}");
    }
}

pub(crate) fn cmd_solve(ctx: &Context, cfg: SolveConfig, delta_given: bool) -> Result<i32> {
    let ds = load_source(&cfg.data, "--data")?;
    if cfg.mode.is_zero_plus() && (delta_given || cfg.delta != 1.0) {
        log::warn!(
            "mode {:?} fixes delta = 1; ignoring --delta {}",
            cfg.mode,
            cfg.delta
        );
    }
    if cfg.certify && cfg.mode != Mode::Hard {
        return Err(Error::invalid("--certify needs --mode hard"));
    }
    let config = squeeze_config(cfg.mode, cfg.delta, cfg.lambda, &cfg.solver);
    let z = match cfg.s {
        Some(s) => build_constraints_nn(&ds, s)?,
        None => build_constraints_full(&ds)?,
    };
    let result = solve(&z, &config)?;
    let (rank, _) = rank_round(&result.m, 0.5)?;

    write_json(&ctx.out_path("M.json"), &result.m)?;
    let history: Vec<(f64, f64)> = result
        .history
        .iter()
        .enumerate()
        .map(|(k, h)| (k as f64, h.0))
        .collect();
    write_figure(
        &ctx.out,
        "convergence",
        &Figure {
            title: "objective per recorded iterate",
            x_label: "record",
            y_label: "tr M",
            style: Style::Line,
            series: vec![Series {
                name: "tr M".into(),
                points: history,
            }],
        },
    )?;

    let mut record = ResultRecord::new("solve", ctx.seed, &cfg)?;
    record.push_trial(&SolveTrial {
        mode: result.mode,
        delta: result.delta,
        lambda: result.lambda,
        constraints: z.len(),
        objective: result.objective,
        worst_violation: result.worst_violation,
        hinge_value: result.hinge_value,
        rank,
        iterations: result.iterations,
        converged: result.converged,
    })?;
    println!(
        "tr M = {:.9}, rank {} (threshold 0.5), worst violation {:.3e}, {} constraints, {} iterations",
        result.objective,
        rank,
        result.worst_violation,
        z.len(),
        result.iterations
    );

    let mut code = EXIT_OK;
    if cfg.certify {
        let opts = CertifyOptions {
            tol_feas: Some(cfg.solver.tol_feas),
            hint: None,
        };
        let report = certify_with(&ds, &result.m, result.delta, &opts)?;
        print_report(&report);
        write_json(&ctx.out_path("certificate.json"), &report)?;
        record.push_trial(&report)?;
        if report.verdict != Verdict::Certified {
            code = EXIT_VERIFICATION;
        }
    }
    ctx.finish(record)?;
    Ok(code)
}

pub(crate) fn cmd_certify(ctx: &Context, cfg: CertifyConfig) -> Result<i32> {
    let ds = load_source(&cfg.data, "--data")?;
    let path = cfg
        .matrix
        .as_ref()
        .ok_or_else(|| Error::invalid("missing --matrix"))?;
    let m = read_matrix(path)?;
    let hint = match &cfg.hint {
        Some(p) => Some(DualCertificate::from_json(&std::fs::read_to_string(p)?)?),
        None => None,
    };
    let opts = CertifyOptions {
        tol_feas: Some(cfg.tol_feas),
        hint,
    };
    let report = certify_with(&ds, &m, cfg.delta, &opts)?;
    print_report(&report);
    write_json(&ctx.out_path("certificate.json"), &report)?;
    let mut record = ResultRecord::new("certify", ctx.seed, &cfg)?;
    record.push_trial(&report)?;
    ctx.finish(record)?;
    Ok(if report.verdict == Verdict::Certified {
        EXIT_OK
    } else {
        EXIT_VERIFICATION
    })
}
