//! Metrics, the discretization convergence study, the model comparison and
//! `N`-step evaluation on ingested series, with their CSV reports.

pub mod comparison;
pub mod convergence;
pub mod metrics;
pub mod nstep;

use std::io::Write;

use crate::error::Result;

pub use comparison::{
    comparison_data, comparison_model, contaminated_rocauc, run_comparison, run_comparison_on, tuned_model, ComparisonConfig,
    ComparisonData, ComparisonReport, HorizonTuning, OodConfig, ReportRow, DELAY_SDE_NET, SDE_NET, VAR,
};
pub use convergence::{
    convergence_rate, fit_line, run_convergence_study, terminal_error, ConvergenceConfig, ConvergencePoint,
    ConvergenceReport, ConvergenceRun,
};
pub use metrics::{rmse, rocauc, rocauc_pairwise};
pub use nstep::{run_nstep_eval, split_series, NstepConfig, NstepReport, PlotRow};

fn num(v: f64) -> String {
    format!("{v}")
}

/// `horizon,model,value_rmse,var_rmse[,rocauc]`; the last column only when
/// some row has a ROCAUC.
pub fn write_comparison_csv<W: Write>(report: &ComparisonReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let with_auc = report.has_rocauc();
    let mut header = vec!["horizon", "model", "value_rmse", "var_rmse"];
    if with_auc {
        header.push("rocauc");
    }
    w.write_record(&header)?;
    for r in &report.rows {
        let mut rec = vec![r.horizon.to_string(), r.model.clone(), num(r.value_rmse), num(r.var_rmse)];
        if with_auc {
            rec.push(r.rocauc.map(num).unwrap_or_default());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// `kappa,dt,delta`, starting with the reference row `κ = 1`.
pub fn write_convergence_csv<W: Write>(report: &ConvergenceReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["kappa", "dt", "delta"])?;
    w.write_record(["1".to_string(), num(report.dt_ref), num(report.delta_ref)])?;
    for p in &report.points {
        w.write_record([p.kappa.to_string(), num(p.dt), num(p.delta)])?;
    }
    w.flush()?;
    Ok(())
}

/// `t,truth,mean,std_a,std_e,ci_lo,ci_hi`.
pub fn write_plot_csv<W: Write>(rows: &[PlotRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "truth", "mean", "std_a", "std_e", "ci_lo", "ci_hi"])?;
    for r in rows {
        w.write_record([r.t, r.truth, r.mean, r.std_a, r.std_e, r.ci_lo, r.ci_hi].map(num))?;
    }
    w.flush()?;
    Ok(())
}
