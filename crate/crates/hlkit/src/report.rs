//! End-to-end experiment orchestration: run the local checks, the series
//! and integral estimates, the exact counts, and compare the measured
//! counts against the predicted main term. Reports serialize losslessly
//! to JSON lines and flatten to CSV.

use crate::arith::PrimeTable;
use crate::counting::{brute_force_r, SolutionCount};
use crate::error::{Error, Result};
use crate::localdata::{
    positivity_certificate, singular_series, PositivityCertificate, PositivityVerdict,
    SingularSeriesEstimate,
};
use crate::oscint::{singular_integral_normalized, CjEstimate, CjMethod};
use crate::sysmodel::{local_solvability, real_solution_probe, ExperimentConfig, LocalCheck, RealProbe};
use serde::{Deserialize, Serialize};
use std::time::Instant;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Primes scanned by the local stage and retained by the series stage.
pub const DEFAULT_LOCAL_P_CUT: u64 = 50;
pub const DEFAULT_SERIES_P_CUT: u64 = 100;
pub const DEFAULT_DEPTH_CAP: u32 = 12;
pub const DEFAULT_REAL_PROBE_ATTEMPTS: u64 = 50;
pub const DEFAULT_QMC_BUDGET: u64 = 2_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StageOutcome {
    Completed,
    Skipped { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub wall_ms: u64,
    pub outcome: StageOutcome,
}

/// Predicted main term: series truncation × normalized integral × P^{s-K}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub series_value: f64,
    pub series_tail_bound: f64,
    pub cj_value: f64,
    pub cj_half_width: f64,
    /// s - K; the power of P carried by the main term.
    pub exponent: i64,
    pub p_limit: u64,
    pub value: f64,
    /// Set when the series estimate is zero or negative: no main term is
    /// predicted and ratio tests are skipped.
    pub no_main_term: bool,
}

/// Compose the prediction from the two module estimates.
pub fn predict_main_term(
    s: usize,
    k_total: u32,
    p_limit: u64,
    series: &SingularSeriesEstimate,
    cj: &CjEstimate,
) -> PredictionRecord {
    let exponent = s as i64 - k_total as i64;
    let scale = (p_limit as f64).powi(exponent as i32);
    let no_main_term = series.partial_sum <= 0.0;
    PredictionRecord {
        series_value: series.partial_sum,
        series_tail_bound: series.tail_bound,
        cj_value: cj.value,
        cj_half_width: cj.half_width,
        exponent,
        p_limit,
        value: if no_main_term {
            0.0
        } else {
            series.partial_sum * cj.value * scale
        },
        no_main_term,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub p_limit: u64,
    pub count: SolutionCount,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRecord {
    pub p_limit: u64,
    pub empirical_weighted: f64,
    pub predicted: f64,
    /// empirical_weighted / predicted, recomputable from this record.
    pub ratio: f64,
    /// True when the all-equal diagonal family was subtracted first.
    pub diagonal_excluded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub artifact_version: String,
    pub config: ExperimentConfig,
    pub threads: usize,
    pub timestamp_unix_ms: u64,
    pub stages: Vec<StageRecord>,
    pub local_checks: Vec<LocalCheck>,
    pub real_probe: Option<RealProbe>,
    pub series: Option<SingularSeriesEstimate>,
    pub positivity: Option<PositivityCertificate>,
    pub c_j: Option<CjEstimate>,
    pub prediction: Option<PredictionRecord>,
    pub counts: Vec<CountRecord>,
    pub ratios: Vec<RatioRecord>,
}

fn now_ms() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Run every stage; stages that exceed their budgets degrade to Skipped
/// with the reason recorded, never abort the report.
pub fn run_experiment(config: &ExperimentConfig, threads: usize) -> ExperimentReport {
    let system = config.system.clone();
    let mut stages = Vec::new();
    let mut report = ExperimentReport {
        artifact_version: ARTIFACT_VERSION.to_string(),
        config: config.clone(),
        threads,
        timestamp_unix_ms: now_ms(),
        stages: vec![],
        local_checks: vec![],
        real_probe: None,
        series: None,
        positivity: None,
        c_j: None,
        prediction: None,
        counts: vec![],
        ratios: vec![],
    };

    // local solvability scan
    let t0 = Instant::now();
    let mut local_outcome = StageOutcome::Completed;
    match PrimeTable::build(DEFAULT_LOCAL_P_CUT) {
        Ok(table) => {
            for &p in table.primes() {
                match local_solvability(&system, p, config.seed) {
                    Ok(check) => report.local_checks.push(check),
                    Err(e) => {
                        local_outcome = StageOutcome::Skipped {
                            reason: format!("p = {p}: {e}"),
                        };
                        break;
                    }
                }
            }
        }
        Err(e) => local_outcome = StageOutcome::Skipped { reason: e.to_string() },
    }
    stages.push(StageRecord {
        name: "local".into(),
        wall_ms: t0.elapsed().as_millis() as u64,
        outcome: local_outcome,
    });

    // real solution probe
    let t0 = Instant::now();
    report.real_probe = Some(real_solution_probe(
        &system,
        DEFAULT_REAL_PROBE_ATTEMPTS,
        config.seed,
        config.tolerance,
    ));
    stages.push(StageRecord {
        name: "real_probe".into(),
        wall_ms: t0.elapsed().as_millis() as u64,
        outcome: StageOutcome::Completed,
    });

    // singular series and positivity certificate
    let t0 = Instant::now();
    let series_outcome = match singular_series(
        &system,
        config.q_cut,
        DEFAULT_SERIES_P_CUT,
        DEFAULT_DEPTH_CAP,
    ) {
        Ok(est) => {
            report.series = Some(est);
            match positivity_certificate(&system, DEFAULT_SERIES_P_CUT, DEFAULT_DEPTH_CAP) {
                Ok(cert) => report.positivity = Some(cert),
                Err(e) => {
                    report.positivity = None;
                    stages.push(StageRecord {
                        name: "positivity".into(),
                        wall_ms: 0,
                        outcome: StageOutcome::Skipped { reason: e.to_string() },
                    });
                }
            }
            StageOutcome::Completed
        }
        Err(e) => StageOutcome::Skipped { reason: e.to_string() },
    };
    stages.push(StageRecord {
        name: "series".into(),
        wall_ms: t0.elapsed().as_millis() as u64,
        outcome: series_outcome,
    });

    // normalized singular integral
    let t0 = Instant::now();
    let method = if system.t() <= 3 {
        CjMethod::Tensor
    } else {
        CjMethod::QuasiMonteCarlo
    };
    let integral_outcome = match singular_integral_normalized(
        &system,
        config.gamma_cut,
        method,
        DEFAULT_QMC_BUDGET,
        config.seed,
    ) {
        Ok(est) => {
            report.c_j = Some(est);
            StageOutcome::Completed
        }
        Err(e) => StageOutcome::Skipped { reason: e.to_string() },
    };
    stages.push(StageRecord {
        name: "integral".into(),
        wall_ms: t0.elapsed().as_millis() as u64,
        outcome: integral_outcome,
    });

    // exact counts over a halving ladder up to P
    let t0 = Instant::now();
    let mut ladder: Vec<u64> = [config.p_limit / 4, config.p_limit / 2, config.p_limit]
        .iter()
        .copied()
        .filter(|&p| p >= 10)
        .collect();
    ladder.dedup();
    let mut counts_outcome = StageOutcome::Completed;
    for &p in &ladder {
        let tp = Instant::now();
        let result = PrimeTable::build(p).and_then(|table| brute_force_r(&system, &table));
        match result {
            Ok(count) => report.counts.push(CountRecord {
                p_limit: p,
                count,
                wall_ms: tp.elapsed().as_millis() as u64,
            }),
            Err(e) => {
                counts_outcome = StageOutcome::Skipped {
                    reason: format!("P = {p}: {e}"),
                };
            }
        }
    }
    stages.push(StageRecord {
        name: "counts".into(),
        wall_ms: t0.elapsed().as_millis() as u64,
        outcome: counts_outcome,
    });

    // prediction and ratios
    let t0 = Instant::now();
    let ratio_outcome = match (&report.series, &report.c_j) {
        (Some(series), Some(cj)) => {
            let base = predict_main_term(
                system.s(),
                system.k_total(),
                config.p_limit,
                series,
                cj,
            );
            let obstructed = matches!(
                report.positivity.as_ref().map(|c| &c.verdict),
                Some(PositivityVerdict::ZeroObstruction { .. })
            );
            let no_main = base.no_main_term || obstructed;
            report.prediction = Some(PredictionRecord {
                no_main_term: no_main,
                value: if no_main { 0.0 } else { base.value },
                ..base
            });
            if no_main {
                StageOutcome::Skipped {
                    reason: "no main term predicted (series zero or obstructed)".into(),
                }
            } else {
                // exclude the trivial diagonal family below the critical
                // variable count, where it would swamp the main term
                let exclude_diagonal = system.admits_equal_diagonal()
                    && system.s() as u32 <= 2 * system.k_total();
                for record in &report.counts {
                    let scale = (record.p_limit as f64).powi(
                        system.s() as i32 - system.k_total() as i32,
                    );
                    let predicted = series.partial_sum * cj.value * scale;
                    let mut empirical = record.count.weighted;
                    if exclude_diagonal {
                        empirical -= record.count.diagonal_weighted.unwrap_or(0.0);
                    }
                    report.ratios.push(RatioRecord {
                        p_limit: record.p_limit,
                        empirical_weighted: empirical,
                        predicted,
                        ratio: empirical / predicted,
                        diagonal_excluded: exclude_diagonal,
                    });
                }
                StageOutcome::Completed
            }
        }
        _ => StageOutcome::Skipped {
            reason: "series or integral stage unavailable".into(),
        },
    };
    stages.push(StageRecord {
        name: "ratios".into(),
        wall_ms: t0.elapsed().as_millis() as u64,
        outcome: ratio_outcome,
    });

    report.stages = stages;
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReportFormat {
    Csv,
    JsonLines,
}

/// Serialize: JSON lines are lossless (one section per line); CSV is a
/// flat (stage, metric, P, value) view for plotting.
pub fn emit_report(report: &ExperimentReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::JsonLines => {
            let mut out = String::new();
            let line = serde_json::json!({"section": "report", "data": report});
            out.push_str(&serde_json::to_string(&line).map_err(|e| Error::Parse(e.to_string()))?);
            out.push('\n');
            Ok(out)
        }
        ReportFormat::Csv => Ok(report_to_csv(report)),
    }
}

/// Parse a JSON-lines document back into a report.
pub fn parse_report(text: &str) -> Result<ExperimentReport> {
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let v: serde_json::Value =
            serde_json::from_str(line).map_err(|e| Error::Parse(e.to_string()))?;
        if v.get("section").and_then(|s| s.as_str()) == Some("report") {
            let data = v
                .get("data")
                .ok_or_else(|| Error::Parse("missing data field".into()))?;
            return serde_json::from_value(data.clone()).map_err(|e| Error::Parse(e.to_string()));
        }
    }
    Err(Error::Parse("no report section found".into()))
}

fn report_to_csv(report: &ExperimentReport) -> String {
    use std::fmt::Write as _;
    let mut out = String::from("stage,metric,P,value\n");
    let p0 = report.config.p_limit;
    for st in &report.stages {
        let _ = writeln!(out, "stage_time,{},{p0},{}", st.name, st.wall_ms);
    }
    for c in &report.local_checks {
        let _ = writeln!(out, "local,solvable_mod_{},{p0},{}", c.p, c.found as u8);
    }
    if let Some(probe) = &report.real_probe {
        let _ = writeln!(out, "real_probe,found,{p0},{}", probe.found.is_some() as u8);
        let _ = writeln!(out, "real_probe,best_residual,{p0},{}", probe.best_residual);
    }
    if let Some(series) = &report.series {
        let _ = writeln!(out, "series,partial_sum,{p0},{}", series.partial_sum);
        let _ = writeln!(out, "series,euler_product,{p0},{}", series.euler_product);
        let _ = writeln!(out, "series,tail_bound,{p0},{}", series.tail_bound);
        for f in &series.per_prime {
            let _ = writeln!(out, "series,euler_factor_{},{p0},{}", f.p, f.factor);
        }
    }
    if let Some(cj) = &report.c_j {
        for rung in &cj.ladder {
            let _ = writeln!(out, "integral,c_j_at_{},{p0},{}", rung.gamma, rung.value);
        }
        let _ = writeln!(out, "integral,c_j,{p0},{}", cj.value);
        let _ = writeln!(out, "integral,half_width,{p0},{}", cj.half_width);
    }
    if let Some(pred) = &report.prediction {
        let _ = writeln!(out, "predict,main_term,{},{}", pred.p_limit, pred.value);
    }
    for c in &report.counts {
        let _ = writeln!(out, "count,unweighted,{},{}", c.p_limit, c.count.unweighted);
        let _ = writeln!(out, "count,weighted,{},{}", c.p_limit, c.count.weighted);
    }
    for r in &report.ratios {
        let _ = writeln!(out, "ratio,empirical_over_predicted,{},{}", r.p_limit, r.ratio);
    }
    out
}

/// The report with volatile fields (timestamps, wall clocks) zeroed, for
/// bit-identical comparison across reruns.
pub fn canonical_value(report: &ExperimentReport) -> serde_json::Value {
    let mut v = serde_json::to_value(report).expect("report serializes");
    zero_volatile(&mut v);
    v
}

fn zero_volatile(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Object(map) => {
            for (key, val) in map.iter_mut() {
                if key == "wall_ms" || key == "timestamp_unix_ms" || key == "elapsed_ms" {
                    *val = serde_json::json!(0);
                } else {
                    zero_volatile(val);
                }
            }
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(zero_volatile),
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four_prime_config(p: u64) -> ExperimentConfig {
        ExperimentConfig::parse(&format!(
            r#"{{"u": [[1],[1],[-1],[-1]], "k": [1], "P": {p}, "q_cut": 200, "gamma_cut": 30.0, "seed": 5}}"#
        ))
        .unwrap()
    }

    #[test]
    fn prediction_scales_homogeneously() {
        let config = four_prime_config(400);
        let report = run_experiment(&config, 1);
        let series = report.series.as_ref().unwrap();
        let cj = report.c_j.as_ref().unwrap();
        let p1 = predict_main_term(4, 1, 1000, series, cj);
        let p2 = predict_main_term(4, 1, 2000, series, cj);
        assert!((p2.value / p1.value - 8.0).abs() < 1e-9); // 2^{s-K} = 8
    }

    #[test]
    fn report_round_trips_through_jsonl() {
        let config = four_prime_config(200);
        let report = run_experiment(&config, 1);
        let doc = emit_report(&report, ReportFormat::JsonLines).unwrap();
        let back = parse_report(&doc).unwrap();
        assert_eq!(report, back);
    }

    #[test]
    fn rerun_is_bit_identical_modulo_timing() {
        let config = four_prime_config(200);
        let a = run_experiment(&config, 1);
        let b = run_experiment(&config, 1);
        assert_eq!(canonical_value(&a), canonical_value(&b));
    }

    #[test]
    fn csv_has_count_rows_per_ladder_point() {
        let config = four_prime_config(400);
        let report = run_experiment(&config, 1);
        let csv = emit_report(&report, ReportFormat::Csv).unwrap();
        for rung in [100u64, 200, 400] {
            assert!(
                csv.contains(&format!("count,weighted,{rung},")),
                "missing count row for P = {rung} in:\n{csv}"
            );
        }
    }

    #[test]
    fn obstructed_system_predicts_nothing() {
        let config = ExperimentConfig::parse(
            r#"{"u": [[1],[1]], "k": [2], "P": 200, "q_cut": 50, "gamma_cut": 10.0}"#,
        )
        .unwrap();
        let report = run_experiment(&config, 1);
        let pred = report.prediction.as_ref().unwrap();
        assert!(pred.no_main_term);
        assert_eq!(pred.value, 0.0);
        assert!(report.ratios.is_empty());
        for c in &report.counts {
            assert_eq!(c.count.unweighted, 0);
        }
    }

    #[test]
    fn ratio_recomputable_from_fields() {
        let config = four_prime_config(1000);
        let report = run_experiment(&config, 1);
        for r in &report.ratios {
            assert_eq!(r.ratio.to_bits(), (r.empirical_weighted / r.predicted).to_bits());
        }
    }
}
