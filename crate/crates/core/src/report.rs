//! Experiment orchestration and CSV/JSON reporting.
//!
//! One report row per (scenario, strategy). Correctness is the maximum
//! per-component deviation from the comparison basis: the double-precision
//! all-pairs reference for desk-scale scenes (divisions <= 8), the
//! per-particle baseline strategy for larger ones where the O(N^2)
//! reference is out of budget. Wall time is informational only; counters
//! are per single invocation and identical across repeats.

use crate::error::Result;
use crate::gpumodel::{theoretical_occupancy, DeviceProfile, TrafficCounters};
use crate::kernels::{KernelKind, KernelSpec};
use crate::oracle::{brute_force, OracleOutputs};
use crate::scenario::uniform_scene;
use crate::strategies::{BinnedScene, Strategy, StrategyOutputs, StrategyResult};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::time::Instant;

/// Maximum allowed relative error of any output component against the
/// comparison basis.
pub const REL_TOLERANCE: f64 = 1e-4;
/// Permitted absolute error for near-zero components.
pub const ABS_FLOOR: f64 = 1e-6;

/// Full experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub divisions: Vec<usize>,
    pub avg_per_cell: Vec<usize>,
    pub seed: u64,
    pub strategies: Vec<Strategy>,
    pub kernel: KernelKind,
    pub profile: DeviceProfile,
    pub repeats: usize,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.divisions.iter().any(|&d| d < 2) {
            return Err(crate::Error::ConfigInvalid(
                "divisions must be >= 2".into(),
            ));
        }
        if self.avg_per_cell.iter().any(|&a| a < 1) {
            return Err(crate::Error::ConfigInvalid(
                "avg-per-cell must be >= 1".into(),
            ));
        }
        if self.strategies.is_empty() {
            return Err(crate::Error::ConfigInvalid(
                "at least one strategy required".into(),
            ));
        }
        if self.repeats < 1 {
            return Err(crate::Error::ConfigInvalid("repeats must be >= 1".into()));
        }
        Ok(())
    }

    pub fn default_kernel_spec(&self, cell_width: f32) -> KernelSpec {
        KernelSpec::new(self.kernel, cell_width as f64)
    }
}

/// One experiment result row. Field order is the report column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub scenario: String,
    pub strategy: String,
    pub applicable: bool,
    /// What the outputs were checked against: `oracle` or a strategy name.
    pub comparison_basis: String,
    pub max_rel_error: Option<f64>,
    pub interactions_per_particle: Option<f64>,
    pub global_particle_loads: Option<u64>,
    pub global_particle_stores: Option<u64>,
    pub shared_loads: Option<u64>,
    pub shared_stores: Option<u64>,
    pub sync_count: Option<u64>,
    pub interactions: Option<u64>,
    pub idle_lane_iterations: Option<u64>,
    pub global_transactions: Option<u64>,
    pub theoretical_occupancy: Option<f64>,
    /// Global loads relative to the per-particle baseline on the same
    /// scene: a hardware-independent reuse proxy.
    pub global_load_ratio_vs_noloop: Option<f64>,
    pub wall_time_s: f64,
}

pub const REPORT_HEADER: [&str; 17] = [
    "scenario",
    "strategy",
    "applicable",
    "comparison_basis",
    "max_rel_error",
    "interactions_per_particle",
    "global_particle_loads",
    "global_particle_stores",
    "shared_loads",
    "shared_stores",
    "sync_count",
    "interactions",
    "idle_lane_iterations",
    "global_transactions",
    "theoretical_occupancy",
    "global_load_ratio_vs_noloop",
    "wall_time_s",
];

/// Largest division count the O(N^2) reference is run for; beyond it rows
/// compare against the per-particle baseline instead.
pub const ORACLE_MAX_DIVISIONS: usize = 8;

/// Max per-component deviation of strategy outputs against the f64
/// reference, scaled so that a value <= [`REL_TOLERANCE`] means every
/// component is within `max(REL_TOLERANCE * |ref|, ABS_FLOOR)`.
pub fn max_rel_error_vs_oracle(outputs: &StrategyOutputs, reference: &OracleOutputs) -> f64 {
    let floor = ABS_FLOOR / REL_TOLERANCE;
    let mut worst = 0.0f64;
    let mut push = |s: f32, o: f64| {
        let err = (s as f64 - o).abs() / o.abs().max(floor);
        if err > worst {
            worst = err;
        }
    };
    for i in 0..reference.fx.len() {
        push(outputs.fx[i], reference.fx[i]);
        push(outputs.fy[i], reference.fy[i]);
        push(outputs.fz[i], reference.fz[i]);
        push(outputs.pot[i], reference.pot[i]);
    }
    worst
}

/// Same scale, f32 baseline (cross-strategy comparison).
pub fn max_rel_error_vs_strategy(outputs: &StrategyOutputs, baseline: &StrategyOutputs) -> f64 {
    let widened = OracleOutputs {
        fx: baseline.fx.iter().map(|&v| v as f64).collect(),
        fy: baseline.fy.iter().map(|&v| v as f64).collect(),
        fz: baseline.fz.iter().map(|&v| v as f64).collect(),
        pot: baseline.pot.iter().map(|&v| v as f64).collect(),
    };
    max_rel_error_vs_oracle(outputs, &widened)
}

fn scenario_id(divisions: usize, avg: usize, seed: u64) -> String {
    format!("d{divisions}_avg{avg}_seed{seed}")
}

fn inapplicable_row(scenario: &str, strategy: Strategy, basis: &str, wall: f64) -> ReportRow {
    ReportRow {
        scenario: scenario.to_string(),
        strategy: strategy.name().to_string(),
        applicable: false,
        comparison_basis: basis.to_string(),
        max_rel_error: None,
        interactions_per_particle: None,
        global_particle_loads: None,
        global_particle_stores: None,
        shared_loads: None,
        shared_stores: None,
        sync_count: None,
        interactions: None,
        idle_lane_iterations: None,
        global_transactions: None,
        theoretical_occupancy: None,
        global_load_ratio_vs_noloop: None,
        wall_time_s: wall,
    }
}

/// Run the full matrix. Inapplicable strategies produce rows flagged
/// `applicable = false`; nothing aborts the sweep.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    config.validate()?;
    let mut rows = Vec::new();
    for &d in &config.divisions {
        for &avg in &config.avg_per_cell {
            let scenario = scenario_id(d, avg, config.seed);
            let (parts, grid) = uniform_scene(d, avg, config.seed);
            let scene = BinnedScene::build(&parts, &grid);
            let kernel = config.default_kernel_spec(grid.cell_width);
            let n = parts.len();

            let baseline = Strategy::ParPartNoLoop.run(&scene, &kernel, &config.profile)?;
            let use_oracle = d <= ORACLE_MAX_DIVISIONS;
            let reference = if use_oracle {
                Some(brute_force(&parts, &kernel))
            } else {
                None
            };
            let basis = if use_oracle {
                "oracle".to_string()
            } else {
                Strategy::ParPartNoLoop.name().to_string()
            };

            for &strategy in &config.strategies {
                let start = Instant::now();
                let mut outcome: Result<StrategyResult> =
                    strategy.run(&scene, &kernel, &config.profile);
                for _ in 1..config.repeats {
                    if outcome.is_ok() {
                        outcome = strategy.run(&scene, &kernel, &config.profile);
                    }
                }
                let wall = start.elapsed().as_secs_f64() / config.repeats as f64;

                match outcome {
                    Err(_) => rows.push(inapplicable_row(&scenario, strategy, &basis, wall)),
                    Ok(result) => {
                        let err = match &reference {
                            Some(oracle) => max_rel_error_vs_oracle(&result.outputs, oracle),
                            None => {
                                max_rel_error_vs_strategy(&result.outputs, &baseline.outputs)
                            }
                        };
                        let occupancy =
                            theoretical_occupancy(&config.profile, &result.launch)?.1;
                        let c: TrafficCounters = result.counters;
                        rows.push(ReportRow {
                            scenario: scenario.clone(),
                            strategy: strategy.name().to_string(),
                            applicable: true,
                            comparison_basis: basis.clone(),
                            max_rel_error: Some(err),
                            interactions_per_particle: Some(
                                c.interactions as f64 / n.max(1) as f64,
                            ),
                            global_particle_loads: Some(c.global_particle_loads),
                            global_particle_stores: Some(c.global_particle_stores),
                            shared_loads: Some(c.shared_loads),
                            shared_stores: Some(c.shared_stores),
                            sync_count: Some(c.sync_count),
                            interactions: Some(c.interactions),
                            idle_lane_iterations: Some(c.idle_lane_iterations),
                            global_transactions: Some(c.global_transactions),
                            theoretical_occupancy: Some(occupancy),
                            global_load_ratio_vs_noloop: Some(
                                c.global_particle_loads as f64
                                    / baseline.counters.global_particle_loads.max(1) as f64,
                            ),
                            wall_time_s: wall,
                        });
                    }
                }
            }
        }
    }
    Ok(rows)
}

/// True when every applicable row meets the correctness tolerance.
pub fn all_applicable_pass(rows: &[ReportRow]) -> bool {
    rows.iter().all(|r| {
        !r.applicable
            || r.max_rel_error
                .map(|e| e <= REL_TOLERANCE)
                .unwrap_or(false)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Json,
}

/// Serialize rows: CSV with a fixed header (also emitted for zero rows) or
/// a JSON array, numbers in full precision.
pub fn emit_report<W: Write>(rows: &[ReportRow], format: ReportFormat, out: W) -> Result<()> {
    match format {
        ReportFormat::Csv => {
            let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
            writer.write_record(REPORT_HEADER)?;
            for row in rows {
                writer.serialize(row)?;
            }
            writer.flush()?;
        }
        ReportFormat::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, rows)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

pub fn read_report_json(path: &std::path::Path) -> Result<Vec<ReportRow>> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            divisions: vec![2],
            avg_per_cell: vec![1, 10],
            seed: 42,
            strategies: Strategy::ALL.to_vec(),
            kernel: KernelKind::LennardJones,
            profile: DeviceProfile::t600(),
            repeats: 1,
        }
    }

    #[test]
    fn one_row_per_scenario_strategy() {
        let rows = run_experiment(&small_config()).unwrap();
        assert_eq!(rows.len(), 2 * Strategy::ALL.len());
        for r in &rows {
            if r.applicable {
                assert!(r.max_rel_error.unwrap() <= REL_TOLERANCE, "{:?}", r);
            }
        }
        assert!(all_applicable_pass(&rows));
    }

    #[test]
    fn determinism_modulo_wall_time() {
        let config = small_config();
        let mut a = run_experiment(&config).unwrap();
        let mut b = run_experiment(&config).unwrap();
        for r in a.iter_mut().chain(b.iter_mut()) {
            r.wall_time_s = 0.0;
        }
        assert_eq!(a, b);
    }

    #[test]
    fn counters_identical_across_repeats() {
        let mut config = small_config();
        let once = run_experiment(&config).unwrap();
        config.repeats = 3;
        let mut thrice = run_experiment(&config).unwrap();
        for (x, y) in once.iter().zip(thrice.iter_mut()) {
            y.wall_time_s = x.wall_time_s;
        }
        assert_eq!(once, thrice);
    }

    #[test]
    fn csv_header_only_when_empty() {
        let mut buf = Vec::new();
        emit_report(&[], ReportFormat::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert_eq!(text.trim_end().split(',').count(), REPORT_HEADER.len());
    }

    #[test]
    fn csv_columns_match_row_fields() {
        let rows = run_experiment(&small_config()).unwrap();
        let mut buf = Vec::new();
        emit_report(&rows, ReportFormat::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert_eq!(header.split(',').count(), REPORT_HEADER.len());
        for line in lines {
            assert_eq!(line.split(',').count(), REPORT_HEADER.len());
        }
        // Serde field order must match the fixed header.
        let mut serde_buf = Vec::new();
        let mut w = csv::Writer::from_writer(&mut serde_buf);
        w.serialize(&rows[0]).unwrap();
        w.flush().unwrap();
        drop(w);
        let serde_text = String::from_utf8(serde_buf).unwrap();
        assert_eq!(
            serde_text.lines().next().unwrap(),
            REPORT_HEADER.join(","),
            "REPORT_HEADER drifted from ReportRow"
        );
    }

    #[test]
    fn json_round_trip() {
        let rows = run_experiment(&small_config()).unwrap();
        let mut buf = Vec::new();
        emit_report(&rows, ReportFormat::Json, &mut buf).unwrap();
        let parsed: Vec<ReportRow> = serde_json::from_slice(&buf).unwrap();
        assert_eq!(parsed, rows);
    }
}
