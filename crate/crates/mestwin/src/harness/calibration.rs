use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::ontology::{builtin_snapshot, LoadError, OntologySnapshot};
use crate::sim::{run_simulation, DisruptionProfile, EventLog, FactoryCalendar};

/// Seeds used when none are specified: CALIBRATION_BASE_SEED .. +n.
pub const CALIBRATION_BASE_SEED: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Kpi {
    /// Mean over stations of each station's observed first-pass yield.
    PerStationFpy,
    /// Orders created per operating day.
    DailyThroughput,
    /// NCRs per inspected operation.
    NcrRate,
}

#[derive(Debug, Clone, Serialize)]
pub struct KpiStat {
    pub template_id: String,
    pub kpi: Kpi,
    pub target_low: f64,
    pub target_high: f64,
    pub target_label: String,
    pub n: usize,
    pub mean: f64,
    pub sd: Option<f64>,
    pub ci95: Option<(f64, f64)>,
    pub within_target: bool,
    /// True when n < 2 and no interval can be formed.
    pub insufficient_samples: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CalibrationReport {
    pub days: u32,
    pub seeds: Vec<u64>,
    pub profile: String,
    pub rows: Vec<KpiStat>,
}

impl CalibrationReport {
    pub fn all_within_target(&self) -> bool {
        self.rows.iter().all(|r| r.within_target)
    }
}

/// Raw KPI values of one run, extracted from the event log alone.
#[derive(Debug, Clone, Serialize)]
pub struct RunKpis {
    pub per_station_fpy: f64,
    pub daily_throughput: f64,
    pub ncr_rate: f64,
    pub station_fpy: BTreeMap<String, f64>,
}

/// Scan an event log for the calibration KPIs. Works purely off the CDC
/// stream so it double-checks that the log is complete.
pub fn extract_kpis(snap: &OntologySnapshot, log: &EventLog, days: u32) -> RunKpis {
    let mut inspections: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    let mut orders = 0u64;
    let mut ncrs = 0u64;
    let mut total_inspections = 0u64;
    for record in &log.records {
        match record.table.as_str() {
            "inspection_result" => {
                let station = record.payload["station_id"].as_str().unwrap().to_string();
                let entry = inspections.entry(station).or_insert((0, 0));
                entry.0 += 1;
                total_inspections += 1;
                if record.payload["result"].as_str() == Some("pass") {
                    entry.1 += 1;
                }
            }
            "work_order" if record.op == crate::sim::CdcOp::Insert => orders += 1,
            "ncr" if record.op == crate::sim::CdcOp::Insert => ncrs += 1,
            _ => {}
        }
    }
    let station_fpy: BTreeMap<String, f64> = inspections
        .iter()
        .map(|(s, (n, p))| (s.clone(), *p as f64 / (*n).max(1) as f64))
        .collect();
    let per_station_fpy = if station_fpy.is_empty() {
        0.0
    } else {
        station_fpy.values().sum::<f64>() / station_fpy.len() as f64
    };
    let calendar = FactoryCalendar::from_document(snap.document());
    let operating_days = calendar.operating_days_in(days).max(1);
    RunKpis {
        per_station_fpy,
        daily_throughput: orders as f64 / f64::from(operating_days),
        ncr_rate: ncrs as f64 / total_inspections.max(1) as f64,
        station_fpy,
    }
}

/// Run `seeds.len()` simulations per configuration and report each KPI's
/// mean, sample sd, and 95% t-interval against its configured target band.
pub fn run_calibration(
    configs: &[&str],
    seeds: &[u64],
    days: u32,
    profile: &DisruptionProfile,
) -> Result<CalibrationReport, LoadError> {
    let mut rows = Vec::new();
    for template in configs {
        let snap = builtin_snapshot(template)?;
        let doc = snap.document();

        // One simulation per seed, fanned out across threads.
        let kpis: Vec<RunKpis> = std::thread::scope(|scope| {
            let handles: Vec<_> = seeds
                .iter()
                .map(|&seed| {
                    let snap = snap.clone();
                    let profile = profile.clone();
                    scope.spawn(move || {
                        let log = run_simulation(&snap, seed, days, &profile);
                        extract_kpis(&snap, &log, days)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("run thread")).collect()
        });

        let fpy_target = doc.first_pass_yield_range;
        let throughput_target = doc.daily_order_target();
        let ncr_target = 1.0
            - doc.stations.values().map(|s| s.first_pass_yield).sum::<f64>()
                / doc.stations.len() as f64;

        let fpy_values: Vec<f64> = kpis.iter().map(|k| k.per_station_fpy).collect();
        let throughput_values: Vec<f64> = kpis.iter().map(|k| k.daily_throughput).collect();
        let ncr_values: Vec<f64> = kpis.iter().map(|k| k.ncr_rate).collect();

        rows.push(stat_row(
            template,
            Kpi::PerStationFpy,
            fpy_target.0,
            fpy_target.1,
            format!("{:.2}-{:.2}", fpy_target.0, fpy_target.1),
            &fpy_values,
        ));
        rows.push(stat_row(
            template,
            Kpi::DailyThroughput,
            throughput_target * 0.95,
            throughput_target * 1.05,
            format!("{throughput_target:.0} orders/day +-5%"),
            &throughput_values,
        ));
        rows.push(stat_row(
            template,
            Kpi::NcrRate,
            ncr_target - 0.01,
            ncr_target + 0.01,
            format!("~{:.1}% of ops +-1pp", 100.0 * ncr_target),
            &ncr_values,
        ));
    }
    Ok(CalibrationReport {
        days,
        seeds: seeds.to_vec(),
        profile: profile.name.clone(),
        rows,
    })
}

fn stat_row(
    template: &str,
    kpi: Kpi,
    target_low: f64,
    target_high: f64,
    target_label: String,
    values: &[f64],
) -> KpiStat {
    let mean = super::stats::mean(values);
    let insufficient = values.len() < 2;
    let sd = (!insufficient).then(|| super::stats::sample_sd(values));
    let ci = super::stats::ci95(values);
    KpiStat {
        template_id: template.to_string(),
        kpi,
        target_low,
        target_high,
        target_label,
        n: values.len(),
        mean,
        sd,
        ci95: ci,
        within_target: mean >= target_low && mean <= target_high,
        insufficient_samples: insufficient,
    }
}

/// Aligned-text rendering of the calibration table.
pub fn render_calibration(report: &CalibrationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Calibration: n={} seeds, {}-day runs, {} profile",
        report.seeds.len(),
        report.days,
        report.profile
    );
    let _ = writeln!(
        out,
        "{:<15} {:<18} {:<22} {:>22} {:>24} {:>7}",
        "Configuration", "KPI", "Configured target", "Observed (mean +- sd)", "95% CI", "Within"
    );
    for row in &report.rows {
        let observed = match row.sd {
            Some(sd) => format!("{:.4} +- {:.4}", row.mean, sd),
            None => format!("{:.4} (n<2)", row.mean),
        };
        let ci = match row.ci95 {
            Some((lo, hi)) => format!("[{lo:.4}, {hi:.4}]"),
            None => "insufficient samples".to_string(),
        };
        let _ = writeln!(
            out,
            "{:<15} {:<18} {:<22} {:>22} {:>24} {:>7}",
            row.template_id,
            format!("{:?}", row.kpi),
            row.target_label,
            observed,
            ci,
            if row.within_target { "yes" } else { "NO" }
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_seed_flags_insufficient_samples() {
        let report =
            run_calibration(&["warehousing"], &[1000], 5, &DisruptionProfile::stable()).unwrap();
        assert_eq!(report.rows.len(), 3);
        for row in &report.rows {
            assert!(row.insufficient_samples);
            assert!(row.ci95.is_none());
            assert!(row.sd.is_none());
        }
    }

    #[test]
    fn three_seed_smoke_run_produces_intervals() {
        let report = run_calibration(
            &["aerospace"],
            &[1000, 1001, 1002],
            10,
            &DisruptionProfile::stable(),
        )
        .unwrap();
        for row in &report.rows {
            assert!(!row.insufficient_samples);
            let (lo, hi) = row.ci95.unwrap();
            assert!(lo < row.mean && row.mean < hi);
        }
        let fpy = report.rows.iter().find(|r| r.kpi == Kpi::PerStationFpy).unwrap();
        assert!(fpy.mean > 0.9 && fpy.mean < 1.0, "{}", fpy.mean);
        let text = render_calibration(&report);
        assert!(text.contains("aerospace"));
        assert!(text.contains("PerStationFpy"));
    }

    #[test]
    fn kpi_extraction_matches_a_direct_count() {
        let snap = builtin_snapshot("warehousing").unwrap();
        let log = run_simulation(&snap, 5, 7, &DisruptionProfile::stable());
        let kpis = extract_kpis(&snap, &log, 7);
        let orders = log.inserts_for("work_order").count() as f64;
        // Six operating days in the first warehousing week (Mon-Sat).
        assert!((kpis.daily_throughput - orders / 6.0).abs() < 1e-9);
        assert!(kpis.per_station_fpy > 0.8);
    }
}
