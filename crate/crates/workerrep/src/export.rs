//! CSV and JSON renderings of reports, gas tables, task listings and the
//! content store.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde::Serialize;

use workerrep_core::gas::{self, format_usd, GasSchedule, LIFECYCLE, TABLE};
use workerrep_core::sim::{GasSummary, RunReport};
use workerrep_core::{AccountId, ContentStore, Digest, Fixed, Platform, SubmissionId, Task};

use crate::files::write_atomic;

fn finish(w: csv::Writer<Vec<u8>>) -> Vec<u8> {
    w.into_inner().expect("writing to memory cannot fail")
}

/// Per-tick metrics, one row per tick.
pub fn per_tick_csv(report: &RunReport) -> csv::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "tick",
        "entries",
        "gas",
        "active_workers",
        "mean_reputation",
        "tasks_posted",
        "finalized",
        "consensus_failures",
        "forced",
        "held_wei",
    ])?;
    for t in &report.per_tick {
        w.write_record([
            t.tick.to_string(),
            t.entries.to_string(),
            t.gas.to_string(),
            t.active_workers.to_string(),
            t.mean_reputation.to_string(),
            t.tasks_posted.to_string(),
            t.finalized.to_string(),
            t.consensus_failures.to_string(),
            t.forced.to_string(),
            t.held.to_string(),
        ])?;
    }
    Ok(finish(w))
}

/// Operation, count, gas and fiat cost for every kind seen in a run.
pub fn costs_csv(summary: &GasSummary) -> csv::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["operation", "count", "gas", "usd"])?;
    for l in &summary.by_kind {
        w.write_record([
            l.kind.label().to_string(),
            l.count.to_string(),
            l.gas.to_string(),
            format_usd(l.usd),
        ])?;
    }
    w.write_record(["total".into(), String::new(), summary.total.to_string(), format_usd(summary.usd)])?;
    Ok(finish(w))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GasRow {
    pub operation: &'static str,
    pub gas: u64,
    pub usd: f64,
}

/// The measured operations priced at the given gas and ether prices, in
/// table order.
pub fn gas_rows(schedule: &GasSchedule) -> Vec<GasRow> {
    TABLE
        .iter()
        .map(|(kind, _)| {
            let g = schedule.charge(*kind);
            GasRow { operation: kind.label(), gas: g, usd: schedule.cost_usd(g) }
        })
        .collect()
}

/// Gas of one task's lifecycle from posting through the third evaluation.
pub fn lifecycle_row(schedule: &GasSchedule) -> GasRow {
    let trace = LIFECYCLE.iter().map(|k| (*k, schedule.charge(*k)));
    let g = gas::lifecycle_total(trace).expect("every lifecycle kind is present").total();
    GasRow { operation: "Lifecycle total", gas: g, usd: schedule.cost_usd(g) }
}

pub fn gas_table_text(schedule: &GasSchedule) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<26} {:>9} {:>9}", "Operation", "Gas", "USD");
    for r in gas_rows(schedule).iter().chain([&lifecycle_row(schedule)]) {
        let _ = writeln!(out, "{:<26} {:>9} {:>9}", r.operation, r.gas, format_usd(r.usd));
    }
    let _ = writeln!(
        out,
        "at {} gwei and {} USD per ether",
        schedule.gas_price_gwei, schedule.ether_usd
    );
    out
}

pub fn gas_table_csv(schedule: &GasSchedule) -> csv::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["operation", "gas", "usd"])?;
    for r in gas_rows(schedule).iter().chain([&lifecycle_row(schedule)]) {
        w.write_record([r.operation.to_string(), r.gas.to_string(), format_usd(r.usd)])?;
    }
    Ok(finish(w))
}

/// A task listing row.
#[derive(Clone, Debug, Serialize)]
pub struct TaskRow<'a> {
    pub id: u64,
    pub title: &'a str,
    pub status: workerrep_core::TaskStatus,
    pub reward: workerrep_core::Wei,
    pub skills: Vec<&'a str>,
    pub applicants: usize,
    pub poster: AccountId,
    pub w_c: Fixed,
    pub w_q: Fixed,
}

pub fn task_rows<'a>(tasks: &[&'a Task]) -> Vec<TaskRow<'a>> {
    tasks
        .iter()
        .map(|t| TaskRow {
            id: t.id.0,
            title: &t.title,
            status: t.status,
            reward: t.reward,
            skills: t.skills_required.iter().map(String::as_str).collect(),
            applicants: t.applicants.len(),
            poster: t.poster,
            w_c: t.w_c,
            w_q: t.w_q,
        })
        .collect()
}

pub fn tasks_csv(tasks: &[&Task]) -> csv::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "title", "status", "reward_wei", "skills", "applicants", "poster", "w_c", "w_q"])?;
    for r in task_rows(tasks) {
        let status = serde_json::to_value(r.status).expect("status is a plain string");
        w.write_record([
            r.id.to_string(),
            r.title.to_string(),
            status.as_str().unwrap_or_default().to_string(),
            r.reward.to_string(),
            r.skills.join(";"),
            r.applicants.to_string(),
            r.poster.to_string(),
            r.w_c.to_string(),
            r.w_q.to_string(),
        ])?;
    }
    Ok(finish(w))
}

/// Envelope addresses by submission and evaluator, one per round the
/// evaluator was drawn in.
pub fn store_manifest(platform: &Platform) -> BTreeMap<SubmissionId, BTreeMap<AccountId, Vec<Digest>>> {
    let mut out = BTreeMap::new();
    for s in platform.submissions() {
        let mut by_evaluator: BTreeMap<AccountId, Vec<Digest>> = BTreeMap::new();
        for r in &s.rounds {
            for (e, addr) in &r.encrypted_refs {
                by_evaluator.entry(*e).or_default().push(*addr);
            }
        }
        if !by_evaluator.is_empty() {
            out.insert(s.id, by_evaluator);
        }
    }
    out
}

/// Writes every blob to `dir/<hex address>` and the manifest to
/// `dir/manifest.json`.
pub fn dump_store(dir: &Path, store: &ContentStore, platform: &Platform) -> io::Result<()> {
    for (addr, bytes) in store.iter() {
        write_atomic(&dir.join(addr.to_hex()), bytes)?;
    }
    let manifest = serde_json::to_vec_pretty(&store_manifest(platform))?;
    write_atomic(&dir.join("manifest.json"), &manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gas_table_has_eleven_rows_and_the_lifecycle() {
        let s = GasSchedule::default();
        let csv = String::from_utf8(gas_table_csv(&s).unwrap()).unwrap();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines.len(), 13);
        assert_eq!(lines[1], "Create worker,229786,0.0332");
        assert_eq!(lines[12], "Lifecycle total,1502066,0.2167");
        assert!(gas_table_text(&s).contains("Assign evaluators"));
    }
}
