use std::collections::BTreeMap;
use std::io::{self, Write};
use std::path::Path;

use aerogh_core::datalog::{energy_report, replay};

use crate::fail::{CliResult, Failure};

pub struct ReplayArgs<'a> {
    pub log: &'a Path,
    pub print: bool,
    pub energy: Option<(f64, f64)>,
}

pub fn run(args: ReplayArgs) -> CliResult {
    if !args.log.exists() {
        return Err(Failure::validation(anyhow::anyhow!("{} does not exist", args.log.display())));
    }
    if let Some((from, to)) = args.energy {
        if !(from <= to) {
            return Err(Failure::validation(anyhow::anyhow!("--energy needs FROM <= TO")));
        }
    }
    let mut reader = replay(args.log).map_err(Failure::validation)?;
    let mut records = Vec::new();
    let mut by_kind: BTreeMap<String, usize> = BTreeMap::new();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for rec in reader.by_ref() {
        let rec = rec.map_err(Failure::validation)?;
        if args.print {
            let _ = writeln!(out, "{}", rec.to_line());
        }
        *by_kind.entry(format!("{:?}", rec.kind).to_lowercase()).or_default() += 1;
        records.push(rec);
    }
    let _ = writeln!(out, "records {}", records.len());
    for (kind, n) in &by_kind {
        let _ = writeln!(out, "  {kind:<11}{n}");
    }
    if let (Some(first), Some(last)) = (records.first(), records.last()) {
        let _ = writeln!(out, "seq {}..={} over t = {} .. {} s", first.seq, last.seq, first.sim_time, last.sim_time);
    }
    if reader.truncated_tail {
        let _ = writeln!(out, "dropped a partial trailing record");
    }
    if let Some((from, to)) = args.energy {
        match energy_report(&records, from, to) {
            Some(r) => {
                let _ = writeln!(out, "energy {} .. {} s: {:.6} kWh{}", r.from, r.to, r.total, if r.clamped { " (clamped)" } else { "" });
                for (device, kwh) in &r.by_device {
                    let _ = writeln!(out, "  {device:<16} {kwh:.6} kWh");
                }
            }
            None => {
                let _ = writeln!(out, "no energy snapshots in log");
            }
        }
    }
    Ok(())
}
