//! Latency reports, MAPE comparison, and the CSV formats.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// One (source, destination) row of a latency report.
#[derive(Debug, Clone, PartialEq)]
pub struct PairRecord {
    pub source: usize,
    pub dest: usize,
    pub class: usize,
    /// Injection rate, carried for flit-weighted means; not part of the CSV.
    pub rate: f64,
    pub analytical: Option<f64>,
    pub simulated: Option<f64>,
    pub mape: Option<f64>,
}

/// Per-pair latency table.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LatencyReport {
    pub rows: Vec<PairRecord>,
}

pub const CSV_HEADER: &str = "source,destination,class,analytical_latency,sim_latency,mape";

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.6}"),
        None => String::new(),
    }
}

impl LatencyReport {
    /// Flit-weighted mean of the analytical latencies (plain mean when rates
    /// are unknown, e.g. after parsing a CSV).
    pub fn mean_analytical(&self) -> Option<f64> {
        weighted_mean(self.rows.iter().filter_map(|r| Some((r.rate, r.analytical?))))
    }

    pub fn mean_simulated(&self) -> Option<f64> {
        weighted_mean(self.rows.iter().filter_map(|r| Some((r.rate, r.simulated?))))
    }

    /// Attach simulated per-pair latencies and fill the MAPE column.
    pub fn merge_simulated(&mut self, sim: &BTreeMap<(usize, usize), f64>) {
        for row in &mut self.rows {
            if let Some(&l_sim) = sim.get(&(row.source, row.dest)) {
                row.simulated = Some(l_sim);
                row.mape = match row.analytical {
                    Some(l_ana) if l_sim > 0.0 => Some(mape(l_sim, l_ana)),
                    _ => None,
                };
            }
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.source,
                r.dest,
                r.class,
                fmt_opt(r.analytical),
                fmt_opt(r.simulated),
                fmt_opt(r.mape)
            ));
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == CSV_HEADER => {}
            Some(h) => {
                return Err(Error::Format(format!(
                    "expected header '{CSV_HEADER}', found '{}'",
                    h.trim()
                )))
            }
            None => return Err(Error::Format("empty report file".into())),
        }
        let mut rows = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 6 {
                return Err(Error::Format(format!(
                    "line {}: expected 6 fields, found {}",
                    lineno + 2,
                    fields.len()
                )));
            }
            let parse_usize = |s: &str, what: &str| -> Result<usize> {
                s.parse()
                    .map_err(|_| Error::Format(format!("line {}: bad {what} '{s}'", lineno + 2)))
            };
            let parse_opt = |s: &str, what: &str| -> Result<Option<f64>> {
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse()
                        .map(Some)
                        .map_err(|_| Error::Format(format!("line {}: bad {what} '{s}'", lineno + 2)))
                }
            };
            rows.push(PairRecord {
                source: parse_usize(fields[0], "source")?,
                dest: parse_usize(fields[1], "destination")?,
                class: parse_usize(fields[2], "class")?,
                rate: 0.0,
                analytical: parse_opt(fields[3], "analytical latency")?,
                simulated: parse_opt(fields[4], "sim latency")?,
                mape: parse_opt(fields[5], "mape")?,
            });
        }
        Ok(Self { rows })
    }
}

fn weighted_mean(values: impl Iterator<Item = (f64, f64)>) -> Option<f64> {
    let mut wsum = 0.0;
    let mut sum = 0.0;
    let mut plain_sum = 0.0;
    let mut count = 0usize;
    for (w, x) in values {
        wsum += w;
        sum += w * x;
        plain_sum += x;
        count += 1;
    }
    if count == 0 {
        None
    } else if wsum > 0.0 {
        Some(sum / wsum)
    } else {
        Some(plain_sum / count as f64)
    }
}

/// MAPE = 100 |L_sim − L_model| / L_sim.
pub fn mape(sim: f64, model: f64) -> f64 {
    100.0 * (sim - model).abs() / sim
}

/// Result of comparing an analytical report with a simulated one.
#[derive(Debug, Clone)]
pub struct MapeSummary {
    pub per_pair: Vec<(usize, usize, f64)>,
    pub mean: f64,
    pub max: f64,
    /// Pairs skipped because the simulated latency was zero.
    pub excluded: Vec<(usize, usize)>,
}

impl MapeSummary {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("source,destination,mape\n");
        for &(s, d, m) in &self.per_pair {
            out.push_str(&format!("{s},{d},{m:.6}\n"));
        }
        out
    }
}

/// Per-pair and aggregate MAPE between two reports covering the same pairs.
pub fn compare(analytical: &LatencyReport, simulated: &LatencyReport) -> Result<MapeSummary> {
    let mut ana: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for row in &analytical.rows {
        let v = row.analytical.ok_or_else(|| {
            Error::Inconsistent(format!(
                "analytical report has no value for pair ({},{})",
                row.source, row.dest
            ))
        })?;
        if ana.insert((row.source, row.dest), v).is_some() {
            return Err(Error::Format(format!(
                "duplicate pair ({},{}) in analytical report",
                row.source, row.dest
            )));
        }
    }
    let mut sim: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for row in &simulated.rows {
        let v = row.simulated.ok_or_else(|| {
            Error::Inconsistent(format!(
                "simulated report has no value for pair ({},{})",
                row.source, row.dest
            ))
        })?;
        if sim.insert((row.source, row.dest), v).is_some() {
            return Err(Error::Format(format!(
                "duplicate pair ({},{}) in simulated report",
                row.source, row.dest
            )));
        }
    }
    if ana.keys().ne(sim.keys()) {
        return Err(Error::Inconsistent(
            "analytical and simulated reports cover different pair sets".into(),
        ));
    }
    let mut per_pair = Vec::new();
    let mut excluded = Vec::new();
    for (&(s, d), &l_ana) in &ana {
        let l_sim = sim[&(s, d)];
        if l_sim == 0.0 {
            excluded.push((s, d));
        } else {
            per_pair.push((s, d, mape(l_sim, l_ana)));
        }
    }
    let mean = if per_pair.is_empty() {
        0.0
    } else {
        per_pair.iter().map(|&(_, _, m)| m).sum::<f64>() / per_pair.len() as f64
    };
    let max = per_pair.iter().map(|&(_, _, m)| m).fold(0.0, f64::max);
    Ok(MapeSummary { per_pair, mean, max, excluded })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(values: &[(usize, usize, Option<f64>, Option<f64>)]) -> LatencyReport {
        LatencyReport {
            rows: values
                .iter()
                .enumerate()
                .map(|(i, &(s, d, a, m))| PairRecord {
                    source: s,
                    dest: d,
                    class: i,
                    rate: 0.0,
                    analytical: a,
                    simulated: m,
                    mape: None,
                })
                .collect(),
        }
    }

    #[test]
    fn identical_reports_have_zero_mape() {
        let a = report(&[(0, 1, Some(10.0), None), (1, 0, Some(4.0), None)]);
        let s = report(&[(0, 1, None, Some(10.0)), (1, 0, None, Some(4.0))]);
        let cmp = compare(&a, &s).unwrap();
        assert_eq!(cmp.mean, 0.0);
        assert_eq!(cmp.max, 0.0);
    }

    #[test]
    fn mape_hand_values() {
        assert!((mape(10.0, 9.0) - 10.0).abs() < 1e-12);
        let a = report(&[(0, 1, Some(9.0), None), (1, 0, Some(4.0), None)]);
        let s = report(&[(0, 1, None, Some(10.0)), (1, 0, None, Some(4.0))]);
        let cmp = compare(&a, &s).unwrap();
        assert!((cmp.mean - 5.0).abs() < 1e-12);
        assert!((cmp.max - 10.0).abs() < 1e-12);
    }

    #[test]
    fn mismatched_pairs_are_rejected() {
        let a = report(&[(0, 1, Some(10.0), None)]);
        let s = report(&[(0, 1, None, Some(10.0)), (1, 0, None, Some(4.0))]);
        assert!(matches!(compare(&a, &s), Err(Error::Inconsistent(_))));
    }

    #[test]
    fn zero_sim_latency_is_excluded_and_flagged() {
        let a = report(&[(0, 1, Some(10.0), None), (1, 0, Some(4.0), None)]);
        let s = report(&[(0, 1, None, Some(0.0)), (1, 0, None, Some(4.0))]);
        let cmp = compare(&a, &s).unwrap();
        assert_eq!(cmp.excluded, vec![(0, 1)]);
        assert_eq!(cmp.per_pair.len(), 1);
    }

    #[test]
    fn csv_round_trip() {
        let mut rep = report(&[(0, 1, Some(10.123456789), None), (1, 0, Some(4.0), None)]);
        rep.rows[0].simulated = Some(9.5);
        rep.rows[0].mape = Some(mape(9.5, 10.123456789));
        let text = rep.to_csv();
        assert!(text.starts_with(CSV_HEADER));
        assert!(text.contains("10.123457")); // fixed 6-decimal formatting
        let parsed = LatencyReport::parse_csv(&text).unwrap();
        assert_eq!(parsed.rows.len(), 2);
        assert_eq!(parsed.rows[1].analytical, Some(4.0));
        assert_eq!(parsed.rows[1].simulated, None);
    }

    #[test]
    fn rate_weighted_mean() {
        let mut rep = report(&[(0, 1, Some(10.0), None), (1, 0, Some(20.0), None)]);
        rep.rows[0].rate = 0.3;
        rep.rows[1].rate = 0.1;
        let mean = rep.mean_analytical().unwrap();
        assert!(((mean) - (0.3 * 10.0 + 0.1 * 20.0) / 0.4).abs() < 1e-12);
    }
}
