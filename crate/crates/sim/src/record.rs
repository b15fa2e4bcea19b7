use std::fmt;
use std::io::Write;

use crate::error::SimError;

pub const CSV_HEADER: [&str; 7] = ["experiment", "design", "snr_db", "trial", "metric", "value", "seed_used"];

/// Trial index used for rows aggregated over all trials.
pub const AGGREGATE_TRIAL: i64 = -1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    WeightedMse,
    SumMse,
    Ber,
    Rate,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::WeightedMse => "WeightedMSE",
            Metric::SumMse => "SumMSE",
            Metric::Ber => "BER",
            Metric::Rate => "Rate",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimRecord {
    pub experiment: String,
    pub design: String,
    pub snr_db: f64,
    pub trial: i64,
    pub metric: Metric,
    pub value: f64,
    pub seed_used: u64,
}

/// 17 significant digits: round-trips every finite `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv<W: Write>(records: &[SimRecord], out: W) -> Result<(), SimError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.experiment.as_str(),
            r.design.as_str(),
            &format_float(r.snr_db),
            &r.trial.to_string(),
            &r.metric.to_string(),
            &format_float(r.value),
            &r.seed_used.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string(records: &[SimRecord]) -> String {
    let mut buf = Vec::new();
    write_csv(records, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("CSV output is ASCII")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_float_format() {
        let r = SimRecord {
            experiment: "wmse-sweep".into(),
            design: "exhaustive".into(),
            snr_db: 20.0,
            trial: -1,
            metric: Metric::WeightedMse,
            value: 0.1,
            seed_used: 9,
        };
        let s = to_csv_string(&[r]);
        assert_eq!(
            s,
            "experiment,design,snr_db,trial,metric,value,seed_used\n\
             wmse-sweep,exhaustive,2.0000000000000000e1,-1,WeightedMSE,1.0000000000000001e-1,9\n"
        );
        assert_eq!("1.0000000000000001e-1".parse::<f64>().unwrap(), 0.1);
    }
}
