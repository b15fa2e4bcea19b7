//! Experiment configuration.
//!
//! Files are flat `key = value` text. Blank lines and everything after `#`
//! are ignored. Lists are comma separated; an SNR grid may also be written
//! as `start:step:stop`. Recognized keys are the [`SimConfig`] field names
//! plus `snr_db` as an alias for `snr_db_grid`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    WmseSweep,
    SumMseSweep,
    BerSweep,
    Pareto,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::WmseSweep => "wmse-sweep",
            Experiment::SumMseSweep => "summse-sweep",
            Experiment::BerSweep => "ber-sweep",
            Experiment::Pareto => "pareto",
        }
    }

    pub(crate) fn id(self) -> u64 {
        self as u64 + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modulation {
    Qpsk,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Design {
    /// Best stream-to-eigenchannel assignment by exhaustive search.
    Exhaustive,
    Majorization,
    /// Largest weight on the strongest eigenchannel.
    Pairing,
    /// Largest weight on the weakest eigenchannel.
    Reversal,
    /// Worst assignment over all permutations.
    Worst,
    /// Fixed assignment: stream `p[i]` on eigenchannel `i`.
    Permutation(Vec<usize>),
    EqualizerOnly,
    JointDiagonal,
    JointDft,
    /// Pareto point with weights `w̃_i = (h_i²)^{-α}`.
    Tilt(f64),
}

impl Design {
    pub fn is_permutation_choice(&self) -> bool {
        matches!(
            self,
            Design::Exhaustive
                | Design::Majorization
                | Design::Pairing
                | Design::Reversal
                | Design::Worst
                | Design::Permutation(_)
        )
    }

    pub fn is_link_design(&self) -> bool {
        matches!(self, Design::EqualizerOnly | Design::JointDiagonal | Design::JointDft)
    }
}

impl fmt::Display for Design {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Design::Exhaustive => f.write_str("exhaustive"),
            Design::Majorization => f.write_str("majorization"),
            Design::Pairing => f.write_str("pairing"),
            Design::Reversal => f.write_str("reversal"),
            Design::Worst => f.write_str("worst"),
            Design::Permutation(p) => {
                f.write_str("perm:")?;
                for (i, s) in p.iter().enumerate() {
                    if i > 0 {
                        f.write_str("-")?;
                    }
                    write!(f, "{s}")?;
                }
                Ok(())
            }
            Design::EqualizerOnly => f.write_str("equalizer-only"),
            Design::JointDiagonal => f.write_str("joint-diagonal"),
            Design::JointDft => f.write_str("joint-dft"),
            Design::Tilt(a) => write!(f, "alpha={a}"),
        }
    }
}

impl FromStr for Design {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, SimError> {
        let bad = || SimError::Config(format!("unknown design `{s}`"));
        Ok(match s {
            "exhaustive" => Design::Exhaustive,
            "majorization" => Design::Majorization,
            "pairing" => Design::Pairing,
            "reversal" => Design::Reversal,
            "worst" => Design::Worst,
            "equalizer-only" => Design::EqualizerOnly,
            "joint-diagonal" => Design::JointDiagonal,
            "joint-dft" => Design::JointDft,
            _ => {
                if let Some(p) = s.strip_prefix("perm:") {
                    let perm = p
                        .split('-')
                        .map(|x| x.trim().parse::<usize>().map_err(|_| bad()))
                        .collect::<Result<Vec<_>, _>>()?;
                    Design::Permutation(perm)
                } else if let Some(a) = s.strip_prefix("alpha=") {
                    let a: f64 = a.parse().map_err(|_| bad())?;
                    if !a.is_finite() {
                        return Err(bad());
                    }
                    Design::Tilt(a)
                } else {
                    return Err(bad());
                }
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_tx: usize,
    pub n_rx: usize,
    pub n_streams: usize,
    pub snr_db_grid: Vec<f64>,
    pub weights: Vec<f64>,
    pub designs: Vec<Design>,
    pub trials: usize,
    /// Transmitted symbol vectors per trial and SNR point, each carrying
    /// `n_streams` QPSK symbols.
    pub symbols_per_trial: usize,
    pub seed: u64,
    pub modulation: Modulation,
}

/// Lower bound on QPSK symbols per (design, SNR) point in a BER sweep.
pub const MIN_BER_SYMBOLS: usize = 10_000;

fn grid(start: f64, step: f64, stop: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|k| start + step * k as f64).collect()
}

impl SimConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        let base = SimConfig {
            n_tx: 4,
            n_rx: 4,
            n_streams: 4,
            snr_db_grid: grid(0.0, 5.0, 30.0),
            weights: vec![0.1, 0.2, 0.3, 0.4],
            designs: vec![Design::EqualizerOnly, Design::JointDiagonal, Design::JointDft],
            trials: 100,
            symbols_per_trial: 1000,
            seed: 1,
            modulation: Modulation::Qpsk,
        };
        match experiment {
            Experiment::WmseSweep => SimConfig {
                designs: vec![Design::Exhaustive, Design::Majorization, Design::Reversal, Design::Worst],
                ..base
            },
            Experiment::SumMseSweep | Experiment::BerSweep => base,
            Experiment::Pareto => SimConfig {
                designs: [0.0, 0.25, 0.5, 0.75, 1.0].into_iter().map(Design::Tilt).collect(),
                ..base
            },
        }
    }

    pub fn power(&self) -> f64 {
        self.n_streams as f64
    }

    /// `σ² = P / 10^{snr/10}` with `P = n_streams`.
    pub fn noise_variance(&self, snr_db: f64) -> f64 {
        self.power() / 10f64.powf(snr_db / 10.0)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), SimError> {
        let value = value.trim();
        let int = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| SimError::Config(format!("`{key}` expects an integer, got `{v}`")))
        };
        let float = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| SimError::Config(format!("`{key}` expects numbers, got `{v}`")))
        };
        match key.trim() {
            "n_tx" => self.n_tx = int(value)?,
            "n_rx" => self.n_rx = int(value)?,
            "n_streams" => self.n_streams = int(value)?,
            "trials" => self.trials = int(value)?,
            "symbols_per_trial" => self.symbols_per_trial = int(value)?,
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| SimError::Config(format!("`seed` expects a u64, got `{value}`")))?
            }
            "snr_db" | "snr_db_grid" => {
                let parts: Vec<&str> = value.split(':').collect();
                self.snr_db_grid = if parts.len() == 3 {
                    let (a, s, b) = (float(parts[0])?, float(parts[1])?, float(parts[2])?);
                    if s.is_nan() || s <= 0.0 || b < a {
                        return Err(SimError::Config(format!("bad SNR range `{value}`")));
                    }
                    grid(a, s, b)
                } else {
                    split_list(value).map(float).collect::<Result<_, _>>()?
                };
            }
            "weights" => self.weights = split_list(value).map(float).collect::<Result<_, _>>()?,
            "designs" => {
                self.designs = split_list(value).map(str::parse).collect::<Result<_, _>>()?
            }
            "modulation" => {
                if !value.eq_ignore_ascii_case("qpsk") {
                    return Err(SimError::Config(format!("unsupported modulation `{value}`")));
                }
                self.modulation = Modulation::Qpsk;
            }
            other => return Err(SimError::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text`.
    pub fn apply_text(&mut self, text: &str) -> Result<(), SimError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| SimError::ConfigSyntax {
                line: i + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            self.set(k, v).map_err(|e| SimError::ConfigSyntax {
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), SimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Config(format!("cannot read {}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    pub fn validate(&self, experiment: Experiment) -> Result<(), SimError> {
        let fail = |m: String| Err(SimError::Config(m));
        if self.n_tx == 0 || self.n_rx == 0 {
            return fail("antenna counts must be positive".into());
        }
        if self.n_streams == 0 || self.n_streams > self.n_tx.min(self.n_rx) {
            return fail(format!(
                "n_streams = {} must lie in 1..={}",
                self.n_streams,
                self.n_tx.min(self.n_rx)
            ));
        }
        if self.trials == 0 {
            return fail("trials must be at least 1".into());
        }
        if self.snr_db_grid.is_empty() || self.snr_db_grid.iter().any(|s| !s.is_finite()) {
            return fail("SNR grid must be nonempty and finite".into());
        }
        if self.designs.is_empty() {
            return fail("no designs configured".into());
        }
        match experiment {
            Experiment::WmseSweep => {
                if self.weights.len() != self.n_streams {
                    return fail(format!(
                        "{} weights for {} streams",
                        self.weights.len(),
                        self.n_streams
                    ));
                }
                if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0))
                    || self.weights.iter().all(|&w| w == 0.0)
                {
                    return fail("weights must be nonnegative with at least one positive".into());
                }
                if self.designs.iter().filter(|d| d.is_permutation_choice()).count() < 2 {
                    return fail("wmse-sweep needs at least two permutation choices".into());
                }
                for d in &self.designs {
                    if !d.is_permutation_choice() {
                        return fail(format!("design `{d}` does not apply to wmse-sweep"));
                    }
                    if let Design::Permutation(p) = d {
                        let mut sorted = p.clone();
                        sorted.sort_unstable();
                        if sorted != (0..self.n_streams).collect::<Vec<_>>() {
                            return fail(format!("`{d}` is not a permutation of the streams"));
                        }
                    }
                }
            }
            Experiment::SumMseSweep | Experiment::BerSweep => {
                if let Some(d) = self.designs.iter().find(|d| !d.is_link_design()) {
                    return fail(format!("design `{d}` does not apply to {}", experiment.name()));
                }
                if experiment == Experiment::BerSweep
                    && self.trials * self.symbols_per_trial * self.n_streams < MIN_BER_SYMBOLS
                {
                    return fail(format!(
                        "ber-sweep needs at least {MIN_BER_SYMBOLS} symbols per point \
                         (trials × symbols_per_trial × n_streams)"
                    ));
                }
            }
            Experiment::Pareto => {
                if let Some(d) = self.designs.iter().find(|d| !matches!(d, Design::Tilt(_))) {
                    return fail(format!("design `{d}` does not apply to pareto; use alpha=<x>"));
                }
                if let Some(d) = self
                    .designs
                    .iter()
                    .find(|d| matches!(d, Design::Tilt(a) if !(0.0..=1.0).contains(a)))
                {
                    return fail(format!("`{d}`: alpha must lie in [0, 1] to keep the gate order"));
                }
            }
        }
        Ok(())
    }
}

fn split_list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}
