use alloc::boxed::Box;
use alloc::vec::Vec;

use super::{check_streams, design_general_weight, Certificate, DesignReport, PrecoderDesign};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::system_model::{achievable_rate, matrix_snr, whitened_svd, ChannelModel, GeneralWeight};

/// Capacity-achieving precoder by alternating minimization of
/// `Tr(W Φ(F)) − ln|W|`.
///
/// For fixed `F` the minimizing weight is `W = Φ^{-1} = Fᴴ Hᴴ Rn^{-1} H F + I`,
/// at which the objective equals `N − ln|I + Fᴴ Hᴴ Rn^{-1} H F|`. For fixed
/// `W` the general-weight design is optimal. The recorded trace is therefore
/// non-increasing. Uses `N = min(n_tx, n_rx)` streams, starting from equal
/// power on the eigenchannels.
pub fn design_capacity_wmmse(
    ch: &ChannelModel,
    power: f64,
    max_iters: usize,
    tol: f64,
) -> Result<DesignReport> {
    if !(power.is_finite() && power > 0.0) {
        return Err(Error::InvalidInput("power budget must be positive and finite"));
    }
    let n = ch.n_tx().min(ch.n_rx());
    check_streams(ch, n)?;
    let svd = whitened_svd(ch)?;
    let gain = libm::sqrt(power / n as f64);
    let mut design = PrecoderDesign::assemble(
        svd.v,
        alloc::vec![gain; n],
        CMatrix::identity(n, n),
        None,
    )?;
    let wmmse_value = |f: &CMatrix| -> Result<f64> { Ok(n as f64 - achievable_rate(ch, f)?) };

    let mut trace: Vec<f64> = alloc::vec![wmmse_value(&design.f)?];
    let mut examined = 0;
    for it in 1..=max_iters {
        let w = matrix_snr(ch, &design.f)? + CMatrix::identity(n, n);
        let report = design_general_weight(ch, &GeneralWeight::new(linalg::hermitian_part(&w))?, power)?;
        examined += report.candidates_examined;
        design = report.design;
        let value = wmmse_value(&design.f)?;
        let change = (trace[trace.len() - 1] - value).abs();
        trace.push(value);
        if change < tol {
            return Ok(DesignReport {
                design,
                objective: value,
                candidates_examined: examined,
                certificate: Certificate::IterativeConverged,
                iterations: it,
                trace,
            });
        }
    }
    let objective = trace[trace.len() - 1];
    Err(Error::NoConvergence {
        iterations: max_iters,
        best: Box::new(DesignReport {
            design,
            objective,
            candidates_examined: examined,
            certificate: Certificate::StructureOnly,
            iterations: max_iters,
            trace,
        }),
    })
}
