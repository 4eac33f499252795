//! Temperature softmax and the distillation KL loss.
//!
//! The teacher's Q-values are softened by the temperature; the student's
//! are not. Much of the distillation literature softens both sides, this
//! loss deliberately does not.

use crate::error::{ensure_len, Error, Result};

fn check_temperature(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "temperature must be positive and finite, got {tau}"
        )))
    }
}

/// `ln softmax(q / tau)` computed with max subtraction.
pub fn log_softmax_temp(q: &[f64], tau: f64) -> Result<Vec<f64>> {
    check_temperature(tau)?;
    let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shifted: Vec<f64> = q.iter().map(|v| (v - max) / tau).collect();
    let lse = shifted.iter().map(|v| v.exp()).sum::<f64>().ln();
    Ok(shifted.into_iter().map(|v| v - lse).collect())
}

pub fn softmax_temp(q: &[f64], tau: f64) -> Result<Vec<f64>> {
    Ok(log_softmax_temp(q, tau)?.into_iter().map(f64::exp).collect())
}

/// `KL(softmax(teacher / tau) || softmax(student))` and its gradient with
/// respect to the student logits, `softmax(student) - softmax(teacher / tau)`.
/// The teacher distribution is treated as a constant.
pub fn kl_loss(teacher_q: &[f64], student_q: &[f64], tau: f64) -> Result<(f64, Vec<f64>)> {
    ensure_len("KL loss inputs", teacher_q.len(), student_q.len())?;
    let log_p = log_softmax_temp(teacher_q, tau)?;
    let log_s = log_softmax_temp(student_q, 1.0)?;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(student_q.len());
    for (lp, ls) in log_p.iter().zip(&log_s) {
        let p = lp.exp();
        if p > 0.0 {
            loss += p * (lp - ls);
        }
        grad.push(ls.exp() - p);
    }
    Ok((loss.max(0.0), grad))
}
