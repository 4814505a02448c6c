use crate::error::{Error, Result};

/// Root-mean-square error between two equally long voltage sequences, in
/// the same unit as the inputs.
pub fn rmse(true_v: &[f64], model_v: &[f64]) -> Result<f64> {
    if true_v.is_empty() || true_v.len() != model_v.len() {
        return Err(Error::Argument(format!(
            "rmse needs equal nonzero lengths, got {} and {}",
            true_v.len(),
            model_v.len()
        )));
    }
    let sum: f64 = true_v
        .iter()
        .zip(model_v)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((sum / true_v.len() as f64).sqrt())
}

/// Relative error reduction of a hybrid model over its physical model, in
/// percent: (rmse_phy - rmse_hybrid) / rmse_phy * 100.
pub fn rer(rmse_phy: f64, rmse_hybrid: f64) -> Result<f64> {
    if rmse_phy == 0.0 {
        return Err(Error::Argument("rer undefined for rmse_phy = 0".into()));
    }
    if rmse_phy < 0.0 || rmse_hybrid < 0.0 {
        return Err(Error::Argument("rer needs nonnegative RMSE values".into()));
    }
    Ok((rmse_phy - rmse_hybrid) / rmse_phy * 100.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rmse_basics() {
        assert_eq!(rmse(&[4.0, 3.9], &[4.0, 3.9]).unwrap(), 0.0);
        // sqrt((0.01^2 + 0.02^2)/2) = 15.81 mV
        let v = rmse(&[4.00, 3.90], &[3.99, 3.92]).unwrap();
        assert_relative_eq!(v * 1000.0, 15.8113883, max_relative = 1e-6);
        assert_relative_eq!(rmse(&[4.0], &[4.1]).unwrap(), 0.1, max_relative = 1e-12);
    }

    #[test]
    fn rmse_errors() {
        assert!(rmse(&[], &[]).is_err());
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn rer_basics() {
        assert_relative_eq!(rer(5.0, 5.0).unwrap(), 0.0);
        assert_relative_eq!(rer(5.0, 0.0).unwrap(), 100.0);
        assert!(rer(0.0, 1.0).is_err());
        assert!(rer(1.0, -0.1).is_err());
    }
}
