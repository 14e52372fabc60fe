//! Modified Bessel function of the first kind by direct power series:
//! `I_j(eta) = sum_m (eta/2)^(2m+j) / (m! (m+j)!)`.

use crate::error::{CliError, Result};

const MAX_TERMS: usize = 200;

pub fn bessel_i(j: u32, eta: f64) -> Result<f64> {
    if eta < 0.0 || !eta.is_finite() {
        return Err(CliError::Config(format!(
            "bessel_i requires eta >= 0, got {eta}"
        )));
    }
    let half = eta / 2.0;
    // first term: (eta/2)^j / j!, built incrementally to dodge overflow
    let mut term = 1.0f64;
    for i in 1..=j {
        term *= half / i as f64;
    }
    let mut sum = term;
    for m in 1..MAX_TERMS {
        term *= half * half / (m as f64 * (m as f64 + j as f64));
        sum += term;
        if !sum.is_finite() {
            return Err(CliError::Numeric(format!("bessel_i({j}, {eta}) overflows")));
        }
        if term < 1e-18 * sum {
            break;
        }
    }
    if !sum.is_finite() {
        return Err(CliError::Numeric(format!("bessel_i({j}, {eta}) overflows")));
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn at_zero_argument() {
        assert_eq!(bessel_i(0, 0.0).unwrap(), 1.0);
        for j in 1..6 {
            assert_eq!(bessel_i(j, 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn matches_extended_precision_series() {
        // Values summed independently at 50-digit precision.
        assert!((bessel_i(1, 0.5).unwrap() - 0.25789430539089631636).abs() < 1e-16);
        assert!((bessel_i(0, 0.5).unwrap() - 1.06348337074132351926).abs() < 1e-15);
        assert!((bessel_i(2, 1.0).unwrap() - 0.13574766976703828118).abs() < 1e-16);
    }

    #[test]
    fn satisfies_three_term_recurrence() {
        // I_{j-1}(x) - I_{j+1}(x) = (2j/x) I_j(x)
        let x = 1.0;
        let i1 = bessel_i(1, x).unwrap();
        let i2 = bessel_i(2, x).unwrap();
        let i3 = bessel_i(3, x).unwrap();
        assert!((i1 - i3 - (4.0 / x) * i2).abs() < 1e-12);
    }

    #[test]
    fn rejects_negative_argument() {
        assert!(bessel_i(1, -1.0).is_err());
    }

    #[test]
    fn overflows_cleanly_for_huge_argument() {
        let err = bessel_i(0, 1500.0).unwrap_err();
        assert_eq!(err.exit_code(), 4);
    }
}
