//! Small statistical helpers.

use statrs::distribution::{ContinuousCDF, Normal};

/// Two-sided standard-normal quantile for a confidence level.
///
/// The conventional table values 1.96 (95%) and 3.2905 (99.9%) are returned
/// verbatim so bounds match the published constants.
pub fn z_value(confidence: f64) -> f64 {
    assert!(confidence > 0.0 && confidence < 1.0, "confidence must lie in (0,1)");
    if (confidence - 0.95).abs() < 1e-12 {
        1.96
    } else if (confidence - 0.999).abs() < 1e-12 {
        3.2905
    } else {
        Normal::standard().inverse_cdf(0.5 + confidence / 2.0)
    }
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Population variance.
pub fn variance(xs: &[f64]) -> Option<f64> {
    let m = mean(xs)?;
    Some(xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn z_table_and_quantiles() {
        assert_eq!(z_value(0.95), 1.96);
        assert_eq!(z_value(0.999), 3.2905);
        assert!((z_value(0.99) - 2.5758293).abs() < 1e-6);
        assert!((z_value(0.6826894921) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn moments() {
        assert_eq!(mean(&[1.0, 2.0, 3.0]), Some(2.0));
        assert_eq!(variance(&[1.0, 3.0]), Some(1.0));
        assert_eq!(mean(&[]), None);
    }
}
