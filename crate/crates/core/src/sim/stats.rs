use statrs::distribution::{ContinuousCDF, StudentsT};

/// Two-sided 95% Student-t quantile with `df` degrees of freedom.
pub fn t_975(df: usize) -> f64 {
    if df == 0 {
        return f64::NAN;
    }
    StudentsT::new(0.0, 1.0, df as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975)
}

/// Ratio-estimator batch means for `ΣA / ΣT`.
///
/// Returns `(estimate, standard error)`. The standard error is NaN with fewer
/// than two batches.
pub fn ratio_batch_means(areas: &[f64], times: &[f64]) -> (f64, f64) {
    let b = areas.len();
    let total_a: f64 = areas.iter().sum();
    let total_t: f64 = times.iter().sum();
    let r = total_a / total_t;
    if b < 2 {
        return (r, f64::NAN);
    }
    let t_bar = total_t / b as f64;
    let ss: f64 = areas
        .iter()
        .zip(times)
        .map(|(a, t)| {
            let e = (a - r * t) / t_bar;
            e * e
        })
        .sum();
    (r, (ss / (b * (b - 1)) as f64).sqrt())
}

/// Sample mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t_quantiles() {
        assert!((t_975(1) - 12.706204736).abs() < 1e-6);
        assert!((t_975(15) - 2.131449546).abs() < 1e-6);
        assert!((t_975(19) - 2.093024054).abs() < 1e-6);
    }

    #[test]
    fn equal_batches_reduce_to_plain_means() {
        let areas = [1.0, 2.0, 3.0, 6.0];
        let times = [1.0; 4];
        let (r, se) = ratio_batch_means(&areas, &times);
        let (m, se2) = mean_se(&areas);
        assert_eq!(r, m);
        assert!((se - se2).abs() < 1e-15);
    }

    #[test]
    fn single_batch_has_no_error_estimate() {
        let (r, se) = ratio_batch_means(&[3.0], &[2.0]);
        assert_eq!(r, 1.5);
        assert!(se.is_nan());
    }
}
