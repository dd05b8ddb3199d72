//! Small summary statistics used by estimators and validators.

use statrs::distribution::{ContinuousCDF, Normal};

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    compensated_sum(values.iter().copied()) / values.len() as f64
}

/// Unbiased sample variance (denominator `n - 1`).
pub fn variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(values);
    compensated_sum(values.iter().map(|v| (v - m) * (v - m))) / (n - 1) as f64
}

pub fn std_dev(values: &[f64]) -> f64 {
    variance(values).sqrt()
}

/// Mean and standard error of the mean.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let m = mean(values);
    if values.len() < 2 {
        return (m, 0.0);
    }
    (m, (variance(values) / values.len() as f64).sqrt())
}

/// Anderson–Darling test of normality with estimated mean and variance.
///
/// Returns `(A*^2, p-value)`, using the small-sample correction
/// `A^2 (1 + 0.75/n + 2.25/n^2)` and the D'Agostino–Stephens p-value
/// approximation.
pub fn anderson_darling_normal(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    assert!(n >= 8, "Anderson-Darling needs at least 8 observations");
    let m = mean(values);
    let sd = std_dev(values);
    let mut z: Vec<f64> = values.iter().map(|v| (v - m) / sd).collect();
    z.sort_by(f64::total_cmp);
    let std = Normal::standard();
    let nf = n as f64;
    let s = compensated_sum((0..n).map(|i| {
        let lower = std.cdf(z[i]).max(f64::MIN_POSITIVE).ln();
        let upper = std.cdf(-z[n - 1 - i]).max(f64::MIN_POSITIVE).ln();
        (2.0 * i as f64 + 1.0) * (lower + upper)
    }));
    let a2 = -nf - s / nf;
    let a = a2 * (1.0 + 0.75 / nf + 2.25 / (nf * nf));
    let p = if a >= 0.6 {
        (1.2937 - 5.709 * a + 0.0186 * a * a).exp()
    } else if a >= 0.34 {
        (0.9177 - 4.279 * a - 1.38 * a * a).exp()
    } else if a >= 0.2 {
        1.0 - (-8.318 + 42.796 * a - 59.938 * a * a).exp()
    } else {
        1.0 - (-13.436 + 101.14 * a - 223.73 * a * a).exp()
    };
    (a, p.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand_distr::{Distribution, Exp, StandardNormal};

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(v), 2.0);
    }

    #[test]
    fn variance_of_small_sample() {
        assert_eq!(variance(&[1.0, 2.0, 3.0, 4.0]), 5.0 / 3.0);
        assert!(variance(&[1.0]).is_nan());
    }

    #[test]
    fn anderson_darling_accepts_normal_rejects_exponential() {
        let mut r = rng::stream(3, 0);
        let normal: Vec<f64> = (0..500).map(|_| StandardNormal.sample(&mut r)).collect();
        let (_, p) = anderson_darling_normal(&normal);
        assert!(p > 0.01, "p = {p}");
        let exp = Exp::new(1.0).unwrap();
        let skewed: Vec<f64> = (0..500).map(|_| exp.sample(&mut r)).collect();
        let (a, p) = anderson_darling_normal(&skewed);
        assert!(p < 1e-6, "A = {a}, p = {p}");
    }
}
