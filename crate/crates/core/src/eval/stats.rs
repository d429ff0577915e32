use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Mean and sample standard deviation (n − 1 denominator).
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    crate::synth::mean_std(v)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedTTest {
    /// Mean of `a − b`.
    pub mean_difference: f64,
    pub t: f64,
    pub df: usize,
    /// Two-sided.
    pub p_value: f64,
}

/// Two-sided paired t-test of `a` against `b`. `None` for fewer than two
/// pairs or unequal lengths.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Option<PairedTTest> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let (mean, sd) = mean_std(&diff);
    let n = diff.len();
    let df = n - 1;
    let se = sd / (n as f64).sqrt();
    let (t, p_value) = if se == 0.0 {
        if mean == 0.0 {
            (0.0, 1.0)
        } else {
            (mean.signum() * f64::INFINITY, 0.0)
        }
    } else {
        let t = mean / se;
        let dist = StudentsT::new(0.0, 1.0, df as f64).expect("df ≥ 1");
        (t, 2.0 * (1.0 - dist.cdf(t.abs())))
    };
    Some(PairedTTest {
        mean_difference: mean,
        t,
        df,
        p_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_reference_values() {
        // d = [1, 2, 3, 4, 5] − [0, 0, 0, 0, 0]: mean 3, sd √2.5, t = 3/(√2.5/√5) ≈ 4.2426
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [0.0; 5];
        let r = paired_t_test(&a, &b).unwrap();
        assert!((r.t - 4.242640687119285).abs() < 1e-12);
        assert_eq!(r.df, 4);
        // two-sided p for t = 4.2426, df = 4
        assert!((r.p_value - 0.013235599563682695).abs() < 1e-9, "{}", r.p_value);
    }

    #[test]
    fn identical_samples_give_p_one() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(paired_t_test(&a, &a).unwrap().p_value, 1.0);
    }
}
