//! Small statistical helpers shared by the Monte Carlo reports.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// `(observed − expected) / std_error`, with the degenerate zero-variance
/// case mapped to 0 (exact agreement) or ±∞.
pub fn z_score(observed: f64, expected: f64, std_error: f64) -> f64 {
    let diff = observed - expected;
    if std_error > 0.0 {
        diff / std_error
    } else if diff.abs() <= 1e-12 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
}

/// Pearson goodness-of-fit of `observed` counts against `probabilities`.
///
/// Categories with zero expected probability are dropped; any observation in
/// such a category makes the test fail outright (p = 0).
pub fn chi_square_gof(observed: &[u64], probabilities: &[f64]) -> ChiSquareTest {
    let n: u64 = observed.iter().sum();
    let mut statistic = 0.0;
    let mut categories = 0usize;
    let mut impossible = false;
    for (&o, &p) in observed.iter().zip(probabilities) {
        if p <= 0.0 {
            impossible |= o > 0;
            continue;
        }
        let e = p * n as f64;
        statistic += (o as f64 - e).powi(2) / e;
        categories += 1;
    }
    let degrees_of_freedom = categories.saturating_sub(1);
    let p_value = if impossible {
        0.0
    } else if degrees_of_freedom == 0 {
        1.0
    } else {
        ChiSquared::new(degrees_of_freedom as f64)
            .map(|d| d.sf(statistic))
            .unwrap_or(0.0)
    };
    ChiSquareTest {
        statistic,
        degrees_of_freedom,
        p_value,
    }
}

/// Dense contingency table of two discrete variables.
#[derive(Debug, Clone, PartialEq)]
pub struct JointCounts {
    rows: usize,
    cols: usize,
    counts: Vec<u64>,
}

impl JointCounts {
    pub fn new(rows: usize, cols: usize) -> Self {
        JointCounts {
            rows,
            cols,
            counts: vec![0; rows * cols],
        }
    }

    pub fn add(&mut self, row: usize, col: usize) {
        self.counts[row * self.cols + col] += 1;
    }

    pub fn merge(&mut self, other: &JointCounts) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn cells(&self) -> usize {
        self.rows * self.cols
    }

    pub fn nonzero_cells(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    /// Plug-in mutual information in bits.
    #[allow(clippy::needless_range_loop)]
    pub fn mutual_information_bits(&self) -> f64 {
        let n = self.total() as f64;
        if n == 0.0 {
            return 0.0;
        }
        let mut row_sums = vec![0u64; self.rows];
        let mut col_sums = vec![0u64; self.cols];
        for r in 0..self.rows {
            for c in 0..self.cols {
                let k = self.counts[r * self.cols + c];
                row_sums[r] += k;
                col_sums[c] += k;
            }
        }
        let mut mi = 0.0;
        for r in 0..self.rows {
            for c in 0..self.cols {
                let k = self.counts[r * self.cols + c];
                if k > 0 {
                    let k = k as f64;
                    mi += k / n * (k * n / (row_sums[r] as f64 * col_sums[c] as f64)).log2();
                }
            }
        }
        mi.max(0.0)
    }

    /// Miller-Madow style upper estimate of the plug-in bias, in bits.
    pub fn bias_bound_bits(&self) -> f64 {
        let n = self.total() as f64;
        if n == 0.0 {
            return 0.0;
        }
        self.nonzero_cells() as f64 / (2.0 * n * std::f64::consts::LN_2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn independent_table_has_zero_information() {
        let mut t = JointCounts::new(2, 3);
        for r in 0..2 {
            for c in 0..3 {
                for _ in 0..10 {
                    t.add(r, c);
                }
            }
        }
        assert!(t.mutual_information_bits().abs() < 1e-12);
    }

    #[test]
    fn identity_table_carries_log_of_size() {
        let mut t = JointCounts::new(4, 4);
        for i in 0..4 {
            t.add(i, i);
        }
        assert!((t.mutual_information_bits() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn chi_square_examples() {
        let t = chi_square_gof(&[50, 50], &[0.5, 0.5]);
        assert_eq!(t.statistic, 0.0);
        assert!((t.p_value - 1.0).abs() < 1e-12);
        let t = chi_square_gof(&[100, 0], &[1.0, 0.0]);
        assert_eq!(t.p_value, 1.0);
        let t = chi_square_gof(&[99, 1], &[1.0, 0.0]);
        assert_eq!(t.p_value, 0.0);
        // Statistic 4 on one degree of freedom: p = erfc(√2) ≈ 0.0455.
        let t = chi_square_gof(&[60, 40], &[0.5, 0.5]);
        assert!((t.statistic - 4.0).abs() < 1e-12);
        assert!((t.p_value - 0.045_500_263_896).abs() < 1e-9);
    }

    #[test]
    fn z_score_degenerate_cases() {
        assert_eq!(z_score(1.0, 1.0, 0.0), 0.0);
        assert_eq!(z_score(1.0, 0.5, 0.0), f64::INFINITY);
        assert!((z_score(0.6, 0.5, 0.05) - 2.0).abs() < 1e-12);
    }
}
