use std::ops::RangeInclusive;

use clap::ValueEnum;
use onticlab_core::models::{KochenSpecker, PointMass, UniformSphere};
use onticlab_core::{OntologicalModel, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    /// Kochen-Specker qubit model.
    Ks,
    /// Point-mass model: the ontic state is ψ itself.
    Bb,
    /// State-independent uniform distribution (not Born-compatible).
    Uniform,
}

impl ModelArg {
    pub fn build(self) -> Box<dyn OntologicalModel> {
        match self {
            ModelArg::Ks => Box::new(KochenSpecker),
            ModelArg::Bb => Box::new(PointMass),
            ModelArg::Uniform => Box::new(UniformSphere),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProtocolArg {
    Plain,
    Greedy,
}

/// `x,y,z` with a unit norm (checked later by the core types).
pub fn parse_vec3(s: &str) -> Result<Vec3, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match parts.as_slice() {
        [x, y, z] => Ok(Vec3::new(*x, *y, *z)),
        _ => Err(format!("expected three comma-separated numbers, got {s:?}")),
    }
}

/// `a..b` (inclusive) or a single value.
pub fn parse_u32_range(s: &str) -> Result<RangeInclusive<u32>, String> {
    match s.split_once("..") {
        Some((a, b)) => {
            let a: u32 = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
            let b: u32 = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
            if a > b {
                return Err(format!("empty range {s:?}"));
            }
            Ok(a..=b)
        }
        None => {
            let v: u32 = s.trim().parse().map_err(|e| format!("{s:?}: {e}"))?;
            Ok(v..=v)
        }
    }
}

/// `a..b` as two floats, or a single value.
pub fn parse_f64_range(s: &str) -> Result<(f64, f64), String> {
    let parse = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    match s.split_once("..") {
        Some((a, b)) => {
            let (a, b) = (parse(a)?, parse(b)?);
            if a > b {
                return Err(format!("empty range {s:?}"));
            }
            Ok((a, b))
        }
        None => {
            let v = parse(s)?;
            Ok((v, v))
        }
    }
}

/// `steps` evenly spaced points covering `[lo, hi]`.
pub fn linspace((lo, hi): (f64, f64), steps: usize) -> Vec<f64> {
    if steps <= 1 || lo == hi {
        return vec![lo];
    }
    (0..steps)
        .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_vectors_and_ranges() {
        assert_eq!(parse_vec3("0, 0.6,0.8").unwrap(), Vec3::new(0.0, 0.6, 0.8));
        assert!(parse_vec3("1,2").is_err());
        assert_eq!(parse_u32_range("1..20").unwrap(), 1..=20);
        assert_eq!(parse_u32_range("3").unwrap(), 3..=3);
        assert!(parse_u32_range("5..2").is_err());
        assert_eq!(parse_f64_range("0.1..1.57").unwrap(), (0.1, 1.57));
        assert_eq!(linspace((0.0, 1.0), 3), vec![0.0, 0.5, 1.0]);
        assert_eq!(linspace((0.5, 0.5), 8), vec![0.5]);
    }
}
