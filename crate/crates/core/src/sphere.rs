//! Geometry and quadrature on the unit sphere S².
//!
//! Two rules are provided. The Fibonacci lattice is quasi-uniform with equal
//! weights `4π/M` and is used for overlaps and channel discretization. The
//! aligned product rule is a Gauss-Legendre grid in spherical coordinates
//! whose polar axis is chosen so that every supplied "kink" great circle is a
//! meridian; integrands that are smooth away from those circles are then
//! integrated to near machine precision.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Total surface measure of the unit sphere.
pub const SPHERE_AREA: f64 = 4.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec3(pub [f64; 3]);

impl Vec3 {
    pub const X: Vec3 = Vec3([1.0, 0.0, 0.0]);
    pub const Y: Vec3 = Vec3([0.0, 1.0, 0.0]);
    pub const Z: Vec3 = Vec3([0.0, 0.0, 1.0]);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3([x, y, z])
    }

    pub fn x(&self) -> f64 {
        self.0[0]
    }

    pub fn y(&self) -> f64 {
        self.0[1]
    }

    pub fn z(&self) -> f64 {
        self.0[2]
    }

    pub fn dot(&self, other: &Vec3) -> f64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }

    pub fn cross(&self, o: &Vec3) -> Vec3 {
        let [a, b, c] = self.0;
        let [d, e, f] = o.0;
        Vec3([b * f - c * e, c * d - a * f, a * e - b * d])
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Unit vector in the same direction, or `None` for (near) zero vectors.
    pub fn normalized(&self) -> Option<Vec3> {
        let n = self.norm();
        (n > 1e-300 && n.is_finite()).then(|| *self * (1.0 / n))
    }

    /// Two unit vectors completing `self` (assumed unit) to a right-handed
    /// orthonormal frame `(e1, e2, self)`.
    pub fn orthonormal_frame(&self) -> (Vec3, Vec3) {
        let helper = if self.x().abs() < 0.9 {
            Vec3::X
        } else {
            Vec3::Y
        };
        let e1 = helper
            .cross(self)
            .normalized()
            .expect("helper axis is never parallel");
        let e2 = self.cross(&e1);
        (e1, e2)
    }

    /// Angle between two unit vectors, robust near 0 and π.
    pub fn angle_to(&self, other: &Vec3) -> f64 {
        self.cross(other).norm().atan2(self.dot(other))
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        self * -1.0
    }
}

/// Point from spherical coordinates in the frame `(e1, e2, axis)`.
pub fn from_frame(e1: Vec3, e2: Vec3, axis: Vec3, polar: f64, azimuth: f64) -> Vec3 {
    let (sp, cp) = polar.sin_cos();
    let (sa, ca) = azimuth.sin_cos();
    e1 * (sp * ca) + e2 * (sp * sa) + axis * cp
}

/// Uniform point on the sphere (Archimedes: z uniform on [-1, 1]).
pub fn uniform_on_sphere<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    let z: f64 = rng.random_range(-1.0..=1.0);
    let phi: f64 = rng.random_range(0.0..2.0 * PI);
    let r = (1.0 - z * z).max(0.0).sqrt();
    Vec3([r * phi.cos(), r * phi.sin(), z])
}

/// `m` points of the spherical Fibonacci lattice.
pub fn fibonacci_lattice(m: usize) -> Vec<Vec3> {
    let golden_angle = PI * (3.0 - 5f64.sqrt());
    let mf = m as f64;
    (0..m)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / mf;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden_angle * i as f64;
            Vec3([r * phi.cos(), r * phi.sin(), z])
        })
        .collect()
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_n(x) and P_{n-1}(x).
            let (mut p0, mut p1) = (1.0, x);
            if n == 1 {
                p1 = x;
                p0 = 1.0;
            } else {
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// A weighted point set approximating `∫_{S²} f dΩ`.
#[derive(Debug, Clone)]
pub struct SphereRule {
    pub nodes: Vec<Vec3>,
    pub weights: Vec<f64>,
}

impl SphereRule {
    /// Fibonacci lattice with equal weights `4π/m`.
    pub fn fibonacci(m: usize) -> Self {
        let w = SPHERE_AREA / m as f64;
        SphereRule {
            nodes: fibonacci_lattice(m),
            weights: vec![w; m],
        }
    }

    /// Product Gauss-Legendre rule adapted to integrands that are smooth
    /// except across the great circles `{x : n·x = 0}` for the given normals.
    ///
    /// Returns `None` when the normals do not share a common perpendicular
    /// axis (they span all of R³), in which case no single frame turns all
    /// circles into meridians.
    pub fn aligned(kink_normals: &[Vec3], polar: usize, azimuthal: usize) -> Option<Self> {
        let normals: Vec<Vec3> = kink_normals.iter().filter_map(Vec3::normalized).collect();
        let axis = match normals.as_slice() {
            [] => Vec3::Z,
            [n] => n.orthonormal_frame().0,
            [first, rest @ ..] => {
                let mut axis = None;
                for n in rest {
                    if let Some(a) = first.cross(n).normalized() {
                        if first.cross(n).norm() > 1e-9 {
                            axis = Some(a);
                            break;
                        }
                    }
                }
                axis.unwrap_or_else(|| first.orthonormal_frame().0)
            }
        };
        if normals.iter().any(|n| n.dot(&axis).abs() > 1e-9) {
            return None;
        }
        let (e1, e2) = axis.orthonormal_frame();

        let mut breaks: Vec<f64> = Vec::new();
        for n in &normals {
            let d = axis.cross(n);
            let phi = d.dot(&e2).atan2(d.dot(&e1)).rem_euclid(2.0 * PI);
            breaks.push(phi);
            breaks.push((phi + PI).rem_euclid(2.0 * PI));
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
        let pieces: Vec<(f64, f64)> = if breaks.is_empty() {
            vec![(0.0, 2.0 * PI)]
        } else {
            let k = breaks.len();
            (0..k)
                .map(|i| {
                    let lo = breaks[i];
                    let hi = if i + 1 < k {
                        breaks[i + 1]
                    } else {
                        breaks[0] + 2.0 * PI
                    };
                    (lo, hi)
                })
                .filter(|(lo, hi)| hi - lo > 1e-13)
                .collect()
        };

        let (pn, pw) = gauss_legendre(polar);
        let (an, aw) = gauss_legendre(azimuthal);
        let mut nodes = Vec::with_capacity(polar * azimuthal * pieces.len());
        let mut weights = Vec::with_capacity(nodes.capacity());
        for (lo, hi) in pieces {
            let half = 0.5 * (hi - lo);
            for (a, wa) in an.iter().zip(&aw) {
                let phi = lo + half * (a + 1.0);
                for (p, wp) in pn.iter().zip(&pw) {
                    let beta = 0.5 * PI * (p + 1.0);
                    nodes.push(from_frame(e1, e2, axis, beta, phi));
                    weights.push(half * wa * 0.5 * PI * wp * beta.sin());
                }
            }
        }
        Some(SphereRule { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Sum of weights; equals 4π up to rule accuracy.
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `Σ w_j f(x_j)`, evaluated in parallel with a fixed reduction order.
    pub fn integrate<F>(&self, f: F) -> f64
    where
        F: Fn(Vec3) -> f64 + Sync,
    {
        const BLOCK: usize = 4096;
        let partial: Vec<f64> = self
            .nodes
            .par_chunks(BLOCK)
            .zip(self.weights.par_chunks(BLOCK))
            .map(|(xs, ws)| xs.iter().zip(ws).map(|(x, w)| w * f(*x)).sum::<f64>())
            .collect();
        partial.iter().sum()
    }

    /// Vector-valued variant of [`SphereRule::integrate`].
    pub fn integrate_vec<F>(&self, dim: usize, f: F) -> Vec<f64>
    where
        F: Fn(Vec3) -> Vec<f64> + Sync,
    {
        const BLOCK: usize = 4096;
        let partial: Vec<Vec<f64>> = self
            .nodes
            .par_chunks(BLOCK)
            .zip(self.weights.par_chunks(BLOCK))
            .map(|(xs, ws)| {
                let mut acc = vec![0.0; dim];
                for (x, w) in xs.iter().zip(ws) {
                    for (a, v) in acc.iter_mut().zip(f(*x)) {
                        *a += w * v;
                    }
                }
                acc
            })
            .collect();
        partial.into_iter().fold(vec![0.0; dim], |mut acc, p| {
            acc.iter_mut().zip(p).for_each(|(a, v)| *a += v);
            acc
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(10);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        // ∫ x^18 dx = 2/19, degree 2n-2 is exact.
        let m: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert!((m - 2.0 / 19.0).abs() < 1e-14);
    }

    #[test]
    fn fibonacci_points_are_unit_and_weights_sum_to_area() {
        let rule = SphereRule::fibonacci(1000);
        assert!(rule.nodes.iter().all(|p| (p.norm() - 1.0).abs() < 1e-12));
        assert!((rule.total_weight() - SPHERE_AREA).abs() < 1e-10);
    }

    #[test]
    fn aligned_rule_handles_lunes_exactly() {
        let a = Vec3::new(0.3, -0.2, 0.9).normalized().unwrap();
        let b = Vec3::new(-0.5, 0.7, 0.1).normalized().unwrap();
        let rule = SphereRule::aligned(&[a, b], 32, 32).unwrap();
        assert!((rule.total_weight() - SPHERE_AREA).abs() < 1e-12);
        // Lune {a·x > 0, b·x > 0} has area 2(π - angle(a, b)).
        let lune = rule.integrate(|x| f64::from(a.dot(&x) > 0.0 && b.dot(&x) > 0.0));
        let exact = 2.0 * (PI - a.angle_to(&b));
        assert!((lune - exact).abs() < 1e-12, "{lune} vs {exact}");
    }

    #[test]
    fn aligned_rule_rejects_spanning_normals() {
        assert!(SphereRule::aligned(&[Vec3::X, Vec3::Y, Vec3::Z], 8, 8).is_none());
    }

    #[test]
    fn uniform_sampling_has_zero_mean() {
        let mut rng = seeded(11);
        let n = 200_000;
        let mut sum = Vec3::new(0.0, 0.0, 0.0);
        for _ in 0..n {
            sum = sum + uniform_on_sphere(&mut rng);
        }
        // Each component has variance 1/3.
        let se = (1.0f64 / 3.0 / n as f64).sqrt();
        for c in sum.0 {
            assert!((c / n as f64).abs() < 4.0 * se);
        }
    }
}
