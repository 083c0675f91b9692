//! Symmetric quadrature on the reference triangle `(0,0),(1,0),(0,1)`.

use crate::error::{Error, Result};

pub const DEFAULT_DEGREE: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    /// Reference coordinates `(xi, eta)`.
    pub points: Vec<[f64; 2]>,
    /// Weights summing to the reference area 1/2.
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    /// Smallest tabulated rule exact to at least `degree`.
    pub fn new(degree: usize) -> Result<Self> {
        let (tab, exact): (&[(Orbit, f64)], usize) = match degree {
            0 | 1 => (&DEG1, 1),
            2 => (&DEG2, 2),
            3 | 4 => (&DEG4, 4),
            5..=8 => (&DEG8, 8),
            _ => {
                return Err(Error::InvalidSpec(format!(
                    "no quadrature rule of degree {degree}"
                )))
            }
        };
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for &(orbit, w) in tab {
            for b in orbit.expand() {
                points.push([b[1], b[2]]);
                weights.push(0.5 * w);
            }
        }
        Ok(QuadratureRule {
            points,
            weights,
            degree: exact,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ([f64; 2], f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }
}

impl Default for QuadratureRule {
    fn default() -> Self {
        QuadratureRule::new(DEFAULT_DEGREE).expect("tabulated")
    }
}

#[derive(Clone, Copy)]
enum Orbit {
    Centroid,
    /// `(a, b, b)` with `b = (1 - a) / 2`
    S21(f64),
    /// all permutations of `(a, b, 1 - a - b)`
    S111(f64, f64),
}

impl Orbit {
    fn expand(self) -> Vec<[f64; 3]> {
        match self {
            Orbit::Centroid => vec![[1.0 / 3.0; 3]],
            Orbit::S21(a) => {
                let b = 0.5 * (1.0 - a);
                vec![[a, b, b], [b, a, b], [b, b, a]]
            }
            Orbit::S111(a, b) => {
                let c = 1.0 - a - b;
                vec![
                    [a, b, c],
                    [a, c, b],
                    [b, a, c],
                    [b, c, a],
                    [c, a, b],
                    [c, b, a],
                ]
            }
        }
    }
}

// Weights below are normalized to sum to 1.
const DEG1: [(Orbit, f64); 1] = [(Orbit::Centroid, 1.0)];

const DEG2: [(Orbit, f64); 1] = [(Orbit::S21(2.0 / 3.0), 1.0 / 3.0)];

const DEG4: [(Orbit, f64); 2] = [
    (Orbit::S21(0.108_103_018_168_070), 0.223_381_589_678_011),
    (Orbit::S21(0.816_847_572_980_459), 0.109_951_743_655_322),
];

const DEG8: [(Orbit, f64); 5] = [
    (Orbit::Centroid, 0.144_315_607_677_787),
    (Orbit::S21(0.081_414_823_414_554), 0.095_091_634_267_285),
    (Orbit::S21(0.658_861_384_496_480), 0.103_217_370_534_718),
    (Orbit::S21(0.898_905_543_365_938), 0.032_458_497_623_198),
    (
        Orbit::S111(0.008_394_777_409_958, 0.263_112_829_634_638),
        0.027_230_314_174_435,
    ),
];

/// Gauss-Legendre points and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    match n {
        1 => (vec![0.0], vec![2.0]),
        2 => {
            let a = 1.0 / 3f64.sqrt();
            (vec![-a, a], vec![1.0, 1.0])
        }
        3 => {
            let a = (0.6f64).sqrt();
            (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        4 => {
            let a = 0.339_981_043_584_856_3;
            let b = 0.861_136_311_594_052_6;
            let wa = 0.652_145_154_862_546_1;
            let wb = 0.347_854_845_137_453_9;
            (vec![-b, -a, a, b], vec![wb, wa, wa, wb])
        }
        5 => {
            let a = 0.538_469_310_105_683_1;
            let b = 0.906_179_845_938_664;
            let wa = 0.478_628_670_499_366_5;
            let wb = 0.236_926_885_056_189_1;
            let w0 = 128.0 / 225.0;
            (vec![-b, -a, 0.0, a, b], vec![wb, wa, w0, wa, wb])
        }
        _ => newton_legendre(n),
    }
}

/// Roots of `P_n` by Newton from the Chebyshev guesses; weights from `P_n'`.
fn newton_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                (p0, p1) = (p1, ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf);
            }
            dp = nf * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact integral of `xi^p eta^q` over the reference triangle.
    fn monomial(p: u32, q: u32) -> f64 {
        let f = |n: u32| (1..=n).map(f64::from).product::<f64>();
        f(p) * f(q) / f(p + q + 2)
    }

    #[test]
    fn weights_sum_to_area() {
        for d in [1, 2, 4, 8] {
            let r = QuadratureRule::new(d).unwrap();
            let s: f64 = r.weights.iter().sum();
            assert!((s - 0.5).abs() < 1e-14, "degree {d}: {s}");
            assert!(r.points.iter().all(|p| p[0] >= 0.0 && p[1] >= 0.0 && p[0] + p[1] <= 1.0));
        }
        assert_eq!(QuadratureRule::new(8).unwrap().len(), 16);
        assert_eq!(QuadratureRule::new(4).unwrap().len(), 6);
    }

    #[test]
    fn rules_are_exact_to_their_degree() {
        for d in [1, 2, 4, 8] {
            let r = QuadratureRule::new(d).unwrap();
            for p in 0..=d as u32 {
                for q in 0..=(d as u32 - p) {
                    let approx: f64 = r
                        .iter()
                        .map(|(x, w)| w * x[0].powi(p as i32) * x[1].powi(q as i32))
                        .sum();
                    let exact = monomial(p, q);
                    assert!(
                        ((approx - exact) / exact).abs() < 1e-13,
                        "degree {d} monomial ({p},{q}): {approx} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn low_rule_misses_higher_monomial() {
        let r = QuadratureRule::new(2).unwrap();
        let approx: f64 = r.iter().map(|(x, w)| w * x[0].powi(4)).sum();
        assert!((approx - monomial(4, 0)).abs() > 1e-4);
    }

    #[test]
    fn unsupported_degree() {
        assert!(QuadratureRule::new(9).is_err());
    }

    #[test]
    fn gauss_legendre_exactness() {
        for n in 1..=12 {
            let (x, w) = gauss_legendre(n);
            for k in 0..2 * n as i32 {
                let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k)).sum();
                let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
                assert!((approx - exact).abs() < 1e-14, "n={n} k={k}");
            }
        }
    }
}
