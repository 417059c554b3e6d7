//! The two benchmark problems: a smooth manufactured solution under a
//! strongly anisotropic checkerboard tensor, and the Kellogg interface
//! problem with its singular solution.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{Point2, Vector2};
use serde::{Deserialize, Serialize};

use crate::coeffs::{DiffusionField, Tensor2};
use crate::error::{Error, Result};
use crate::errors::ExactSolution;
use crate::forms::{BoundaryData, PointFn, Problem};
use crate::mesh::{generate_structured, BoundingBox, DiagonalSplit, Mesh, Partition, SubdomainId};

/// Singular exponent of the Kellogg solution.
pub const KELLOGG_ALPHA: f64 = 0.5354409456;
/// Tabulated sector coefficients, sector `j` covering `[j pi/2, (j+1) pi/2)`.
pub const KELLOGG_A: [f64; 4] = [0.4472, -0.7454, -0.9441, -2.4017];
pub const KELLOGG_B: [f64; 4] = [1.0, 2.3333, 0.5556, -0.4815];
/// Largest interface mismatch accepted by the assignment scan. The tabulated
/// coefficients carry four significant digits, which leaves a residual
/// mismatch of order 1e-4 even for the correct assignment.
pub const KELLOGG_SCAN_TOL: f64 = 1e-3;
const KELLOGG_CONTRAST: f64 = 5.0;
const SCAN_RADII: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase", deny_unknown_fields)]
pub enum TestCase {
    Test1 { lambda: f64 },
    Kellogg,
}

impl fmt::Display for TestCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestCase::Test1 { lambda } => write!(f, "test1(lambda={lambda:e})"),
            TestCase::Kellogg => f.write_str("kellogg"),
        }
    }
}

impl FromStr for TestCase {
    type Err = Error;

    /// `test1`, `test1:<lambda>` or `kellogg`.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "kellogg" => Ok(TestCase::Kellogg),
            None if s == "test1" => Ok(TestCase::Test1 { lambda: 1.0 }),
            Some(("test1", l)) => l
                .parse()
                .map(|lambda| TestCase::Test1 { lambda })
                .map_err(|_| Error::InvalidArgument(format!("bad lambda `{l}`"))),
            _ => Err(Error::InvalidArgument(format!("unknown test case `{s}`"))),
        }
    }
}

/// Point value, gradient and source of a benchmark at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactValue {
    pub value: f64,
    pub gradient: Vector2<f64>,
    pub source: f64,
}

/// Angular sector (0..4) of each quadrant subdomain id.
pub fn sector_of_subdomain(sub: SubdomainId) -> Result<usize> {
    match sub {
        3 => Ok(0),
        4 => Ok(1),
        1 => Ok(2),
        2 => Ok(3),
        other => Err(Error::InvalidArgument(format!("subdomain {other} is not a quadrant"))),
    }
}

/// Polar angle of `p` on the branch closest to the middle of `sector`, so
/// that points on an interface ray get the angle seen from their own side.
fn sector_angle(p: &Point2<f64>, sector: usize) -> f64 {
    let theta = p.y.atan2(p.x);
    let center = (sector as f64 + 0.5) * FRAC_PI_2;
    [theta, theta + 2.0 * PI]
        .into_iter()
        .min_by(|a, b| (a - center).abs().total_cmp(&(b - center).abs()))
        .unwrap()
}

/// `mu(theta) = a sin(alpha theta) + b cos(alpha theta)` and its derivative.
fn mu(a: f64, b: f64, alpha: f64, theta: f64) -> (f64, f64) {
    let (s, c) = (alpha * theta).sin_cos();
    (a * s + b * c, alpha * (a * c - b * s))
}

/// Coefficients of the Kellogg solution in each angular sector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KelloggAssignment {
    /// Cyclic shift: sector `j` uses table row `(j + shift) % 4`.
    pub shift: usize,
    pub a: [f64; 4],
    pub b: [f64; 4],
    pub value_mismatch: f64,
    pub flux_mismatch: f64,
}

impl KelloggAssignment {
    /// `subdomain -> table row` pairs for the run metadata.
    pub fn describe(&self) -> String {
        [1, 2, 3, 4]
            .iter()
            .map(|&s| {
                let j = sector_of_subdomain(s).unwrap();
                format!("omega{s}->row{}", (j + self.shift) % 4 + 1)
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn sector_kappa(sector: usize) -> f64 {
    if sector.is_multiple_of(2) {
        KELLOGG_CONTRAST
    } else {
        1.0
    }
}

/// Interface mismatches of one candidate assignment: the largest jump of
/// `u` and of the angular flux `kappa du/dtheta / r^alpha` over the four
/// rays, sampled at 20 radii in `(0, 1]`.
pub fn kellogg_interface_defect(a: &[f64; 4], b: &[f64; 4], alpha: f64) -> (f64, f64) {
    let (mut dv, mut df) = (0.0f64, 0.0f64);
    for ray in 0..4 {
        let before = (ray + 3) % 4;
        let theta = ray as f64 * FRAC_PI_2;
        let theta_before = if ray == 0 { 2.0 * PI } else { theta };
        let (m1, d1) = mu(a[before], b[before], alpha, theta_before);
        let (m2, d2) = mu(a[ray], b[ray], alpha, theta);
        for i in 1..=SCAN_RADII {
            let r = i as f64 / SCAN_RADII as f64;
            dv = dv.max(r.powf(alpha) * (m1 - m2).abs());
            // The flux shares the factor r^(alpha - 1) on both sides.
            df = df.max((sector_kappa(before) * d1 - sector_kappa(ray) * d2).abs());
        }
    }
    (dv, df)
}

/// Picks the cyclic assignment of the tabulated `(a_i, b_i)` to the four
/// sectors that makes `u` and its normal flux continuous.
///
/// Fails with a defect table if no shift passes `tol`.
pub fn kellogg_quadrant_assignment(a: &[f64; 4], b: &[f64; 4], alpha: f64, tol: f64) -> Result<KelloggAssignment> {
    let mut table = Vec::new();
    let mut best: Option<KelloggAssignment> = None;
    for shift in 0..4 {
        let ra: [f64; 4] = std::array::from_fn(|j| a[(j + shift) % 4]);
        let rb: [f64; 4] = std::array::from_fn(|j| b[(j + shift) % 4]);
        let (dv, df) = kellogg_interface_defect(&ra, &rb, alpha);
        table.push(format!("shift {shift}: value {dv:.3e}, flux {df:.3e}"));
        if dv <= tol && df <= tol {
            if best.is_some() {
                return Err(Error::Check(format!("several assignments pass: {}", table.join("; "))));
            }
            best = Some(KelloggAssignment {
                shift,
                a: ra,
                b: rb,
                value_mismatch: dv,
                flux_mismatch: df,
            });
        }
    }
    best.ok_or_else(|| Error::Check(format!("no Kellogg assignment is continuous: {}", table.join("; "))))
}

/// A fully specified benchmark.
#[derive(Clone)]
pub struct Benchmark {
    pub case: TestCase,
    pub bbox: BoundingBox,
    pub diffusion: DiffusionField,
    pub exact: ExactSolution,
    pub source: PointFn,
    /// Set for the Kellogg problem.
    pub assignment: Option<KelloggAssignment>,
}

impl fmt::Debug for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Benchmark")
            .field("case", &self.case)
            .field("bbox", &self.bbox)
            .field("assignment", &self.assignment)
            .finish_non_exhaustive()
    }
}

impl Benchmark {
    pub fn new(case: TestCase) -> Result<Self> {
        match case {
            TestCase::Test1 { lambda } => Self::test1(lambda),
            TestCase::Kellogg => Self::kellogg(),
        }
    }

    pub fn test1(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::Config(format!("lambda must be positive, got {lambda}")));
        }
        let k13 = Tensor2::diagonal(lambda, 1.0)?;
        let k24 = Tensor2::diagonal(1.0, 1.0 / lambda)?;
        let diffusion = DiffusionField::per_subdomain([(1, k13), (2, k24), (3, k13), (4, k24)]);
        let trace = move |sub: SubdomainId| if sub % 2 == 1 { lambda + 1.0 } else { 1.0 + 1.0 / lambda };
        Ok(Self {
            case: TestCase::Test1 { lambda },
            bbox: BoundingBox::unit_square(),
            diffusion,
            exact: ExactSolution {
                value: Arc::new(|p, _| (PI * p.x).sin() * (PI * p.y).sin()),
                gradient: Arc::new(|p, _| {
                    let (sx, cx) = (PI * p.x).sin_cos();
                    let (sy, cy) = (PI * p.y).sin_cos();
                    Vector2::new(PI * cx * sy, PI * sx * cy)
                }),
            },
            source: Arc::new(move |p, sub| trace(sub) * PI * PI * (PI * p.x).sin() * (PI * p.y).sin()),
            assignment: None,
        })
    }

    pub fn kellogg() -> Result<Self> {
        let asg = kellogg_quadrant_assignment(&KELLOGG_A, &KELLOGG_B, KELLOGG_ALPHA, KELLOGG_SCAN_TOL)?;
        let (a, b) = (asg.a, asg.b);
        let alpha = KELLOGG_ALPHA;
        let big = Tensor2::isotropic(KELLOGG_CONTRAST)?;
        let one = Tensor2::identity();
        let diffusion = DiffusionField::per_subdomain([(1, big), (2, one), (3, big), (4, one)]);
        let value = move |p: &Point2<f64>, sub: SubdomainId| {
            let j = sector_of_subdomain(sub).expect("Kellogg subdomains are quadrants");
            let r = p.coords.norm();
            if r == 0.0 {
                return 0.0;
            }
            r.powf(alpha) * mu(a[j], b[j], alpha, sector_angle(p, j)).0
        };
        let gradient = move |p: &Point2<f64>, sub: SubdomainId| {
            let j = sector_of_subdomain(sub).expect("Kellogg subdomains are quadrants");
            let r = p.coords.norm();
            assert!(r > 0.0, "the Kellogg gradient is singular at the origin");
            let theta = sector_angle(p, j);
            let (m, dm) = mu(a[j], b[j], alpha, theta);
            let (s, c) = theta.sin_cos();
            let e_r = Vector2::new(c, s);
            let e_t = Vector2::new(-s, c);
            (e_r * (alpha * m) + e_t * dm) * r.powf(alpha - 1.0)
        };
        Ok(Self {
            case: TestCase::Kellogg,
            bbox: BoundingBox::new(-1.0, 1.0, -1.0, 1.0)?,
            diffusion,
            exact: ExactSolution {
                value: Arc::new(value),
                gradient: Arc::new(gradient),
            },
            source: Arc::new(|_, _| 0.0),
            assignment: Some(asg),
        })
    }

    /// Value, gradient and source at `p`. The gradient of the Kellogg
    /// solution does not exist at the origin.
    pub fn exact_eval(&self, p: &Point2<f64>, sub: SubdomainId) -> Result<ExactValue> {
        if self.case == TestCase::Kellogg && p.coords.norm() == 0.0 {
            return Err(Error::InvalidArgument("the Kellogg gradient is singular at r = 0".into()));
        }
        Ok(ExactValue {
            value: (self.exact.value)(p, sub),
            gradient: (self.exact.gradient)(p, sub),
            source: (self.source)(p, sub),
        })
    }

    /// Dirichlet data on the whole boundary: the exact solution.
    pub fn problem(&self) -> Problem {
        Problem::new(
            self.diffusion.clone(),
            self.source.clone(),
            BoundaryData::dirichlet(self.exact.value.clone()),
        )
    }

    /// Structured `n x n` mesh of the benchmark domain, partitioned into
    /// quadrants.
    pub fn mesh(&self, n: usize, split: DiagonalSplit) -> Result<Mesh> {
        generate_structured(n, &self.bbox, split, Partition::Quadrants)
    }

    /// Quadrant id of a point (ties go to the lower-left side).
    pub fn subdomain_at(&self, p: &Point2<f64>) -> SubdomainId {
        Partition::Quadrants.classify(&self.bbox, p)
    }
}
