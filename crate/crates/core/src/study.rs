//! Solve drivers shared by the command line tool and the test suites:
//! single solves, convergence sequences, the hybrid/primal equivalence
//! check, the overshoot diagnostic and sampled coercivity.

use std::time::Instant;

use nalgebra::Point2;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bench::Benchmark;
use crate::coeffs::{face_coefficients, DiffusionField, FaceCoefficients, Scheme};
use crate::error::{Error, Result};
use crate::errors::{compute_errors, ecr, max_norm, ErrorReport};
use crate::forms::{assemble_with_coefficients, energy_matrix, DgFunction, DgSpace, Problem, SchemeSpec};
use crate::hybrid::solve_hip;
use crate::linalg::{solve, SolveReport, SolverOptions};
use crate::mesh::{DiagonalSplit, Mesh};

#[derive(Debug, Clone)]
pub struct Solution {
    pub u: DgFunction,
    pub report: SolveReport,
    /// The scheme's own face coefficients.
    pub coeffs: Vec<FaceCoefficients>,
}

/// Assembles and solves the primal system of `spec`.
pub fn solve_primal(space: &DgSpace, problem: &Problem, spec: &SchemeSpec, opts: &SolverOptions) -> Result<Solution> {
    spec.validate()?;
    if spec.k != space.degree() {
        return Err(Error::InvalidArgument(format!(
            "scheme degree {} does not match space degree {}",
            spec.k,
            space.degree()
        )));
    }
    let coeffs = face_coefficients(space.mesh(), space.skeleton(), &problem.diffusion, &spec.penalty())?;
    let system = assemble_with_coefficients(space, problem, spec.eps(), &coeffs)?;
    let mut opts = opts.clone();
    opts.block_size = system.block_size;
    let (x, report) = solve(&system.matrix, &system.rhs, &opts)?;
    log::debug!(
        "{} k={} dofs={} residual={:.2e}",
        spec.label(),
        spec.k,
        report.dim,
        report.relative_residual
    );
    Ok(Solution {
        u: DgFunction::from_vec(space, x)?,
        report,
        coeffs,
    })
}

/// One level of a convergence sequence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelResult {
    pub level: usize,
    pub n: usize,
    pub errors: ErrorReport,
    pub solver: SolveReport,
    /// Wall time of assembly, solve and error evaluation.
    pub time_s: f64,
}

/// Solves `bench` with `spec` on the structured `n x n` mesh.
pub fn run_level(
    bench: &Benchmark,
    spec: &SchemeSpec,
    n: usize,
    split: DiagonalSplit,
    opts: &SolverOptions,
) -> Result<(DgSpace, Solution, ErrorReport, f64)> {
    let start = Instant::now();
    let space = DgSpace::new(bench.mesh(n, split)?, spec.k)?;
    let sol = solve_primal(&space, &bench.problem(), spec, opts)?;
    // each scheme is measured in its own energy norm (jumps weighted by its own rho0)
    let errors = compute_errors(&space, &sol.u, &bench.exact, &bench.diffusion, &sol.coeffs)?;
    Ok((space, sol, errors, start.elapsed().as_secs_f64()))
}

/// Runs `spec` on the meshes `n` in `levels`, coarse to fine.
pub fn convergence(
    bench: &Benchmark,
    spec: &SchemeSpec,
    levels: &[usize],
    split: DiagonalSplit,
    opts: &SolverOptions,
) -> Result<Vec<LevelResult>> {
    levels
        .iter()
        .enumerate()
        .map(|(level, &n)| {
            let (_, sol, errors, time_s) = run_level(bench, spec, n, split, opts)?;
            log::info!(
                "{} k={} n={n}: l2 {:.3e} energy {:.3e}",
                spec.label(),
                spec.k,
                errors.err_l2,
                errors.err_energy
            );
            Ok(LevelResult {
                level,
                n,
                errors,
                solver: sol.report,
                time_s,
            })
        })
        .collect()
}

/// Rates of a selected error between consecutive levels; the first level
/// has none.
pub fn level_rates(levels: &[LevelResult], err: impl Fn(&ErrorReport) -> f64) -> Vec<Option<f64>> {
    std::iter::once(None)
        .chain(
            levels
                .windows(2)
                .map(|w| ecr(err(&w[0].errors), err(&w[1].errors), w[0].errors.h, w[1].errors.h)),
        )
        .collect()
}

/// Rate between the last two levels.
pub fn final_rate(levels: &[LevelResult], err: impl Fn(&ErrorReport) -> f64) -> Option<f64> {
    level_rates(levels, err).last().copied().flatten()
}

/// Hybrid versus primal solution on one mesh.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Equivalence {
    pub epsilon: i8,
    pub k: usize,
    pub h: f64,
    /// `max |u_hip - u_uip| / max |u_uip|` over quadrature points and vertices.
    pub discrepancy: f64,
    pub hip_report: SolveReport,
    pub uip_report: SolveReport,
}

/// Solves the hybrid system and the UIP system with the same face
/// coefficients and compares the two broken solutions.
pub fn equivalence(space: &DgSpace, problem: &Problem, spec: &SchemeSpec, opts: &SolverOptions) -> Result<Equivalence> {
    if spec.scheme != Scheme::Uip {
        return Err(Error::Config("the equivalence check needs the uip scheme".into()));
    }
    let primal = solve_primal(space, problem, spec, opts)?;
    let (hybrid, _, hip_report) = solve_hip(space, problem, spec.eps(), &primal.coeffs, opts)?;
    let scale = max_norm(space, &primal.u);
    let diff = max_norm(space, &primal.u.sub(&hybrid));
    Ok(Equivalence {
        epsilon: spec.epsilon,
        k: spec.k,
        h: space.mesh().h_max(),
        discrepancy: if scale > 0.0 { diff / scale } else { diff },
        hip_report,
        uip_report: primal.report,
    })
}

/// Bucket grid over a mesh for point location.
#[derive(Debug, Clone)]
pub struct PointLocator {
    origin: Point2<f64>,
    cell: [f64; 2],
    dims: [usize; 2],
    buckets: Vec<Vec<usize>>,
}

impl PointLocator {
    pub fn new(mesh: &Mesh) -> Self {
        let bb = mesh.bbox();
        let m = (mesh.num_triangles() as f64 / 2.0).sqrt().ceil().max(1.0) as usize;
        let cell = [bb.width() / m as f64, bb.height() / m as f64];
        let origin = bb.min;
        let mut buckets = vec![Vec::new(); m * m];
        let clamp = |v: f64| (v.max(0.0) as usize).min(m - 1);
        for e in 0..mesh.num_triangles() {
            let c = mesh.corners(e);
            let (x0, x1) = (c.iter().map(|p| p.x).fold(f64::INFINITY, f64::min), c.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max));
            let (y0, y1) = (c.iter().map(|p| p.y).fold(f64::INFINITY, f64::min), c.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max));
            let slack = 1e-9;
            let (i0, i1) = (clamp((x0 - origin.x) / cell[0] - slack), clamp((x1 - origin.x) / cell[0] + slack));
            let (j0, j1) = (clamp((y0 - origin.y) / cell[1] - slack), clamp((y1 - origin.y) / cell[1] + slack));
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets[j * m + i].push(e);
                }
            }
        }
        Self {
            origin,
            cell,
            dims: [m, m],
            buckets,
        }
    }

    /// First element (in element order) containing `p`, with the reference
    /// coordinates of `p` in it.
    pub fn locate(&self, space: &DgSpace, p: &Point2<f64>) -> Option<(usize, [f64; 2])> {
        let i = ((p.x - self.origin.x) / self.cell[0]).floor();
        let j = ((p.y - self.origin.y) / self.cell[1]).floor();
        if !(i > -1.0 && j > -1.0) {
            return None;
        }
        let i = (i.max(0.0) as usize).min(self.dims[0] - 1);
        let j = (j.max(0.0) as usize).min(self.dims[1] - 1);
        let tol = 1e-12;
        self.buckets[j * self.dims[0] + i].iter().find_map(|&e| {
            let r = space.map(e).to_reference(p);
            (r[0] >= -tol && r[1] >= -tol && r[0] + r[1] <= 1.0 + tol).then_some((e, r))
        })
    }
}

/// Over- and undershoot of a discrete solution on a uniform sample grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Overshoot {
    /// `max u_h - max u` over the grid.
    pub overshoot: f64,
    /// `min u - min u_h` over the grid.
    pub undershoot: f64,
}

impl Overshoot {
    /// The larger of the two excursions, floored at zero.
    pub fn diagnostic(&self) -> f64 {
        self.overshoot.max(self.undershoot).max(0.0)
    }
}

/// Samples `u_h` and the exact solution at the `m x m` nodes of a uniform
/// grid covering the mesh bounding box (boundary included).
pub fn sample_grid(space: &DgSpace, u: &DgFunction, m: usize) -> Result<Vec<(Point2<f64>, usize, f64)>> {
    if m < 2 {
        return Err(Error::InvalidArgument("sample grid needs m >= 2".into()));
    }
    let bb = *space.mesh().bbox();
    let locator = PointLocator::new(space.mesh());
    (0..m * m)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx % m, idx / m);
            let p = Point2::new(
                bb.min.x + bb.width() * i as f64 / (m - 1) as f64,
                bb.min.y + bb.height() * j as f64 / (m - 1) as f64,
            );
            let (e, xi) = locator
                .locate(space, &p)
                .ok_or_else(|| Error::Mesh(format!("sample point {p} is not covered by the mesh")))?;
            Ok((p, e, space.eval(u, e, xi).0))
        })
        .collect()
}

/// Overshoot diagnostic on a `m x m` sample grid.
pub fn overshoot(space: &DgSpace, u: &DgFunction, bench: &Benchmark, m: usize) -> Result<Overshoot> {
    let tris = space.mesh().triangles();
    let samples = sample_grid(space, u, m)?;
    let (mut hmax, mut hmin, mut emax, mut emin) = (f64::MIN, f64::MAX, f64::MIN, f64::MAX);
    for (p, e, v) in &samples {
        let ex = (bench.exact.value)(p, tris[*e].subdomain);
        hmax = hmax.max(*v);
        hmin = hmin.min(*v);
        emax = emax.max(ex);
        emin = emin.min(ex);
    }
    Ok(Overshoot {
        overshoot: hmax - emax,
        undershoot: emin - hmin,
    })
}

/// Smallest sampled ratio `a_h(v, v) / |||v|||^2` over `samples` random
/// coefficient vectors with entries uniform in `[-1, 1]`. The norm uses the
/// scheme's own `rho0`.
pub fn sampled_coercivity(
    space: &DgSpace,
    diffusion: &DiffusionField,
    spec: &SchemeSpec,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let problem = Problem::new(
        diffusion.clone(),
        std::sync::Arc::new(|_, _| 0.0),
        crate::forms::BoundaryData::homogeneous(),
    );
    let coeffs = face_coefficients(space.mesh(), space.skeleton(), diffusion, &spec.penalty())?;
    let a = assemble_with_coefficients(space, &problem, spec.eps(), &coeffs)?.matrix;
    let norm = energy_matrix(space, diffusion, &coeffs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..samples {
        let v: Vec<f64> = (0..space.ndof()).map(|_| rng.random_range(-1.0..=1.0)).collect();
        worst = worst.min(a.bilinear(&v, &v) / norm.bilinear(&v, &v));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::Benchmark;

    #[test]
    fn locator_agrees_with_linear_scan() {
        let bench = Benchmark::kellogg().unwrap();
        let space = DgSpace::new(bench.mesh(6, DiagonalSplit::Alternate).unwrap(), 1).unwrap();
        let loc = PointLocator::new(space.mesh());
        for i in 0..=20 {
            for j in 0..=20 {
                let p = Point2::new(-1.0 + 0.1 * i as f64, -1.0 + 0.1 * j as f64);
                let a = loc.locate(&space, &p).unwrap();
                let b = space.locate(&p).unwrap();
                assert_eq!(a.0, b.0, "{p}");
            }
        }
        assert!(loc.locate(&space, &Point2::new(1.5, 0.0)).is_none());
    }

    #[test]
    fn first_order_energy_halving() {
        let bench = Benchmark::test1(1.0).unwrap();
        let spec = SchemeSpec::uip(1, 1).unwrap();
        let levels = convergence(&bench, &spec, &[8, 16], DiagonalSplit::Alternate, &SolverOptions::default()).unwrap();
        let ratio = levels[0].errors.err_energy / levels[1].errors.err_energy;
        assert!((1.8..=2.2).contains(&ratio), "{ratio}");
        assert!(levels.iter().all(|l| l.solver.relative_residual <= 1e-10));
        assert_eq!(level_rates(&levels, |e| e.err_l2).len(), 2);
    }

    #[test]
    fn hybrid_matches_primal() {
        let bench = Benchmark::test1(10.0).unwrap();
        let space = DgSpace::new(bench.mesh(4, DiagonalSplit::Alternate).unwrap(), 2).unwrap();
        for eps in [-1, 0, 1] {
            let spec = SchemeSpec::uip(eps, 2).unwrap();
            let eq = equivalence(&space, &bench.problem(), &spec, &SolverOptions::default()).unwrap();
            assert!(eq.discrepancy <= 1e-8, "{eq:?}");
        }
    }

    #[test]
    fn coercivity_is_positive_for_the_symmetric_scheme() {
        let bench = Benchmark::test1(1e4).unwrap();
        let space = DgSpace::new(bench.mesh(4, DiagonalSplit::Alternate).unwrap(), 1).unwrap();
        let spec = SchemeSpec::uip(1, 1).unwrap();
        let r = sampled_coercivity(&space, &bench.diffusion, &spec, 20, 3).unwrap();
        assert!(r > 0.01 && r.is_finite(), "{r}");
        assert_eq!(r, sampled_coercivity(&space, &bench.diffusion, &spec, 20, 3).unwrap());
    }
}
