//! Diffusion tensors, one-sided stabilization parameters and the face
//! coefficients (weights, primal penalty, flux penalty) derived from them.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Skeleton, SubdomainId};

/// Coercivity threshold `2 * eta_0` for triangles.
pub const ALPHA0_THRESHOLD: f64 = 6.0;
pub const DEFAULT_ALPHA0: f64 = 8.0;

/// Symmetric positive definite 2x2 tensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tensor2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Tensor2 {
    pub fn new(xx: f64, xy: f64, yy: f64) -> Result<Self> {
        let t = Self { xx, xy, yy };
        let (lo, _) = t.eigenvalues();
        if !(xx.is_finite() && xy.is_finite() && yy.is_finite()) || lo <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "diffusion tensor [[{xx}, {xy}], [{xy}, {yy}]] is not positive definite"
            )));
        }
        Ok(t)
    }

    /// Builds a tensor from a full matrix, checking symmetry to `1e-14` relative.
    pub fn from_matrix(m: [[f64; 2]; 2]) -> Result<Self> {
        let scale = m.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
        if (m[0][1] - m[1][0]).abs() > 1e-14 * scale {
            return Err(Error::InvalidArgument(format!(
                "diffusion tensor is not symmetric: off-diagonal entries {} and {}",
                m[0][1], m[1][0]
            )));
        }
        Self::new(m[0][0], 0.5 * (m[0][1] + m[1][0]), m[1][1])
    }

    pub fn isotropic(k: f64) -> Result<Self> {
        Self::new(k, 0.0, k)
    }

    pub fn diagonal(a: f64, b: f64) -> Result<Self> {
        Self::new(a, 0.0, b)
    }

    pub fn identity() -> Self {
        Self { xx: 1.0, xy: 0.0, yy: 1.0 }
    }

    pub fn apply(&self, v: &Vector2<f64>) -> Vector2<f64> {
        Vector2::new(self.xx * v.x + self.xy * v.y, self.xy * v.x + self.yy * v.y)
    }

    /// `a^T kappa b`
    pub fn inner(&self, a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
        a.dot(&self.apply(b))
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.xx + self.yy);
        let d = (0.25 * (self.xx - self.yy).powi(2) + self.xy * self.xy).sqrt();
        (mean - d, mean + d)
    }
}

/// Piecewise-constant diffusion tensor, one per subdomain id.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionField {
    tensors: BTreeMap<SubdomainId, Tensor2>,
    fallback: Option<Tensor2>,
}

impl DiffusionField {
    pub fn uniform(t: Tensor2) -> Self {
        Self {
            tensors: BTreeMap::new(),
            fallback: Some(t),
        }
    }

    pub fn per_subdomain(tensors: impl IntoIterator<Item = (SubdomainId, Tensor2)>) -> Self {
        Self {
            tensors: tensors.into_iter().collect(),
            fallback: None,
        }
    }

    pub fn tensor(&self, subdomain: SubdomainId) -> Result<&Tensor2> {
        self.tensors
            .get(&subdomain)
            .or(self.fallback.as_ref())
            .ok_or_else(|| Error::InvalidArgument(format!("no diffusion tensor for subdomain {subdomain}")))
    }

    /// Checks that every element of `mesh` has a tensor and returns them in
    /// element order.
    pub fn element_tensors(&self, mesh: &Mesh) -> Result<Vec<Tensor2>> {
        mesh.triangles().iter().map(|t| self.tensor(t.subdomain).copied()).collect()
    }

    /// `kappa_max / kappa_min` over all tensors.
    pub fn contrast_ratio(&self) -> f64 {
        let all = self.tensors.values().chain(self.fallback.iter());
        let (lo, hi) = all.fold((f64::INFINITY, 0.0f64), |(lo, hi), t| {
            let (a, b) = t.eigenvalues();
            (lo.min(a), hi.max(b))
        });
        hi / lo
    }
}

/// `n^T kappa n` for a unit vector `n`.
pub fn normal_diffusivity(kappa: &Tensor2, n: &Vector2<f64>) -> Result<f64> {
    if (n.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!("normal ({}, {}) is not a unit vector", n.x, n.y)));
    }
    Ok(kappa.inner(n, n))
}

/// How the length scale in the stabilization parameter is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TauForm {
    /// `|F| / |E|`, the sharp discrete trace constant on simplices.
    Shape,
    /// `1 / h_E` with `h_E` the longest edge.
    #[default]
    Diameter,
}

impl fmt::Display for TauForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TauForm::Shape => "shape",
            TauForm::Diameter => "diameter",
        })
    }
}

impl FromStr for TauForm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shape" => Ok(TauForm::Shape),
            "diameter" => Ok(TauForm::Diameter),
            other => Err(Error::Config(format!("unknown tau form `{other}` (expected shape or diameter)"))),
        }
    }
}

/// `(k + 1)(k + 2) / 2`
pub fn trace_constant_sq(k: usize) -> f64 {
    ((k + 1) * (k + 2)) as f64 / 2.0
}

/// One-sided stabilization `alpha0 * C_T^2 * kappa_{E,F} * (|F| / |E|)` from raw
/// geometric quantities.
pub fn tau_value(alpha0: f64, k: usize, kappa_n: f64, length_scale_inv: f64) -> f64 {
    alpha0 * trace_constant_sq(k) * kappa_n * length_scale_inv
}

/// Stabilization parameter of element `e` on face `f`.
pub fn tau(
    mesh: &Mesh,
    skeleton: &Skeleton,
    kappa: &Tensor2,
    e: usize,
    f: usize,
    k: usize,
    alpha0: f64,
    form: TauForm,
) -> Result<f64> {
    if alpha0 <= 0.0 {
        return Err(Error::InvalidArgument(format!("alpha0 must be positive, got {alpha0}")));
    }
    let face = skeleton.face(f);
    if !face.sides().any(|s| s.element == e) {
        return Err(Error::InvalidArgument(format!("face {f} is not incident to element {e}")));
    }
    let kn = normal_diffusivity(kappa, &face.normal_from(e))?;
    let scale = match form {
        TauForm::Shape => face.length / mesh.area(e),
        TauForm::Diameter => 1.0 / mesh.diameter(e),
    };
    Ok(tau_value(alpha0, k, kn, scale))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Stabilization-weighted unified interior penalty.
    #[default]
    Uip,
    /// Diffusivity-weighted symmetric interior penalty.
    Swip,
    /// Plain arithmetic-mean interior penalty with a face-averaged parameter.
    Ipf,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Uip => "uip",
            Scheme::Swip => "swip",
            Scheme::Ipf => "ipf",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uip" => Ok(Scheme::Uip),
            "swip" => Ok(Scheme::Swip),
            "ipf" => Ok(Scheme::Ipf),
            other => Err(Error::Config(format!("unknown scheme `{other}` (expected uip, swip or ipf)"))),
        }
    }
}

/// Face coefficients. Index 0 is the left element, index 1 the right one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FaceCoefficients {
    /// One-sided stabilization parameters (`tau[1] = 0` on boundary faces).
    pub tau: [f64; 2],
    pub omega: [f64; 2],
    /// Primal jump penalty.
    pub rho0: f64,
    /// Flux jump penalty.
    pub rho1: f64,
    /// `gamma . n_left = (omega_1 - omega_2) / 2`.
    pub gamma_n: f64,
    pub boundary: bool,
}

impl FaceCoefficients {
    /// Stabilization-weighted coefficients of an interior face.
    pub fn from_taus(tau1: f64, tau2: f64) -> Self {
        let sum = tau1 + tau2;
        let omega = [tau1 / sum, tau2 / sum];
        Self {
            tau: [tau1, tau2],
            omega,
            rho0: tau1 * tau2 / sum,
            rho1: 1.0 / sum,
            gamma_n: 0.5 * (omega[0] - omega[1]),
            boundary: false,
        }
    }

    pub fn boundary(tau: f64) -> Self {
        Self {
            tau: [tau, 0.0],
            omega: [1.0, 0.0],
            rho0: tau,
            rho1: 0.0,
            gamma_n: 0.0,
            boundary: true,
        }
    }

    /// Conjugate weighted mean `omega_2 a_1 + omega_1 a_2`.
    pub fn conj_mean(&self, a1: f64, a2: f64) -> f64 {
        self.omega[1] * a1 + self.omega[0] * a2
    }

    pub fn weighted_mean(&self, a1: f64, a2: f64) -> f64 {
        self.omega[0] * a1 + self.omega[1] * a2
    }
}

/// What to do when `alpha0` is at or below the coercivity threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LowPenalty {
    #[default]
    Reject,
    Warn,
}

/// Checks `alpha0 > 0` always and `alpha0 > 6` unless `mode` is [`LowPenalty::Warn`].
pub fn validate_alpha0(alpha0: f64, mode: LowPenalty) -> Result<()> {
    if !(alpha0 > 0.0) || !alpha0.is_finite() {
        return Err(Error::Config(format!("alpha0 must be positive and finite, got {alpha0}")));
    }
    if alpha0 <= ALPHA0_THRESHOLD {
        let msg = format!(
            "alpha0 = {alpha0} does not exceed the coercivity threshold {ALPHA0_THRESHOLD}; \
             pass --allow-low-penalty to run anyway"
        );
        match mode {
            LowPenalty::Reject => return Err(Error::Config(msg)),
            LowPenalty::Warn => log::warn!("{msg}"),
        }
    }
    Ok(())
}

/// Parameters that determine the face coefficient table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltySpec {
    pub scheme: Scheme,
    pub k: usize,
    pub alpha0: f64,
    pub tau_form: TauForm,
    pub low_penalty: LowPenalty,
}

impl PenaltySpec {
    pub fn new(scheme: Scheme, k: usize) -> Self {
        Self {
            scheme,
            k,
            alpha0: DEFAULT_ALPHA0,
            tau_form: TauForm::default(),
            low_penalty: LowPenalty::Reject,
        }
    }

    /// Short description of the penalty normalization, for output metadata.
    pub fn describe(&self) -> String {
        let ct = "C_T^2=(k+1)(k+2)/2";
        let len = match self.tau_form {
            TauForm::Shape => "|F|/|E|",
            TauForm::Diameter => "1/h_E",
        };
        match self.scheme {
            Scheme::Uip => format!(
                "uip: tau=alpha0*{ct}*kappa_n*{len}; omega=tau_i/(tau1+tau2); rho0=tau1*tau2/(tau1+tau2); rho1=1/(tau1+tau2)"
            ),
            Scheme::Swip => format!(
                "swip: omega=kappa_i/(kappa1+kappa2); rho0=alpha0*{ct}*2*kappa1*kappa2/(kappa1+kappa2)*mean({len}); rho1=0"
            ),
            Scheme::Ipf => format!(
                "ipf: tau_F=mean(tau1,tau2) with tau=alpha0*{ct}*kappa_n*{len}; omega=1/2; rho0=tau_F/2; rho1=1/(2*tau_F)"
            ),
        }
    }
}

/// Face coefficients for every face of `skeleton`, in face order.
pub fn face_coefficients(
    mesh: &Mesh,
    skeleton: &Skeleton,
    diffusion: &DiffusionField,
    spec: &PenaltySpec,
) -> Result<Vec<FaceCoefficients>> {
    validate_alpha0(spec.alpha0, spec.low_penalty)?;
    let kappas = diffusion.element_tensors(mesh)?;
    let mut table = Vec::with_capacity(skeleton.num_faces());
    for (f, face) in skeleton.faces().iter().enumerate() {
        let e1 = face.left.element;
        let t1 = tau(mesh, skeleton, &kappas[e1], e1, f, spec.k, spec.alpha0, spec.tau_form)?;
        let Some(right) = face.right else {
            table.push(FaceCoefficients::boundary(t1));
            continue;
        };
        let e2 = right.element;
        let t2 = tau(mesh, skeleton, &kappas[e2], e2, f, spec.k, spec.alpha0, spec.tau_form)?;
        let c = match spec.scheme {
            Scheme::Uip => FaceCoefficients::from_taus(t1, t2),
            Scheme::Ipf => {
                let tf = 0.5 * (t1 + t2);
                FaceCoefficients {
                    tau: [t1, t2],
                    omega: [0.5, 0.5],
                    rho0: 0.5 * tf,
                    rho1: 0.5 / tf,
                    gamma_n: 0.0,
                    boundary: false,
                }
            }
            Scheme::Swip => {
                let k1 = normal_diffusivity(&kappas[e1], &face.normal)?;
                let k2 = normal_diffusivity(&kappas[e2], &face.normal)?;
                let scale = |e: usize| match spec.tau_form {
                    TauForm::Shape => face.length / mesh.area(e),
                    TauForm::Diameter => 1.0 / mesh.diameter(e),
                };
                let harmonic = 2.0 * k1 * k2 / (k1 + k2);
                let sigma = tau_value(spec.alpha0, spec.k, harmonic, 0.5 * (scale(e1) + scale(e2)));
                let omega = [k1 / (k1 + k2), k2 / (k1 + k2)];
                FaceCoefficients {
                    tau: [t1, t2],
                    omega,
                    rho0: sigma,
                    rho1: 0.0,
                    gamma_n: 0.5 * (omega[0] - omega[1]),
                    boundary: false,
                }
            }
        };
        table.push(c);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_skeleton, generate_structured, BoundingBox, DiagonalSplit, Partition};
    use approx::assert_relative_eq;

    #[test]
    fn normal_diffusivity_examples() {
        let lambda = 1e4;
        let k = Tensor2::diagonal(lambda, 1.0).unwrap();
        assert_eq!(normal_diffusivity(&k, &Vector2::new(1.0, 0.0)).unwrap(), lambda);
        let n = Vector2::new(0.6, 0.8);
        assert_relative_eq!(normal_diffusivity(&Tensor2::identity(), &n).unwrap(), 1.0, epsilon = 1e-15);
        let five = Tensor2::isotropic(5.0).unwrap();
        assert_eq!(normal_diffusivity(&five, &Vector2::new(0.0, 1.0)).unwrap(), 5.0);
        assert!(normal_diffusivity(&five, &Vector2::new(1.0, 1.0)).is_err());
    }

    #[test]
    fn tensor_validation() {
        assert!(Tensor2::new(1.0, 2.0, 1.0).is_err());
        assert!(Tensor2::from_matrix([[1.0, 0.1], [0.2, 1.0]]).is_err());
        assert!(Tensor2::from_matrix([[2.0, 0.5], [0.5, 1.0]]).is_ok());
        let field = DiffusionField::per_subdomain([(1, Tensor2::isotropic(5.0).unwrap()), (2, Tensor2::identity())]);
        assert_relative_eq!(field.contrast_ratio(), 5.0);
        assert!(field.tensor(3).is_err());
    }

    fn unit_right_triangle_mesh() -> (Mesh, Skeleton) {
        let mesh = generate_structured(1, &BoundingBox::unit_square(), DiagonalSplit::Right, Partition::None).unwrap();
        let sk = build_skeleton(&mesh).unwrap();
        (mesh, sk)
    }

    #[test]
    fn tau_on_hypotenuse() {
        let (mesh, sk) = unit_right_triangle_mesh();
        let f = sk.interior_faces()[0];
        let t = tau(&mesh, &sk, &Tensor2::identity(), 0, f, 1, 8.0, TauForm::Shape).unwrap();
        assert_relative_eq!(t, 48.0 * 2f64.sqrt(), epsilon = 1e-12);
        let t2 = tau(&mesh, &sk, &Tensor2::isotropic(2.0).unwrap(), 0, f, 1, 8.0, TauForm::Shape).unwrap();
        assert_relative_eq!(t2, 2.0 * t, epsilon = 1e-12);
        let foreign = sk.element_faces(1).into_iter().find(|&g| !sk.face(g).is_interior()).unwrap();
        assert!(tau(&mesh, &sk, &Tensor2::identity(), 0, foreign, 1, 8.0, TauForm::Shape).is_err());
        assert!(tau(&mesh, &sk, &Tensor2::identity(), 0, f, 1, 0.0, TauForm::Shape).is_err());
    }

    #[test]
    fn refinement_doubles_tau() {
        let (mesh, sk) = unit_right_triangle_mesh();
        let fine = crate::mesh::refine_uniform(&mesh).unwrap();
        let fsk = build_skeleton(&fine).unwrap();
        let coarse = tau(&mesh, &sk, &Tensor2::identity(), 0, sk.element_faces(0)[0], 2, 8.0, TauForm::Shape).unwrap();
        // child 0 of element 0 keeps the direction of its parent's first edge
        let fine_tau = tau(&fine, &fsk, &Tensor2::identity(), 0, fsk.element_faces(0)[0], 2, 8.0, TauForm::Shape).unwrap();
        assert_relative_eq!(fine_tau, 2.0 * coarse, epsilon = 1e-12);
    }

    #[test]
    fn coefficient_examples() {
        let c = FaceCoefficients::from_taus(3.0, 3.0);
        assert_eq!(c.omega, [0.5, 0.5]);
        assert_relative_eq!(c.rho0, 1.5);
        assert_relative_eq!(c.rho1, 1.0 / 6.0);
        assert_eq!(c.gamma_n, 0.0);

        let c = FaceCoefficients::from_taus(2.0, 6.0);
        assert_eq!(c.omega, [0.25, 0.75]);
        assert_eq!(c.rho0, 1.5);
        assert_eq!(c.rho1, 0.125);
        assert_eq!(c.gamma_n, -0.25);
        assert_eq!(c.weighted_mean(1.0, 3.0), 2.5);
        assert_eq!(c.conj_mean(1.0, 3.0), 1.5);

        assert_eq!(FaceCoefficients::boundary(10.0).rho0, 10.0);
    }

    #[test]
    fn weights_follow_contrast() {
        let tau2 = 1.0;
        let mut last = FaceCoefficients::from_taus(tau2, tau2);
        for ratio in [10.0, 1e4, 1e8] {
            let c = FaceCoefficients::from_taus(ratio * tau2, tau2);
            assert!(c.omega[0] > last.omega[0] && c.rho0 > last.rho0);
            assert!(c.rho0 <= tau2);
            last = c;
        }
        assert!((1.0 - last.omega[0]) < 1e-7);
        assert!((tau2 - last.rho0) < 1e-7);
    }

    #[test]
    fn low_penalty_policy() {
        assert!(validate_alpha0(8.0, LowPenalty::Reject).is_ok());
        assert!(matches!(validate_alpha0(6.0, LowPenalty::Reject), Err(Error::Config(_))));
        assert!(validate_alpha0(4.0, LowPenalty::Warn).is_ok());
        assert!(validate_alpha0(-1.0, LowPenalty::Warn).is_err());
    }

    fn quadrant_field(k1: Tensor2, k2: Tensor2) -> DiffusionField {
        DiffusionField::per_subdomain([(1, k1), (2, k2), (3, k1), (4, k2)])
    }

    #[test]
    fn uniform_mesh_weights_are_diffusivity_weights() {
        let bbox = BoundingBox::new(-1.0, 1.0, -1.0, 1.0).unwrap();
        let mesh = generate_structured(4, &bbox, DiagonalSplit::Right, Partition::Quadrants).unwrap();
        let sk = build_skeleton(&mesh).unwrap();
        let field = quadrant_field(Tensor2::isotropic(5.0).unwrap(), Tensor2::identity());
        let uip = face_coefficients(&mesh, &sk, &field, &PenaltySpec::new(Scheme::Uip, 1)).unwrap();
        let swip = face_coefficients(&mesh, &sk, &field, &PenaltySpec::new(Scheme::Swip, 1)).unwrap();
        let mut seen_interface = false;
        for &f in sk.interior_faces() {
            let face = sk.face(f);
            let r = face.right.unwrap().element;
            // equal |F|/|E| on both sides on this mesh
            if (face.length / mesh.area(face.left.element) - face.length / mesh.area(r)).abs() > 1e-12 {
                continue;
            }
            let k1 = normal_diffusivity(field.tensor(mesh.triangles()[face.left.element].subdomain).unwrap(), &face.normal).unwrap();
            let k2 = normal_diffusivity(field.tensor(mesh.triangles()[r].subdomain).unwrap(), &face.normal).unwrap();
            assert!((uip[f].omega[0] - k1 / (k1 + k2)).abs() < 1e-13);
            assert!((uip[f].omega[0] - swip[f].omega[0]).abs() < 1e-13);
            if k1 != k2 {
                seen_interface = true;
                let w5 = if k1 == 5.0 { swip[f].omega[0] } else { swip[f].omega[1] };
                assert_relative_eq!(w5, 5.0 / 6.0, epsilon = 1e-15);
            }
        }
        assert!(seen_interface);
    }

    #[test]
    fn ipf_matches_uip_on_homogeneous_uniform_mesh() {
        let mesh = generate_structured(4, &BoundingBox::unit_square(), DiagonalSplit::Right, Partition::None).unwrap();
        let sk = build_skeleton(&mesh).unwrap();
        let field = DiffusionField::uniform(Tensor2::identity());
        let uip = face_coefficients(&mesh, &sk, &field, &PenaltySpec::new(Scheme::Uip, 2)).unwrap();
        let ipf = face_coefficients(&mesh, &sk, &field, &PenaltySpec::new(Scheme::Ipf, 2)).unwrap();
        for (a, b) in uip.iter().zip(&ipf) {
            assert_relative_eq!(a.rho0, b.rho0, max_relative = 1e-14);
            assert_relative_eq!(a.rho1, b.rho1, max_relative = 1e-14);
            assert_eq!(a.omega, b.omega);
        }
    }
}
