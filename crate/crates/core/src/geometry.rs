//! Pointwise geometry of spacelike graphs in Minkowski space.
//!
//! For a graph `x_{n+1} = u(x)` with `|Du| < 1` the curvature endomorphism is
//!
//! ```text
//! A = ν (I + Du Duᵀ / (1 - |Du|²)) D²u,      ν = 1 / √(1 - |Du|²)
//! ```
//!
//! and its eigenvalues are the principal curvatures. Writing `B = I + ν² Du Duᵀ`,
//! `A = ν B D²u` is similar to the symmetric matrix `B^{1/2} (ν D²u) B^{1/2}`, which is
//! how the principal curvatures are computed here. Sign convention: upward
//! hyperboloids have positive curvatures.
//!
//! The solver never diagonalizes: `σ₂` is evaluated through
//! `σ₂(A) = ½((tr A)² - tr A²)`, which reduces to O(n²) work using `w = D²u·Du`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative step for the finite-difference derivative of `H₂` in the gradient slot.
pub const GRADIENT_FD_STEP: f64 = 1e-6;

/// Largest dimension handled by the allocation-free hot path.
pub const MAX_DIM: usize = 8;

/// First and second derivatives of a function at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointJet {
    grad: DVector<f64>,
    hess: DMatrix<f64>,
    nu: f64,
}

impl PointJet {
    /// Builds a jet, checking `|Du| < 1` and the symmetry of `D²u`.
    pub fn new(grad: DVector<f64>, hess: DMatrix<f64>) -> Result<Self> {
        let n = grad.len();
        if n < 2 {
            return Err(Error::Domain(format!("dimension must be >= 2, got {n}")));
        }
        if hess.nrows() != n || hess.ncols() != n {
            return Err(Error::Domain(format!(
                "hessian is {}x{}, expected {n}x{n}",
                hess.nrows(),
                hess.ncols()
            )));
        }
        let scale = hess.amax().max(1.0);
        for i in 0..n {
            for j in 0..i {
                if (hess[(i, j)] - hess[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::Domain(format!("hessian not symmetric at ({i},{j})")));
                }
            }
        }
        let nu = tilt_factor(grad.as_slice()).ok_or_else(|| Error::NotSpacelike {
            location: "jet".into(),
            slope: grad.norm(),
        })?;
        Ok(Self { grad, hess, nu })
    }

    pub fn from_slices(grad: &[f64], hess_row_major: &[f64]) -> Result<Self> {
        let n = grad.len();
        if hess_row_major.len() != n * n {
            return Err(Error::Domain("hessian length does not match dimension".into()));
        }
        Self::new(
            DVector::from_column_slice(grad),
            DMatrix::from_row_slice(n, n, hess_row_major),
        )
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    pub fn grad(&self) -> &DVector<f64> {
        &self.grad
    }

    pub fn hess(&self) -> &DMatrix<f64> {
        &self.hess
    }

    /// Tilt factor `ν = -⟨e_{n+1}, N⟩ = 1/√(1-|Du|²)`.
    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// `|∇u|²` for the induced metric, i.e. `ν²|Du|²`; equals `ν² - 1`.
    pub fn intrinsic_grad_norm_sq(&self) -> f64 {
        self.nu * self.nu * self.grad.norm_squared()
    }

    /// `B = I + ν² Du Duᵀ`, the matrix factor of the endomorphism.
    pub fn metric_factor(&self) -> DMatrix<f64> {
        let n = self.dim();
        let nu2 = self.nu * self.nu;
        DMatrix::identity(n, n) + &self.grad * self.grad.transpose() * nu2
    }

    /// Positive square root of `B`: `I + (ν - 1) ĝ ĝᵀ` with `ĝ = Du/|Du|`.
    pub fn metric_factor_sqrt(&self) -> DMatrix<f64> {
        let n = self.dim();
        let g2 = self.grad.norm_squared();
        if g2 == 0.0 {
            return DMatrix::identity(n, n);
        }
        DMatrix::identity(n, n) + &self.grad * self.grad.transpose() * ((self.nu - 1.0) / g2)
    }
}

/// `1/√(1-|p|²)`, or `None` when `p` is not spacelike.
pub fn tilt_factor(grad: &[f64]) -> Option<f64> {
    let g2: f64 = grad.iter().map(|g| g * g).sum();
    if g2 < 1.0 && g2.is_finite() {
        Some(1.0 / (1.0 - g2).sqrt())
    } else {
        None
    }
}

/// Principal curvatures and the symmetric functions built from them.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalCurvatures {
    lambdas: Vec<f64>,
    sigma1: f64,
    sigma2: f64,
    sigma1_partials: Vec<f64>,
}

impl PrincipalCurvatures {
    /// Fills `σ₁`, `σ₂` and `σ_{1,i} = σ₁ - λ_i`; sorts `λ` descending.
    pub fn from_lambdas(mut lambdas: Vec<f64>) -> Self {
        lambdas.sort_by(|a, b| b.total_cmp(a));
        let sigma1 = lambdas.iter().sum();
        let sigma2 = sigma_k(&lambdas, 2);
        let sigma1_partials = lambdas.iter().map(|l| sigma1 - l).collect();
        Self {
            lambdas,
            sigma1,
            sigma2,
            sigma1_partials,
        }
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn sigma1(&self) -> f64 {
        self.sigma1
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// `σ_{1,i}`, the sum of all curvatures except `λ_i`.
    pub fn sigma1_partials(&self) -> &[f64] {
        &self.sigma1_partials
    }

    pub fn dim(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_admissible(&self) -> bool {
        is_admissible(self)
    }

    pub fn margin(&self) -> f64 {
        admissibility_margin(self.sigma1, self.sigma2)
    }

    /// `((n-1)/(2n)) σ₁² - σ₂`; nonnegative whenever `σ₁, σ₂ ≥ 0`.
    pub fn maclaurin_slack(&self) -> f64 {
        let n = self.dim() as f64;
        (n - 1.0) / (2.0 * n) * self.sigma1 * self.sigma1 - self.sigma2
    }
}

/// `k`-th elementary symmetric polynomial of `values`.
pub fn sigma_k(values: &[f64], k: usize) -> f64 {
    // e[j] accumulates σ_j of the prefix processed so far.
    let mut e = vec![0.0; k + 1];
    e[0] = 1.0;
    for &v in values {
        for j in (1..=k).rev() {
            e[j] += v * e[j - 1];
        }
    }
    e[k]
}

/// The curvature endomorphism `A = ν B D²u`.
pub fn curvature_endomorphism(jet: &PointJet) -> DMatrix<f64> {
    jet.metric_factor() * jet.hess() * jet.nu()
}

/// Principal curvatures from the symmetrized endomorphism `B^{1/2}(ν D²u)B^{1/2}`.
pub fn principal_curvatures(jet: &PointJet) -> Result<PrincipalCurvatures> {
    let root = jet.metric_factor_sqrt();
    let mut sym = &root * jet.hess() * &root * jet.nu();
    // Remove rounding asymmetry so the eigen-solver sees an exactly symmetric matrix.
    let t = sym.transpose();
    sym = (sym + t) * 0.5;
    let eig = sym
        .clone()
        .try_symmetric_eigen(1e-15, 10_000)
        .ok_or_else(|| Error::Numeric(format!("symmetric eigen-solver did not converge on {sym}")))?;
    Ok(PrincipalCurvatures::from_lambdas(
        eig.eigenvalues.iter().copied().collect(),
    ))
}

/// Sum of the principal 2×2 minors: `½((tr A)² - tr A²)`.
pub fn sigma2_of_matrix(a: &DMatrix<f64>) -> f64 {
    let tr = a.trace();
    let tr_sq = (a * a).trace();
    0.5 * (tr * tr - tr_sq)
}

pub fn is_admissible(pc: &PrincipalCurvatures) -> bool {
    pc.sigma1 > 0.0 && pc.sigma2 > 0.0
}

/// Scalar admissibility margin `min(σ₁, σ₂) / max(1, σ₁²)`; positive iff admissible.
pub fn admissibility_margin(sigma1: f64, sigma2: f64) -> f64 {
    sigma1.min(sigma2) / (sigma1 * sigma1).max(1.0)
}

/// `(σ₁, σ₂)` of the endomorphism from raw slices (`hess` row-major, symmetric).
///
/// Returns `None` when `grad` is not spacelike.
pub fn sigma12_raw(grad: &[f64], hess: &[f64]) -> Option<(f64, f64)> {
    let n = grad.len();
    let nu = tilt_factor(grad)?;
    let nu2 = nu * nu;
    let mut tr_m = 0.0;
    let mut frob = 0.0;
    let mut gw = 0.0;
    let mut ww = 0.0;
    for i in 0..n {
        tr_m += hess[i * n + i];
        let mut wi = 0.0;
        for j in 0..n {
            let m = hess[i * n + j];
            frob += m * m;
            wi += m * grad[j];
        }
        gw += grad[i] * wi;
        ww += wi * wi;
    }
    let tr_a = nu * (tr_m + nu2 * gw);
    let tr_a2 = nu2 * (frob + 2.0 * nu2 * ww + nu2 * nu2 * gw * gw);
    Some((tr_a, 0.5 * (tr_a * tr_a - tr_a2)))
}

/// Coefficients of the linearization of `H₂` at a jet.
#[derive(Debug, Clone, PartialEq)]
pub struct Linearization {
    pub sigma1: f64,
    pub sigma2: f64,
    /// `∂H₂/∂(D²u)_{ij}`, symmetric and positive definite on admissible jets.
    pub c: DMatrix<f64>,
    /// `∂H₂/∂(Du)_i`.
    pub b: DVector<f64>,
}

/// Linearization of `H₂` in the Hessian slot (closed form) and gradient slot
/// (central differences).
pub fn linearize_h2(jet: &PointJet) -> Result<Linearization> {
    let n = jet.dim();
    let mut c = vec![0.0; n * n];
    let mut b = vec![0.0; n];
    let hess_rm: Vec<f64> = (0..n * n).map(|k| jet.hess()[(k / n, k % n)]).collect();
    let (sigma1, sigma2) = linearize_raw(jet.grad().as_slice(), &hess_rm, &mut c, &mut b)?;
    Ok(Linearization {
        sigma1,
        sigma2,
        c: DMatrix::from_row_slice(n, n, &c),
        b: DVector::from_column_slice(&b),
    })
}

/// Slice version of [`linearize_h2`] used by the assembly loop. `c` and `hess`
/// are row-major `n×n`. Returns `(σ₁, σ₂)` of the jet.
pub fn linearize_raw(grad: &[f64], hess: &[f64], c: &mut [f64], b: &mut [f64]) -> Result<(f64, f64)> {
    let n = grad.len();
    let nu = tilt_factor(grad).ok_or_else(|| Error::NotSpacelike {
        location: "linearization".into(),
        slope: grad.iter().map(|g| g * g).sum::<f64>().sqrt(),
    })?;
    let (s1, s2) = sigma12_raw(grad, hess).expect("spacelike checked above");
    if !(s1 > 0.0 && s2 > 0.0) {
        return Err(Error::Ellipticity {
            location: "linearization".into(),
            sigma1: s1,
            sigma2: s2,
        });
    }
    if n > MAX_DIM {
        return Err(Error::Domain(format!("dimension {n} above supported maximum {MAX_DIM}")));
    }
    let nu2 = nu * nu;
    let mut w = [0.0f64; MAX_DIM];
    let w = &mut w[..n];
    let mut gw = 0.0;
    for i in 0..n {
        w[i] = (0..n).map(|j| hess[i * n + j] * grad[j]).sum();
        gw += grad[i] * w[i];
    }
    // dσ₂(A)[δ] = tr A · tr δ - tr(Aδ) with δ = ν B E_ij gives
    // c = ν (tr A · B - ν B D²u B), B D²u B = M + ν²(g wᵀ + w gᵀ) + ν⁴ (g·w) g gᵀ.
    for i in 0..n {
        for j in 0..n {
            let delta = if i == j { 1.0 } else { 0.0 };
            let bij = delta + nu2 * grad[i] * grad[j];
            let bmb = hess[i * n + j]
                + nu2 * (grad[i] * w[j] + w[i] * grad[j])
                + nu2 * nu2 * gw * grad[i] * grad[j];
            c[i * n + j] = nu * (s1 * bij - nu * bmb);
        }
    }
    let mut shifted = [0.0f64; MAX_DIM];
    let shifted = &mut shifted[..n];
    for i in 0..n {
        let step = GRADIENT_FD_STEP * (1.0 + grad[i].abs());
        shifted.copy_from_slice(grad);
        shifted[i] = grad[i] + step;
        let plus = sigma12_raw(shifted, hess);
        shifted[i] = grad[i] - step;
        let minus = sigma12_raw(shifted, hess);
        match (plus, minus) {
            (Some((_, p)), Some((_, m))) => b[i] = (p - m) / (2.0 * step),
            _ => {
                return Err(Error::NotSpacelike {
                    location: "gradient-slot difference".into(),
                    slope: grad.iter().map(|g| g * g).sum::<f64>().sqrt() + step,
                })
            }
        }
    }
    Ok((s1, s2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn hyperboloid_jet(alpha: f64, x: &[f64]) -> PointJet {
        let n = x.len();
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let s = (alpha * alpha + r2).sqrt();
        let grad: Vec<f64> = x.iter().map(|v| v / s).collect();
        let mut hess = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let d = if i == j { 1.0 } else { 0.0 };
                hess[i * n + j] = d / s - x[i] * x[j] / (s * s * s);
            }
        }
        PointJet::from_slices(&grad, &hess).unwrap()
    }

    #[test]
    fn zero_slope_endomorphism_is_hessian() {
        let jet = PointJet::from_slices(&[0.0, 0.0], &[1.0, 0.0, 0.0, 1.0]).unwrap();
        let a = curvature_endomorphism(&jet);
        assert_eq!(a, DMatrix::identity(2, 2));
    }

    #[test]
    fn unit_hyperboloid_at_origin() {
        let jet = hyperboloid_jet(1.0, &[0.0, 0.0]);
        let pc = principal_curvatures(&jet).unwrap();
        assert_relative_eq!(pc.lambdas()[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(pc.lambdas()[1], 1.0, epsilon = 1e-14);
        assert_relative_eq!(pc.sigma2(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn unit_hyperboloid_off_axis() {
        let jet = hyperboloid_jet(1.0, &[0.6, 0.0]);
        let a = curvature_endomorphism(&jet);
        assert!((sigma2_of_matrix(&a) - 1.0).abs() < 1e-14);
        let pc = principal_curvatures(&jet).unwrap();
        assert!((pc.sigma2() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn symmetric_function_examples() {
        let pc = PrincipalCurvatures::from_lambdas(vec![1.0, 1.0, 1.0]);
        assert_eq!((pc.sigma1(), pc.sigma2()), (3.0, 3.0));

        let pc = PrincipalCurvatures::from_lambdas(vec![2.0, -0.5, 2.0]);
        assert_eq!(pc.lambdas(), &[2.0, 2.0, -0.5]);
        assert_eq!(pc.sigma1(), 3.5);
        assert_eq!(pc.sigma2(), 2.0);
        assert_eq!(pc.sigma1_partials(), &[1.5, 1.5, 4.0]);
        assert!(pc.is_admissible());

        let pc = PrincipalCurvatures::from_lambdas(vec![3.0, 0.0]);
        assert_eq!(pc.sigma2(), 0.0);
        assert!(!pc.is_admissible());
    }

    #[test]
    fn admissibility_examples() {
        assert!(!PrincipalCurvatures::from_lambdas(vec![1.0, -1.0]).is_admissible());
        let both_negative = PrincipalCurvatures::from_lambdas(vec![-1.0, -1.0]);
        assert_eq!(both_negative.sigma2(), 1.0);
        assert!(!both_negative.is_admissible());
        assert!(both_negative.margin() < 0.0);
    }

    #[test]
    fn sigma2_of_matrix_examples() {
        assert_eq!(sigma2_of_matrix(&DMatrix::identity(2, 2)), 1.0);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 2.0, -0.5]));
        assert_eq!(sigma2_of_matrix(&d), 2.0);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 0.0]));
        assert_eq!(sigma2_of_matrix(&d), 0.0);
    }

    #[test]
    fn linearization_at_flat_identity() {
        let jet = PointJet::from_slices(&[0.0, 0.0], &[1.0, 0.0, 0.0, 1.0]).unwrap();
        let lin = linearize_h2(&jet).unwrap();
        assert_relative_eq!(lin.c, DMatrix::identity(2, 2), epsilon = 1e-14);
        assert!(lin.b.amax() < 1e-9);
    }

    #[test]
    fn non_admissible_jet_is_rejected() {
        let jet = PointJet::from_slices(&[0.1, 0.0], &[1.0, 0.0, 0.0, -1.0]).unwrap();
        assert!(matches!(linearize_h2(&jet), Err(Error::Ellipticity { .. })));
    }

    #[test]
    fn timelike_gradient_is_rejected() {
        let err = PointJet::from_slices(&[0.8, 0.6], &[1.0, 0.0, 0.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::NotSpacelike { .. }));
    }

    #[test]
    fn raw_sigmas_match_matrix_route() {
        let jet = PointJet::from_slices(&[0.3, -0.4, 0.2], &[1.0, 0.2, -0.1, 0.2, 0.5, 0.3, -0.1, 0.3, 0.8])
            .unwrap();
        let a = curvature_endomorphism(&jet);
        let hess: Vec<f64> = (0..9).map(|k| jet.hess()[(k / 3, k % 3)]).collect();
        let (s1, s2) = sigma12_raw(jet.grad().as_slice(), &hess).unwrap();
        assert_relative_eq!(s1, a.trace(), max_relative = 1e-13);
        assert_relative_eq!(s2, sigma2_of_matrix(&a), max_relative = 1e-13);
    }

    #[test]
    fn elementary_symmetric_small_cases() {
        let v = [1.0, 2.0, 3.0];
        assert_eq!(sigma_k(&v, 0), 1.0);
        assert_eq!(sigma_k(&v, 1), 6.0);
        assert_eq!(sigma_k(&v, 2), 11.0);
        assert_eq!(sigma_k(&v, 3), 6.0);
        assert_eq!(sigma_k(&v, 4), 0.0);
    }
}
