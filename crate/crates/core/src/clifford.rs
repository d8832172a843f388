//! Two-dimensional Clifford algebra continued from Lorentzian (θ = 0) to
//! Euclidean (θ = π/2) signature, its spin generator, and the interpolated
//! transfer coefficients.
//!
//! Matrices carry lower indices. The base set is `γ_0 = σ_z`, `γ_1 = −iσ_y`,
//! `γ_5 = σ_x`, so that `γ^1 = η^{11}γ_1 = iσ_y`.

use std::f64::consts::FRAC_PI_2;

use nalgebra::Matrix2;

use crate::error::{Error, Result};
use crate::fock::TransferCoeffs;
use crate::linalg::{pauli, C64, I, ONE, ZERO};

pub type M2 = Matrix2<C64>;

/// Smallest admissible `|cos 2θ|`.
pub const SINGULAR_TOL: f64 = 1e-8;

pub fn check_theta(theta: f64) -> Result<()> {
    let cos2 = (2.0 * theta).cos();
    if !theta.is_finite() || cos2.abs() < SINGULAR_TOL {
        return Err(Error::Singular { theta, cos2 });
    }
    Ok(())
}

/// `diag(cos 2θ/|cos 2θ|, −1)`.
pub fn metric(theta: f64) -> Result<[f64; 2]> {
    check_theta(theta)?;
    let cos2 = (2.0 * theta).cos();
    Ok([cos2.signum(), -1.0])
}

/// Normalization of `γ_5(θ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Gamma5Convention {
    /// Divide by the principal `√(cos 2θ)`; `γ_5(θ)² = 1` on both sides.
    #[default]
    Normalized,
    /// Divide by `√|cos 2θ|`; `γ_5(θ)² = sign(cos 2θ)`.
    Literal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaSet {
    pub theta: f64,
    /// `γ_0(θ), γ_1(θ)` (lower index).
    pub gamma: [M2; 2],
    pub gamma5: M2,
    pub eta: [f64; 2],
}

pub fn base_gammas() -> ([M2; 2], M2) {
    ([pauli::z(), pauli::y() * (-I)], pauli::x())
}

pub fn gamma_family(theta: f64) -> Result<GammaSet> {
    gamma_family_with(theta, Gamma5Convention::Normalized)
}

pub fn gamma_family_with(theta: f64, conv: Gamma5Convention) -> Result<GammaSet> {
    let eta = metric(theta)?;
    let ([g0, g1], g5) = base_gammas();
    let (s, co) = theta.sin_cos();
    let cos2 = (2.0 * theta).cos();
    let abs_norm = C64::new(cos2.abs().sqrt(), 0.0);
    let g0t = (g0 * C64::new(co, 0.0) + g5 * C64::new(0.0, s)) / abs_norm;
    let norm5 = match conv {
        Gamma5Convention::Normalized => C64::new(cos2, 0.0).sqrt(),
        Gamma5Convention::Literal => abs_norm,
    };
    let g5t = (g5 * C64::new(co, 0.0) - g0 * C64::new(0.0, s)) / norm5;
    Ok(GammaSet {
        theta,
        gamma: [g0t, g1],
        gamma5: g5t,
        eta,
    })
}

fn max_entry(m: &M2) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

impl GammaSet {
    /// `γ^μ = η^{μμ} γ_μ` (the metric is diagonal with entries ±1).
    pub fn upper(&self, mu: usize) -> M2 {
        self.gamma[mu] * C64::new(self.eta[mu], 0.0)
    }

    /// Max residual of `{γ_μ, γ_ν} − 2η_{μν}`, `γ_5² − 1` and `{γ_5, γ_μ}`.
    pub fn clifford_residual(&self) -> f64 {
        let id = M2::identity();
        let mut r: f64 = 0.0;
        for mu in 0..2 {
            for nu in 0..2 {
                let ac = self.gamma[mu] * self.gamma[nu] + self.gamma[nu] * self.gamma[mu];
                let eta = if mu == nu { self.eta[mu] } else { 0.0 };
                r = r.max(max_entry(&(ac - id * C64::new(2.0 * eta, 0.0))));
            }
            let ac5 = self.gamma5 * self.gamma[mu] + self.gamma[mu] * self.gamma5;
            r = r.max(max_entry(&ac5));
        }
        r.max(max_entry(&(self.gamma5 * self.gamma5 - id)))
    }

    /// `‖γ_5 − γ_5†‖`, reported as a diagnostic: it vanishes at θ = 0 and
    /// θ = π/2 only.
    pub fn gamma5_hermiticity_residual(&self) -> f64 {
        max_entry(&(self.gamma5 - self.gamma5.adjoint()))
    }

    /// `Σ_01(θ) = ¼[γ_0(θ), γ_1(θ)]`.
    pub fn sigma01(&self) -> M2 {
        (self.gamma[0] * self.gamma[1] - self.gamma[1] * self.gamma[0]) * C64::new(0.25, 0.0)
    }
}

/// `exp(A)` for a traceless 2×2 matrix, using `A² = −det(A)·1`.
pub fn expm_traceless(a: &M2) -> M2 {
    let delta = -a.determinant();
    let k = delta.sqrt();
    let (ch, sh_over_k) = if k.norm() < 1e-6 {
        let k2 = delta;
        (ONE + k2 / 2.0 + k2 * k2 / 24.0, ONE + k2 / 6.0 + k2 * k2 / 120.0)
    } else {
        (k.cosh(), k.sinh() / k)
    };
    M2::identity() * ch + a * sh_over_k
}

#[derive(Debug, Clone, PartialEq)]
pub struct LorentzGroupElement {
    pub omega: f64,
    pub theta: f64,
    pub generator: M2,
    pub lambda: M2,
    /// `V^μ_ν` from `Λ⁻¹γ^μΛ = V^μ_ν γ^ν`.
    pub v: M2,
    /// Residual of that identity after reconstruction.
    pub v_residual: f64,
}

pub fn group_element(omega: f64, theta: f64) -> Result<LorentzGroupElement> {
    let gs = gamma_family(theta)?;
    let generator = gs.sigma01();
    let lambda = expm_traceless(&(generator * C64::new(omega, 0.0)));
    let inv = lambda
        .try_inverse()
        .ok_or_else(|| Error::Consistency("Λ is singular".into()))?;
    let mut v = M2::zeros();
    let mut v_residual: f64 = 0.0;
    for mu in 0..2 {
        let conj = inv * gs.upper(mu) * lambda;
        for nu in 0..2 {
            // tr(γ^ν γ_ρ) = 2δ^ν_ρ
            v[(mu, nu)] = (conj * gs.gamma[nu]).trace() / 2.0;
        }
        let rebuilt = gs.upper(0) * v[(mu, 0)] + gs.upper(1) * v[(mu, 1)];
        v_residual = v_residual.max(max_entry(&(conj - rebuilt)));
    }
    Ok(LorentzGroupElement {
        omega,
        theta,
        generator,
        lambda,
        v,
        v_residual,
    })
}

impl LorentzGroupElement {
    /// `V` with a check that its entries are real to `tol`.
    pub fn real_v(&self, tol: f64) -> Result<[[f64; 2]; 2]> {
        if self.v.iter().any(|z| z.im.abs() > tol) {
            return Err(Error::Consistency("vector representation is not real".into()));
        }
        Ok([
            [self.v[(0, 0)].re, self.v[(0, 1)].re],
            [self.v[(1, 0)].re, self.v[(1, 1)].re],
        ])
    }

    /// `max |V^T η V − η|` with η the lower-index metric at this θ.
    pub fn metric_residual(&self) -> f64 {
        let eta = metric(self.theta).expect("validated θ");
        let e = M2::new(C64::new(eta[0], 0.0), ZERO, ZERO, C64::new(eta[1], 0.0));
        max_entry(&(self.v.transpose() * e * self.v - e))
    }

    pub fn orthogonality_residual(&self) -> f64 {
        max_entry(&(self.v.transpose() * self.v - M2::identity()))
    }

    pub fn unitarity_residual(&self) -> f64 {
        max_entry(&(self.lambda.adjoint() * self.lambda - M2::identity()))
    }
}

/// Phase convention of `M̂ε(t; θ)` beyond `π/4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TransferBranch {
    /// Coefficients exactly as written, principal branch of `√(cos 2θ)`.
    #[default]
    Literal,
    /// All three coefficients divided by `√(cos 2θ)/√|cos 2θ|`, so `c_H = ε`.
    Rephased,
}

/// `(cos θ/√(cos 2θ), −sin θ/√(cos 2θ), ε√(cos 2θ)/√|cos 2θ|)`.
pub fn interpolated_transfer_coeffs(theta: f64, epsilon: f64, branch: TransferBranch) -> Result<TransferCoeffs> {
    check_theta(theta)?;
    let cos2 = (2.0 * theta).cos();
    let root = C64::new(cos2, 0.0).sqrt();
    let phase = root / cos2.abs().sqrt();
    let (s, co) = theta.sin_cos();
    let mut k = TransferCoeffs {
        c1: C64::new(co, 0.0) / root,
        c_sigma_y: C64::new(-s, 0.0) / root,
        c_h: phase * epsilon,
    };
    if branch == TransferBranch::Rephased {
        k.c1 /= phase;
        k.c_sigma_y /= phase;
        k.c_h /= phase;
    }
    Ok(k)
}

/// `n` points in `[0, π/2]` with `|θ − π/4| ≥ gap`.
pub fn theta_grid(n: usize, gap: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut m = n;
    // widen the raw grid until enough points survive the exclusion
    while out.len() < n {
        out = (0..m)
            .map(|k| FRAC_PI_2 * k as f64 / (m - 1) as f64)
            .filter(|t| (t - FRAC_PI_2 / 2.0).abs() >= gap)
            .collect();
        m += 1;
    }
    out
}

/// Largest second difference of the transfer coefficients over a uniform
/// sweep of `[a, b]`, scaled by `1/h²`.
pub fn coefficient_curvature(a: f64, b: f64, n: usize, epsilon: f64) -> Result<f64> {
    let h = (b - a) / (n - 1) as f64;
    let vals: Vec<TransferCoeffs> = (0..n)
        .map(|k| interpolated_transfer_coeffs(a + h * k as f64, epsilon, TransferBranch::Literal))
        .collect::<Result<_>>()?;
    let mut worst: f64 = 0.0;
    for w in vals.windows(3) {
        for f in [
            |k: &TransferCoeffs| k.c1,
            |k: &TransferCoeffs| k.c_sigma_y,
            |k: &TransferCoeffs| k.c_h,
        ] {
            worst = worst.max(((f(&w[0]) - 2.0 * f(&w[1]) + f(&w[2])) / (h * h)).norm());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn close(a: &M2, b: &M2) -> bool {
        max_entry(&(a - b)) < 1e-14
    }

    #[test]
    fn metric_signs() {
        assert_eq!(metric(0.0).unwrap(), [1.0, -1.0]);
        assert_eq!(metric(FRAC_PI_2).unwrap(), [-1.0, -1.0]);
        assert!(matches!(metric(FRAC_PI_4), Err(Error::Singular { .. })));
    }

    #[test]
    fn base_set_at_zero() {
        let g = gamma_family(0.0).unwrap();
        assert!(close(&g.gamma[0], &pauli::z()));
        assert!(close(&g.upper(1), &(pauli::y() * I)));
        assert!(close(&g.gamma5, &pauli::x()));
    }

    #[test]
    fn euclidean_end() {
        let g = gamma_family(FRAC_PI_2).unwrap();
        assert!(close(&g.gamma[0], &(pauli::x() * I)));
        let ac = g.gamma[0] * g.gamma[0] * C64::new(2.0, 0.0);
        assert!(close(&ac, &(M2::identity() * C64::new(-2.0, 0.0))));
        let lit = gamma_family_with(FRAC_PI_2, Gamma5Convention::Literal).unwrap();
        assert!(close(&lit.gamma5, &(pauli::z() * (-I))));
        assert!(close(&g.gamma5, &(-pauli::z())));
    }

    #[test]
    fn literal_gamma5_squares_to_metric_sign() {
        let lit = gamma_family_with(1.2, Gamma5Convention::Literal).unwrap();
        let sq = lit.gamma5 * lit.gamma5;
        assert!(close(&sq, &(-M2::identity())));
    }

    #[test]
    fn clifford_residual_over_grid() {
        let grid = theta_grid(64, 0.05);
        assert_eq!(grid.len(), 64);
        for t in grid {
            assert!(gamma_family(t).unwrap().clifford_residual() < 1e-12, "θ = {t}");
        }
    }

    #[test]
    fn gamma5_hermitian_at_endpoints() {
        for t in [0.0, FRAC_PI_2] {
            assert!(gamma_family(t).unwrap().gamma5_hermiticity_residual() < 1e-15);
        }
    }

    #[test]
    fn generators_at_endpoints() {
        let s0 = gamma_family(0.0).unwrap().sigma01();
        assert!(close(&s0, &(pauli::x() * C64::new(-0.5, 0.0))));
        let s1 = gamma_family(FRAC_PI_2).unwrap().sigma01();
        assert!(close(&s1, &(pauli::z() * C64::new(0.0, 0.5))));
    }

    #[test]
    fn group_elements() {
        let g = group_element(0.0, 0.3).unwrap();
        assert!(close(&g.lambda, &M2::identity()));
        for w in [-0.3, 0.3, -1.0, 1.0] {
            let b = group_element(w, 0.0).unwrap();
            assert!((b.lambda.determinant() - ONE).norm() < 1e-12);
            assert!(max_entry(&(b.lambda - b.lambda.adjoint())) < 1e-14);
            let ev = crate::linalg::hermitian_eigenvalues(&crate::linalg::CMat::from_fn(2, 2, |i, j| b.lambda[(i, j)]));
            assert!(ev[0] > 0.0);
            assert!(b.metric_residual() < 1e-10 && b.v_residual < 1e-12);
            let r = group_element(w, FRAC_PI_2).unwrap();
            assert!(r.orthogonality_residual() < 1e-10);
            assert!((r.v.determinant() - ONE).norm() < 1e-10);
            assert!(r.unitarity_residual() < 1e-12);
            r.real_v(1e-12).unwrap();
        }
    }

    #[test]
    fn unitarity_over_circle() {
        for k in 0..=40 {
            let w = -std::f64::consts::PI + k as f64 * std::f64::consts::PI / 20.0;
            assert!(group_element(w, FRAC_PI_2).unwrap().unitarity_residual() < 1e-12);
        }
    }

    #[test]
    fn transfer_coefficients() {
        let k = interpolated_transfer_coeffs(0.0, 0.1, TransferBranch::Literal).unwrap();
        assert_eq!(
            (k.c1, k.c_sigma_y, k.c_h),
            (ONE, C64::new(-0.0, 0.0), C64::new(0.1, 0.0))
        );
        let k = interpolated_transfer_coeffs(FRAC_PI_2, 0.1, TransferBranch::Literal).unwrap();
        assert!(k.c1.norm() < 1e-15);
        assert!((k.c_sigma_y - I).norm() < 1e-15);
        assert!((k.c_h - I * 0.1).norm() < 1e-15);
        let r = interpolated_transfer_coeffs(FRAC_PI_2, 0.1, TransferBranch::Rephased).unwrap();
        assert!((r.c_h - C64::new(0.1, 0.0)).norm() < 1e-15);
        for t in [FRAC_PI_4 - 0.1, FRAC_PI_4 + 0.1] {
            let k = interpolated_transfer_coeffs(t, 0.1, TransferBranch::Literal).unwrap();
            assert!(k.c1.is_finite() && k.c_sigma_y.is_finite() && k.c_h.is_finite());
        }
        assert!(interpolated_transfer_coeffs(FRAC_PI_4, 0.1, TransferBranch::Literal).is_err());
    }

    #[test]
    fn coefficients_are_smooth_below_the_singularity() {
        let c = coefficient_curvature(0.0, FRAC_PI_4 - 0.01, 400, 0.1).unwrap();
        // |d²/dθ² (cos 2θ)^{-1/2}| near θ = π/4 − 0.01 is a few times 10⁵
        assert!(c.is_finite() && c < 1e6, "{c}");
    }

    #[test]
    fn small_generator_exponential() {
        let a = pauli::x() * C64::new(1e-8, 0.0);
        let e = expm_traceless(&a);
        assert!((e[(0, 1)] - C64::new(1e-8, 0.0)).norm() < 1e-20);
    }
}
