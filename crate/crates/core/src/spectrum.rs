//! One-body momentum-space analysis: the hopping kernel `1 + 2cos pε`, its
//! zeros `q_μ = ±2π/(3ε)`, the two low-energy flavor sectors, envelope
//! fields, and the coupling an on-site potential induces between sectors.

use std::f64::consts::PI;

use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::fock::terms;
use crate::linalg::{c, hermitian_eigenvalues, linear_fit, pauli, spectral_norm, CMat, C64, ONE, ZERO};
use crate::model::{momentum_grid, BoundaryCondition, LatticeSpec, ModelSpec};

/// Dense `h` with `H = Σ c†_i h_ij c_j` for `H_h + H_m` at time index `t`.
pub fn one_body_matrix(model: &ModelSpec, t: usize) -> CMat {
    let mut list = terms::hopping(&model.lattice, &model.couplings.j[t]);
    list.extend(terms::mass(&model.couplings.m0[t]));
    terms::to_matrix(model.n_modes(), &list)
}

pub fn hopping_matrix(model: &ModelSpec, t: usize) -> CMat {
    terms::to_matrix(model.n_modes(), &terms::hopping(&model.lattice, &model.couplings.j[t]))
}

/// `q_0 = 2π/(3ε)`, `q_1 = −q_0`.
pub fn sector_center(mu: usize, epsilon: f64) -> f64 {
    let q = 2.0 * PI / (3.0 * epsilon);
    if mu == 0 {
        q
    } else {
        -q
    }
}

/// `1 + 2cos(pε)`.
pub fn kernel(p: f64, epsilon: f64) -> f64 {
    1.0 + 2.0 * (p * epsilon).cos()
}

/// Zeros of `1 + 2cos(pε)` by bisection on `(0, π/ε)`, returned as
/// `[q_0, q_1]`.
pub fn dispersion_zeros(epsilon: f64) -> [f64; 2] {
    let (mut lo, mut hi) = (0.0, PI / epsilon);
    // kernel(lo) > 0 > kernel(hi)
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if kernel(mid, epsilon) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let q = 0.5 * (lo + hi);
    [q, -q]
}

/// Per-momentum blocks of a translation-invariant one-body matrix.
#[derive(Debug, Clone)]
pub struct DftKernel {
    pub momenta: Vec<f64>,
    /// `2D × 2D` block over `(species, flavor)` at each momentum.
    pub blocks: Vec<CMat>,
    /// Largest entry of the conjugated matrix outside the diagonal blocks.
    pub off_block: f64,
}

/// Conjugates `h` by the DFT over sites. Errors for position-dependent
/// couplings or open boundaries, where only direct diagonalization applies.
pub fn dft_kernel(model: &ModelSpec, h: &CMat) -> Result<DftKernel> {
    let lat = &model.lattice;
    if lat.bc != BoundaryCondition::Periodic {
        return Err(Error::Unsupported(
            "open boundaries break translation invariance; diagonalize the one-body matrix directly".into(),
        ));
    }
    if !model.couplings.is_translation_invariant() {
        return Err(Error::Unsupported(
            "couplings vary in space; diagonalize the one-body matrix directly".into(),
        ));
    }
    let n = lat.n_x;
    let b = 2 * model.d();
    let momenta = momentum_grid(n, lat.epsilon_x);
    let norm = 1.0 / (n as f64).sqrt();
    let u = CMat::from_fn(n * b, n * b, |row, col| {
        let (x, a) = (row / b, row % b);
        let (k, a2) = (col / b, col % b);
        if a == a2 {
            C64::from_polar(norm, momenta[k] * lat.epsilon_x * x as f64)
        } else {
            ZERO
        }
    });
    let conj = u.adjoint() * h * &u;
    let mut off_block: f64 = 0.0;
    for r in 0..n * b {
        for cidx in 0..n * b {
            if r / b != cidx / b {
                off_block = off_block.max(conj[(r, cidx)].norm());
            }
        }
    }
    let blocks = (0..n).map(|k| conj.view((k * b, k * b), (b, b)).into_owned()).collect();
    Ok(DftKernel {
        momenta,
        blocks,
        off_block,
    })
}

/// `(1/ε_x)(1 + 2cos pε_x) σ_x ⊗ J`.
pub fn analytic_hopping_block(j: &CMat, p: f64, epsilon_x: f64) -> CMat {
    let sx = CMat::from_fn(2, 2, |a, b| pauli::x()[(a, b)]);
    sx.kronecker(j) * c(kernel(p, epsilon_x) / epsilon_x, 0.0)
}

/// `d/dp` of the hopping block at `q_μ` for `D = 1`: `∓√3 J σ_x`.
pub fn kernel_linearization(j: C64, epsilon: f64, mu: usize) -> CMat {
    let q = sector_center(mu, epsilon);
    let slope = -2.0 * (q * epsilon).sin();
    CMat::from_fn(2, 2, |a, b| pauli::x()[(a, b)] * j * slope)
}

/// `2×2` Bloch block at momentum `p` for `D = 1`, `J`, `m0 = m`, built from
/// the first block-row of the real-space one-body matrix.
fn bloch_block(first_row: &CMat, n_x: usize, p: f64, eps: f64) -> [[C64; 2]; 2] {
    let mut out = [[ZERO; 2]; 2];
    for y in 0..n_x {
        // site 0 couples to y; fold y into (−N/2, N/2]
        let dy = if 2 * y > n_x { y as f64 - n_x as f64 } else { y as f64 };
        let ph = C64::from_polar(1.0, p * dy * eps);
        for a in 0..2 {
            for b in 0..2 {
                out[a][b] += first_row[(a, 2 * y + b)] * ph;
            }
        }
    }
    out
}

fn block_energy(h: [[C64; 2]; 2]) -> f64 {
    let m = CMat::from_fn(2, 2, |a, b| h[a][b]);
    hermitian_eigenvalues(&m)[1].abs()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispersionPoint {
    /// Momentum relative to the sector center.
    pub k: f64,
    pub energy: f64,
    pub sector: usize,
}

#[derive(Debug, Clone)]
pub struct DispersionReport {
    pub points: Vec<DispersionPoint>,
    /// Group-velocity magnitude of the massless kernel at `q_μ` before
    /// rescaling `J`.
    pub raw_slope: f64,
    /// Least-squares fit of sector-averaged `E²` against `k²`.
    pub fit_slope: f64,
    pub fit_intercept: f64,
    /// `max |Ē² − (k² + m²)|/(k² + m²)` with `Ē` averaged over the sectors.
    pub sector_residual: f64,
    /// The same without averaging, dominated by the `O(kε)` odd term.
    pub pointwise_residual: f64,
    /// `max |Ē/|k| − 1|` for `m = 0`, else NaN.
    pub velocity_residual: f64,
}

/// Low-energy dispersion of the `D = 1` kernel with `J = 1/√3` (relabeled)
/// and `m0 = m` on `N_x` sites, for `|k| ≤ p_max` around each `q_μ`.
pub fn low_energy_dispersion(m: f64, epsilon: f64, n_x: usize, p_max: f64) -> Result<DispersionReport> {
    if p_max >= PI / (3.0 * epsilon) {
        return Err(Error::config(
            "window",
            "p_max must stay below π/(3ε) so the two sector windows are disjoint",
        ));
    }
    if !n_x.is_multiple_of(3) {
        return Err(Error::config(
            "n_x",
            "q_μ must lie on the momentum grid (N_x divisible by 3)",
        ));
    }
    // the group velocity belongs to the hopping kernel; with m ≠ 0 the band
    // is flat at q_μ
    let raw = first_block_row(ONE, 0.0, epsilon, n_x)?;
    let scaled = first_block_row(c(1.0 / 3f64.sqrt(), 0.0), m, epsilon, n_x)?;
    let dp = 2.0 * PI / (n_x as f64 * epsilon);

    let energy_at =
        |row: &CMat, mu: usize, k: f64| block_energy(bloch_block(row, n_x, sector_center(mu, epsilon) + k, epsilon));

    // symmetric average of E(±Δ)/Δ, Richardson-combined over Δ, 2Δ
    let raw_slope = {
        let e0 = energy_at(&raw, 0, 0.0);
        let s = |h: f64| 0.5 * ((energy_at(&raw, 0, h) - e0) + (energy_at(&raw, 0, -h) - e0)) / h;
        (4.0 * s(dp) - s(2.0 * dp)) / 3.0
    };

    let steps = (p_max / dp).floor() as i64;
    let mut points = Vec::new();
    let mut ks = Vec::new();
    let mut avg_sq = Vec::new();
    let mut sector_residual: f64 = 0.0;
    let mut pointwise_residual: f64 = 0.0;
    let mut velocity_residual: f64 = 0.0;
    for i in -steps..=steps {
        let k = i as f64 * dp;
        let e: Vec<f64> = (0..2).map(|mu| energy_at(&scaled, mu, k)).collect();
        for (mu, &en) in e.iter().enumerate() {
            points.push(DispersionPoint {
                k,
                energy: en,
                sector: mu,
            });
        }
        let target = k * k + m * m;
        let mean = 0.5 * (e[0] + e[1]);
        if target > 0.0 {
            for en in &e {
                pointwise_residual = pointwise_residual.max((en * en - target).abs() / target);
            }
            let mean_sq = 0.5 * (e[0] * e[0] + e[1] * e[1]);
            sector_residual = sector_residual.max((mean_sq - target).abs() / target);
        }
        if m == 0.0 && k != 0.0 {
            velocity_residual = velocity_residual.max((mean / k.abs() - 1.0).abs());
        }
        ks.push(k * k);
        avg_sq.push(0.5 * (e[0] * e[0] + e[1] * e[1]));
    }
    let (fit_slope, fit_intercept) = linear_fit(&ks, &avg_sq);
    Ok(DispersionReport {
        points,
        raw_slope,
        fit_slope,
        fit_intercept,
        sector_residual,
        pointwise_residual,
        velocity_residual: if m == 0.0 { velocity_residual } else { f64::NAN },
    })
}

/// Rows of the real-space one-body matrix for site 0, `D = 1`.
fn first_block_row(j: C64, m: f64, epsilon: f64, n_x: usize) -> Result<CMat> {
    let lat = LatticeSpec::new(epsilon, epsilon, n_x, 1, BoundaryCondition::Periodic)?;
    let jm = CMat::from_element(1, 1, j);
    let mm = vec![CMat::from_element(1, 1, c(m, 0.0)); n_x];
    let mut list = terms::hopping(&lat, &jm);
    list.extend(terms::mass(&mm));
    let mut row = CMat::zeros(2, 2 * n_x);
    for term in list {
        if term.create < 2 {
            row[(term.create, term.annihilate)] += term.coef;
        }
    }
    Ok(row)
}

/// Map a momentum onto `(−π/ε, π/ε]`.
fn wrap(p: f64, epsilon: f64) -> f64 {
    let period = 2.0 * PI / epsilon;
    let mut w = (p + PI / epsilon).rem_euclid(period) - PI / epsilon;
    if w <= -PI / epsilon {
        w += period;
    }
    w
}

/// Grid indices `k` (momentum `2πk/(Nε)`) inside the window around `q_μ`.
pub fn window_indices(n_x: usize, epsilon: f64, mu: usize, p_max: f64) -> Vec<usize> {
    let q = sector_center(mu, epsilon);
    (0..n_x)
        .filter(|&k| {
            let p = 2.0 * PI * k as f64 / (n_x as f64 * epsilon);
            wrap(p - q, epsilon).abs() <= p_max + 1e-12 / epsilon
        })
        .collect()
}

fn fft(v: &[C64]) -> Vec<C64> {
    let mut buf = v.to_vec();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

fn ifft(v: &[C64]) -> Vec<C64> {
    let mut buf = v.to_vec();
    FftPlanner::new().plan_fft_inverse(buf.len()).process(&mut buf);
    buf
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlavorCoupling {
    pub n_x: usize,
    /// `‖P_0 h_f P_1‖`.
    pub inter: f64,
    /// `‖P_0 h_f P_0‖`.
    pub intra: f64,
}

/// Windowed coupling of the potential `Σ_x f(x) a†_x a_x` between the two
/// flavor sectors. In momentum space `h_f(p, p') = f̂(p − p')/N`.
pub fn flavor_coupling_norm(f: &[C64], epsilon: f64, p_max: f64) -> FlavorCoupling {
    let n = f.len();
    let fh: Vec<C64> = fft(f).into_iter().map(|z| z / n as f64).collect();
    // h(p_k, p_l) = (1/N) Σ_x f(x) e^{-i(p_k − p_l)x ε} = fh[(k − l) mod N]
    let block =
        |rows: &[usize], cols: &[usize]| CMat::from_fn(rows.len(), cols.len(), |a, b| fh[(rows[a] + n - cols[b]) % n]);
    let w0 = window_indices(n, epsilon, 0, p_max);
    let w1 = window_indices(n, epsilon, 1, p_max);
    FlavorCoupling {
        n_x: n,
        inter: spectral_norm(&block(&w0, &w1)),
        intra: spectral_norm(&block(&w0, &w0)),
    }
}

/// `f(x) = A exp(−(x − x0)²/(2w²))` sampled on `N` sites of a box of length
/// `L` with periodic images summed.
pub fn gaussian_potential(n_x: usize, length: f64, center: f64, width: f64, amplitude: f64) -> Vec<C64> {
    let eps = length / n_x as f64;
    (0..n_x)
        .map(|i| {
            let x = i as f64 * eps;
            let v: f64 = (-3..=3)
                .map(|img| {
                    let d = x - center + img as f64 * length;
                    (-(d * d) / (2.0 * width * width)).exp()
                })
                .sum();
            c(amplitude * v, 0.0)
        })
        .collect()
}

/// Coupling norms of a Gaussian of width `rel_width·L` at each `N_x`.
pub fn gaussian_decoupling_scan(length: f64, rel_width: f64, sizes: &[usize]) -> Vec<FlavorCoupling> {
    sizes
        .iter()
        .map(|&n| {
            let eps = length / n as f64;
            let f = gaussian_potential(n, length, 0.5 * length, rel_width * length, 1.0);
            flavor_coupling_norm(&f, eps, PI / (6.0 * eps))
        })
        .collect()
}

/// The coupling is slowly varying when the inter-sector block is below
/// `1e-6` of the intra-sector block.
pub fn is_slowly_varying(fc: &FlavorCoupling) -> bool {
    fc.inter <= 1e-6 * fc.intra
}

#[derive(Debug, Clone)]
pub struct Envelope {
    /// `a_{(μ), x}` per sector.
    pub fields: [Vec<C64>; 2],
    /// Fraction of the norm inside each window.
    pub weights: [f64; 2],
    /// Fraction outside both windows.
    pub residual: f64,
}

/// Splits one-particle amplitudes `a_x` into envelopes
/// `a_x ≈ a_{0,x} e^{iq_0 x} + a_{1,x} e^{iq_1 x}`.
pub fn envelope_decompose(a: &[C64], epsilon: f64, p_max: f64) -> Envelope {
    let n = a.len();
    let spec = fft(a);
    let total: f64 = spec.iter().map(|z| z.norm_sqr()).sum();
    let mut fields: [Vec<C64>; 2] = [vec![ZERO; n], vec![ZERO; n]];
    let mut weights = [0.0; 2];
    for mu in 0..2 {
        let win = window_indices(n, epsilon, mu, p_max);
        let mut masked = vec![ZERO; n];
        for &k in &win {
            masked[k] = spec[k];
            weights[mu] += spec[k].norm_sqr();
        }
        let back = ifft(&masked);
        let q = sector_center(mu, epsilon);
        fields[mu] = back
            .iter()
            .enumerate()
            .map(|(x, z)| z / n as f64 * C64::from_polar(1.0, -q * x as f64 * epsilon))
            .collect();
        if total > 0.0 {
            weights[mu] /= total;
        }
    }
    let residual = (1.0 - weights[0] - weights[1]).max(0.0);
    Envelope {
        fields,
        weights,
        residual,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::AuxFockBasis;
    use crate::linalg::max_abs_diff;
    use crate::model::{validate, AuxStatistics, BoundaryVectors, CouplingFields, ModelCandidate, Statistics};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ti_model(n_x: usize, d: usize, j: &CMat) -> ModelSpec {
        let lattice = LatticeSpec::periodic(0.7, n_x, 1).unwrap();
        let mut couplings = CouplingFields::zero(d, &lattice);
        couplings.j[0] = j.clone();
        validate(ModelCandidate {
            lattice,
            couplings,
            boundary: BoundaryVectors::default(),
            statistics: Statistics::default(),
            theta: None,
            cmps: None,
        })
        .unwrap()
    }

    #[test]
    fn zeros_of_the_kernel() {
        for eps in [0.1, 1.0, 2.0 * PI] {
            let [q0, q1] = dispersion_zeros(eps);
            let q = 2.0 * PI / (3.0 * eps);
            assert!((q0 - q).abs() < 1e-12 && (q1 + q).abs() < 1e-12);
        }
        assert!((dispersion_zeros(2.0 * PI)[0] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn kernel_values() {
        assert!(kernel(2.0 * PI / 3.0, 1.0).abs() < 1e-15);
        let b = analytic_hopping_block(&CMat::identity(1, 1), 0.0, 0.5);
        assert!((b[(0, 1)] - c(6.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn dft_block_diagonalizes_hopping() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let j = CMat::from_fn(2, 2, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let m = ti_model(12, 2, &j);
        let h = hopping_matrix(&m, 0);
        let k = dft_kernel(&m, &h).unwrap();
        assert!(k.off_block < 1e-12);
        for (p, b) in k.momenta.iter().zip(&k.blocks) {
            assert!(max_abs_diff(b, &analytic_hopping_block(&j, *p, 0.7)) < 1e-12);
        }
    }

    #[test]
    fn dft_rejects_varying_couplings() {
        let mut m = ti_model(4, 1, &CMat::identity(1, 1));
        m.couplings.m0[0][1] = CMat::from_element(1, 1, ONE);
        let h = one_body_matrix(&m, 0);
        assert!(matches!(dft_kernel(&m, &h), Err(Error::Unsupported(_))));
    }

    #[test]
    fn many_body_restriction_equals_one_body_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut g = || c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let lattice = LatticeSpec::periodic(0.4, 3, 1).unwrap();
        let mut couplings = CouplingFields::zero(2, &lattice);
        couplings.j[0] = CMat::from_fn(2, 2, |_, _| g());
        for x in 0..3 {
            couplings.m0[0][x] = CMat::from_fn(2, 2, |_, _| g());
        }
        let f: Vec<CMat> = (0..3).map(|_| CMat::from_fn(2, 2, |_, _| g())).collect();
        let mut list = terms::hopping(&lattice, &couplings.j[0]);
        list.extend(terms::mass(&couplings.m0[0]));
        list.extend(terms::onsite_a(&f));
        let basis = AuxFockBasis::sector(12, AuxStatistics::Fermionic, 1).unwrap();
        let many = basis.one_body(&list).op.to_dense();
        assert!(max_abs_diff(&many, &terms::to_matrix(12, &list)) < 1e-15);
    }

    #[test]
    fn raw_slope_and_relabeled_dispersion() {
        let eps = 1.0;
        let r = low_energy_dispersion(0.0, eps, 1200, 0.1 / eps).unwrap();
        assert!((r.raw_slope - 3f64.sqrt()).abs() < 1e-6, "{}", r.raw_slope);
        assert!(r.sector_residual < 1e-2);
        assert!(r.pointwise_residual > 1e-2);
        let r = low_energy_dispersion(0.0, eps, 1200, 0.05 / eps).unwrap();
        assert!(r.velocity_residual < 1e-3, "{}", r.velocity_residual);
        let r = low_energy_dispersion(0.2, eps, 1200, 0.1 / eps).unwrap();
        assert!((r.fit_intercept - 0.04).abs() < 0.01 * 0.04, "{}", r.fit_intercept);
        assert!(r.sector_residual < 1e-2);
    }

    #[test]
    fn overlapping_window_is_rejected() {
        assert!(low_energy_dispersion(0.0, 1.0, 300, PI / 3.0).is_err());
    }

    #[test]
    fn parity_relates_the_sectors() {
        let sz = CMat::from_fn(2, 2, |a, b| pauli::z()[(a, b)]);
        let l0 = kernel_linearization(ONE, 0.3, 0);
        let l1 = kernel_linearization(ONE, 0.3, 1);
        assert!(max_abs_diff(&l1, &(&sz * &l0 * &sz)) < 1e-12);
        assert!((l0[(0, 1)] + c(3f64.sqrt(), 0.0)).norm() < 1e-12);
    }

    #[test]
    fn constant_potential_does_not_couple() {
        let f = vec![c(0.37, 0.0); 48];
        let fc = flavor_coupling_norm(&f, 0.1, PI / 0.6);
        assert!(fc.inter < 1e-14 && (fc.intra - 0.37).abs() < 1e-12);
    }

    #[test]
    fn gaussian_decouples_monotonically() {
        let scan = gaussian_decoupling_scan(1.0, 0.035, &[24, 48, 96, 192]);
        for w in scan.windows(2) {
            assert!(w[1].inter < w[0].inter);
        }
        let last = scan.last().unwrap();
        assert!(is_slowly_varying(last), "{:?}", last);
    }

    #[test]
    fn oscillating_potential_couples() {
        let n = 96;
        let eps = 1.0 / n as f64;
        let dq = sector_center(0, eps) - sector_center(1, eps);
        let f: Vec<C64> = (0..n).map(|x| c((dq * x as f64 * eps).cos(), 0.0)).collect();
        let fc = flavor_coupling_norm(&f, eps, PI / (6.0 * eps));
        assert!(fc.inter > 0.4, "{:?}", fc);
    }

    #[test]
    fn envelopes_of_plane_waves() {
        let n = 300;
        let eps = 0.5;
        let q0 = sector_center(0, eps);
        let q1 = sector_center(1, eps);
        let pw = |q: f64| (0..n).map(move |x| C64::from_polar(1.0, q * x as f64 * eps));
        let e = envelope_decompose(&pw(q0).collect::<Vec<_>>(), eps, PI / (6.0 * eps));
        assert!((e.weights[0] - 1.0).abs() < 1e-12 && e.residual < 1e-12);
        assert!(e.fields[0].iter().all(|z| (z - ONE).norm() < 1e-10));
        let both: Vec<C64> = pw(q0).zip(pw(q1)).map(|(a, b)| a + b).collect();
        let e = envelope_decompose(&both, eps, PI / (6.0 * eps));
        assert!((e.weights[0] - 0.5).abs() < 1e-12 && (e.weights[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn wavepacket_stays_in_its_sector() {
        let n = 300;
        let eps = 1.0;
        let q = sector_center(0, eps) + 0.02 / eps;
        let a: Vec<C64> = (0..n)
            .map(|x| {
                let d = (x as f64 - 150.0) / 20.0;
                C64::from_polar((-0.5 * d * d).exp(), q * x as f64 * eps)
            })
            .collect();
        let e = envelope_decompose(&a, eps, PI / (6.0 * eps));
        assert!(e.weights[0] > 0.99);
    }
}
