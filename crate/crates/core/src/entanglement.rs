//! Reduced density matrices, entropies and Schmidt ranks of physical states.
//!
//! Physical modes are treated as tensor factors in the occupation basis,
//! with mode `p = t·N_x + x` the least significant digit. Entropies are in
//! nats.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{checked_pow, Budget, Error, Result};
use crate::fock::PhysicalState;
use crate::linalg::{hermitian_eigenvalues, CMat, C64, ZERO};
use crate::model::LatticeSpec;

/// Eigenvalues below this are treated as zero in `−Tr ρ ln ρ`.
pub const EIGEN_CUTOFF: f64 = 1e-14;
/// More negative eigenvalues than this are reported as a PSD violation.
pub const PSD_TOL: f64 = 1e-10;
/// Relative singular-value cutoff for Schmidt ranks.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub lattice: LatticeSpec,
    /// Physical mode indices `t·N_x + x`, sorted.
    pub modes: Vec<usize>,
    /// Modes of the region with a nearest neighbour outside it.
    pub boundary: Vec<usize>,
}

impl Region {
    pub fn new(lattice: LatticeSpec, sites: &[(usize, usize)]) -> Result<Self> {
        let total = lattice.n_x * lattice.n_t;
        let mut set = BTreeSet::new();
        for &(x, t) in sites {
            if x >= lattice.n_x || t >= lattice.n_t {
                return Err(Error::config("region", format!("site ({x}, {t}) outside the lattice")));
            }
            set.insert(t * lattice.n_x + x);
        }
        if set.is_empty() || set.len() == total {
            return Err(Error::config("region", "region must be a nonempty proper subset"));
        }
        let boundary = set
            .iter()
            .copied()
            .filter(|&p| neighbours(&lattice, p).iter().any(|q| !set.contains(q)))
            .collect();
        Ok(Self {
            lattice,
            modes: set.into_iter().collect(),
            boundary,
        })
    }

    /// All sites with `t < t0`.
    pub fn temporal(lattice: LatticeSpec, t0: usize) -> Result<Self> {
        let sites: Vec<_> = (0..t0.min(lattice.n_t))
            .flat_map(|t| (0..lattice.n_x).map(move |x| (x, t)))
            .collect();
        Self::new(lattice, &sites)
    }

    /// The `w × h` block with corner `(x0, t0)`; `x` wraps on periodic lattices.
    pub fn block(lattice: LatticeSpec, x0: usize, t0: usize, w: usize, h: usize) -> Result<Self> {
        let mut sites = Vec::new();
        for t in t0..t0 + h {
            for dx in 0..w {
                let x = lattice
                    .shift(x0, dx as isize)
                    .ok_or_else(|| Error::config("region", "block leaves an open lattice"))?;
                sites.push((x, t));
            }
        }
        Self::new(lattice, &sites)
    }

    pub fn complement(&self) -> Result<Self> {
        let inside: BTreeSet<_> = self.modes.iter().copied().collect();
        let n_x = self.lattice.n_x;
        let sites: Vec<_> = (0..n_x * self.lattice.n_t)
            .filter(|p| !inside.contains(p))
            .map(|p| (p % n_x, p / n_x))
            .collect();
        Self::new(self.lattice, &sites)
    }

    pub fn size(&self) -> usize {
        self.modes.len()
    }

    pub fn boundary_size(&self) -> usize {
        self.boundary.len()
    }
}

/// Nearest neighbours one step `ε_x` in space or `ε` in time away.
fn neighbours(lat: &LatticeSpec, p: usize) -> Vec<usize> {
    let (x, t) = (p % lat.n_x, p / lat.n_x);
    let mut out = Vec::with_capacity(4);
    for d in [-1isize, 1] {
        if let Some(y) = lat.shift(x, d) {
            if y != x {
                out.push(t * lat.n_x + y);
            }
        }
    }
    if t > 0 {
        out.push((t - 1) * lat.n_x + x);
    }
    if t + 1 < lat.n_t {
        out.push((t + 1) * lat.n_x + x);
    }
    out
}

/// The state as a `dim_A × dim_B` matrix, `A` = `modes` in increasing order.
pub fn bipartition_matrix(state: &PhysicalState, modes: &[usize], budget: &Budget) -> Result<CMat> {
    let base = state.local_dim();
    let total = state.modes();
    if modes.iter().any(|&p| p >= total) {
        return Err(Error::Dimension("region mode outside the state".into()));
    }
    let inside: BTreeSet<_> = modes.iter().copied().collect();
    let outside: Vec<usize> = (0..total).filter(|p| !inside.contains(p)).collect();
    let dim_a = checked_pow(base as u128, inside.len());
    let dim_b = checked_pow(base as u128, outside.len());
    budget.check(dim_a.saturating_mul(dim_b), || "use a smaller lattice".into())?;
    let (dim_a, dim_b) = (dim_a as usize, dim_b as usize);
    let mut m = CMat::zeros(dim_a, dim_b);
    for (idx, amp) in state.amplitudes.iter().enumerate() {
        if *amp == ZERO {
            continue;
        }
        let occ = state.occupation(idx);
        let ia = inside.iter().rev().fold(0usize, |acc, &p| acc * base + occ[p] as usize);
        let ib = outside
            .iter()
            .rev()
            .fold(0usize, |acc, &p| acc * base + occ[p] as usize);
        m[(ia, ib)] = *amp;
    }
    Ok(m)
}

/// `ρ_A = Tr_B |χ⟩⟨χ|`, normalized to unit trace.
pub fn reduced_density(state: &PhysicalState, region: &Region, budget: &Budget) -> Result<CMat> {
    let dim_a = checked_pow(state.local_dim() as u128, region.size());
    budget.check(dim_a.saturating_mul(dim_a), || {
        format!("shrink the region below {} modes", region.size())
    })?;
    let m = bipartition_matrix(state, &region.modes, budget)?;
    let rho = &m * m.adjoint();
    let tr = rho.trace().re;
    if tr <= 0.0 {
        return Err(Error::Unsupported("state has zero norm".into()));
    }
    Ok(rho / C64::new(tr, 0.0))
}

/// `S = −Tr ρ ln ρ`.
pub fn entropy(rho: &CMat) -> Result<f64> {
    let ev = hermitian_eigenvalues(rho);
    if let Some(&low) = ev.first() {
        if low < -PSD_TOL {
            return Err(Error::Consistency(format!("density matrix has eigenvalue {low:e}")));
        }
    }
    Ok(ev
        .iter()
        .filter(|&&l| l > EIGEN_CUTOFF)
        .map(|&l| -l * l.ln())
        .sum::<f64>()
        .max(0.0))
}

/// Number of singular values above `RANK_TOL` times the largest.
pub fn schmidt_rank(m: &CMat) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOL * top).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CutRank {
    pub rank: usize,
    /// Auxiliary sector dimension crossing the cut.
    pub bound: usize,
}

/// Schmidt rank across `{t < t0} | {t ≥ t0}` together with its structural
/// bound.
pub fn temporal_cut_rank(state: &PhysicalState, t0: usize, aux_dim: usize) -> CutRank {
    let base = state.local_dim();
    let rows = base.pow((t0.min(state.n_t) * state.n_x) as u32);
    let cols = state.amplitudes.len() / rows;
    // mode order puts all t < t0 in the low digits
    let m = CMat::from_fn(rows, cols, |i, j| state.amplitudes[j * rows + i]);
    CutRank {
        rank: schmidt_rank(&m),
        bound: aux_dim,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyReport {
    pub region_size: usize,
    pub boundary_size: usize,
    pub entropy: f64,
    pub schmidt_rank: usize,
    pub epsilon: f64,
    /// `S_A / |∂A|`, a candidate for the area-law constant.
    pub c_candidate: f64,
}

/// Entropy and rank from the Schmidt values of the bipartition, which avoids
/// forming the larger of the two reduced densities.
pub fn region_report(state: &PhysicalState, region: &Region, budget: &Budget) -> Result<EntropyReport> {
    let m = bipartition_matrix(state, &region.modes, budget)?;
    let sv = m.svd(false, false).singular_values;
    let tr: f64 = sv.iter().map(|s| s * s).sum();
    if tr <= 0.0 {
        return Err(Error::Unsupported("state has zero norm".into()));
    }
    let top = sv.iter().cloned().fold(0.0, f64::max);
    let rank = sv.iter().filter(|&&x| x > RANK_TOL * top).count();
    let s = sv
        .iter()
        .map(|x| x * x / tr)
        .filter(|&l| l > EIGEN_CUTOFF)
        .map(|l| -l * l.ln())
        .sum::<f64>();
    let b = region.boundary_size();
    Ok(EntropyReport {
        region_size: region.size(),
        boundary_size: b,
        entropy: s,
        schmidt_rank: rank,
        epsilon: region.lattice.epsilon,
        c_candidate: if b > 0 { s / b as f64 } else { 0.0 },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AreaLawScan {
    pub rows: Vec<EntropyReport>,
    /// `max S_A/|∂A|` over the scan.
    pub fitted_c: f64,
    /// `S_A/|A|` is non-increasing along the rows sorted by `|A|`.
    pub subextensive: bool,
}

pub fn area_law_scan(state: &PhysicalState, regions: &[Region], budget: &Budget) -> Result<AreaLawScan> {
    let mut rows = regions
        .par_iter()
        .map(|r| region_report(state, r, budget))
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(|r| r.region_size);
    let fitted_c = rows.iter().map(|r| r.c_candidate).fold(0.0, f64::max);
    let density: Vec<f64> = rows.iter().map(|r| r.entropy / r.region_size as f64).collect();
    let subextensive = density.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    Ok(AreaLawScan {
        rows,
        fitted_c,
        subextensive,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::generate_state;
    use crate::linalg::{c, max_abs_diff, ONE};
    use crate::model::{validate, BoundaryVectors, CouplingFields, ModelCandidate, ModelSpec, Statistics};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lat(n_x: usize, n_t: usize) -> LatticeSpec {
        LatticeSpec::periodic(0.5, n_x, n_t).unwrap()
    }

    fn two_site(amps: [C64; 4]) -> PhysicalState {
        PhysicalState {
            n_x: 2,
            n_t: 1,
            n_max: 1,
            amplitudes: amps.to_vec(),
        }
    }

    fn model(n_x: usize, n_t: usize, j: C64, m0: C64, r: C64) -> ModelSpec {
        let lattice = LatticeSpec::new(0.4, 1.0, n_x, n_t, crate::model::BoundaryCondition::Periodic).unwrap();
        validate(ModelCandidate {
            couplings: CouplingFields::uniform(1, &lattice, j, m0, r),
            lattice,
            boundary: BoundaryVectors::default(),
            statistics: Statistics::default(),
            theta: None,
            cmps: None,
        })
        .unwrap()
    }

    #[test]
    fn product_state_is_pure() {
        let s = two_site([c(0.6, 0.0), c(0.8, 0.0), ZERO, ZERO]);
        let r = Region::new(lat(2, 1), &[(0, 0)]).unwrap();
        let rho = reduced_density(&s, &r, &Budget::default()).unwrap();
        assert!(entropy(&rho).unwrap() < 1e-12);
    }

    #[test]
    fn bell_pair_is_maximally_mixed() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s = two_site([c(h, 0.0), ZERO, ZERO, c(h, 0.0)]);
        let r = Region::new(lat(2, 1), &[(1, 0)]).unwrap();
        let rho = reduced_density(&s, &r, &Budget::default()).unwrap();
        let half = CMat::identity(2, 2) * c(0.5, 0.0);
        assert!(max_abs_diff(&rho, &half) < 1e-15);
        assert!((entropy(&rho).unwrap() - 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn maximally_mixed_dim_four() {
        let rho = CMat::identity(4, 4) * c(0.25, 0.0);
        assert!((entropy(&rho).unwrap() - 4f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn random_pure_marginal_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut a: [C64; 4] = std::array::from_fn(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let n = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        a.iter_mut().for_each(|z| *z /= n);
        let s = two_site(a);
        let r = Region::new(lat(2, 1), &[(0, 0)]).unwrap();
        let got = entropy(&reduced_density(&s, &r, &Budget::default()).unwrap()).unwrap();
        // index = n0 + 2 n1; eigenvalues from the 2×2 closed form
        let (p, q) = (a[0].norm_sqr() + a[2].norm_sqr(), a[1].norm_sqr() + a[3].norm_sqr());
        let off = a[0].conj() * a[1] + a[2].conj() * a[3];
        let disc = ((p - q).powi(2) + 4.0 * off.norm_sqr()).sqrt();
        let expect: f64 = [(p + q + disc) / 2.0, (p + q - disc) / 2.0]
            .iter()
            .filter(|&&l| l > 1e-14)
            .map(|&l| -l * l.ln())
            .sum();
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn non_psd_is_rejected() {
        let mut rho = CMat::identity(2, 2) * c(0.5, 0.0);
        rho[(1, 1)] = c(-0.1, 0.0);
        assert!(matches!(entropy(&rho), Err(Error::Consistency(_))));
    }

    #[test]
    fn inner_boundary_counts() {
        let l = lat(4, 3);
        let r = Region::block(l, 0, 0, 2, 2).unwrap();
        // every site of a 2×2 block touches the complement
        assert_eq!(r.boundary_size(), 4);
        let strip = Region::temporal(l, 1).unwrap();
        assert_eq!(strip.boundary_size(), 4);
        let fine = Region::temporal(lat(8, 6), 2).unwrap();
        assert_eq!(fine.boundary_size(), 2 * strip.boundary_size());
        assert!(Region::new(l, &[]).is_err());
        assert!(Region::temporal(l, 3).is_err());
    }

    #[test]
    fn generated_state_density_is_physical() {
        let m = model(3, 2, c(0.0, 0.7), c(0.0, 0.3), c(0.8, 0.1));
        let g = generate_state(&m, &Budget::default()).unwrap();
        let r = Region::block(m.lattice, 0, 0, 2, 1).unwrap();
        let rho = reduced_density(&g.state, &r, &Budget::default()).unwrap();
        assert!((rho.trace() - ONE).norm() < 1e-12);
        assert!(max_abs_diff(&rho, &rho.adjoint()) < 1e-12);
        assert!(hermitian_eigenvalues(&rho)[0] > -1e-12);
    }

    #[test]
    fn zero_couplings_have_rank_one_and_no_entropy() {
        let m = model(3, 2, ZERO, ZERO, ZERO);
        let g = generate_state(&m, &Budget::default()).unwrap();
        assert_eq!(temporal_cut_rank(&g.state, 1, g.aux_dim).rank, 1);
        let regions: Vec<_> = (1..=3).map(|w| Region::block(m.lattice, 0, 0, w, 1).unwrap()).collect();
        let scan = area_law_scan(&g.state, &regions, &Budget::default()).unwrap();
        assert!(scan.rows.iter().all(|r| r.entropy < 1e-12));
    }

    #[test]
    fn temporal_rank_respects_sector_dimension() {
        let m = model(2, 3, c(0.3, 0.9), c(0.1, -0.4), c(0.7, 0.5));
        let g = generate_state(&m, &Budget::default()).unwrap();
        assert_eq!(g.aux_dim, 4);
        for t0 in 1..3 {
            let cut = temporal_cut_rank(&g.state, t0, g.aux_dim);
            assert!(cut.rank <= cut.bound);
            let side = 2usize.pow((t0 * 2) as u32).min(2usize.pow(((3 - t0) * 2) as u32));
            assert!(cut.rank <= side);
        }
    }

    #[test]
    fn strip_entropy_is_bounded_by_sector_dimension() {
        let m = model(4, 3, c(0.0, 0.8), c(0.0, 0.5), c(0.9, 0.0));
        let g = generate_state(&m, &Budget::default()).unwrap();
        for k in 1..4 {
            let r = Region::block(m.lattice, 0, 0, k, 1).unwrap();
            let rep = region_report(&g.state, &r, &Budget::default()).unwrap();
            assert!(rep.entropy <= (g.aux_dim as f64).ln() + 1e-12);
            let rc = r.complement().unwrap();
            let s_c = region_report(&g.state, &rc, &Budget::default()).unwrap().entropy;
            assert!((rep.entropy - s_c).abs() < 1e-10);
            assert!(rep.entropy <= (rep.schmidt_rank as f64).ln() + 1e-12);
        }
    }

    #[test]
    fn budget_is_enforced() {
        let m = model(3, 2, c(0.0, 0.7), ZERO, ONE);
        let g = generate_state(&m, &Budget::default()).unwrap();
        let r = Region::block(m.lattice, 0, 0, 3, 1).unwrap();
        let tiny = Budget { max_amplitudes: 40 };
        assert!(matches!(
            reduced_density(&g.state, &r, &tiny),
            Err(Error::Resource { .. })
        ));
    }
}
