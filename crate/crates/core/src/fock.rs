//! Exact auxiliary Fock spaces, the transfer-operator pieces `H_m`, `H_h`,
//! `Ĥ_int`, and generation of the physical lattice state.
//!
//! Fermionic signs follow a Jordan–Wigner string along the canonical mode
//! order: basis state `n` is `(c†_0)^{n_0}(c†_1)^{n_1}···|0⟩` and
//! `c†_j` picks up `(−1)^{Σ_{i<j} n_i}`.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{checked_pow, Budget, Error, Result};
use crate::linalg::{inner, CMat, SparseOp, TripletBuilder, C64, I, ONE, ZERO};
use crate::model::{AuxStatistics, BoundaryState, LatticeSpec, ModelSpec};

/// Largest basis this module will enumerate.
const MAX_BASIS: usize = 1 << 22;

/// Occupation-number basis of the auxiliary modes, optionally restricted to a
/// fixed total particle number.
#[derive(Debug, Clone)]
pub struct AuxFockBasis {
    stats: AuxStatistics,
    n_modes: usize,
    sector: Option<usize>,
    states: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
}

impl AuxFockBasis {
    /// Basis of the `n_aux`-particle sector.
    pub fn sector(n_modes: usize, stats: AuxStatistics, n_aux: usize) -> Result<Self> {
        Self::build(n_modes, stats, Some(n_aux))
    }

    /// All sectors at once (used to test number conservation).
    pub fn full(n_modes: usize, stats: AuxStatistics) -> Result<Self> {
        Self::build(n_modes, stats, None)
    }

    fn build(n_modes: usize, stats: AuxStatistics, sector: Option<usize>) -> Result<Self> {
        let cutoff = match stats {
            AuxStatistics::Fermionic => 1,
            AuxStatistics::Bosonic { cutoff } => cutoff,
        };
        if cutoff > u8::MAX as usize - 1 {
            return Err(Error::Unsupported("auxiliary cutoff too large".into()));
        }
        let mut states = Vec::new();
        let mut occ = vec![0u8; n_modes];
        enumerate(&mut occ, 0, cutoff as u8, sector, 0, &mut states)?;
        let base = cutoff as u128 + 1;
        let key = |s: &Vec<u8>| s.iter().rev().fold(0u128, |acc, &n| acc * base + n as u128);
        states.sort_by_key(key);
        let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Ok(Self {
            stats,
            n_modes,
            sector,
            states,
            index,
        })
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn statistics(&self) -> AuxStatistics {
        self.stats
    }

    pub fn sector_number(&self) -> Option<usize> {
        self.sector
    }

    pub fn state(&self, i: usize) -> &[u8] {
        &self.states[i]
    }

    pub fn index_of(&self, occ: &[u8]) -> Option<usize> {
        self.index.get(occ).copied()
    }

    pub fn number(&self, i: usize) -> usize {
        self.states[i].iter().map(|&n| n as usize).sum()
    }

    /// Total number operator as a diagonal sparse matrix.
    pub fn number_operator(&self) -> SparseOp {
        let mut b = TripletBuilder::new(self.dim(), self.dim());
        for i in 0..self.dim() {
            b.push(i, i, C64::new(self.number(i) as f64, 0.0));
        }
        b.build()
    }

    /// Build `Σ coef·c†_i c_j` on this basis.
    pub fn one_body(&self, terms: &[OneBodyTerm]) -> BuiltOp {
        let dim = self.dim();
        let mut b = TripletBuilder::new(dim, dim);
        let mut worst: f64 = 0.0;
        for col in 0..dim {
            let mut dropped = 0.0;
            for t in terms {
                if t.coef == ZERO {
                    continue;
                }
                let mut occ = self.states[col].clone();
                let Some(amp) = self.hop(&mut occ, t.create, t.annihilate) else {
                    continue;
                };
                let v = t.coef * amp;
                match self.index.get(&occ) {
                    Some(&row) => b.push(row, col, v),
                    None => dropped += v.norm_sqr(),
                }
            }
            worst = worst.max(dropped.sqrt());
        }
        BuiltOp {
            op: b.build(),
            truncation: worst,
        }
    }

    /// Apply `c†_i c_j` in place; `None` if the result vanishes. Occupations
    /// above the cutoff are left in `occ` so the caller can record the leak.
    fn hop(&self, occ: &mut [u8], i: usize, j: usize) -> Option<C64> {
        match self.stats {
            AuxStatistics::Fermionic => {
                if occ[j] == 0 {
                    return None;
                }
                let mut sign = parity(&occ[..j]);
                occ[j] = 0;
                if occ[i] == 1 {
                    return None;
                }
                sign ^= parity(&occ[..i]);
                occ[i] = 1;
                Some(if sign { -ONE } else { ONE })
            }
            AuxStatistics::Bosonic { .. } => {
                if occ[j] == 0 {
                    return None;
                }
                let mut amp = (occ[j] as f64).sqrt();
                occ[j] -= 1;
                amp *= (occ[i] as f64 + 1.0).sqrt();
                occ[i] += 1;
                Some(C64::new(amp, 0.0))
            }
        }
    }

    /// Coefficient vector of a boundary state in this basis.
    ///
    /// An explicit term `(modes, amp)` denotes `amp·c†_{m1}···c†_{mk}|0⟩`.
    pub fn boundary_vector(&self, state: &BoundaryState, d: usize) -> Result<Vec<C64>> {
        let mut v = vec![ZERO; self.dim()];
        match state {
            BoundaryState::UniformA => {
                let n_x = self.n_modes / (2 * d);
                let w = 1.0 / ((n_x * d) as f64).sqrt();
                for x in 0..n_x {
                    for j in 0..d {
                        let mut occ = vec![0u8; self.n_modes];
                        occ[(x * 2) * d + j] = 1;
                        let i = self
                            .index_of(&occ)
                            .ok_or_else(|| Error::Dimension("uniform boundary outside the basis sector".into()))?;
                        v[i] += C64::new(w, 0.0);
                    }
                }
            }
            BoundaryState::Explicit(terms) => {
                for (modes, amp) in terms {
                    let (occ, factor) = self.create_string(modes)?;
                    let i = self
                        .index_of(&occ)
                        .ok_or_else(|| Error::Dimension("boundary term outside the basis sector".into()))?;
                    v[i] += amp * factor;
                }
            }
        }
        Ok(v)
    }

    /// Occupation and amplitude of `c†_{m1}···c†_{mk}|0⟩` (rightmost acts first).
    fn create_string(&self, modes: &[usize]) -> Result<(Vec<u8>, C64)> {
        let mut occ = vec![0u8; self.n_modes];
        let mut amp = ONE;
        for &m in modes.iter().rev() {
            if m >= self.n_modes {
                return Err(Error::Dimension(format!("mode {m} out of range")));
            }
            match self.stats {
                AuxStatistics::Fermionic => {
                    if occ[m] == 1 {
                        return Ok((occ, ZERO));
                    }
                    if parity(&occ[..m]) {
                        amp = -amp;
                    }
                    occ[m] = 1;
                }
                AuxStatistics::Bosonic { .. } => {
                    amp *= (occ[m] as f64 + 1.0).sqrt();
                    occ[m] += 1;
                }
            }
        }
        Ok((occ, amp))
    }
}

fn parity(occ: &[u8]) -> bool {
    occ.iter().map(|&n| n as usize).sum::<usize>() % 2 == 1
}

fn enumerate(
    occ: &mut Vec<u8>,
    pos: usize,
    cutoff: u8,
    sector: Option<usize>,
    used: usize,
    out: &mut Vec<Vec<u8>>,
) -> Result<()> {
    if pos == occ.len() {
        if sector.is_none_or(|n| n == used) {
            if out.len() >= MAX_BASIS {
                return Err(Error::Resource {
                    needed: out.len() as u128 + 1,
                    allowed: MAX_BASIS as u128,
                    suggestion: "reduce N_x, D or the auxiliary particle number".into(),
                });
            }
            out.push(occ.clone());
        }
        return Ok(());
    }
    for n in 0..=cutoff {
        if let Some(s) = sector {
            if used + n as usize > s {
                break;
            }
        }
        occ[pos] = n;
        enumerate(occ, pos + 1, cutoff, sector, used + n as usize, out)?;
    }
    occ[pos] = 0;
    Ok(())
}

/// `coef·c†_create c_annihilate`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneBodyTerm {
    pub create: usize,
    pub annihilate: usize,
    pub coef: C64,
}

/// A many-body operator together with the largest per-state norm that fell
/// outside a bosonic cutoff.
#[derive(Debug, Clone)]
pub struct BuiltOp {
    pub op: SparseOp,
    pub truncation: f64,
}

/// Canonical index of `(x, species, flavor)`.
#[inline]
pub fn mode(x: usize, species: usize, flavor: usize, d: usize) -> usize {
    (x * 2 + species) * d + flavor
}

/// Term lists for the quadratic pieces of the transfer operator.
pub mod terms {
    use super::*;

    /// `(1/ε_x) Σ_x Σ_{y∈{x−1,x,x+1}} J^{jk}(a†_{j,x} b_{k,y} + b†_{j,x} a_{k,y})`.
    /// Links cut by open boundaries are dropped.
    pub fn hopping(lattice: &LatticeSpec, j: &CMat) -> Vec<OneBodyTerm> {
        let d = j.nrows();
        let s = 1.0 / lattice.epsilon_x;
        let mut out = Vec::new();
        for x in 0..lattice.n_x {
            for delta in [-1isize, 0, 1] {
                let Some(y) = lattice.shift(x, delta) else { continue };
                for jj in 0..d {
                    for kk in 0..d {
                        let c = j[(jj, kk)] * s;
                        if c == ZERO {
                            continue;
                        }
                        out.push(OneBodyTerm {
                            create: mode(x, 0, jj, d),
                            annihilate: mode(y, 1, kk, d),
                            coef: c,
                        });
                        out.push(OneBodyTerm {
                            create: mode(x, 1, jj, d),
                            annihilate: mode(y, 0, kk, d),
                            coef: c,
                        });
                    }
                }
            }
        }
        out
    }

    /// `Σ_x m0^{jk}(x)(a†_{j,x} a_{k,x} − b†_{j,x} b_{k,x})`.
    pub fn mass(m0: &[CMat]) -> Vec<OneBodyTerm> {
        let mut out = Vec::new();
        for (x, m) in m0.iter().enumerate() {
            let d = m.nrows();
            for jj in 0..d {
                for kk in 0..d {
                    let c = m[(jj, kk)];
                    if c == ZERO {
                        continue;
                    }
                    out.push(OneBodyTerm {
                        create: mode(x, 0, jj, d),
                        annihilate: mode(x, 0, kk, d),
                        coef: c,
                    });
                    out.push(OneBodyTerm {
                        create: mode(x, 1, jj, d),
                        annihilate: mode(x, 1, kk, d),
                        coef: -c,
                    });
                }
            }
        }
        out
    }

    /// `R^{jk}(a†_{j,x} a_{k,x} + b†_{j,x} b_{k,x})` at one site.
    pub fn density(x: usize, r: &CMat) -> Vec<OneBodyTerm> {
        let d = r.nrows();
        let mut out = Vec::new();
        for s in 0..2 {
            for jj in 0..d {
                for kk in 0..d {
                    let c = r[(jj, kk)];
                    if c == ZERO {
                        continue;
                    }
                    out.push(OneBodyTerm {
                        create: mode(x, s, jj, d),
                        annihilate: mode(x, s, kk, d),
                        coef: c,
                    });
                }
            }
        }
        out
    }

    /// `Σ_x f^{jk}(x) a†_{j,x} a_{k,x}`.
    pub fn onsite_a(f: &[CMat]) -> Vec<OneBodyTerm> {
        let mut out = Vec::new();
        for (x, m) in f.iter().enumerate() {
            let d = m.nrows();
            for jj in 0..d {
                for kk in 0..d {
                    if m[(jj, kk)] != ZERO {
                        out.push(OneBodyTerm {
                            create: mode(x, 0, jj, d),
                            annihilate: mode(x, 0, kk, d),
                            coef: m[(jj, kk)],
                        });
                    }
                }
            }
        }
        out
    }

    /// Second-quantized `σ_y` on every (a, b) doublet: `Σ −i a†b + i b†a`.
    pub fn sigma_y(n_x: usize, d: usize) -> Vec<OneBodyTerm> {
        let mut out = Vec::new();
        for x in 0..n_x {
            for j in 0..d {
                out.push(OneBodyTerm {
                    create: mode(x, 0, j, d),
                    annihilate: mode(x, 1, j, d),
                    coef: -I,
                });
                out.push(OneBodyTerm {
                    create: mode(x, 1, j, d),
                    annihilate: mode(x, 0, j, d),
                    coef: I,
                });
            }
        }
        out
    }

    /// Dense one-body matrix `h` with `H = Σ c†_i h_ij c_j`.
    pub fn to_matrix(n_modes: usize, terms: &[OneBodyTerm]) -> CMat {
        let mut h = CMat::zeros(n_modes, n_modes);
        for t in terms {
            h[(t.create, t.annihilate)] += t.coef;
        }
        h
    }
}

/// Coefficients `(c_1, c_σy, c_H)` of `c_1·1 + c_σy·σ_y + c_H·(H_m + H_h + Ĥ_int)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferCoeffs {
    pub c1: C64,
    pub c_sigma_y: C64,
    pub c_h: C64,
}

impl TransferCoeffs {
    pub fn plain(epsilon: f64) -> Self {
        Self {
            c1: ONE,
            c_sigma_y: ZERO,
            c_h: C64::new(epsilon, 0.0),
        }
    }
}

/// `M̂ε(t)` with its identity and generator parts kept apart.
#[derive(Debug, Clone)]
pub struct TransferOp {
    pub coeffs: TransferCoeffs,
    pub h_m: SparseOp,
    pub h_h: SparseOp,
    /// Aux density operator of `Ĥ_int` at each site; the physical factor is
    /// `ψ̂†(x, t)`.
    pub h_int: Vec<SparseOp>,
    pub sigma_y: Option<SparseOp>,
    pub truncation: f64,
}

pub fn build_h_h(model: &ModelSpec, basis: &AuxFockBasis, t: usize) -> BuiltOp {
    basis.one_body(&terms::hopping(&model.lattice, &model.couplings.j[t]))
}

pub fn build_h_m(model: &ModelSpec, basis: &AuxFockBasis, t: usize) -> BuiltOp {
    basis.one_body(&terms::mass(&model.couplings.m0[t]))
}

/// Per-site aux parts of `Ĥ_int(t)`.
pub fn build_h_int(model: &ModelSpec, basis: &AuxFockBasis, t: usize) -> Vec<BuiltOp> {
    (0..model.lattice.n_x)
        .map(|x| basis.one_body(&terms::density(x, &model.couplings.r[t][x])))
        .collect()
}

/// `M̂ε(t) = 1 + ε(H_m + H_h + Ĥ_int)`.
pub fn build_transfer(model: &ModelSpec, basis: &AuxFockBasis, t: usize) -> TransferOp {
    build_transfer_with(model, basis, t, TransferCoeffs::plain(model.lattice.epsilon))
}

/// Transfer operator with arbitrary coefficients, e.g. from
/// [`crate::clifford::interpolated_transfer_coeffs`].
pub fn build_transfer_with(model: &ModelSpec, basis: &AuxFockBasis, t: usize, coeffs: TransferCoeffs) -> TransferOp {
    let hm = build_h_m(model, basis, t);
    let hh = build_h_h(model, basis, t);
    let hint = build_h_int(model, basis, t);
    let sigma_y = (coeffs.c_sigma_y != ZERO).then(|| basis.one_body(&terms::sigma_y(model.lattice.n_x, model.d())).op);
    let truncation = hint
        .iter()
        .map(|b| b.truncation)
        .chain([hm.truncation, hh.truncation])
        .fold(0.0, f64::max);
    TransferOp {
        coeffs,
        h_m: hm.op,
        h_h: hh.op,
        h_int: hint.into_iter().map(|b| b.op).collect(),
        sigma_y,
        truncation,
    }
}

impl TransferOp {
    /// The part of `M̂` that leaves the physical slice empty.
    pub fn apply_aux(&self, v: &[C64]) -> Vec<C64> {
        let hm = self.h_m.apply(v);
        let hh = self.h_h.apply(v);
        let sy = self.sigma_y.as_ref().map(|s| s.apply(v));
        (0..v.len())
            .map(|i| {
                let mut acc = self.coeffs.c1 * v[i] + self.coeffs.c_h * (hm[i] + hh[i]);
                if let Some(sy) = &sy {
                    acc += self.coeffs.c_sigma_y * sy[i];
                }
                acc
            })
            .collect()
    }

    /// Aux part of the `ψ̂†(x)` component of `M̂`.
    pub fn apply_int(&self, x: usize, v: &[C64]) -> Vec<C64> {
        self.h_int[x]
            .apply(v)
            .into_iter()
            .map(|z| z * self.coeffs.c_h)
            .collect()
    }

    /// Dense aux block `c_1 + c_σy σ_y + c_H(H_m + H_h)`.
    pub fn aux_dense(&self) -> CMat {
        let n = self.h_m.rows();
        let mut m = CMat::identity(n, n) * self.coeffs.c1;
        m += (self.h_m.to_dense() + self.h_h.to_dense()) * self.coeffs.c_h;
        if let Some(s) = &self.sigma_y {
            m += s.to_dense() * self.coeffs.c_sigma_y;
        }
        m
    }
}

/// `‖M̂ε†M̂ε − 1‖` (spectral norm) of the time-`t` transfer operator at step
/// `epsilon`, on the aux sector of `model`. Requires `R = 0` at `t`, so that
/// `M̂ε` acts on the aux space alone.
pub fn unitarity_defect(model: &ModelSpec, t: usize, epsilon: f64) -> Result<f64> {
    if model.couplings.r[t].iter().any(|r| r.iter().any(|z| *z != ZERO)) {
        return Err(Error::config("couplings.r", "unitarity defect needs R = 0"));
    }
    let basis = model_basis(model)?;
    let m = build_transfer_with(model, &basis, t, TransferCoeffs::plain(epsilon)).aux_dense();
    let n = m.nrows();
    Ok(crate::linalg::spectral_norm(&(m.adjoint() * &m - CMat::identity(n, n))))
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitarityScaling {
    /// `(ε, defect)` pairs.
    pub rows: Vec<(f64, f64)>,
    /// Slope of `log defect` against `log ε`.
    pub slope: f64,
}

pub fn unitarity_scaling(model: &ModelSpec, t: usize, epsilons: &[f64]) -> Result<UnitarityScaling> {
    let rows = epsilons
        .iter()
        .map(|&e| unitarity_defect(model, t, e).map(|d| (e, d)))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = rows.iter().map(|r| r.0.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.1.ln()).collect();
    let (slope, _) = crate::linalg::linear_fit(&xs, &ys);
    Ok(UnitarityScaling { rows, slope })
}

/// Physical state on `n_x·n_t` bosonic modes with occupation cutoff `n_max`.
///
/// Mode `(x, t)` has index `p = t·n_x + x`; the basis index of an occupation
/// pattern is `Σ_p n_p (n_max+1)^p`, so mode 0 is the fastest digit.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalState {
    pub n_x: usize,
    pub n_t: usize,
    pub n_max: usize,
    pub amplitudes: Vec<C64>,
}

impl PhysicalState {
    pub fn modes(&self) -> usize {
        self.n_x * self.n_t
    }

    pub fn local_dim(&self) -> usize {
        self.n_max + 1
    }

    pub fn norm(&self) -> f64 {
        crate::linalg::vec_norm(&self.amplitudes)
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        let mut out = self.clone();
        if n > 0.0 {
            out.amplitudes.iter_mut().for_each(|a| *a /= n);
        }
        out
    }

    pub fn occupation(&self, index: usize) -> Vec<u8> {
        let base = self.local_dim();
        let mut i = index;
        (0..self.modes())
            .map(|_| {
                let n = (i % base) as u8;
                i /= base;
                n
            })
            .collect()
    }

    pub fn index_of(&self, occ: &[u8]) -> usize {
        let base = self.local_dim();
        occ.iter().rev().fold(0usize, |acc, &n| acc * base + n as usize)
    }

    /// Total physical particle number of a basis index.
    pub fn particle_number(&self, index: usize) -> usize {
        self.occupation(index).iter().map(|&n| n as usize).sum()
    }
}

/// Result of [`generate_state`].
#[derive(Debug, Clone)]
pub struct GeneratedState {
    pub state: PhysicalState,
    pub normalized: PhysicalState,
    pub norm: f64,
    pub aux_dim: usize,
    /// Bosonic truncation bound (0 for fermionic auxiliaries).
    pub truncation: f64,
}

pub fn model_basis(model: &ModelSpec) -> Result<AuxFockBasis> {
    AuxFockBasis::sector(model.n_modes(), model.statistics.aux, model.boundary.n_aux)
}

/// Largest `N_t` whose state fits the budget at this `N_x`.
fn suggest_lattice(model: &ModelSpec, budget: &Budget) -> String {
    let base = model.statistics.phys_cutoff as u128 + 1;
    let n_x = model.lattice.n_x;
    let mut n_t = 0;
    while checked_pow(base, n_x * (n_t + 1)) <= budget.max_amplitudes && n_t < 64 {
        n_t += 1;
    }
    format!("largest admissible lattice at N_x = {n_x} has N_t = {n_t}")
}

/// `|χ_ε⟩ = ⟨ω_L| M̂ε(t_{N_t−1})···M̂ε(t_0) |ω_R⟩ |Ω⟩`.
///
/// Each `M̂ε` applies `Ĥ_int` at most once, so every time slice carries at
/// most one physical particle. Aux vectors are propagated per physical
/// pattern; patterns are independent and run in parallel with an ordered
/// collect, so the output does not depend on the worker count.
pub fn generate_state(model: &ModelSpec, budget: &Budget) -> Result<GeneratedState> {
    let lat = &model.lattice;
    let n_max = model.statistics.phys_cutoff;
    let needed = checked_pow(n_max as u128 + 1, lat.n_x * lat.n_t);
    budget.check(needed, || suggest_lattice(model, budget))?;
    let basis = model_basis(model)?;
    let patterns = checked_pow(lat.n_x as u128 + 1, lat.n_t).saturating_mul(basis.dim() as u128);
    budget.check(patterns, || suggest_lattice(model, budget))?;

    let omega_r = basis.boundary_vector(&model.boundary.omega_r, model.d())?;
    let omega_l = basis.boundary_vector(&model.boundary.omega_l, model.d())?;
    let mut truncation: f64 = 0.0;

    // vectors[code], code = Σ_k c_k (N_x+1)^k with c_k = 0 (empty) or x+1
    let mut vectors: Vec<Vec<C64>> = vec![omega_r];
    for t in 0..lat.n_t {
        let op = build_transfer(model, &basis, t);
        truncation = truncation.max(op.truncation);
        let choices = lat.n_x + 1;
        // new code = old + c·choices^t; the old codes are a prefix, so the
        // new index is old + c·len(old)
        let stride = vectors.len();
        let mut next: Vec<Option<Vec<C64>>> = vec![None; stride * choices];
        let computed: Vec<(usize, Vec<C64>)> = (0..stride * choices)
            .into_par_iter()
            .map(|code| {
                let old = code % stride;
                let c = code / stride;
                let v = &vectors[old];
                let out = if c == 0 {
                    op.apply_aux(v)
                } else {
                    op.apply_int(c - 1, v)
                };
                (code, out)
            })
            .collect();
        for (code, v) in computed {
            next[code] = Some(v);
        }
        vectors = next.into_iter().map(|v| v.expect("every code computed")).collect();
    }

    let mut state = PhysicalState {
        n_x: lat.n_x,
        n_t: lat.n_t,
        n_max,
        amplitudes: vec![ZERO; needed as usize],
    };
    for (code, v) in vectors.iter().enumerate() {
        let mut occ = vec![0u8; lat.n_x * lat.n_t];
        let mut rest = code;
        for t in 0..lat.n_t {
            let c = rest % (lat.n_x + 1);
            rest /= lat.n_x + 1;
            if c > 0 {
                occ[t * lat.n_x + c - 1] = 1;
            }
        }
        let idx = state.index_of(&occ);
        state.amplitudes[idx] += inner(&omega_l, v);
    }
    let norm = state.norm();
    Ok(GeneratedState {
        normalized: state.normalized(),
        state,
        norm,
        aux_dim: basis.dim(),
        truncation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, max_abs, max_abs_diff};
    use crate::model::{validate, BoundaryVectors, CouplingFields, ModelCandidate, Statistics};

    fn model(n_x: usize, n_t: usize, _d: usize, fields: impl Fn(&LatticeSpec) -> CouplingFields) -> ModelSpec {
        let lattice = LatticeSpec::periodic(0.5, n_x, n_t).unwrap();
        validate(ModelCandidate {
            couplings: fields(&lattice),
            lattice,
            boundary: BoundaryVectors::default(),
            statistics: Statistics::default(),
            theta: None,
            cmps: None,
        })
        .unwrap()
    }

    fn binom(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn sector_dimensions_are_combinatorial() {
        for (m, n) in [(6, 0), (6, 1), (6, 3), (8, 2)] {
            let b = AuxFockBasis::sector(m, AuxStatistics::Fermionic, n).unwrap();
            assert_eq!(b.dim(), binom(m, n));
        }
        // bosons: stars and bars when the cutoff is not binding
        let b = AuxFockBasis::sector(4, AuxStatistics::Bosonic { cutoff: 2 }, 2).unwrap();
        assert_eq!(b.dim(), binom(5, 2));
        assert_eq!(AuxFockBasis::full(5, AuxStatistics::Fermionic).unwrap().dim(), 32);
    }

    #[test]
    fn fermionic_basis_is_bitstring_ordered() {
        let b = AuxFockBasis::full(3, AuxStatistics::Fermionic).unwrap();
        for i in 0..b.dim() {
            let v: usize = b.state(i).iter().enumerate().map(|(k, &n)| (n as usize) << k).sum();
            assert_eq!(v, i);
        }
    }

    #[test]
    fn anticommutation_holds() {
        // {c_i, c†_j} = δ_ij realized through c†_i c_j + c_j c†_i
        let b = AuxFockBasis::full(4, AuxStatistics::Fermionic).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let hop = b
                    .one_body(&[OneBodyTerm {
                        create: i,
                        annihilate: j,
                        coef: ONE,
                    }])
                    .op
                    .to_dense();
                let back = b
                    .one_body(&[OneBodyTerm {
                        create: j,
                        annihilate: i,
                        coef: ONE,
                    }])
                    .op
                    .to_dense();
                // c_j c†_i = δ_ij − c†_i c_j for fermions, so the product
                // c†_i c_j c†_j c_i on states with n_i=1, n_j=0 is the projector
                let prod = &hop * &back;
                let ni = b
                    .one_body(&[OneBodyTerm {
                        create: i,
                        annihilate: i,
                        coef: ONE,
                    }])
                    .op
                    .to_dense();
                let nj = b
                    .one_body(&[OneBodyTerm {
                        create: j,
                        annihilate: j,
                        coef: ONE,
                    }])
                    .op
                    .to_dense();
                let id = CMat::identity(b.dim(), b.dim());
                let expect = if i == j { ni.clone() } else { &ni * (&id - &nj) };
                assert!(max_abs_diff(&prod, &expect) < 1e-14, "i={i} j={j}");
            }
        }
    }

    #[test]
    fn zero_hopping_is_zero() {
        let m = model(3, 1, 1, |l| CouplingFields::zero(1, l));
        let b = model_basis(&m).unwrap();
        assert!(build_h_h(&m, &b, 0).op.is_zero());
    }

    #[test]
    fn single_site_hopping_triples() {
        let lat = LatticeSpec::periodic(0.5, 1, 1).unwrap();
        let j = CMat::identity(1, 1);
        let b = AuxFockBasis::sector(2, AuxStatistics::Fermionic, 1).unwrap();
        let h = b.one_body(&terms::hopping(&lat, &j)).op.to_dense();
        // basis: |a⟩, |b⟩
        let expect = CMat::from_row_slice(2, 2, &[ZERO, c(6.0, 0.0), c(6.0, 0.0), ZERO]);
        assert!(max_abs_diff(&h, &expect) < 1e-14);
    }

    #[test]
    fn hopping_commutes_with_number() {
        let m = model(3, 1, 1, |l| CouplingFields::uniform(1, l, c(0.7, 0.2), ZERO, ZERO));
        let b = AuxFockBasis::full(m.n_modes(), AuxStatistics::Fermionic).unwrap();
        let h = build_h_h(&m, &b, 0).op.to_dense();
        let n = b.number_operator().to_dense();
        assert_eq!(max_abs(&(&h * &n - &n * &h)), 0.0);
    }

    #[test]
    fn mass_is_n_a_minus_n_b() {
        let m = model(2, 1, 1, |l| CouplingFields::uniform(1, l, ZERO, c(0.3, 0.0), ZERO));
        let b = AuxFockBasis::full(m.n_modes(), AuxStatistics::Fermionic).unwrap();
        let h = build_h_m(&m, &b, 0).op.to_dense();
        for i in 0..b.dim() {
            let s = b.state(i);
            let na: f64 = (0..2).map(|x| s[mode(x, 0, 0, 1)] as f64).sum();
            let nb: f64 = (0..2).map(|x| s[mode(x, 1, 0, 1)] as f64).sum();
            assert!((h[(i, i)] - c(0.3 * (na - nb), 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn anti_hermitian_mass() {
        let m = model(2, 1, 2, |l| CouplingFields::uniform(2, l, ZERO, c(0.0, -0.8), ZERO));
        let b = model_basis(&m).unwrap();
        let h = build_h_m(&m, &b, 0).op.to_dense();
        assert!(max_abs(&(&h + h.adjoint())) < 1e-15);
    }

    #[test]
    fn mass_eigenvalue_on_single_a_particle() {
        let lat = LatticeSpec::periodic(0.5, 3, 1).unwrap();
        let mut f = CouplingFields::zero(1, &lat);
        f.m0[0] = vec![
            CMat::from_element(1, 1, c(0.1, 0.0)),
            CMat::from_element(1, 1, c(0.4, 0.0)),
            CMat::from_element(1, 1, c(-0.2, 0.0)),
        ];
        let m = model(3, 1, 1, |_| f.clone());
        let b = model_basis(&m).unwrap();
        let h = build_h_m(&m, &b, 0).op.to_dense();
        let ev = crate::linalg::hermitian_eigenvalues(&h);
        let mut expect = vec![0.1, 0.4, -0.2, -0.1, -0.4, 0.2];
        expect.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, e) in ev.iter().zip(expect) {
            assert!((a - e).abs() < 1e-14);
        }
    }

    #[test]
    fn interaction_on_vacuum_and_single_particle() {
        let m = model(2, 1, 1, |l| CouplingFields::uniform(1, l, ZERO, ZERO, c(0.6, 0.1)));
        let vac = AuxFockBasis::sector(m.n_modes(), AuxStatistics::Fermionic, 0).unwrap();
        for op in build_h_int(&m, &vac, 0) {
            assert!(op.op.is_zero());
        }
        let b = model_basis(&m).unwrap();
        let ops = build_h_int(&m, &b, 0);
        let mut occ = vec![0u8; 4];
        occ[mode(1, 0, 0, 1)] = 1;
        let i = b.index_of(&occ).unwrap();
        let mut v = vec![ZERO; b.dim()];
        v[i] = ONE;
        let out = ops[1].op.apply(&v);
        assert!((out[i] - c(0.6, 0.1)).norm() < 1e-15);
        assert!(ops[0].op.apply(&v).iter().all(|z| *z == ZERO));
    }

    #[test]
    fn zero_couplings_give_boundary_overlap() {
        let m = model(2, 2, 1, |l| CouplingFields::zero(1, l));
        let g = generate_state(&m, &Budget::default()).unwrap();
        assert!((g.state.amplitudes[0] - ONE).norm() < 1e-14);
        assert!(g.state.amplitudes[1..].iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn one_step_one_particle_amplitude() {
        let r = c(0.9, -0.3);
        let m = model(3, 1, 1, |l| CouplingFields::uniform(1, l, ZERO, ZERO, r));
        let g = generate_state(&m, &Budget::default()).unwrap();
        // ⟨ω_L|n_a(x)+n_b(x)|ω_R⟩ = 1/3 for the uniform single-a state
        for x in 0..3 {
            let mut occ = vec![0u8; 3];
            occ[x] = 1;
            let a = g.state.amplitudes[g.state.index_of(&occ)];
            assert!((a - r * 0.5 / 3.0).norm() < 1e-15);
        }
    }

    #[test]
    fn budget_exceeded_is_reported() {
        let m = model(3, 3, 1, |l| CouplingFields::zero(1, l));
        let err = generate_state(&m, &Budget { max_amplitudes: 100 }).unwrap_err();
        match err {
            Error::Resource { needed, suggestion, .. } => {
                assert_eq!(needed, 512);
                assert!(suggestion.contains("N_t = 2"), "{suggestion}");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn imaginary_couplings_give_quadratic_defect() {
        use crate::model::{CouplingFields, LatticeSpec};
        let mut m = ModelSpec::demo();
        m.couplings = CouplingFields::uniform(1, &m.lattice, I, c(0.0, 0.3), ZERO);
        let sc = unitarity_scaling(&m, 0, &[1e-1, 1e-2, 1e-3]).unwrap();
        assert!((sc.slope - 2.0).abs() < 0.1, "{sc:?}");
        let lat = LatticeSpec::periodic(1.0, 3, 1).unwrap();
        m.couplings = CouplingFields::uniform(1, &lat, ONE, ZERO, ZERO);
        m.lattice = lat;
        let lin = unitarity_scaling(&m, 0, &[1e-1, 1e-2, 1e-3]).unwrap();
        assert!((lin.slope - 1.0).abs() < 0.1, "{lin:?}");
        m.couplings.r[0][0] = CMat::identity(1, 1);
        assert!(unitarity_defect(&m, 0, 0.1).is_err());
    }
}
