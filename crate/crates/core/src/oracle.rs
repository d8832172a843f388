//! Coherent-state path integral for the transfer-operator state, contracted
//! exactly by Berezin integration. Shares no code with [`crate::fock`]
//! beyond the model description.
//!
//! Fermionic coherent states are `|φ⟩ = exp(−Σ φ_i c†_i)|0⟩`; in the
//! contraction the normalization `exp(−Σ φ*φ)` of each resolution sits in
//! the measure, so every step contributes the raw symbol
//! `⟨φ'|M̂|φ⟩ = (1 + ε h(φ'*, φ) + ε Σ_x ρ_x(φ'*, φ) ψ̂†(x)) e^{φ'*φ}`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::Matrix2;

use crate::error::{Error, Result};
use crate::fock::PhysicalState;
use crate::grassmann::{CoherentLayout, Grassmann};
use crate::linalg::{CMat, C64, ZERO};
use crate::model::{AuxStatistics, BoundaryState, ModelSpec};

/// Quadratic coherent symbols of one transfer step, assembled from the
/// doublet form `Ψ†(m0 σ_z)Ψ + (1/ε_x) Ψ†(x)(J σ_x)Ψ(x+δ)` and `Ψ†RΨ`.
#[derive(Debug, Clone)]
pub struct CoherentSymbol {
    /// `h` with `h(φ'*, φ) = Σ φ'*_i h_ij φ_j` for `H_m + H_h`.
    pub h: CMat,
    /// Density kernels `ρ_x` of `Ĥ_int`, one per site.
    pub rho: Vec<CMat>,
}

fn embed(out: &mut CMat, x: usize, y: usize, block: &CMat) {
    let n = block.nrows();
    for i in 0..n {
        for j in 0..n {
            out[(x * n + i, y * n + j)] += block[(i, j)];
        }
    }
}

fn pauli(m: Matrix2<C64>) -> CMat {
    CMat::from_fn(2, 2, |i, j| m[(i, j)])
}

pub fn coherent_symbol(model: &ModelSpec, t: usize) -> CoherentSymbol {
    let lat = &model.lattice;
    let d = model.d();
    let n = model.n_modes();
    let sz = pauli(crate::linalg::pauli::z());
    let sx = pauli(crate::linalg::pauli::x());
    let id2 = CMat::identity(2, 2);
    let mut h = CMat::zeros(n, n);
    for x in 0..lat.n_x {
        embed(&mut h, x, x, &sz.kronecker(&model.couplings.m0[t][x]));
        let kin = sx.kronecker(&model.couplings.j[t]) / C64::new(lat.epsilon_x, 0.0);
        for delta in [-1isize, 0, 1] {
            if let Some(y) = lat.shift(x, delta) {
                embed(&mut h, x, y, &kin);
            }
        }
    }
    let rho = (0..lat.n_x)
        .map(|x| {
            let mut r = CMat::zeros(n, n);
            embed(&mut r, x, x, &id2.kronecker(&model.couplings.r[t][x]));
            r
        })
        .collect();
    let _ = d;
    CoherentSymbol { h, rho }
}

/// Physical payload channel of a step: no creation, or `ψ̂†(x)`.
pub type Channel = Option<usize>;

/// `⟨φ(s_out)| M̂ |φ(s_in)⟩` per channel, in both forms.
#[derive(Debug, Clone)]
pub struct StepAmplitude {
    /// Exact operator symbol with normalized coherent states.
    pub exact: BTreeMap<Channel, Grassmann>,
    /// `overlap · exp(ε h)` times the interaction payload.
    pub closed: BTreeMap<Channel, Grassmann>,
    /// Largest coefficient difference between the two forms.
    pub deviation: f64,
}

/// Raw (unnormalized-state) exact step symbol.
fn raw_step(
    layout: &CoherentLayout,
    sym: &CoherentSymbol,
    eps: C64,
    s_out: usize,
    s_in: usize,
) -> BTreeMap<Channel, Grassmann> {
    let e = layout.raw_overlap(s_out, s_in);
    let mut out = BTreeMap::new();
    let h = layout.bilinear(s_out, s_in, &sym.h).scale(eps);
    out.insert(None, &(&Grassmann::one() + &h) * &e);
    for (x, rho) in sym.rho.iter().enumerate() {
        let r = layout.bilinear(s_out, s_in, rho).scale(eps);
        if !r.is_empty() {
            out.insert(Some(x), &r * &e);
        }
    }
    out
}

/// Single-step amplitude between slices `s_in → s_out` of `layout`, at time
/// index `t`. Errors if the two forms disagree beyond `O(ε²)`.
pub fn step_amplitude(
    model: &ModelSpec,
    t: usize,
    layout: &CoherentLayout,
    s_out: usize,
    s_in: usize,
) -> Result<StepAmplitude> {
    let sym = coherent_symbol(model, t);
    let eps = C64::new(model.lattice.epsilon, 0.0);
    let norm = {
        let id = CMat::identity(layout.modes, layout.modes);
        let a = layout.bilinear(s_out, s_out, &id).scale(C64::new(-0.5, 0.0));
        let b = layout.bilinear(s_in, s_in, &id).scale(C64::new(-0.5, 0.0));
        (&a + &b).exp()?
    };
    let exact: BTreeMap<Channel, Grassmann> = raw_step(layout, &sym, eps, s_out, s_in)
        .into_iter()
        .map(|(k, v)| (k, &v * &norm))
        .collect();

    let overlap = layout.overlap(s_out, s_in);
    let dyn_part = layout.bilinear(s_out, s_in, &sym.h).scale(eps).exp()?;
    let base = &overlap * &dyn_part;
    let mut closed = BTreeMap::new();
    closed.insert(None, base.clone());
    for (x, rho) in sym.rho.iter().enumerate() {
        let r = layout.bilinear(s_out, s_in, rho).scale(eps);
        if !r.is_empty() {
            closed.insert(Some(x), &r * &base);
        }
    }

    let mut deviation: f64 = 0.0;
    for (k, v) in &exact {
        let w = closed.get(k).cloned().unwrap_or_default();
        deviation = deviation.max((v - &w).max_abs());
    }
    let scale = 1.0 + sym.h.iter().map(|z| z.norm()).sum::<f64>();
    let tol = 4.0 * (model.lattice.epsilon * scale).powi(2) + 1e-12;
    if deviation > tol {
        return Err(Error::Consistency(format!(
            "step amplitude forms differ by {deviation:e} (allowed {tol:e})"
        )));
    }
    Ok(StepAmplitude {
        exact,
        closed,
        deviation,
    })
}

/// `⟨φ(s)|ω⟩` for a boundary description.
fn bra_boundary(layout: &CoherentLayout, s: usize, state: &BoundaryState, n_x: usize, d: usize) -> Grassmann {
    match state {
        BoundaryState::UniformA => {
            let w = C64::new(1.0 / ((n_x * d) as f64).sqrt(), 0.0);
            let mut g = Grassmann::zero();
            for x in 0..n_x {
                for j in 0..d {
                    g = &g + &layout.bra_fock(s, &[crate::fock::mode(x, 0, j, d)]).scale(w);
                }
            }
            g
        }
        BoundaryState::Explicit(terms) => terms.iter().fold(Grassmann::zero(), |acc, (modes, amp)| {
            &acc + &layout.bra_fock(s, modes).scale(*amp)
        }),
    }
}

/// `⟨ω|φ(s)⟩`.
fn ket_boundary(layout: &CoherentLayout, s: usize, state: &BoundaryState, n_x: usize, d: usize) -> Grassmann {
    match state {
        BoundaryState::UniformA => {
            let w = C64::new(1.0 / ((n_x * d) as f64).sqrt(), 0.0);
            let mut g = Grassmann::zero();
            for x in 0..n_x {
                for j in 0..d {
                    g = &g + &layout.ket_fock(s, &[crate::fock::mode(x, 0, j, d)]).scale(w);
                }
            }
            g
        }
        BoundaryState::Explicit(terms) => terms.iter().fold(Grassmann::zero(), |acc, (modes, amp)| {
            &acc + &layout.ket_fock(s, modes).scale(amp.conj())
        }),
    }
}

/// Normalization of the coherent resolution of identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeasureConvention {
    /// `π^M` for `M` complex integration variables.
    #[default]
    PerMode,
    /// `π^{2M}`, the constant written for `4DN_x` complex functions as
    /// `π^{8DN_x}`. Kept for comparison only.
    Literal,
}

/// Bosonic resolution constant for `m` complex variables.
pub fn measure_constant(m: usize, convention: MeasureConvention) -> f64 {
    match convention {
        MeasureConvention::PerMode => PI.powi(m as i32),
        MeasureConvention::Literal => PI.powi(2 * m as i32),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ContractOptions {
    pub max_pairs: usize,
}

impl Default for ContractOptions {
    fn default() -> Self {
        Self { max_pairs: 16 }
    }
}

/// Insert `N_t + 1` coherent resolutions into
/// `⟨ω_L|M̂(t_{N_t−1})···M̂(t_0)|ω_R⟩` and Berezin-integrate slice by slice.
///
/// The integrand is kept as a map from the physical pattern of the slices
/// already contracted to a Grassmann element in the current slice's `φ*`.
pub fn contract_path_integral(model: &ModelSpec, opts: ContractOptions) -> Result<PhysicalState> {
    if model.statistics.aux != AuxStatistics::Fermionic {
        return Err(Error::Unsupported(
            "the path-integral oracle contracts fermionic auxiliaries only".into(),
        ));
    }
    let lat = &model.lattice;
    let d = model.d();
    let modes = model.n_modes();
    let slices = lat.n_t + 1;
    let pairs = modes * slices;
    if pairs > opts.max_pairs {
        return Err(Error::Resource {
            needed: pairs as u128,
            allowed: opts.max_pairs as u128,
            suggestion: format!(
                "{modes} modes per slice allow at most N_t = {}",
                (opts.max_pairs / modes.max(1)).saturating_sub(1)
            ),
        });
    }
    let layout = CoherentLayout::new(modes, slices)?;
    let n_max = model.statistics.phys_cutoff;
    let choices = lat.n_x + 1;

    let mut current: Vec<Grassmann> = vec![bra_boundary(&layout, 0, &model.boundary.omega_r, lat.n_x, d)];
    for s in 0..lat.n_t {
        let sym = coherent_symbol(model, s);
        let step = raw_step(&layout, &sym, C64::new(lat.epsilon, 0.0), s + 1, s);
        let weight = layout.weight(s);
        let measure = layout.measure(s);
        let stride = current.len();
        let mut next = vec![Grassmann::zero(); stride * choices];
        for (old, b) in current.iter().enumerate() {
            if b.is_empty() {
                continue;
            }
            let wb = &weight * b;
            for c in 0..choices {
                let key = if c == 0 { None } else { Some(c - 1) };
                let Some(a) = step.get(&key) else { continue };
                next[old + c * stride] = (a * &wb).integrate(&measure);
            }
        }
        current = next;
    }

    let last = lat.n_t;
    let left = ket_boundary(&layout, last, &model.boundary.omega_l, lat.n_x, d);
    let lw = &left * &layout.weight(last);
    let measure = layout.measure(last);
    let mut state = PhysicalState {
        n_x: lat.n_x,
        n_t: lat.n_t,
        n_max,
        amplitudes: vec![ZERO; (n_max + 1).pow((lat.n_x * lat.n_t) as u32)],
    };
    for (code, b) in current.iter().enumerate() {
        let amp = (&lw * b).integrate(&measure).body();
        let mut occ = vec![0u8; lat.n_x * lat.n_t];
        let mut rest = code;
        for t in 0..lat.n_t {
            let c = rest % choices;
            rest /= choices;
            if c > 0 {
                occ[t * lat.n_x + c - 1] = 1;
            }
        }
        let idx = state.index_of(&occ);
        state.amplitudes[idx] += amp;
    }
    Ok(state)
}

/// Normalized bosonic overlap `exp(Σ φ'*φ − ½|φ'|² − ½|φ|²)`.
pub fn overlap_bosonic(out: &[C64], inp: &[C64]) -> Result<C64> {
    if out.len() != inp.len() {
        return Err(Error::Dimension("coherent labels cover different mode sets".into()));
    }
    let e: C64 = out
        .iter()
        .zip(inp)
        .map(|(a, b)| a.conj() * b - 0.5 * a.norm_sqr() - 0.5 * b.norm_sqr())
        .sum();
    Ok(e.exp())
}

/// `exp[−(ε/2) Σ (φ*∂_tφ − ∂_tφ* φ)]` with `∂_tφ = (φ_out − φ_in)/ε`,
/// evaluated at `φ = φ_in`.
pub fn overlap_discrete_derivative(out: &[C64], inp: &[C64], eps: f64) -> C64 {
    let e: C64 = out
        .iter()
        .zip(inp)
        .map(|(a, b)| {
            let dt = (a - b) / eps;
            b.conj() * dt - dt.conj() * b
        })
        .sum();
    (-(eps / 2.0) * e).exp()
}

/// Resolution of identity on `modes` fermionic modes: the matrix
/// `∫dμ e^{−φ*φ} ⟨n|φ⟩⟨φ|m⟩` over the full occupation basis (bitstring order).
pub fn resolution_matrix(modes: usize) -> Result<CMat> {
    let layout = CoherentLayout::new(modes, 1)?;
    let dim = 1usize << modes;
    let occupied = |n: usize| (0..modes).filter(|&i| n & (1 << i) != 0).collect::<Vec<_>>();
    let w = layout.weight(0);
    let measure = layout.measure(0);
    let mut out = CMat::zeros(dim, dim);
    for n in 0..dim {
        let ket = layout.ket_fock(0, &occupied(n));
        let kw = &ket * &w;
        for m in 0..dim {
            let bra = layout.bra_fock(0, &occupied(m));
            out[(n, m)] = (&kw * &bra).integrate(&measure).body();
        }
    }
    Ok(out)
}

/// Map lattice amplitude variables to continuum normalization,
/// `Ψ = φ/√ε_x`.
pub fn rescale_fields(values: &[[C64; 2]], epsilon_x: f64) -> Vec<[C64; 2]> {
    let s = 1.0 / epsilon_x.sqrt();
    values.iter().map(|p| [p[0] * s, p[1] * s]).collect()
}

/// Inverse of [`rescale_fields`].
pub fn lattice_variables(values: &[[C64; 2]], epsilon_x: f64) -> Vec<[C64; 2]> {
    let s = epsilon_x.sqrt();
    values.iter().map(|p| [p[0] * s, p[1] * s]).collect()
}

/// The lattice exponent `Σ_{x,t} ε[−Ψ†∂_tΨ + Ψ†(J σ_x i∂_x + m0 σ_z)Ψ]` for
/// one flavor on a periodic `n_x × n_t` grid (x fastest), with forward time
/// differences and central space differences. `values` are lattice
/// variables `φ = √ε_x Ψ`, so the sum tends to `∫dt dx` of the density.
pub fn discrete_exponent(values: &[[C64; 2]], n_x: usize, n_t: usize, eps: f64, eps_x: f64, j: C64, m0: C64) -> C64 {
    assert_eq!(values.len(), n_x * n_t);
    let at = |x: usize, t: usize| values[(t % n_t) * n_x + (x % n_x)];
    let mut acc = ZERO;
    for t in 0..n_t {
        for x in 0..n_x {
            let p = at(x, t);
            let fwd = at(x, t + 1);
            let right = at(x + 1, t);
            let left = at(x + n_x - 1, t);
            let dt = [(fwd[0] - p[0]) / eps, (fwd[1] - p[1]) / eps];
            let dx = [
                (right[0] - left[0]) / (2.0 * eps_x),
                (right[1] - left[1]) / (2.0 * eps_x),
            ];
            let i = C64::new(0.0, 1.0);
            let kinetic_t = -(p[0].conj() * dt[0] + p[1].conj() * dt[1]);
            // σ_x swaps components
            let kinetic_x = j * i * (p[0].conj() * dx[1] + p[1].conj() * dx[0]);
            let mass = m0 * (p[0].norm_sqr() - p[1].norm_sqr());
            acc += eps * (kinetic_t + kinetic_x + mass);
        }
    }
    acc
}
