//! The square-lattice PEPS contracted along diagonal slices, and the
//! anisotropic action it leads to.
//!
//! Sites are `(x, y)` on an `l_x × l_y` patch. The a-bond of a site links it
//! to `(x + 1, y)` and the b-bond to `(x, y + 1)`; slices are the diagonals
//! `x + y = n`, i.e. `v = (x + y)ε/2` constant. Each bond space is the
//! vacuum plus `D` one-particle states, so bonds carry dimension `D + 1`
//! with index 0 the vacuum.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::action::{
    euclidean_action, random_smooth_field, rotation_witness, DerivMode, FieldConfiguration, Grid2, ScalarField,
};
use crate::error::{checked_pow, Budget, Error, Result};
use crate::linalg::{CMat, C64, ONE, ZERO};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagonalLattice {
    pub l_x: usize,
    pub l_y: usize,
    pub epsilon: f64,
}

impl DiagonalLattice {
    pub fn new(l_x: usize, l_y: usize, epsilon: f64) -> Result<Self> {
        if l_x == 0 || l_y == 0 || !(epsilon > 0.0) {
            return Err(Error::config("square.lattice", "need a nonempty patch and ε > 0"));
        }
        Ok(Self { l_x, l_y, epsilon })
    }

    pub fn sites(&self) -> usize {
        self.l_x * self.l_y
    }

    pub fn site_index(&self, x: usize, y: usize) -> usize {
        y * self.l_x + x
    }

    /// `(u, v) = ((x − y)ε/2, (x + y)ε/2)`.
    pub fn uv(&self, x: usize, y: usize) -> (f64, f64) {
        let (x, y) = (x as f64 * self.epsilon, y as f64 * self.epsilon);
        ((x - y) / 2.0, (x + y) / 2.0)
    }

    /// Inverse of [`uv`](Self::uv), in units of ε.
    pub fn xy(&self, u: f64, v: f64) -> (f64, f64) {
        ((u + v) / self.epsilon, (v - u) / self.epsilon)
    }

    /// Sites grouped by slice `n = x + y`, ascending in `n`.
    pub fn slices(&self) -> Vec<Vec<(usize, usize)>> {
        let mut out = vec![Vec::new(); self.l_x + self.l_y - 1];
        for y in 0..self.l_y {
            for x in 0..self.l_x {
                out[x + y].push((x, y));
            }
        }
        out
    }
}

/// Per-site tensor `A^r_{(ij)(kl)}` on bond spaces of dimension `d = D + 1`.
/// `a[r]` is a `d² × d²` matrix with row `i·d + j` (outgoing a, b) and column
/// `k·d + l` (incoming a, b).
#[derive(Debug, Clone, PartialEq)]
pub struct SquarePepsTensor {
    pub d: usize,
    pub a: Vec<CMat>,
}

/// How the structured Q candidate couples the bond species.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum QForm {
    /// `Q_a^{ij} â†_i â_j ⊗ 1_b + 1_a ⊗ Q_b^{ij} b̂†_i b̂_j`.
    #[default]
    SpeciesConsistent,
    /// `Q_a^{ij} â†_i b̂_j + 1_a ⊗ Q_b^{ij} b̂†_i b̂_j`, moving a b-particle into a.
    Literal,
}

/// The structured local terms of `M̂`, before expansion into a tensor.
#[derive(Debug, Clone, PartialEq)]
pub enum LocalTerm {
    /// `M̂ = 1 + (ε/2)(Q_a-term + Q_b-term)`, no physical particle.
    Q {
        qa: CMat,
        qb: CMat,
        epsilon: f64,
        form: QForm,
    },
    /// `M̂[r] = δ_{r0} + ε R_r^{(i_a i_b)(j_a j_b)} â†_{i_a} b̂†_{i_b} â_{j_a} b̂_{j_b}`
    /// for `r ≥ 1`; `r_mats[r − 1]` is `D² × D²`.
    R { r_mats: Vec<CMat>, epsilon: f64 },
}

impl SquarePepsTensor {
    pub fn new(d: usize, a: Vec<CMat>) -> Result<Self> {
        if d < 2 || a.is_empty() {
            return Err(Error::Dimension(
                "need bond dimension ≥ 2 and at least one physical value".into(),
            ));
        }
        for m in &a {
            if m.shape() != (d * d, d * d) {
                return Err(Error::Dimension(format!(
                    "tensor block is {:?}, expected {}²×{}²",
                    m.shape(),
                    d,
                    d
                )));
            }
        }
        Ok(Self { d, a })
    }

    pub fn zero(d: usize, phys: usize) -> Self {
        Self {
            d,
            a: vec![CMat::zeros(d * d, d * d); phys],
        }
    }

    /// Entries uniform in the unit square times `scale`, seeded.
    pub fn random(d: usize, phys: usize, scale: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = (0..phys)
            .map(|_| {
                CMat::from_fn(d * d, d * d, |_, _| {
                    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale
                })
            })
            .collect();
        Self { d, a }
    }

    pub fn phys(&self) -> usize {
        self.a.len()
    }

    /// `M̂[r] = δ_{r0}·1 + A^r`.
    pub fn m_op(&self, r: usize) -> Result<CMat> {
        let a = self
            .a
            .get(r)
            .ok_or_else(|| Error::Dimension(format!("physical index {r} out of range")))?;
        let mut m = a.clone();
        if r == 0 {
            for i in 0..m.nrows() {
                m[(i, i)] += ONE;
            }
        }
        Ok(m)
    }

    fn entry(&self, r: usize, i: usize, j: usize, k: usize, l: usize) -> C64 {
        let d = self.d;
        let v = self.a[r][(i * d + j, k * d + l)];
        if r == 0 && i == k && j == l {
            v + ONE
        } else {
            v
        }
    }
}

impl LocalTerm {
    fn bond_modes(&self) -> Result<usize> {
        match self {
            LocalTerm::Q { qa, qb, .. } => {
                let n = qa.nrows();
                if qa.shape() != (n, n) || qb.shape() != (n, n) || n == 0 {
                    return Err(Error::Dimension("Q_a and Q_b must be equal square matrices".into()));
                }
                Ok(n)
            }
            LocalTerm::R { r_mats, .. } => {
                let n2 = r_mats.first().map(|m| m.nrows()).unwrap_or(0);
                let n = (n2 as f64).sqrt().round() as usize;
                if n == 0 || n * n != n2 || r_mats.iter().any(|m| m.shape() != (n2, n2)) {
                    return Err(Error::Dimension("R blocks must be D² × D²".into()));
                }
                Ok(n)
            }
        }
    }

    /// The equivalent tensor on the one-particle-per-bond space.
    pub fn expand(&self) -> Result<SquarePepsTensor> {
        let n = self.bond_modes()?;
        let d = n + 1;
        let idx = |i: usize, j: usize| i * d + j;
        match self {
            LocalTerm::Q { qa, qb, epsilon, form } => {
                let h = *epsilon / 2.0;
                let mut a = CMat::zeros(d * d, d * d);
                for i in 0..n {
                    for j in 0..n {
                        for other in 0..d {
                            // Q_b^{ij} b̂†_i b̂_j with any a-state
                            a[(idx(other, i + 1), idx(other, j + 1))] += qb[(i, j)] * h;
                        }
                        match form {
                            QForm::SpeciesConsistent => {
                                for other in 0..d {
                                    a[(idx(i + 1, other), idx(j + 1, other))] += qa[(i, j)] * h;
                                }
                            }
                            QForm::Literal => {
                                // â†_i b̂_j: |0_a, j_b⟩ → |i_a, 0_b⟩
                                a[(idx(i + 1, 0), idx(0, j + 1))] += qa[(i, j)] * h;
                            }
                        }
                    }
                }
                SquarePepsTensor::new(d, vec![a])
            }
            LocalTerm::R { r_mats, epsilon } => {
                let mut blocks = vec![CMat::zeros(d * d, d * d)];
                for rm in r_mats {
                    let mut a = CMat::zeros(d * d, d * d);
                    for ia in 0..n {
                        for ib in 0..n {
                            for ja in 0..n {
                                for jb in 0..n {
                                    a[(idx(ia + 1, ib + 1), idx(ja + 1, jb + 1))] =
                                        rm[(ia * n + ib, ja * n + jb)] * *epsilon;
                                }
                            }
                        }
                    }
                    blocks.push(a);
                }
                SquarePepsTensor::new(d, blocks)
            }
        }
    }

    /// Normal-ordered symbol `⟨φ|M̂[r]|φ'⟩ / ⟨φ|φ'⟩` for bosonic coherent
    /// labels `φ = (φ_a, φ_b)` (each of length D).
    pub fn symbol(&self, r: usize, bra: (&[C64], &[C64]), ket: (&[C64], &[C64])) -> Result<C64> {
        let n = self.bond_modes()?;
        if [bra.0, bra.1, ket.0, ket.1].iter().any(|v| v.len() != n) {
            return Err(Error::Dimension("coherent labels must have D components".into()));
        }
        let quad = |q: &CMat, l: &[C64], rr: &[C64]| -> C64 {
            let mut s = ZERO;
            for i in 0..n {
                for j in 0..n {
                    s += l[i].conj() * q[(i, j)] * rr[j];
                }
            }
            s
        };
        match self {
            LocalTerm::Q { qa, qb, epsilon, form } => {
                if r != 0 {
                    return Ok(ZERO);
                }
                let ta = match form {
                    QForm::SpeciesConsistent => quad(qa, bra.0, ket.0),
                    QForm::Literal => quad(qa, bra.0, ket.1),
                };
                Ok(ONE + (ta + quad(qb, bra.1, ket.1)) * (*epsilon / 2.0))
            }
            LocalTerm::R { r_mats, epsilon } => {
                if r == 0 {
                    return Ok(ONE);
                }
                let rm = r_mats
                    .get(r - 1)
                    .ok_or_else(|| Error::Dimension(format!("physical index {r} out of range")))?;
                let mut s = ZERO;
                for ia in 0..n {
                    for ib in 0..n {
                        for ja in 0..n {
                            for jb in 0..n {
                                s += bra.0[ia].conj()
                                    * bra.1[ib].conj()
                                    * rm[(ia * n + ib, ja * n + jb)]
                                    * ket.0[ja]
                                    * ket.1[jb];
                            }
                        }
                    }
                }
                Ok(s * *epsilon)
            }
        }
    }
}

/// Product boundary vectors: one `d`-vector per dangling bond.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareBoundary {
    pub omega_l: Vec<C64>,
    pub omega_r: Vec<C64>,
}

impl SquareBoundary {
    /// Uniform single-particle state on every dangling bond.
    pub fn uniform_single(d: usize) -> Self {
        let w = 1.0 / ((d - 1) as f64).sqrt();
        let mut v = vec![C64::new(w, 0.0); d];
        v[0] = ZERO;
        Self {
            omega_l: v.clone(),
            omega_r: v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Edge {
    A(i64, i64),
    B(i64, i64),
}

/// Dense tensor over a list of open bonds; digit `p` belongs to `labels[p]`.
struct Frontier {
    d: usize,
    labels: Vec<Edge>,
    data: Vec<C64>,
}

impl Frontier {
    fn attach(&mut self, e: Edge, v: &[C64]) {
        let len = self.data.len();
        let mut data = vec![ZERO; len * self.d];
        for (c, &w) in v.iter().enumerate() {
            for (i, &z) in self.data.iter().enumerate() {
                data[c * len + i] = z * w;
            }
        }
        self.labels.push(e);
        self.data = data;
    }
}

/// `Ĉ[B] = ⟨ω^L|U[r(v_0)]···U[r(v_N)]|ω^R⟩` for the physical pattern `rs`
/// (indexed by [`DiagonalLattice::site_index`]). Slices are applied from the
/// far end; within a slice the factors of `U` act on disjoint bonds.
pub fn contract_square(
    lat: &DiagonalLattice,
    t: &SquarePepsTensor,
    rs: &[usize],
    bnd: &SquareBoundary,
    budget: &Budget,
) -> Result<C64> {
    let d = t.d;
    if rs.len() != lat.sites() {
        return Err(Error::Dimension("one physical index per site".into()));
    }
    if rs.iter().any(|&r| r >= t.phys()) {
        return Err(Error::Dimension("physical index out of range".into()));
    }
    if bnd.omega_l.len() != d || bnd.omega_r.len() != d {
        return Err(Error::Dimension("boundary vectors must have the bond dimension".into()));
    }
    budget.check(checked_pow(d as u128, lat.l_x + lat.l_y + 2), || {
        "use a smaller patch".into()
    })?;
    let (lx, ly) = (lat.l_x as i64, lat.l_y as i64);
    let mut f = Frontier {
        d,
        labels: Vec::new(),
        data: vec![ONE],
    };
    for slice in lat.slices().iter().rev() {
        for &(x, y) in slice {
            let (xi, yi) = (x as i64, y as i64);
            let (ka, lb) = (Edge::A(xi, yi), Edge::B(xi, yi));
            for (e, last) in [(ka, xi == lx - 1), (lb, yi == ly - 1)] {
                if !f.labels.contains(&e) {
                    debug_assert!(last);
                    f.attach(e, &bnd.omega_r);
                }
            }
            let r = rs[lat.site_index(x, y)];
            f = apply_site(f, t, r, ka, lb, Edge::A(xi - 1, yi), Edge::B(xi, yi - 1));
            for (e, first) in [(Edge::A(xi - 1, yi), x == 0), (Edge::B(xi, yi - 1), y == 0)] {
                if first {
                    f = close(f, e, &bnd.omega_l);
                }
            }
        }
    }
    debug_assert!(f.labels.is_empty());
    Ok(f.data[0])
}

fn digits(mut idx: usize, d: usize, n: usize) -> Vec<usize> {
    (0..n)
        .map(|_| {
            let v = idx % d;
            idx /= d;
            v
        })
        .collect()
}

fn apply_site(f: Frontier, t: &SquarePepsTensor, r: usize, k_e: Edge, l_e: Edge, i_e: Edge, j_e: Edge) -> Frontier {
    let d = f.d;
    let pk = f.labels.iter().position(|e| *e == k_e).expect("incoming a-bond open");
    let pl = f.labels.iter().position(|e| *e == l_e).expect("incoming b-bond open");
    let rest: Vec<usize> = (0..f.labels.len()).filter(|&p| p != pk && p != pl).collect();
    let mut labels: Vec<Edge> = rest.iter().map(|&p| f.labels[p]).collect();
    labels.push(i_e);
    labels.push(j_e);
    let base = d.pow(rest.len() as u32);
    let mut data = vec![ZERO; base * d * d];
    for (idx, &z) in f.data.iter().enumerate() {
        if z == ZERO {
            continue;
        }
        let dg = digits(idx, d, f.labels.len());
        let (k, l) = (dg[pk], dg[pl]);
        let low = rest.iter().rev().fold(0usize, |acc, &p| acc * d + dg[p]);
        for i in 0..d {
            for j in 0..d {
                let w = t.entry(r, i, j, k, l);
                if w != ZERO {
                    data[low + base * (i + d * j)] += z * w;
                }
            }
        }
    }
    Frontier { d, labels, data }
}

fn close(f: Frontier, e: Edge, omega_l: &[C64]) -> Frontier {
    let d = f.d;
    let p = f.labels.iter().position(|x| *x == e).expect("edge open");
    let stride = d.pow(p as u32);
    let mut labels = f.labels.clone();
    labels.remove(p);
    let mut data = vec![ZERO; f.data.len() / d];
    for (idx, &z) in f.data.iter().enumerate() {
        let v = (idx / stride) % d;
        let out = idx % stride + (idx / (stride * d)) * stride;
        data[out] += omega_l[v].conj() * z;
    }
    Frontier { d, labels, data }
}

/// All amplitudes `Ĉ[B]`, with `B` encoded as `Σ r_s·phys^s`.
pub fn square_state(
    lat: &DiagonalLattice,
    t: &SquarePepsTensor,
    bnd: &SquareBoundary,
    budget: &Budget,
) -> Result<Vec<C64>> {
    let p = t.phys();
    let total = checked_pow(p as u128, lat.sites());
    budget.check(total, || "use a smaller patch".into())?;
    (0..total as usize)
        .into_par_iter()
        .map(|code| {
            let rs = digits(code, p, lat.sites());
            contract_square(lat, t, &rs, bnd, budget)
        })
        .collect()
}

/// `S_uv = ∫du dv [½ Ψ†(σ_z∂_u + ∂_v)Ψ − QΨ†Ψ]` summed over flavors, with
/// the grid axes read as `(u, v)`.
pub fn square_action_uv(cfg: &FieldConfiguration, q: &ScalarField, mode: DerivMode) -> Result<C64> {
    kinetic_plus_q(
        cfg,
        q,
        mode,
        |a_u, a_v, b_u, b_v| [0.5 * (a_u + a_v), 0.5 * (b_v - b_u)],
        1.0,
    )
}

/// `S = ∫dx dy ½(Ψ†∇·Ψ − QΨ†Ψ)` with `∇·Ψ = (∂_x φ_a, ∂_y φ_b)`, grid axes
/// read as `(x, y)`. A periodic `(u, v)` box covers the `(x, y)` torus twice,
/// so `S_uv` on that box equals `2·S`.
pub fn square_action_xy(cfg: &FieldConfiguration, q: &ScalarField, mode: DerivMode) -> Result<C64> {
    kinetic_plus_q(cfg, q, mode, |a_x, _, _, b_y| [0.5 * a_x, 0.5 * b_y], 0.5)
}

fn kinetic_plus_q(
    cfg: &FieldConfiguration,
    q: &ScalarField,
    mode: DerivMode,
    kin: impl Fn(C64, C64, C64, C64) -> [C64; 2],
    q_weight: f64,
) -> Result<C64> {
    if cfg.grid != q.grid {
        return Err(Error::Dimension("field and Q grids differ".into()));
    }
    let g = cfg.grid;
    let area = g.spacing() * g.spacing();
    let mut acc = ZERO;
    for f in &cfg.flavors {
        let comp = |c: usize| f.psi.iter().map(|s| s[c]).collect::<Vec<_>>();
        let (a, b) = (comp(0), comp(1));
        let da = [
            crate::action::derivative(&a, &g, 0, mode),
            crate::action::derivative(&a, &g, 1, mode),
        ];
        let db = [
            crate::action::derivative(&b, &g, 0, mode),
            crate::action::derivative(&b, &g, 1, mode),
        ];
        for i in 0..g.len() {
            let [ka, kb] = kin(da[0][i], da[1][i], db[0][i], db[1][i]);
            let dens = a[i].conj() * ka + b[i].conj() * kb;
            let mass = q.values[i] * (a[i].norm_sqr() + b[i].norm_sqr()) * q_weight;
            acc += dens - mass;
        }
    }
    Ok(acc * area)
}

/// `|S[rotate(cfg, α)] − S[cfg]| / |S[cfg]|` for the square-lattice action
/// with constant `Q`.
pub fn anisotropy_witness(cfg: &FieldConfiguration, alpha: f64, q: C64) -> Result<f64> {
    let qf = ScalarField::constant(cfg.grid, q);
    rotation_witness(cfg, alpha, |c| square_action_xy(c, &qf, DerivMode::Spectral))
}

pub fn euclidean_witness(cfg: &FieldConfiguration, alpha: f64, m: f64) -> Result<f64> {
    let mf = ScalarField::constant(cfg.grid, C64::new(m, 0.0));
    rotation_witness(cfg, alpha, |c| euclidean_action(c, &mf, DerivMode::Spectral))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContrastReport {
    pub alpha: f64,
    pub square: Vec<f64>,
    pub euclidean: Vec<f64>,
    pub median_square: f64,
    pub median_euclidean: f64,
    /// `median_square / median_euclidean` (infinite if the latter is 0).
    pub contrast: f64,
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Both witnesses on `count` random band-limited fields (`|k| ≤ 3`), field
/// `i` drawn with seed `seed + i`.
pub fn symmetry_contrast(grid: Grid2, count: usize, seed: u64, alpha: f64) -> Result<ContrastReport> {
    let rows = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let cfg = random_smooth_field(grid, 3, seed.wrapping_add(i));
            Ok((
                anisotropy_witness(&cfg, alpha, ONE)?,
                euclidean_witness(&cfg, alpha, 1.0)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let (square, euclidean): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
    let (ms, me) = (median(&square), median(&euclidean));
    Ok(ContrastReport {
        alpha,
        contrast: if me == 0.0 { f64::INFINITY } else { ms / me },
        square,
        euclidean,
        median_square: ms,
        median_euclidean: me,
    })
}

/// Residual `|S_uv − 2 S_xy|` relative to `|S_xy|` for a field given as a
/// function of `(x, y)` with period `length`, sampled on both grids.
pub fn coordinate_check(n: usize, length: f64, q: C64, f: impl Fn(f64, f64) -> [C64; 2] + Sync) -> Result<f64> {
    let g = Grid2::new(n, length)?;
    let xy = FieldConfiguration::from_fn(g, &f);
    let uv = FieldConfiguration::from_fn(g, |u, v| f(u + v, v - u));
    let qf = ScalarField::constant(g, q);
    let s_xy = square_action_xy(&xy, &qf, DerivMode::Spectral)?;
    let s_uv = square_action_uv(&uv, &qf, DerivMode::Spectral)?;
    Ok((s_uv - s_xy * 2.0).norm() / s_xy.norm())
}

/// Cache of the slice decomposition keyed by patch shape.
pub fn slice_sizes(lat: &DiagonalLattice) -> HashMap<usize, usize> {
    lat.slices().iter().enumerate().map(|(n, s)| (n, s.len())).collect()
}
