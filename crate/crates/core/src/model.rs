//! Model parameters, lattice geometry, mode ordering and configuration
//! validation shared by every other module.
//!
//! Conventions fixed here are used everywhere else:
//!
//! * there are `n_t` transfer steps at times `t_k = k·ε`, `k = 0..n_t`, so
//!   the time extent is `l = n_t·ε` and one physical mode lives at every
//!   `(x, t_k)`;
//! * spatial sites sit at `x_n = n·ε_x`;
//! * auxiliary modes are ordered x-major, then species `a < b`, then flavor.
//!   That order is the single source of every fermionic sign.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, CMat, C64, ONE, ZERO};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    Periodic,
    Open,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeSpec {
    pub epsilon: f64,
    pub epsilon_x: f64,
    pub n_x: usize,
    pub n_t: usize,
    pub bc: BoundaryCondition,
}

impl LatticeSpec {
    pub fn new(epsilon: f64, epsilon_x: f64, n_x: usize, n_t: usize, bc: BoundaryCondition) -> Result<Self> {
        let spec = Self {
            epsilon,
            epsilon_x,
            n_x,
            n_t,
            bc,
        };
        spec.check()?;
        Ok(spec)
    }

    /// Square lattice with `ε_x = ε` and periodic boundaries.
    pub fn periodic(epsilon: f64, n_x: usize, n_t: usize) -> Result<Self> {
        Self::new(epsilon, epsilon, n_x, n_t, BoundaryCondition::Periodic)
    }

    fn check(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::config("lattice.epsilon", "epsilon must be positive"));
        }
        if !(self.epsilon_x > 0.0 && self.epsilon_x.is_finite()) {
            return Err(Error::config("lattice.epsilon_x", "epsilon_x must be positive"));
        }
        if self.n_x == 0 {
            return Err(Error::config("lattice.n_x", "n_x must be at least 1"));
        }
        Ok(())
    }

    /// Total time extent `l = n_t·ε`.
    pub fn length(&self) -> f64 {
        self.n_t as f64 * self.epsilon
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.epsilon
    }

    pub fn position(&self, n: usize) -> f64 {
        n as f64 * self.epsilon_x
    }

    /// Neighbour of site `x` shifted by `delta`, or `None` when an open
    /// boundary cuts the link.
    pub fn shift(&self, x: usize, delta: isize) -> Option<usize> {
        let n = self.n_x as isize;
        let y = x as isize + delta;
        match self.bc {
            BoundaryCondition::Periodic => Some(y.rem_euclid(n) as usize),
            BoundaryCondition::Open => (0..n).contains(&y).then_some(y as usize),
        }
    }

    pub fn momentum_grid(&self) -> Result<Vec<f64>> {
        if self.bc == BoundaryCondition::Open {
            return Err(Error::Unsupported(
                "momentum analysis requires periodic spatial boundaries".into(),
            ));
        }
        Ok(momentum_grid(self.n_x, self.epsilon_x))
    }
}

/// `p_n = 2πn/(Nε)` for `n = 0..N`, folded into `(−π/ε, π/ε]`.
pub fn momentum_grid(n_x: usize, epsilon: f64) -> Vec<f64> {
    (0..n_x)
        .map(|n| {
            // fold on the integer index so the window edge is exact
            let m = if 2 * n > n_x { n as f64 - n_x as f64 } else { n as f64 };
            2.0 * PI * m / (n_x as f64 * epsilon)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Species {
    A,
    B,
}

impl Species {
    pub fn index(self) -> usize {
        match self {
            Species::A => 0,
            Species::B => 1,
        }
    }
}

/// One auxiliary mode. The derived order (x, species, flavor, sector) is the
/// canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeIndex {
    pub x: usize,
    pub species: Species,
    pub flavor: usize,
    pub sector: Option<u8>,
}

impl ModeIndex {
    pub fn new(x: usize, species: Species, flavor: usize) -> Self {
        Self {
            x,
            species,
            flavor,
            sector: None,
        }
    }

    /// Position in the canonical order of a lattice with `d` flavors.
    pub fn linear(&self, d: usize) -> usize {
        (self.x * 2 + self.species.index()) * d + self.flavor
    }

    pub fn from_linear(i: usize, d: usize) -> Self {
        let flavor = i % d;
        let rest = i / d;
        let species = if rest.is_multiple_of(2) { Species::A } else { Species::B };
        Self::new(rest / 2, species, flavor)
    }
}

/// All auxiliary modes of a lattice in canonical order.
pub fn canonical_modes(n_x: usize, d: usize) -> Vec<ModeIndex> {
    (0..2 * n_x * d).map(|i| ModeIndex::from_linear(i, d)).collect()
}

/// Dense per-lattice-point coupling tables.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingFields {
    pub d: usize,
    /// `j[t]`, one D×D matrix per transfer step.
    pub j: Vec<CMat>,
    /// `m0[t][x]`.
    pub m0: Vec<Vec<CMat>>,
    /// `r[t][x]`.
    pub r: Vec<Vec<CMat>>,
    /// Optional static on-site perturbation `f[x]`.
    pub f: Option<Vec<CMat>>,
}

impl CouplingFields {
    pub fn zero(d: usize, lattice: &LatticeSpec) -> Self {
        let z = CMat::zeros(d, d);
        Self {
            d,
            j: vec![z.clone(); lattice.n_t],
            m0: vec![vec![z.clone(); lattice.n_x]; lattice.n_t],
            r: vec![vec![z; lattice.n_x]; lattice.n_t],
            f: None,
        }
    }

    /// Constant scalar multiples of the identity everywhere.
    pub fn uniform(d: usize, lattice: &LatticeSpec, j: C64, m0: C64, r: C64) -> Self {
        let id = CMat::identity(d, d);
        Self {
            d,
            j: vec![&id * j; lattice.n_t],
            m0: vec![vec![&id * m0; lattice.n_x]; lattice.n_t],
            r: vec![vec![&id * r; lattice.n_x]; lattice.n_t],
            f: None,
        }
    }

    fn all_matrices(&self) -> impl Iterator<Item = &CMat> {
        self.j
            .iter()
            .chain(self.m0.iter().flatten())
            .chain(self.r.iter().flatten())
            .chain(self.f.iter().flatten())
    }

    /// Max entrywise difference between neighbouring lattice points over all
    /// coupling tables (x neighbours and t neighbours).
    pub fn smoothness(&self) -> f64 {
        fn diff(a: &CMat, b: &CMat) -> f64 {
            a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
        }
        let mut s: f64 = 0.0;
        for w in self.j.windows(2) {
            s = s.max(diff(&w[0], &w[1]));
        }
        for table in [&self.m0, &self.r] {
            for row in table.iter() {
                for w in row.windows(2) {
                    s = s.max(diff(&w[0], &w[1]));
                }
            }
            for w in table.windows(2) {
                for (a, b) in w[0].iter().zip(w[1].iter()) {
                    s = s.max(diff(a, b));
                }
            }
        }
        if let Some(f) = &self.f {
            for w in f.windows(2) {
                s = s.max(diff(&w[0], &w[1]));
            }
        }
        s
    }

    /// Translation invariant iff every time slice of `m0` and `r` is constant
    /// in x (J never depends on x).
    pub fn is_translation_invariant(&self) -> bool {
        let flat = |table: &Vec<Vec<CMat>>| table.iter().all(|row| row.iter().all(|m| m == &row[0]));
        flat(&self.m0) && flat(&self.r) && self.f.as_ref().is_none_or(|f| f.iter().all(|m| m == &f[0]))
    }

    fn check(&self, lattice: &LatticeSpec) -> Result<()> {
        if self.d == 0 {
            return Err(Error::config("couplings.d", "d must be at least 1"));
        }
        if self.j.len() != lattice.n_t {
            return Err(Error::config(
                "couplings.j",
                format!("expected {} time slices", lattice.n_t),
            ));
        }
        for (name, table) in [("m0", &self.m0), ("r", &self.r)] {
            if table.len() != lattice.n_t || table.iter().any(|row| row.len() != lattice.n_x) {
                return Err(Error::config(
                    format!("couplings.{name}"),
                    format!("expected a {}×{} table", lattice.n_t, lattice.n_x),
                ));
            }
        }
        if let Some(f) = &self.f {
            if f.len() != lattice.n_x {
                return Err(Error::config("couplings.f", format!("expected {} sites", lattice.n_x)));
            }
        }
        for m in self.all_matrices() {
            if m.shape() != (self.d, self.d) {
                return Err(Error::config("couplings", format!("matrices must be {0}×{0}", self.d)));
            }
            if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::config("couplings", "matrix entries must be finite"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuxStatistics {
    Fermionic,
    Bosonic { cutoff: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Statistics {
    pub aux: AuxStatistics,
    /// Occupation cutoff of each physical mode.
    pub phys_cutoff: usize,
}

impl Default for Statistics {
    fn default() -> Self {
        Self {
            aux: AuxStatistics::Fermionic,
            phys_cutoff: 1,
        }
    }
}

/// A boundary vector described independently of any basis enumeration.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryState {
    /// Uniform superposition of single a-particle states over all (x, j).
    UniformA,
    /// Explicit superposition of occupation patterns; `modes` lists the
    /// occupied canonical mode indices (repeated for bosonic multiplicity).
    Explicit(Vec<(Vec<usize>, C64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryVectors {
    pub n_aux: usize,
    pub omega_l: BoundaryState,
    pub omega_r: BoundaryState,
}

impl Default for BoundaryVectors {
    fn default() -> Self {
        Self {
            n_aux: 1,
            omega_l: BoundaryState::UniformA,
            omega_r: BoundaryState::UniformA,
        }
    }
}

impl BoundaryVectors {
    fn check(&self, n_modes: usize, stats: &Statistics) -> Result<()> {
        for (name, s) in [("boundary.omega_l", &self.omega_l), ("boundary.omega_r", &self.omega_r)] {
            match s {
                BoundaryState::UniformA => {
                    if self.n_aux != 1 {
                        return Err(Error::config(name, "uniform boundary requires n_aux = 1"));
                    }
                }
                BoundaryState::Explicit(terms) => {
                    if terms.is_empty() || terms.iter().all(|(_, a)| a.norm() == 0.0) {
                        return Err(Error::config(name, "boundary vector must be nonzero"));
                    }
                    for (modes, amp) in terms {
                        if !amp.re.is_finite() || !amp.im.is_finite() {
                            return Err(Error::config(name, "amplitudes must be finite"));
                        }
                        if modes.len() != self.n_aux {
                            return Err(Error::config(name, "all terms must lie in the n_aux sector"));
                        }
                        if modes.iter().any(|&m| m >= n_modes) {
                            return Err(Error::config(name, "mode index out of range"));
                        }
                        let mut sorted = modes.clone();
                        sorted.sort_unstable();
                        let repeated = sorted.windows(2).any(|w| w[0] == w[1]);
                        match stats.aux {
                            AuxStatistics::Fermionic if repeated => {
                                return Err(Error::config(name, "fermionic mode occupied twice"));
                            }
                            AuxStatistics::Bosonic { cutoff } => {
                                let max_occ = sorted.chunk_by(|a, b| a == b).map(|g| g.len()).max().unwrap_or(0);
                                if max_occ > cutoff {
                                    return Err(Error::config(name, "occupation exceeds aux_cutoff"));
                                }
                            }
                            _ => {}
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Optional one-dimensional cMPS block of a configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct CmpsParams {
    pub k: CMat,
    pub r: CMat,
    pub omega_l: Vec<C64>,
    pub omega_r: Vec<C64>,
    pub length: f64,
    pub n_steps: usize,
}

/// A validated model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub lattice: LatticeSpec,
    pub couplings: CouplingFields,
    pub boundary: BoundaryVectors,
    pub statistics: Statistics,
    pub theta: Option<f64>,
    pub cmps: Option<CmpsParams>,
    /// Precomputed for periodic lattices.
    pub momentum_grid: Option<Vec<f64>>,
    pub modes: Vec<ModeIndex>,
}

/// Everything a [`ModelSpec`] is built from, before invariants are checked.
#[derive(Debug, Clone)]
pub struct ModelCandidate {
    pub lattice: LatticeSpec,
    pub couplings: CouplingFields,
    pub boundary: BoundaryVectors,
    pub statistics: Statistics,
    pub theta: Option<f64>,
    pub cmps: Option<CmpsParams>,
}

pub fn validate(candidate: ModelCandidate) -> Result<ModelSpec> {
    let ModelCandidate {
        lattice,
        couplings,
        boundary,
        statistics,
        theta,
        cmps,
    } = candidate;
    lattice.check()?;
    couplings.check(&lattice)?;
    if statistics.phys_cutoff == 0 {
        return Err(Error::config(
            "statistics.phys_cutoff",
            "physical cutoff must be at least 1",
        ));
    }
    if let AuxStatistics::Bosonic { cutoff: 0 } = statistics.aux {
        return Err(Error::config(
            "statistics.aux_cutoff",
            "bosonic cutoff must be at least 1",
        ));
    }
    let n_modes = 2 * lattice.n_x * couplings.d;
    boundary.check(n_modes, &statistics)?;
    if let Some(theta) = theta {
        crate::clifford::check_theta(theta)?;
    }
    if let Some(p) = &cmps {
        check_cmps(p)?;
    }
    let momentum_grid = lattice.momentum_grid().ok();
    let modes = canonical_modes(lattice.n_x, couplings.d);
    Ok(ModelSpec {
        lattice,
        couplings,
        boundary,
        statistics,
        theta,
        cmps,
        momentum_grid,
        modes,
    })
}

fn check_cmps(p: &CmpsParams) -> Result<()> {
    let d = p.k.nrows();
    if p.k.shape() != (d, d) || p.r.shape() != (d, d) || d == 0 {
        return Err(Error::config("cmps", "k and r must be square matrices of equal size"));
    }
    if crate::linalg::max_abs_diff(&p.k, &p.k.adjoint()) > 1e-12 {
        return Err(Error::config("cmps.k", "k must be hermitian"));
    }
    if p.omega_l.len() != d || p.omega_r.len() != d {
        return Err(Error::config("cmps.omega", "boundary vectors must have length d"));
    }
    if crate::linalg::vec_norm(&p.omega_l) == 0.0 || crate::linalg::vec_norm(&p.omega_r) == 0.0 {
        return Err(Error::config("cmps.omega", "boundary vectors must be nonzero"));
    }
    if !(p.length >= 0.0) || p.n_steps == 0 {
        return Err(Error::config("cmps", "length must be non-negative and n_steps ≥ 1"));
    }
    Ok(())
}

impl ModelSpec {
    pub fn d(&self) -> usize {
        self.couplings.d
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    /// A small hermitian demonstration model: ε = 1, N_x = 3, N_t = 2, D = 1,
    /// J = 1, m0 = 0, R = 0.5.
    pub fn demo() -> Self {
        let lattice = LatticeSpec::periodic(1.0, 3, 2).expect("demo lattice");
        let couplings = CouplingFields::uniform(1, &lattice, ONE, ZERO, c(0.5, 0.0));
        validate(ModelCandidate {
            lattice,
            couplings,
            boundary: BoundaryVectors::default(),
            statistics: Statistics::default(),
            theta: None,
            cmps: None,
        })
        .expect("demo model is valid")
    }
}

// ---------------------------------------------------------------------------
// JSON configuration
// ---------------------------------------------------------------------------

pub mod config {
    //! The on-disk JSON schema (`schema_version: 1`). Unknown keys are errors.

    use super::*;

    pub type ComplexJson = [f64; 2];
    pub type MatrixJson = Vec<Vec<ComplexJson>>;

    #[derive(Debug, Clone, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct RawConfig {
        pub schema_version: u32,
        pub lattice: RawLattice,
        pub couplings: RawCouplings,
        #[serde(default)]
        pub boundary: Option<RawBoundary>,
        #[serde(default)]
        pub statistics: Option<RawStatistics>,
        #[serde(default)]
        pub theta: Option<f64>,
        #[serde(default)]
        pub cmps: Option<RawCmps>,
    }

    #[derive(Debug, Clone, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct RawLattice {
        pub epsilon: f64,
        #[serde(default)]
        pub epsilon_x: Option<f64>,
        pub n_x: usize,
        pub n_t: usize,
        #[serde(default = "default_bc")]
        pub bc: BoundaryCondition,
    }

    fn default_bc() -> BoundaryCondition {
        BoundaryCondition::Periodic
    }

    #[derive(Debug, Clone, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct RawCouplings {
        pub d: usize,
        #[serde(default)]
        pub j: Option<CouplingInput>,
        #[serde(default)]
        pub m0: Option<CouplingInput>,
        #[serde(default)]
        pub r: Option<CouplingInput>,
        #[serde(default)]
        pub f: Option<CouplingInput>,
    }

    /// A coupling given as a named preset, a single constant matrix, a table
    /// over one lattice direction, or a `[t][x]` table.
    #[derive(Debug, Clone, Serialize, Deserialize)]
    #[serde(untagged)]
    pub enum CouplingInput {
        Preset(Preset),
        Matrix(MatrixJson),
        Table(Vec<MatrixJson>),
        Grid(Vec<Vec<MatrixJson>>),
    }

    /// Smooth analytic generators; every preset is a scalar times `1_D`.
    #[derive(Debug, Clone, Serialize, Deserialize)]
    #[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
    pub enum Preset {
        Zero,
        Constant {
            value: ComplexJson,
        },
        /// `offset + amplitude·exp(−((x−x0)² + (t−t0)²)/(2w²))`.
        Gaussian {
            amplitude: ComplexJson,
            #[serde(default)]
            offset: ComplexJson,
            center: [f64; 2],
            width: f64,
        },
    }

    #[derive(Debug, Clone, Serialize, Deserialize)]
    #[serde(untagged)]
    pub enum RawBoundaryState {
        Named(String),
        Explicit(Vec<RawBoundaryTerm>),
    }

    #[derive(Debug, Clone, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct RawBoundaryTerm {
        pub modes: Vec<usize>,
        pub amp: ComplexJson,
    }

    #[derive(Debug, Clone, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct RawBoundary {
        pub omega_l: RawBoundaryState,
        pub omega_r: RawBoundaryState,
        pub n_aux: usize,
    }

    #[derive(Debug, Clone, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct RawStatistics {
        pub aux: String,
        #[serde(default)]
        pub aux_cutoff: Option<usize>,
        #[serde(default)]
        pub phys_cutoff: Option<usize>,
    }

    #[derive(Debug, Clone, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct RawCmps {
        pub k: MatrixJson,
        pub r: MatrixJson,
        pub omega_l: Vec<ComplexJson>,
        pub omega_r: Vec<ComplexJson>,
        pub length: f64,
        pub n_steps: usize,
    }

    fn complex(z: &ComplexJson) -> C64 {
        c(z[0], z[1])
    }

    fn matrix(m: &MatrixJson, d: usize, path: &str) -> Result<CMat> {
        if m.len() != d || m.iter().any(|row| row.len() != d) {
            return Err(Error::config(path, format!("expected a {d}×{d} matrix")));
        }
        Ok(CMat::from_fn(d, d, |i, j| complex(&m[i][j])))
    }

    fn square_matrix(m: &MatrixJson, path: &str) -> Result<CMat> {
        matrix(m, m.len(), path)
    }

    fn preset_value(p: &Preset, x: f64, t: f64, path: &str) -> Result<C64> {
        Ok(match p {
            Preset::Zero => ZERO,
            Preset::Constant { value } => complex(value),
            Preset::Gaussian {
                amplitude,
                offset,
                center,
                width,
            } => {
                if !(*width > 0.0) {
                    return Err(Error::config(format!("{path}.width"), "width must be positive"));
                }
                let r2 = (x - center[0]).powi(2) + (t - center[1]).powi(2);
                complex(offset) + complex(amplitude) * (-r2 / (2.0 * width * width)).exp()
            }
        })
    }

    /// Expand an input into a `[t][x]` table.
    fn grid(input: Option<&CouplingInput>, d: usize, lat: &LatticeSpec, path: &str) -> Result<Vec<Vec<CMat>>> {
        let id = CMat::identity(d, d);
        let Some(input) = input else {
            return Ok(vec![vec![CMat::zeros(d, d); lat.n_x]; lat.n_t]);
        };
        match input {
            CouplingInput::Preset(p) => (0..lat.n_t)
                .map(|k| {
                    (0..lat.n_x)
                        .map(|n| Ok(&id * preset_value(p, lat.position(n), lat.time(k), path)?))
                        .collect()
                })
                .collect(),
            CouplingInput::Matrix(m) => {
                let m = matrix(m, d, path)?;
                Ok(vec![vec![m; lat.n_x]; lat.n_t])
            }
            CouplingInput::Grid(rows) => {
                if rows.len() != lat.n_t || rows.iter().any(|r| r.len() != lat.n_x) {
                    return Err(Error::config(path, format!("expected a {}×{} table", lat.n_t, lat.n_x)));
                }
                rows.iter()
                    .enumerate()
                    .map(|(k, row)| {
                        row.iter()
                            .enumerate()
                            .map(|(n, m)| matrix(m, d, &format!("{path}[{k}][{n}]")))
                            .collect()
                    })
                    .collect()
            }
            CouplingInput::Table(_) => Err(Error::config(path, "expected a [t][x] table or a preset")),
        }
    }

    /// Expand an input into a per-time table (J) or per-site table (f).
    fn line(
        input: Option<&CouplingInput>,
        d: usize,
        len: usize,
        coord: impl Fn(usize) -> (f64, f64),
        path: &str,
    ) -> Result<Vec<CMat>> {
        let id = CMat::identity(d, d);
        let Some(input) = input else {
            return Ok(vec![CMat::zeros(d, d); len]);
        };
        match input {
            CouplingInput::Preset(p) => (0..len)
                .map(|i| {
                    let (x, t) = coord(i);
                    Ok(&id * preset_value(p, x, t, path)?)
                })
                .collect(),
            CouplingInput::Matrix(m) => Ok(vec![matrix(m, d, path)?; len]),
            CouplingInput::Table(ms) => {
                if ms.len() != len {
                    return Err(Error::config(path, format!("expected {len} entries")));
                }
                ms.iter()
                    .enumerate()
                    .map(|(i, m)| matrix(m, d, &format!("{path}[{i}]")))
                    .collect()
            }
            CouplingInput::Grid(_) => Err(Error::config(path, "expected a one-dimensional table")),
        }
    }

    fn boundary_state(raw: &RawBoundaryState, path: &str) -> Result<BoundaryState> {
        match raw {
            RawBoundaryState::Named(name) if name == "uniform" => Ok(BoundaryState::UniformA),
            RawBoundaryState::Named(name) => Err(Error::config(path, format!("unknown boundary preset `{name}`"))),
            RawBoundaryState::Explicit(terms) => Ok(BoundaryState::Explicit(
                terms.iter().map(|t| (t.modes.clone(), complex(&t.amp))).collect(),
            )),
        }
    }

    impl RawConfig {
        pub fn into_candidate(self) -> Result<ModelCandidate> {
            if self.schema_version != SCHEMA_VERSION {
                return Err(Error::config(
                    "schema_version",
                    format!(
                        "unsupported schema version {} (expected {SCHEMA_VERSION})",
                        self.schema_version
                    ),
                ));
            }
            let l = &self.lattice;
            let lattice = LatticeSpec {
                epsilon: l.epsilon,
                epsilon_x: l.epsilon_x.unwrap_or(l.epsilon),
                n_x: l.n_x,
                n_t: l.n_t,
                bc: l.bc,
            };
            lattice.check()?;
            let d = self.couplings.d;
            if d == 0 {
                return Err(Error::config("couplings.d", "d must be at least 1"));
            }
            let cp = &self.couplings;
            let couplings = CouplingFields {
                d,
                j: line(cp.j.as_ref(), d, lattice.n_t, |k| (0.0, lattice.time(k)), "couplings.j")?,
                m0: grid(cp.m0.as_ref(), d, &lattice, "couplings.m0")?,
                r: grid(cp.r.as_ref(), d, &lattice, "couplings.r")?,
                f: match &cp.f {
                    None => None,
                    Some(f) => Some(line(
                        Some(f),
                        d,
                        lattice.n_x,
                        |n| (lattice.position(n), 0.0),
                        "couplings.f",
                    )?),
                },
            };
            let boundary = match &self.boundary {
                None => BoundaryVectors::default(),
                Some(b) => BoundaryVectors {
                    n_aux: b.n_aux,
                    omega_l: boundary_state(&b.omega_l, "boundary.omega_l")?,
                    omega_r: boundary_state(&b.omega_r, "boundary.omega_r")?,
                },
            };
            let statistics = match &self.statistics {
                None => Statistics::default(),
                Some(s) => Statistics {
                    aux: match s.aux.as_str() {
                        "fermionic" => AuxStatistics::Fermionic,
                        "bosonic" => AuxStatistics::Bosonic {
                            cutoff: s.aux_cutoff.unwrap_or(boundary.n_aux.max(1)),
                        },
                        other => {
                            return Err(Error::config(
                                "statistics.aux",
                                format!("expected \"fermionic\" or \"bosonic\", got \"{other}\""),
                            ))
                        }
                    },
                    phys_cutoff: s.phys_cutoff.unwrap_or(1),
                },
            };
            let cmps = match &self.cmps {
                None => None,
                Some(c) => Some(CmpsParams {
                    k: square_matrix(&c.k, "cmps.k")?,
                    r: square_matrix(&c.r, "cmps.r")?,
                    omega_l: c.omega_l.iter().map(complex).collect(),
                    omega_r: c.omega_r.iter().map(complex).collect(),
                    length: c.length,
                    n_steps: c.n_steps,
                }),
            };
            Ok(ModelCandidate {
                lattice,
                couplings,
                boundary,
                statistics,
                theta: self.theta,
                cmps,
            })
        }
    }

    /// Parse and validate configuration bytes.
    pub fn parse(bytes: &[u8]) -> Result<ModelSpec> {
        let raw: RawConfig = serde_json::from_slice(bytes).map_err(|e| Error::config("<root>", e.to_string()))?;
        validate(raw.into_candidate()?)
    }

    pub fn load(path: &std::path::Path) -> Result<(ModelSpec, Vec<u8>)> {
        let bytes = std::fs::read(path)?;
        Ok((parse(&bytes)?, bytes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn candidate(epsilon: f64, n_x: usize, n_t: usize) -> ModelCandidate {
        let lattice = LatticeSpec {
            epsilon,
            epsilon_x: 1.0,
            n_x,
            n_t,
            bc: BoundaryCondition::Periodic,
        };
        ModelCandidate {
            couplings: CouplingFields::zero(
                1,
                &LatticeSpec {
                    epsilon: 1.0,
                    ..lattice
                },
            ),
            lattice,
            boundary: BoundaryVectors::default(),
            statistics: Statistics::default(),
            theta: None,
            cmps: None,
        }
    }

    #[test]
    fn four_site_grid() {
        let spec = validate(candidate(1.0, 4, 2)).unwrap();
        let grid = spec.momentum_grid.unwrap();
        let expect = [0.0, PI / 2.0, PI, -PI / 2.0];
        for (p, e) in grid.iter().zip(expect) {
            assert!((p - e).abs() < 1e-15, "{p} vs {e}");
        }
    }

    #[test]
    fn empty_time_extent_is_valid() {
        let spec = validate(candidate(1.0, 2, 0)).unwrap();
        assert_eq!(spec.lattice.length(), 0.0);
    }

    #[test]
    fn zero_epsilon_rejected() {
        let err = validate(candidate(0.0, 2, 1)).unwrap_err();
        assert!(err.to_string().contains("epsilon must be positive"), "{err}");
    }

    #[test]
    fn theta_at_singularity_rejected() {
        let mut cand = candidate(1.0, 2, 1);
        cand.theta = Some(std::f64::consts::FRAC_PI_4);
        assert!(matches!(validate(cand), Err(Error::Singular { .. })));
    }

    #[test]
    fn three_site_grid() {
        let g = momentum_grid(3, 1.0);
        assert_eq!(g.len(), 3);
        assert!((g[0]).abs() < 1e-15);
        assert!((g[1] - 2.0 * PI / 3.0).abs() < 1e-15);
        assert!((g[2] + 2.0 * PI / 3.0).abs() < 1e-15);
        assert_eq!(momentum_grid(1, 0.3), vec![0.0]);
    }

    /// Brute-force DFT of a delta sequence: the phase e^{-ipε} of the n-th
    /// Fourier mode of δ_{x,1} identifies p modulo 2π/ε.
    #[test]
    fn six_site_half_spacing_grid_matches_dft() {
        let (n, eps) = (6usize, 0.5);
        let grid = momentum_grid(n, eps);
        for (k, p) in grid.iter().enumerate() {
            // DFT of δ_{x,1}: (1/√N) e^{-2πi k/N}
            let phase = -2.0 * PI * k as f64 / n as f64;
            let z = C64::from_polar(1.0, phase);
            let from_grid = C64::from_polar(1.0, -p * eps);
            assert!((z - from_grid).norm() < 1e-12);
            assert!(*p > -PI / eps && *p <= PI / eps + 1e-12);
        }
        assert!(grid.iter().any(|p| (p - 4.0 * PI / 3.0).abs() < 1e-12));
        assert!(grid.iter().any(|p| (p + 4.0 * PI / 3.0).abs() < 1e-12));
    }

    /// Grid values are the eigenphases of the cyclic shift divided by ε.
    #[test]
    fn grid_momenta_are_shift_eigenvectors() {
        for n in [1usize, 2, 5, 8] {
            let eps = 0.7;
            let shift = CMat::from_fn(n, n, |i, j| if (j + 1) % n == i { ONE } else { ZERO });
            let grid = momentum_grid(n, eps);
            for p in &grid {
                let v = CMat::from_fn(n, 1, |k, _| C64::from_polar(1.0, p * eps * k as f64));
                let sv = &shift * &v;
                let expect = &v * C64::from_polar(1.0, -p * eps);
                assert!(crate::linalg::max_abs_diff(&sv, &expect) < 1e-12);
            }
            // distinct modulo the Brillouin zone
            for a in 0..n {
                for b in 0..a {
                    let d = C64::from_polar(1.0, (grid[a] - grid[b]) * eps) - ONE;
                    assert!(d.norm() > 1e-6);
                }
            }
        }
    }

    #[test]
    fn open_lattice_has_no_momentum_grid() {
        let lat = LatticeSpec::new(1.0, 1.0, 4, 1, BoundaryCondition::Open).unwrap();
        assert!(lat.momentum_grid().is_err());
        assert_eq!(lat.shift(3, 1), None);
        assert_eq!(lat.shift(0, -1), None);
    }

    #[test]
    fn unknown_keys_rejected() {
        let json = br#"{"schema_version":1,"lattice":{"epsilon":1,"n_x":2,"n_t":1},"couplings":{"d":1},"extra":3}"#;
        assert!(matches!(config::parse(json), Err(Error::Config { .. })));
    }

    #[test]
    fn preset_and_table_inputs_parse() {
        let json = br#"{
            "schema_version": 1,
            "lattice": {"epsilon": 0.5, "n_x": 2, "n_t": 2, "bc": "periodic"},
            "couplings": {
                "d": 1,
                "j": {"preset": "constant", "value": [0.0, 1.0]},
                "m0": [[[[[0.1, 0.0]]], [[[0.2, 0.0]]]], [[[[0.3, 0.0]]], [[[0.4, 0.0]]]]],
                "r": {"preset": "gaussian", "amplitude": [1.0, 0.0], "center": [0.5, 0.0], "width": 1.0}
            },
            "statistics": {"aux": "fermionic", "phys_cutoff": 1}
        }"#;
        let spec = config::parse(json).unwrap();
        assert_eq!(spec.couplings.j[1][(0, 0)], c(0.0, 1.0));
        assert_eq!(spec.couplings.m0[1][0][(0, 0)], c(0.3, 0.0));
        assert!((spec.couplings.r[0][1][(0, 0)].re - 1.0).abs() < 1e-15);
        assert!(spec.couplings.smoothness() > 0.0);
        assert_eq!(spec.lattice.epsilon_x, 0.5);
    }

    #[test]
    fn parse_is_deterministic() {
        let json = br#"{"schema_version":1,"lattice":{"epsilon":1,"n_x":3,"n_t":2},"couplings":{"d":2,"j":{"preset":"constant","value":[1,0]}}}"#;
        assert_eq!(config::parse(json).unwrap(), config::parse(json).unwrap());
    }

    proptest! {
        #[test]
        fn canonical_order_is_stable(mut xs in prop::collection::vec((0usize..5, 0usize..2, 0usize..3), 0..20)) {
            let mut modes: Vec<ModeIndex> = xs.drain(..).map(|(x, s, j)| {
                ModeIndex::new(x, if s == 0 { Species::A } else { Species::B }, j)
            }).collect();
            modes.sort();
            let once = modes.clone();
            modes.sort();
            prop_assert_eq!(&once, &modes);
            // canonical linear index agrees with the derived order
            for w in once.windows(2) {
                prop_assert!(w[0].linear(3) <= w[1].linear(3));
            }
        }

        #[test]
        fn linear_index_round_trips(i in 0usize..200, d in 1usize..4) {
            prop_assert_eq!(ModeIndex::from_linear(i, d).linear(d), i);
        }
    }
}
