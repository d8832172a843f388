//! The `cpeps` command-line runner.
//!
//! Every subcommand writes one artifact, atomically, to `--out` (stdout when
//! omitted). CSV artifacts start with
//! `# schema_version=1 config_hash=<sha256/16> seed=<seed> command=<name>`.
//! Exit codes: 0 success, 1 tolerance or invariant failure, 2 configuration
//! error, 3 resource budget exceeded.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::action::{self, DerivMode, FieldConfiguration, Grid2, ScalarField};
use crate::clifford::{self, TransferBranch};
use crate::cmps::{self, AuxKind, CmpsData, Observable};
use crate::entanglement::{self, Region};
use crate::error::{Budget, Error, Result};
use crate::fock::generate_state;
use crate::linalg::{c, C64, I};
use crate::model::{config, BoundaryCondition, LatticeSpec, ModelSpec, SCHEMA_VERSION};
use crate::oracle::{contract_path_integral, ContractOptions};
use crate::spectrum;
use crate::square;
use crate::statefile::{self, StateFile};

/// Configuration used when `--config` is not given.
pub const DEFAULT_CONFIG: &str = r#"{
  "schema_version": 1,
  "lattice": { "epsilon": 0.1, "epsilon_x": 1.0, "n_x": 2, "n_t": 2, "bc": "periodic" },
  "couplings": {
    "d": 1,
    "j": { "preset": "constant", "value": [0.0, 1.0] },
    "m0": { "preset": "constant", "value": [0.0, 0.2] },
    "r": { "preset": "constant", "value": [0.5, 0.0] }
  }
}
"#;

#[derive(Debug, Parser)]
#[command(name = "cpeps", version, about = "Transfer-operator PEPS laboratory")]
pub struct Cli {
    /// Model configuration (JSON, schema_version 1).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output artifact; stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for random test batteries.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Memory budget for dense tables.
    #[arg(long = "budget-mb", global = true, default_value_t = 1024)]
    pub budget_mb: u64,
    /// Overrides the subcommand's pass/fail tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BranchArg {
    Literal,
    Rephased,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObservableArg {
    Density,
    Norm,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// 1D cMPS observable series and its Richardson limit.
    Cmps1d {
        #[arg(long, value_enum, default_value_t = ObservableArg::Density)]
        observable: ObservableArg,
        #[arg(long, value_delimiter = ',', default_value = "8,16,32,64")]
        steps: Vec<usize>,
    },
    /// Generate the physical state and write it as a binary state file.
    GenerateState,
    /// Dispersion zeros and the low-energy dispersion around them.
    Dispersion {
        #[arg(long, default_value_t = 1200)]
        n_x: usize,
        #[arg(long, default_value_t = 0.0)]
        mass: f64,
    },
    /// Inter-sector coupling of a Gaussian potential under refinement.
    Flavors {
        #[arg(long, default_value_t = 0.035)]
        rel_width: f64,
        #[arg(long, value_delimiter = ',', default_value = "24,48,96,192")]
        sizes: Vec<usize>,
    },
    /// Grassmann path integral against Fock-space state generation.
    OracleCheck {
        /// Largest number of conjugate generator pairs the contraction may use.
        #[arg(long, default_value_t = 16)]
        max_generators: usize,
    },
    /// Clifford residuals, group unitarity and transfer coefficients over θ.
    CliffordScan {
        #[arg(long = "theta-grid", default_value_t = 64)]
        points: usize,
        #[arg(long, default_value_t = 0.05)]
        gap: f64,
        /// Rapidity used for the group-element column.
        #[arg(long, default_value_t = 1.0)]
        omega: f64,
        #[arg(long, value_enum, default_value_t = BranchArg::Literal)]
        branch: BranchArg,
    },
    /// Action functionals on a seeded random smooth field.
    ActionEval {
        #[arg(long, default_value_t = 64)]
        grid: usize,
        #[arg(long, default_value_t = 1.0)]
        mass: f64,
        /// Evaluate the family action at this θ only.
        #[arg(long)]
        theta: Option<f64>,
    },
    /// Entropies and Schmidt ranks of regions of a stored state.
    AreaLaw {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        regions: PathBuf,
    },
    /// Rotation witnesses of the square-lattice and Euclidean actions.
    SquareCompare {
        #[arg(long, default_value_t = 64)]
        grid: usize,
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "0.3,1.5707963267948966,3.141592653589793,6.283185307179586"
        )]
        alphas: Vec<f64>,
    },
    /// Compare a fixed artifact suite against goldens, or bless new ones.
    Regress {
        #[arg(long)]
        golden: PathBuf,
        #[arg(long)]
        bless: bool,
    },
}

/// Result of one subcommand before it is written.
pub enum Artifact {
    Csv(String),
    Binary(Vec<u8>),
    Text(String),
}

pub struct Outcome {
    pub artifact: Artifact,
    /// CSV comment header, filled in by [`execute`].
    pub header: String,
    /// Tolerance or invariant violations; nonempty means exit 1.
    pub failures: Vec<String>,
}

pub struct Context {
    pub model: ModelSpec,
    pub config_hash: String,
    pub seed: u64,
    pub budget: Budget,
    pub tol: Option<f64>,
}

impl Context {
    pub fn load(config: Option<&Path>, seed: u64, budget_mb: u64, tol: Option<f64>) -> Result<Self> {
        let bytes = match config {
            Some(p) => std::fs::read(p).map_err(|e| Error::config("--config", format!("{}: {e}", p.display())))?,
            None => DEFAULT_CONFIG.as_bytes().to_vec(),
        };
        let model = config::parse(&bytes)?;
        if let Some(t) = tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::config("--tol", "tolerance must be positive"));
            }
        }
        let digest = Sha256::digest(&bytes);
        Ok(Self {
            model,
            config_hash: hex::encode(&digest[..8]),
            seed,
            budget: Budget::from_mb(budget_mb),
            tol,
        })
    }

    fn tol(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }

    pub fn header(&self, command: &str) -> String {
        format!(
            "# schema_version={SCHEMA_VERSION} config_hash={} seed={} command={command}\n",
            self.config_hash, self.seed
        )
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::Json(_) | Error::Singular { .. } => 2,
        Error::Resource { .. } => 3,
        _ => 1,
    }
}

fn csv_line(out: &mut String, fields: &[String]) {
    out.push_str(&fields.join(","));
    out.push('\n');
}

fn f(v: f64) -> String {
    format!("{v}")
}

fn cmd_cmps1d(ctx: &Context, observable: ObservableArg, steps: &[usize]) -> Result<Outcome> {
    let data = match &ctx.model.cmps {
        Some(p) => CmpsData::from_params(p)?,
        None => CmpsData::scalar(0.4, c(0.6, 0.2), 1.0, 8),
    };
    if steps.len() < 2 || steps.iter().any(|&s| s < 2) {
        return Err(Error::config("--steps", "need at least two step counts ≥ 2"));
    }
    let obs = match observable {
        ObservableArg::Density => Observable::Density,
        ObservableArg::Norm => Observable::Norm,
    };
    let (rows, limit) = cmps::observable_series(&data, obs, steps, 2);
    let mut csv = String::new();
    csv_line(
        &mut csv,
        &["n_steps", "delta", "value_re", "value_im"].map(String::from),
    );
    for r in &rows {
        csv_line(
            &mut csv,
            &[r.n_steps.to_string(), f(r.delta), f(r.value.re), f(r.value.im)],
        );
    }
    // Richardson limit
    csv_line(&mut csv, &["inf".into(), f(0.0), f(limit.re), f(limit.im)]);
    let mut failures = Vec::new();
    let tol = ctx.tol(1e-4);
    if data.d() == 1 && obs == Observable::Density {
        let target = data.r[(0, 0)].norm_sqr();
        let dev = (limit - c(target, 0.0)).norm();
        if dev > tol {
            failures.push(format!("density limit deviates from |r|² by {dev:e} > {tol:e}"));
        }
    }
    let small = data.with_steps(4);
    let po = cmps::path_ordered_state(&small, 1, &ctx.budget)?.state;
    let pi = cmps::path_integral_state_1d(&small, 1, AuxKind::Fermionic, cmps::SignMode::Oscillatory)?.state;
    let dev = cmps::max_deviation(&po, &pi);
    if dev > 1e-10 {
        failures.push(format!("path-ordered and path-integral states differ by {dev:e}"));
    }
    Ok(Outcome {
        artifact: Artifact::Csv(csv),
        header: String::new(),
        failures,
    })
}

fn cmd_generate(ctx: &Context) -> Result<Outcome> {
    let g = generate_state(&ctx.model, &ctx.budget)?;
    let bytes = statefile::encode(&StateFile {
        state: g.state,
        aux_dim: g.aux_dim,
    });
    Ok(Outcome {
        artifact: Artifact::Binary(bytes),
        header: String::new(),
        failures: Vec::new(),
    })
}

fn cmd_dispersion(ctx: &Context, n_x: usize, mass: f64) -> Result<Outcome> {
    let eps = ctx.model.lattice.epsilon_x;
    if !n_x.is_multiple_of(3) {
        return Err(Error::config("--n-x", "N_x must be divisible by 3"));
    }
    let zeros = spectrum::dispersion_zeros(eps);
    let rep = spectrum::low_energy_dispersion(mass, eps, n_x, 0.1 / eps)?;
    let mut csv = String::new();
    // zero rows give q_μ and the kernel 1+2cos(q_μ ε) there; low_energy rows
    // give p relative to q_μ and E of the relabeled kernel
    csv_line(&mut csv, &["p", "E", "sector", "kind"].map(String::from));
    for (mu, q) in zeros.iter().enumerate() {
        csv_line(
            &mut csv,
            &[f(*q), f(spectrum::kernel(*q, eps)), mu.to_string(), "zero".into()],
        );
    }
    for p in &rep.points {
        csv_line(
            &mut csv,
            &[f(p.k), f(p.energy), p.sector.to_string(), "low_energy".into()],
        );
    }
    eprintln!(
        "raw slope {} (√3 = {}), sector-averaged residual {:e}, pointwise residual {:e}",
        rep.raw_slope,
        3f64.sqrt(),
        rep.sector_residual,
        rep.pointwise_residual
    );
    let mut failures = Vec::new();
    let expect = 2.0 * PI / (3.0 * eps);
    let zdev = (zeros[0].abs() - expect).abs().max((zeros[1].abs() - expect).abs());
    if zdev > 1e-12 * expect.max(1.0) {
        failures.push(format!("zeros deviate from ±2π/(3ε) by {zdev:e}"));
    }
    let tol = ctx.tol(1e-6);
    if (rep.raw_slope - 3f64.sqrt()).abs() > tol {
        failures.push(format!(
            "raw slope {} differs from √3 by more than {tol:e}",
            rep.raw_slope
        ));
    }
    if rep.sector_residual > 0.01 {
        failures.push(format!("sector-averaged residual {:e} exceeds 1%", rep.sector_residual));
    }
    Ok(Outcome {
        artifact: Artifact::Csv(csv),
        header: String::new(),
        failures,
    })
}

fn cmd_flavors(ctx: &Context, rel_width: f64, sizes: &[usize]) -> Result<Outcome> {
    if sizes.is_empty() || sizes.iter().any(|&n| n < 3) || !(rel_width > 0.0) {
        return Err(Error::config("--sizes", "need sizes ≥ 3 and a positive width"));
    }
    let length = ctx.model.lattice.epsilon_x * ctx.model.lattice.n_x as f64;
    let length = if sizes.contains(&ctx.model.lattice.n_x) {
        length
    } else {
        2.0 * PI
    };
    let scan = spectrum::gaussian_decoupling_scan(length, rel_width, sizes);
    let mut csv = String::new();
    csv_line(
        &mut csv,
        &["n_x", "coupling_norm", "intra_norm", "ratio"].map(String::from),
    );
    for s in &scan {
        csv_line(
            &mut csv,
            &[s.n_x.to_string(), f(s.inter), f(s.intra), f(s.inter / s.intra)],
        );
    }
    let mut failures = Vec::new();
    if scan.windows(2).any(|w| w[1].inter >= w[0].inter) {
        failures.push("inter-sector coupling is not monotonically decreasing".into());
    }
    let last = scan.last().expect("nonempty");
    let tol = ctx.tol(1e-6);
    if last.inter > tol * last.intra {
        failures.push(format!(
            "inter/intra = {:e} at N_x = {} exceeds {tol:e}",
            last.inter / last.intra,
            last.n_x
        ));
    }
    Ok(Outcome {
        artifact: Artifact::Csv(csv),
        header: String::new(),
        failures,
    })
}

fn cmd_oracle(ctx: &Context, max_generators: usize) -> Result<Outcome> {
    let fock = generate_state(&ctx.model, &ctx.budget)?.state;
    let oracle = contract_path_integral(
        &ctx.model,
        ContractOptions {
            max_pairs: max_generators,
        },
    )?;
    let mut csv = String::new();
    csv_line(
        &mut csv,
        &[
            "index",
            "occupation",
            "fock_re",
            "fock_im",
            "oracle_re",
            "oracle_im",
            "abs_diff",
        ]
        .map(String::from),
    );
    let mut worst: f64 = 0.0;
    for (i, (a, b)) in fock.amplitudes.iter().zip(&oracle.amplitudes).enumerate() {
        let occ: String = fock.occupation(i).iter().map(|n| n.to_string()).collect();
        let d = (a - b).norm();
        worst = worst.max(d);
        csv_line(
            &mut csv,
            &[i.to_string(), occ, f(a.re), f(a.im), f(b.re), f(b.im), f(d)],
        );
    }
    eprintln!("max per-amplitude deviation {worst:e}");
    let tol = ctx.tol(1e-9);
    let failures = if worst > tol {
        vec![format!("oracle and Fock amplitudes differ by {worst:e} > {tol:e}")]
    } else {
        Vec::new()
    };
    Ok(Outcome {
        artifact: Artifact::Csv(csv),
        header: String::new(),
        failures,
    })
}

fn cmd_clifford(ctx: &Context, points: usize, gap: f64, omega: f64, branch: BranchArg) -> Result<Outcome> {
    if points < 2 || !(gap > 0.0 && gap < PI / 4.0) {
        return Err(Error::config("--points", "need ≥ 2 points and 0 < gap < π/4"));
    }
    let branch = match branch {
        BranchArg::Literal => TransferBranch::Literal,
        BranchArg::Rephased => TransferBranch::Rephased,
    };
    let eps = ctx.model.lattice.epsilon;
    let mut csv = String::new();
    csv_line(
        &mut csv,
        &[
            "theta",
            "clifford_residual",
            "eta00",
            "unitarity_residual",
            "gamma5_hermiticity",
            "c1_re",
            "c1_im",
            "c_sy_re",
            "c_sy_im",
            "c_h_re",
            "c_h_im",
        ]
        .map(String::from),
    );
    let mut worst: f64 = 0.0;
    for theta in clifford::theta_grid(points, gap) {
        let gs = clifford::gamma_family(theta)?;
        let r = gs.clifford_residual();
        worst = worst.max(r);
        let k = clifford::interpolated_transfer_coeffs(theta, eps, branch)?;
        let g = clifford::group_element(omega, theta)?;
        csv_line(
            &mut csv,
            &[
                f(theta),
                f(r),
                f(gs.eta[0]),
                f(g.unitarity_residual()),
                f(gs.gamma5_hermiticity_residual()),
                f(k.c1.re),
                f(k.c1.im),
                f(k.c_sigma_y.re),
                f(k.c_sigma_y.im),
                f(k.c_h.re),
                f(k.c_h.im),
            ],
        );
    }
    let tol = ctx.tol(1e-12);
    let failures = if worst > tol {
        vec![format!("Clifford residual {worst:e} > {tol:e}")]
    } else {
        Vec::new()
    };
    Ok(Outcome {
        artifact: Artifact::Csv(csv),
        header: String::new(),
        failures,
    })
}

fn cmd_action(ctx: &Context, n: usize, mass: f64, theta: Option<f64>) -> Result<Outcome> {
    let grid = Grid2::new(n, 2.0 * PI)?;
    let cfg = action::random_smooth_field(grid, 3, ctx.seed);
    let m = ScalarField::constant(grid, c(mass, 0.0));
    let mode = DerivMode::Spectral;
    let dirac = action::dirac_action(&cfg, &m, mode)?;
    let eucl = action::euclidean_action(&cfg, &m, mode)?;
    let general = action::general_action(&cfg, &vec![I; n], &ScalarField::constant(grid, c(0.0, -mass)), mode)?;
    let mut csv = String::new();
    csv_line(&mut csv, &["action", "theta", "re", "im"].map(String::from));
    let mut push = |name: &str, theta: f64, z: C64| csv_line(&mut csv, &[name.into(), f(theta), f(z.re), f(z.im)]);
    push("dirac", 0.0, dirac);
    push("euclidean", PI / 2.0, eucl);
    push("general_j_i", 0.0, general);
    let mut family = Vec::new();
    let thetas = match theta {
        Some(t) => {
            clifford::check_theta(t)?;
            vec![t]
        }
        None => clifford::theta_grid(9, 0.05),
    };
    for theta in thetas {
        let s = action::family_action(&cfg, &m, theta, mode)?;
        push("family", theta, s);
        family.push((theta, s));
    }
    let tol = ctx.tol(1e-10);
    let rel = |a: C64, b: C64| (a - b).norm() / b.norm().max(f64::MIN_POSITIVE);
    let mut failures = Vec::new();
    let (t0, s0) = family[0];
    let (t1, s1) = *family.last().expect("nonempty");
    if t0 == 0.0 && rel(s0, dirac) > tol {
        failures.push(format!(
            "family(0) differs from the Dirac action by {:e}",
            rel(s0, dirac)
        ));
    }
    if (t1 - PI / 2.0).abs() < 1e-15 && rel(s1, eucl) > tol {
        failures.push(format!("family(π/2) differs from S_E by {:e}", rel(s1, eucl)));
    }
    if rel(general, I * dirac) > tol {
        failures.push("general action with J = i, m0 = −im differs from i·S_Dirac".into());
    }
    Ok(Outcome {
        artifact: Artifact::Csv(csv),
        header: String::new(),
        failures,
    })
}

/// `--regions` file for `area-law`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionsFile {
    #[serde(default = "one")]
    pub epsilon: f64,
    #[serde(default)]
    pub epsilon_x: Option<f64>,
    #[serde(default = "periodic")]
    pub bc: BoundaryCondition,
    pub regions: Vec<RegionSpec>,
}

fn one() -> f64 {
    1.0
}

fn periodic() -> BoundaryCondition {
    BoundaryCondition::Periodic
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum RegionSpec {
    /// `[x0, t0, width, height]`.
    Block([usize; 4]),
    /// All sites with `t < t0`.
    Temporal(usize),
    /// Explicit `[x, t]` sites.
    Sites(Vec<[usize; 2]>),
}

fn cmd_area_law(ctx: &Context, state: &Path, regions: &Path) -> Result<Outcome> {
    let sf = statefile::read(state).map_err(|e| match e {
        Error::Io(io) => Error::config("--state", io.to_string()),
        other => other,
    })?;
    let bytes = std::fs::read(regions).map_err(|e| Error::config("--regions", e.to_string()))?;
    let spec: RegionsFile = serde_json::from_slice(&bytes).map_err(|e| Error::config("--regions", e.to_string()))?;
    let st = sf.state.normalized();
    let lat = LatticeSpec::new(
        spec.epsilon,
        spec.epsilon_x.unwrap_or(spec.epsilon),
        st.n_x,
        st.n_t,
        spec.bc,
    )?;
    let mut list = Vec::new();
    for (k, r) in spec.regions.iter().enumerate() {
        let reg = match r {
            RegionSpec::Block([x0, t0, w, h]) => Region::block(lat, *x0, *t0, *w, *h),
            RegionSpec::Temporal(t0) => Region::temporal(lat, *t0),
            RegionSpec::Sites(s) => Region::new(lat, &s.iter().map(|p| (p[0], p[1])).collect::<Vec<_>>()),
        }
        .map_err(|e| match e {
            Error::Config { message, .. } => Error::config(format!("regions[{k}]"), message),
            other => other,
        })?;
        list.push(reg);
    }
    let scan = entanglement::area_law_scan(&st, &list, &ctx.budget)?;
    let mut csv = String::new();
    csv_line(
        &mut csv,
        &["size", "boundary", "entropy", "schmidt_rank", "c_candidate"].map(String::from),
    );
    // stored amplitudes are single precision
    let tol = ctx.tol(1e-6);
    let mut failures = Vec::new();
    for r in &scan.rows {
        csv_line(
            &mut csv,
            &[
                r.region_size.to_string(),
                r.boundary_size.to_string(),
                f(r.entropy),
                r.schmidt_rank.to_string(),
                f(r.c_candidate),
            ],
        );
        if r.entropy > (r.schmidt_rank as f64).ln() + tol {
            failures.push(format!("S_A = {} exceeds ln(rank {})", r.entropy, r.schmidt_rank));
        }
    }
    for t0 in 1..st.n_t {
        let cut = entanglement::temporal_cut_rank(&st, t0, sf.aux_dim);
        if cut.rank > cut.bound {
            failures.push(format!(
                "temporal cut at t0 = {t0} has rank {} > {}",
                cut.rank, cut.bound
            ));
        }
    }
    Ok(Outcome {
        artifact: Artifact::Csv(csv),
        header: String::new(),
        failures,
    })
}

fn cmd_square(ctx: &Context, n: usize, alphas: &[f64]) -> Result<Outcome> {
    let grid = Grid2::new(n, 2.0 * PI)?;
    let cfg: FieldConfiguration = action::random_smooth_field(grid, 3, ctx.seed);
    let mut csv = String::new();
    csv_line(
        &mut csv,
        &["alpha", "witness_square", "witness_euclidean"].map(String::from),
    );
    let mut failures = Vec::new();
    for &alpha in alphas {
        let ws = square::anisotropy_witness(&cfg, alpha, c(1.0, 0.0))?;
        let we = square::euclidean_witness(&cfg, alpha, 1.0)?;
        csv_line(&mut csv, &[f(alpha), f(ws), f(we)]);
        let quarter = (alpha / (PI / 2.0)).round();
        if (alpha - quarter * PI / 2.0).abs() < 1e-12 && we > ctx.tol(1e-6) {
            failures.push(format!("Euclidean witness {we:e} at α = {alpha}"));
        }
    }
    Ok(Outcome {
        artifact: Artifact::Csv(csv),
        header: String::new(),
        failures,
    })
}

/// The fixed suite compared by `regress`.
fn regress_suite(ctx: &Context) -> Result<Vec<(&'static str, String)>> {
    let q = PI / 2.0;
    let runs: Vec<(&'static str, Outcome)> = vec![
        ("cmps1d.csv", cmd_cmps1d(ctx, ObservableArg::Density, &[8, 16, 32])?),
        ("dispersion.csv", cmd_dispersion(ctx, 300, 0.2)?),
        ("flavors.csv", cmd_flavors(ctx, 0.035, &[24, 48, 96])?),
        (
            "clifford-scan.csv",
            cmd_clifford(ctx, 16, 0.05, 1.0, BranchArg::Literal)?,
        ),
        ("action-eval.csv", cmd_action(ctx, 16, 1.0, None)?),
        ("square-compare.csv", cmd_square(ctx, 16, &[q, 2.0 * q])?),
    ];
    Ok(runs
        .into_iter()
        .map(|(name, o)| {
            let body = match o.artifact {
                Artifact::Csv(s) | Artifact::Text(s) => s,
                Artifact::Binary(_) => unreachable!("suite is CSV only"),
            };
            (name, format!("{}{}", ctx.header(name.trim_end_matches(".csv")), body))
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FileReport {
    pub file: String,
    pub worst: f64,
    pub column: String,
    pub ok: bool,
    pub note: String,
}

/// Per-column tolerance: `|a − b| ≤ tol·max(1, |b|)`; text cells must match.
pub fn compare_csv(golden: &str, fresh: &str, tol: f64) -> std::result::Result<(f64, String), String> {
    let rows = |s: &str| -> Vec<Vec<String>> {
        s.lines()
            .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
            .map(|l| l.split(',').map(|c| c.trim().to_string()).collect())
            .collect()
    };
    let (g, n) = (rows(golden), rows(fresh));
    if g.is_empty() || g[0] != n.first().cloned().unwrap_or_default() {
        return Err("column headers differ".into());
    }
    if g.len() != n.len() {
        return Err(format!("row count {} vs {}", g.len(), n.len()));
    }
    let cols = &g[0];
    let mut worst = (0.0f64, String::new());
    for (row, (a, b)) in g.iter().zip(&n).enumerate().skip(1) {
        if a.len() != cols.len() || b.len() != cols.len() {
            return Err(format!("row {row} has the wrong number of cells"));
        }
        for (k, (x, y)) in a.iter().zip(b).enumerate() {
            match (x.parse::<f64>(), y.parse::<f64>()) {
                (Ok(gx), Ok(fy)) => {
                    if gx.is_nan() || fy.is_nan() {
                        if gx.is_nan() != fy.is_nan() {
                            return Err(format!("row {row} column {} changed NaN status", cols[k]));
                        }
                        continue;
                    }
                    let dev = if gx == fy {
                        0.0
                    } else {
                        (gx - fy).abs() / gx.abs().max(1.0)
                    };
                    if dev > worst.0 {
                        worst = (dev, cols[k].clone());
                    }
                }
                (Err(_), Err(_)) if x == y => {}
                _ => return Err(format!("row {row} column {} does not match ({x} vs {y})", cols[k])),
            }
        }
    }
    if worst.0 > tol {
        return Err(format!("drift {:e} in column {} exceeds {tol:e}", worst.0, worst.1));
    }
    Ok(worst)
}

fn cmd_regress(ctx: &Context, golden: &Path, bless: bool) -> Result<Outcome> {
    let suite = regress_suite(ctx)?;
    if bless {
        std::fs::create_dir_all(golden).map_err(|e| Error::config("--golden", e.to_string()))?;
        for (name, content) in &suite {
            statefile::write_atomic(&golden.join(name), content.as_bytes())?;
        }
        let mut text = String::new();
        for (name, _) in &suite {
            let _ = writeln!(text, "blessed {name}");
        }
        return Ok(Outcome {
            artifact: Artifact::Text(text),
            header: String::new(),
            failures: Vec::new(),
        });
    }
    let tol = ctx.tol(1e-9);
    let mut reports = Vec::new();
    for (name, fresh) in &suite {
        let path = golden.join(name);
        let rep = match std::fs::read_to_string(&path) {
            Err(_) => FileReport {
                file: name.to_string(),
                worst: f64::NAN,
                column: String::new(),
                ok: false,
                note: "missing golden".into(),
            },
            Ok(g) => match compare_csv(&g, fresh, tol) {
                Ok((w, col)) => FileReport {
                    file: name.to_string(),
                    worst: w,
                    column: col,
                    ok: true,
                    note: String::new(),
                },
                Err(msg) => FileReport {
                    file: name.to_string(),
                    worst: f64::NAN,
                    column: String::new(),
                    ok: false,
                    note: msg,
                },
            },
        };
        reports.push(rep);
    }
    let mut text = String::new();
    let mut failures = Vec::new();
    for r in &reports {
        let status = if r.ok { "PASS" } else { "FAIL" };
        let _ = writeln!(
            text,
            "{status} {} worst={:e} column={} {}",
            r.file, r.worst, r.column, r.note
        );
        if !r.ok {
            failures.push(format!("{}: {}", r.file, r.note));
        }
    }
    Ok(Outcome {
        artifact: Artifact::Text(text),
        header: String::new(),
        failures,
    })
}

pub fn execute(cli: &Cli) -> Result<Outcome> {
    let ctx = Context::load(cli.config.as_deref(), cli.seed, cli.budget_mb, cli.tol)?;
    let mut out = match &cli.command {
        Command::Cmps1d { observable, steps } => cmd_cmps1d(&ctx, *observable, steps),
        Command::GenerateState => {
            if cli.out.is_none() {
                return Err(Error::config("--out", "generate-state needs an output path"));
            }
            cmd_generate(&ctx)
        }
        Command::Dispersion { n_x, mass } => cmd_dispersion(&ctx, *n_x, *mass),
        Command::Flavors { rel_width, sizes } => cmd_flavors(&ctx, *rel_width, sizes),
        Command::OracleCheck { max_generators } => cmd_oracle(&ctx, *max_generators),
        Command::CliffordScan {
            points,
            gap,
            omega,
            branch,
        } => cmd_clifford(&ctx, *points, *gap, *omega, *branch),
        Command::ActionEval { grid, mass, theta } => cmd_action(&ctx, *grid, *mass, *theta),
        Command::AreaLaw { state, regions } => cmd_area_law(&ctx, state, regions),
        Command::SquareCompare { grid, alphas } => cmd_square(&ctx, *grid, alphas),
        Command::Regress { golden, bless } => cmd_regress(&ctx, golden, *bless),
    }?;
    out.header = ctx.header(command_name(&cli.command));
    Ok(out)
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Cmps1d { .. } => "cmps1d",
        Command::GenerateState => "generate-state",
        Command::Dispersion { .. } => "dispersion",
        Command::Flavors { .. } => "flavors",
        Command::OracleCheck { .. } => "oracle-check",
        Command::CliffordScan { .. } => "clifford-scan",
        Command::ActionEval { .. } => "action-eval",
        Command::AreaLaw { .. } => "area-law",
        Command::SquareCompare { .. } => "square-compare",
        Command::Regress { .. } => "regress",
    }
}

/// Parses `args`, runs the subcommand, writes its artifact and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = match execute(&cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let bytes = match &outcome.artifact {
        Artifact::Csv(body) => format!("{}{}", outcome.header, body).into_bytes(),
        Artifact::Binary(b) => b.clone(),
        Artifact::Text(t) => t.clone().into_bytes(),
    };
    let written = match &cli.out {
        Some(p) if !matches!(cli.command, Command::Regress { .. }) => statefile::write_atomic(p, &bytes),
        _ => std::io::stdout().write_all(&bytes).map_err(Error::from),
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return 1;
    }
    for f in &outcome.failures {
        eprintln!("FAIL: {f}");
    }
    if outcome.failures.is_empty() {
        0
    } else {
        1
    }
}

pub fn main() {
    std::process::exit(run(std::env::args_os()));
}

/// Parsed key/value pairs of a CSV header line.
pub fn parse_header(line: &str) -> BTreeMap<String, String> {
    line.trim_start_matches('#')
        .split_whitespace()
        .filter_map(|kv| kv.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compare_detects_drift_and_corruption() {
        let g = "# h\na,b\nx,1.0\ny,2.0\n";
        assert!(compare_csv(g, g, 1e-9).is_ok());
        assert!(compare_csv(g, "# h\na,b\nx,1.0\ny,2.1\n", 1e-9).is_err());
        assert!(compare_csv(g, "# h\na,b\nx,1.0\n", 1e-9).is_err());
        assert!(compare_csv("a,b\nx,zz\ny,2.0\n", g, 1e-9).is_err());
        let (w, col) = compare_csv(g, "# h\na,b\nx,1.0\ny,2.0000000001\n", 1e-9).unwrap();
        assert!(w > 0.0 && col == "b");
    }

    #[test]
    fn default_config_is_valid() {
        let ctx = Context::load(None, 3, 64, None).unwrap();
        let h = parse_header(&ctx.header("dispersion"));
        assert_eq!(h["schema_version"], "1");
        assert_eq!(h["seed"], "3");
        assert_eq!(h["config_hash"].len(), 16);
    }

    #[test]
    fn error_classes_map_to_exit_codes() {
        assert_eq!(exit_code(&Error::config("x", "y")), 2);
        assert_eq!(
            exit_code(&Error::Resource {
                needed: 2,
                allowed: 1,
                suggestion: String::new()
            }),
            3
        );
        assert_eq!(exit_code(&Error::Consistency("z".into())), 1);
    }
}
