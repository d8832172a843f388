//! Sampled two-component fields on a periodic square box and the action
//! functionals evaluated on them.
//!
//! Coordinates are `(x^0, x^1) = (t, x)`; samples are stored with `x`
//! fastest. Each flavor carries a sector label `μ`; evaluators act on
//! `Ψ' = σ_z^μ Ψ`, which maps the `μ = 1` kernel back onto the `μ = 0` one.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;

use crate::clifford::{gamma_family, group_element, M2};
use crate::error::{Error, Result};
use crate::linalg::{pauli, C64, I, ONE, ZERO};

pub type Spinor = [C64; 2];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2 {
    /// Samples per axis.
    pub n: usize,
    /// Box length per axis.
    pub length: f64,
}

impl Grid2 {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 2 || !(length > 0.0) {
            return Err(Error::config("grid", "need n ≥ 2 and a positive box length"));
        }
        Ok(Self { n, length })
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn index(&self, it: usize, ix: usize) -> usize {
        (it % self.n) * self.n + (ix % self.n)
    }

    /// `(t, x)` of a sample.
    pub fn point(&self, i: usize) -> [f64; 2] {
        let h = self.spacing();
        [(i / self.n) as f64 * h, (i % self.n) as f64 * h]
    }

    fn wavenumber(&self, m: usize) -> f64 {
        let n = self.n as i64;
        let mut k = m as i64;
        if 2 * k > n {
            k -= n;
        }
        2.0 * PI * k as f64 / self.length
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Flavor {
    pub sector: u8,
    pub psi: Vec<Spinor>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldConfiguration {
    pub grid: Grid2,
    pub flavors: Vec<Flavor>,
}

impl FieldConfiguration {
    pub fn new(grid: Grid2, flavors: Vec<Flavor>) -> Result<Self> {
        for f in &flavors {
            if f.psi.len() != grid.len() {
                return Err(Error::Dimension(format!(
                    "flavor has {} samples, grid has {}",
                    f.psi.len(),
                    grid.len()
                )));
            }
            if f.sector > 1 {
                return Err(Error::config("sector", "sector label must be 0 or 1"));
            }
            if f.psi.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::config("field", "samples must be finite"));
            }
        }
        Ok(Self { grid, flavors })
    }

    pub fn zeros(grid: Grid2, sectors: &[u8]) -> Self {
        let flavors = sectors
            .iter()
            .map(|&s| Flavor {
                sector: s,
                psi: vec![[ZERO; 2]; grid.len()],
            })
            .collect();
        Self { grid, flavors }
    }

    /// One flavor of sector 0 filled from a function of `(t, x)`.
    pub fn from_fn(grid: Grid2, f: impl Fn(f64, f64) -> Spinor) -> Self {
        let psi = (0..grid.len())
            .map(|i| {
                let [t, x] = grid.point(i);
                f(t, x)
            })
            .collect();
        Self {
            grid,
            flavors: vec![Flavor { sector: 0, psi }],
        }
    }

    fn check_grid(&self, other: &Grid2) -> Result<()> {
        if self.grid != *other {
            return Err(Error::Dimension("field and coefficient grids differ".into()));
        }
        Ok(())
    }
}

/// A complex scalar sampled on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid2,
    pub values: Vec<C64>,
}

impl ScalarField {
    pub fn constant(grid: Grid2, v: C64) -> Self {
        Self {
            grid,
            values: vec![v; grid.len()],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DerivMode {
    #[default]
    Spectral,
    Central,
}

/// `∂_axis` of a sampled scalar (axis 0 = t, axis 1 = x).
pub fn derivative(values: &[C64], grid: &Grid2, axis: usize, mode: DerivMode) -> Vec<C64> {
    let n = grid.n;
    let h = grid.spacing();
    let stride_line = |line: usize, k: usize| if axis == 1 { line * n + k } else { k * n + line };
    let mut out = vec![ZERO; n * n];
    match mode {
        DerivMode::Central => {
            for line in 0..n {
                for k in 0..n {
                    let fwd = values[stride_line(line, (k + 1) % n)];
                    let bwd = values[stride_line(line, (k + n - 1) % n)];
                    out[stride_line(line, k)] = (fwd - bwd) / (2.0 * h);
                }
            }
        }
        DerivMode::Spectral => {
            let mut planner = FftPlanner::new();
            let fwd = planner.plan_fft_forward(n);
            let inv = planner.plan_fft_inverse(n);
            let mut buf = vec![ZERO; n];
            for line in 0..n {
                for k in 0..n {
                    buf[k] = values[stride_line(line, k)];
                }
                fwd.process(&mut buf);
                for (m, z) in buf.iter_mut().enumerate() {
                    // the Nyquist mode has no odd partner
                    let kk = if 2 * m == n { 0.0 } else { grid.wavenumber(m) };
                    *z *= I * kk / n as f64;
                }
                inv.process(&mut buf);
                for k in 0..n {
                    out[stride_line(line, k)] = buf[k];
                }
            }
        }
    }
    out
}

/// `(∂_t Ψ, ∂_x Ψ)` componentwise.
fn spinor_derivatives(psi: &[Spinor], grid: &Grid2, mode: DerivMode) -> [Vec<Spinor>; 2] {
    let comp = |c: usize| psi.iter().map(|s| s[c]).collect::<Vec<_>>();
    let (a, b) = (comp(0), comp(1));
    let mut out: [Vec<Spinor>; 2] = [Vec::new(), Vec::new()];
    for (axis, slot) in out.iter_mut().enumerate() {
        let da = derivative(&a, grid, axis, mode);
        let db = derivative(&b, grid, axis, mode);
        *slot = da.into_iter().zip(db).map(|(x, y)| [x, y]).collect();
    }
    out
}

fn apply(m: &M2, s: &Spinor) -> Spinor {
    [m[(0, 0)] * s[0] + m[(0, 1)] * s[1], m[(1, 0)] * s[0] + m[(1, 1)] * s[1]]
}

fn dot(a: &Spinor, b: &Spinor) -> C64 {
    a[0].conj() * b[0] + a[1].conj() * b[1]
}

fn sector_frame(sector: u8, s: &Spinor) -> Spinor {
    if sector == 1 {
        [s[0], -s[1]]
    } else {
        *s
    }
}

/// `∫ Σ_flavors Ψ'† (O_t ∂_t + O_x ∂_x + M(t, x)) Ψ'`.
fn bilinear_action(cfg: &FieldConfiguration, ot: &M2, ox: &M2, mass: impl Fn(usize) -> M2, mode: DerivMode) -> C64 {
    let g = &cfg.grid;
    let area = g.spacing() * g.spacing();
    let mut acc = ZERO;
    for f in &cfg.flavors {
        let psi: Vec<Spinor> = f.psi.iter().map(|s| sector_frame(f.sector, s)).collect();
        let [dt, dx] = spinor_derivatives(&psi, g, mode);
        for i in 0..g.len() {
            let v = apply(ot, &dt[i]);
            let w = apply(ox, &dx[i]);
            let m = apply(&mass(i), &psi[i]);
            acc += dot(&psi[i], &[v[0] + w[0] + m[0], v[1] + w[1] + m[1]]);
        }
    }
    acc * area
}

fn scaled(m: M2, s: C64) -> M2 {
    m * s
}

/// `∫ Ψ̄(iγ^μ∂_μ − m)Ψ = ∫ Ψ†(i∂_t + iσ_x∂_x − mσ_z)Ψ`.
pub fn dirac_action(cfg: &FieldConfiguration, m: &ScalarField, mode: DerivMode) -> Result<C64> {
    cfg.check_grid(&m.grid)?;
    Ok(bilinear_action(
        cfg,
        &scaled(M2::identity(), I),
        &scaled(pauli::x(), I),
        |i| scaled(pauli::z(), -m.values[i]),
        mode,
    ))
}

/// `∫ Ψ†(−∂_t + J(t) σ_z^μσ_xσ_z^μ i∂_x + m0 σ_z)Ψ`, with `J` given per time
/// row of the grid.
pub fn general_action(cfg: &FieldConfiguration, j: &[C64], m0: &ScalarField, mode: DerivMode) -> Result<C64> {
    cfg.check_grid(&m0.grid)?;
    if j.len() != cfg.grid.n {
        return Err(Error::Dimension("J needs one value per time row".into()));
    }
    let g = cfg.grid;
    let area = g.spacing() * g.spacing();
    let mut acc = ZERO;
    for f in &cfg.flavors {
        let psi = &f.psi;
        let [dt, dx] = spinor_derivatives(psi, &g, mode);
        let sx = if f.sector == 1 { -pauli::x() } else { pauli::x() };
        for i in 0..g.len() {
            let jt = j[i / g.n];
            let kin = apply(&scaled(sx, I * jt), &dx[i]);
            let mass = apply(&scaled(pauli::z(), m0.values[i]), &psi[i]);
            let v = [-dt[i][0] + kin[0] + mass[0], -dt[i][1] + kin[1] + mass[1]];
            acc += dot(&psi[i], &v);
        }
    }
    Ok(acc * area)
}

/// `∫ √|det η| Ψ†γ_0[iη^{μν}γ_μ(θ)∂_ν − m]Ψ` with the base `γ_0 = σ_z` in
/// front. `−det η` turns negative past θ = π/4, so the modulus is taken.
pub fn family_action(cfg: &FieldConfiguration, m: &ScalarField, theta: f64, mode: DerivMode) -> Result<C64> {
    cfg.check_grid(&m.grid)?;
    let gs = gamma_family(theta)?;
    let vol = volume_factor(theta)?;
    let sz = pauli::z();
    // η^{μμ} = η_{μμ} for a diagonal ±1 metric
    let ot = sz * gs.gamma[0] * C64::new(0.0, gs.eta[0] * vol);
    let ox = sz * gs.gamma[1] * C64::new(0.0, gs.eta[1] * vol);
    Ok(bilinear_action(cfg, &ot, &ox, |i| sz * (-m.values[i] * vol), mode))
}

/// `√|det η(θ)|`.
pub fn volume_factor(theta: f64) -> Result<f64> {
    let eta = crate::clifford::metric(theta)?;
    Ok((eta[0] * eta[1]).abs().sqrt())
}

/// `S_E = ∫ Ψ†(iσ_y∂_t + iσ_x∂_x − mσ_z)Ψ`.
pub fn euclidean_action(cfg: &FieldConfiguration, m: &ScalarField, mode: DerivMode) -> Result<C64> {
    cfg.check_grid(&m.grid)?;
    Ok(bilinear_action(
        cfg,
        &scaled(pauli::y(), I),
        &scaled(pauli::x(), I),
        |i| scaled(pauli::z(), -m.values[i]),
        mode,
    ))
}

/// `e^{i k_m s}` for every grid wavenumber, by repeated multiplication.
fn phases(grid: &Grid2, s: f64) -> Vec<C64> {
    let n = grid.n;
    let base = C64::from_polar(1.0, 2.0 * PI * s / grid.length);
    let back = base.conj();
    let mut out = vec![ONE; n];
    let mut p = ONE;
    for m in 1..=n / 2 {
        p *= base;
        out[m] = p;
    }
    let mut q = ONE;
    for m in (n / 2 + 1..n).rev() {
        q *= back;
        out[m] = q;
    }
    out
}

/// Evaluates the band-limited interpolant with coefficients `coeffs` at
/// `(t, x)`.
fn spectral_eval(coeffs: &[C64], grid: &Grid2, t: f64, x: f64) -> C64 {
    let n = grid.n;
    let (et, ex) = (phases(grid, t), phases(grid, x));
    let mut acc = ZERO;
    for mt in 0..n {
        let row = &coeffs[mt * n..(mt + 1) * n];
        let inner: C64 = row.iter().zip(&ex).map(|(c, e)| c * e).sum();
        acc += et[mt] * inner;
    }
    acc
}

fn fft2(values: &[C64], grid: &Grid2) -> Vec<C64> {
    let n = grid.n;
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let mut data = values.to_vec();
    for row in data.chunks_mut(n) {
        fwd.process(row);
    }
    let mut col = vec![ZERO; n];
    for c in 0..n {
        for r in 0..n {
            col[r] = data[r * n + c];
        }
        fwd.process(&mut col);
        for r in 0..n {
            data[r * n + c] = col[r] / (n * n) as f64;
        }
    }
    data
}

/// `Ψ'(x) = Λ Ψ(V⁻¹x)` with `Λ = Λ(α; π/2)` and `V` its vector
/// representation, rotating about the box center. Quarter turns permute
/// samples exactly; other angles resample the band-limited interpolant.
pub fn rotate(cfg: &FieldConfiguration, alpha: f64) -> Result<FieldConfiguration> {
    let g = group_element(alpha, std::f64::consts::FRAC_PI_2)?;
    let v = g.real_v(1e-10)?;
    let det = v[0][0] * v[1][1] - v[0][1] * v[1][0];
    let inv = [[v[1][1] / det, -v[0][1] / det], [-v[1][0] / det, v[0][0] / det]];
    let grid = cfg.grid;
    let h = grid.spacing();
    let center = 0.5 * grid.length;
    let integral = inv.iter().flatten().all(|e| (e - e.round()).abs() < 1e-9) && grid.n.is_multiple_of(2);
    let mut flavors = Vec::with_capacity(cfg.flavors.len());
    for f in &cfg.flavors {
        let source = |i: usize| {
            let [t, x] = grid.point(i);
            let (dt, dx) = (t - center, x - center);
            [
                inv[0][0] * dt + inv[0][1] * dx + center,
                inv[1][0] * dt + inv[1][1] * dx + center,
            ]
        };
        let psi: Vec<Spinor> = if integral {
            (0..grid.len())
                .map(|i| {
                    let [t, x] = source(i);
                    let it = ((t / h).round() as i64).rem_euclid(grid.n as i64) as usize;
                    let ix = ((x / h).round() as i64).rem_euclid(grid.n as i64) as usize;
                    apply(&g.lambda, &f.psi[grid.index(it, ix)])
                })
                .collect()
        } else {
            let c0 = fft2(&f.psi.iter().map(|s| s[0]).collect::<Vec<_>>(), &grid);
            let c1 = fft2(&f.psi.iter().map(|s| s[1]).collect::<Vec<_>>(), &grid);
            (0..grid.len())
                .map(|i| {
                    let [t, x] = source(i);
                    let s = [spectral_eval(&c0, &grid, t, x), spectral_eval(&c1, &grid, t, x)];
                    apply(&g.lambda, &s)
                })
                .collect()
        };
        flavors.push(Flavor { sector: f.sector, psi });
    }
    Ok(FieldConfiguration { grid, flavors })
}

/// `|S[rotate(cfg, α)] − S[cfg]| / |S[cfg]|` for any action functional.
pub fn rotation_witness(
    cfg: &FieldConfiguration,
    alpha: f64,
    action: impl Fn(&FieldConfiguration) -> Result<C64>,
) -> Result<f64> {
    let s0 = action(cfg)?;
    let s1 = action(&rotate(cfg, alpha)?)?;
    if s0.norm() == 0.0 {
        return Ok(s1.norm());
    }
    Ok((s1 - s0).norm() / s0.norm())
}

#[derive(Debug, Clone)]
pub struct Current {
    pub j0: Vec<C64>,
    pub j1: Vec<C64>,
    /// `max |∂_t j^0 + ∂_x j^1|`.
    pub divergence: f64,
}

/// `j^0 = Ψ†Ψ`, `j^1 = Ψ̄γ^1Ψ = Ψ†σ_xΨ`, summed over flavors.
pub fn conserved_current(cfg: &FieldConfiguration, mode: DerivMode) -> Current {
    let g = cfg.grid;
    let mut j0 = vec![ZERO; g.len()];
    let mut j1 = vec![ZERO; g.len()];
    for f in &cfg.flavors {
        for i in 0..g.len() {
            let s = sector_frame(f.sector, &f.psi[i]);
            j0[i] += dot(&s, &s);
            j1[i] += dot(&s, &apply(&pauli::x(), &s));
        }
    }
    let d0 = derivative(&j0, &g, 0, mode);
    let d1 = derivative(&j1, &g, 1, mode);
    let divergence = d0.iter().zip(&d1).map(|(a, b)| (a + b).norm()).fold(0.0, f64::max);
    Current { j0, j1, divergence }
}

/// On-shell plane wave `u e^{−i(Et − px)}` with `u = (E + m, p)` and
/// `E = √(p² + m²)`.
pub fn plane_wave(p: f64, m: f64, amplitude: C64) -> impl Fn(f64, f64) -> Spinor {
    let e = (p * p + m * m).sqrt();
    move |t, x| {
        let ph = C64::from_polar(1.0, -(e * t - p * x)) * amplitude;
        [ph * (e + m), ph * p]
    }
}

/// Band-limited random field: Fourier modes with integer wavenumbers
/// `|k_t|, |k_x| ≤ k_max` (in units of `2π/L`), seeded.
pub fn random_smooth_field(grid: Grid2, k_max: i64, seed: u64) -> FieldConfiguration {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut modes = Vec::new();
    for kt in -k_max..=k_max {
        for kx in -k_max..=k_max {
            let mut amp = || C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            modes.push((kt, kx, [amp(), amp()]));
        }
    }
    let w = 2.0 * PI / grid.length;
    FieldConfiguration::from_fn(grid, move |t, x| {
        let mut s = [ZERO; 2];
        for (kt, kx, a) in &modes {
            let ph = C64::from_polar(1.0, w * (*kt as f64 * t + *kx as f64 * x));
            s[0] += a[0] * ph;
            s[1] += a[1] * ph;
        }
        s
    })
}

/// Gaussian packet `u exp(−|x − x0|²/(2w²)) e^{i k·x}` centered in the box.
pub fn gaussian_packet(grid: Grid2, width: f64, k: [f64; 2], spinor: Spinor) -> FieldConfiguration {
    let c = 0.5 * grid.length;
    FieldConfiguration::from_fn(grid, move |t, x| {
        let r2 = (t - c).powi(2) + (x - c).powi(2);
        let env = C64::from_polar((-r2 / (2.0 * width * width)).exp(), k[0] * t + k[1] * x);
        [spinor[0] * env, spinor[1] * env]
    })
}

pub fn unit_spinor() -> Spinor {
    [ONE, ZERO]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn grid(n: usize) -> Grid2 {
        Grid2::new(n, 2.0 * PI).unwrap()
    }

    #[test]
    fn zero_field_has_zero_action() {
        let g = grid(16);
        let cfg = FieldConfiguration::zeros(g, &[0, 1]);
        let m = ScalarField::constant(g, ONE);
        assert_eq!(dirac_action(&cfg, &m, DerivMode::Spectral).unwrap(), ZERO);
        assert_eq!(euclidean_action(&cfg, &m, DerivMode::Spectral).unwrap(), ZERO);
    }

    #[test]
    fn constant_field_is_pure_mass() {
        let g = grid(16);
        let s = [C64::new(0.3, 0.1), C64::new(-0.2, 0.5)];
        let cfg = FieldConfiguration::from_fn(g, |_, _| s);
        let m = ScalarField::constant(g, ONE);
        let val = dirac_action(&cfg, &m, DerivMode::Spectral).unwrap();
        let bar = s[0].norm_sqr() - s[1].norm_sqr();
        let area = g.length * g.length;
        assert!((val - C64::new(-area * bar, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn plane_wave_action_matches_substitution() {
        let g = grid(32);
        let (p, e_off, m) = (2.0, 3.0, 0.7);
        let u = [C64::new(0.4, 0.2), C64::new(-0.1, 0.9)];
        let cfg = FieldConfiguration::from_fn(g, |t, x| {
            let ph = C64::from_polar(1.0, -(e_off * t - p * x));
            [u[0] * ph, u[1] * ph]
        });
        let mf = ScalarField::constant(g, C64::new(m, 0.0));
        let val = dirac_action(&cfg, &mf, DerivMode::Spectral).unwrap();
        // i∂_t → E, i∂_x → −p: density u†(E − pσ_x − mσ_z)u
        let ku = [u[0] * (e_off - m) - u[1] * p, u[1] * (e_off + m) - u[0] * p];
        let expect = dot(&u, &ku) * g.length * g.length;
        assert!((val - expect).norm() < 1e-10 * expect.norm());
    }

    #[test]
    fn general_form_is_i_times_dirac() {
        let g = grid(24);
        let mut cfg = random_smooth_field(g, 3, 7);
        let mut second = random_smooth_field(g, 3, 8).flavors.remove(0);
        second.sector = 1;
        cfg.flavors.push(second);
        let m = 0.6;
        let d = dirac_action(&cfg, &ScalarField::constant(g, C64::new(m, 0.0)), DerivMode::Spectral).unwrap();
        let gen = general_action(
            &cfg,
            &vec![I; g.n],
            &ScalarField::constant(g, C64::new(0.0, -m)),
            DerivMode::Spectral,
        )
        .unwrap();
        assert!((gen - I * d).norm() < 1e-10 * d.norm());
    }

    #[test]
    fn family_matches_both_ends() {
        let g = grid(24);
        let cfg = random_smooth_field(g, 3, 9);
        let m = ScalarField::constant(g, C64::new(0.8, 0.0));
        let d = dirac_action(&cfg, &m, DerivMode::Spectral).unwrap();
        let f0 = family_action(&cfg, &m, 0.0, DerivMode::Spectral).unwrap();
        assert!((d - f0).norm() < 1e-12 * d.norm());
        let e = euclidean_action(&cfg, &m, DerivMode::Spectral).unwrap();
        let f1 = family_action(&cfg, &m, FRAC_PI_2, DerivMode::Spectral).unwrap();
        assert!((e - f1).norm() < 1e-12 * e.norm());
        for t in crate::clifford::theta_grid(64, 0.05) {
            assert_eq!(volume_factor(t).unwrap(), 1.0);
        }
    }

    #[test]
    fn family_is_continuous_away_from_singularity() {
        let g = grid(16);
        let cfg = random_smooth_field(g, 2, 10);
        let m = ScalarField::constant(g, ONE);
        for (a, b) in [(0.0, 0.7), (0.87, FRAC_PI_2)] {
            let h = (b - a) / 200.0;
            let vals: Vec<C64> = (0..=200)
                .map(|k| family_action(&cfg, &m, a + h * k as f64, DerivMode::Spectral).unwrap())
                .collect();
            let jump = vals.windows(2).map(|w| (w[1] - w[0]).norm()).fold(0.0, f64::max);
            let scale = vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
            assert!(jump < 0.1 * scale, "{jump} vs {scale}");
        }
    }

    #[test]
    fn euclidean_action_is_rotation_invariant() {
        let g = grid(64);
        let m = ScalarField::constant(g, ONE);
        let cfg = random_smooth_field(g, 3, 11);
        for alpha in [FRAC_PI_2, PI, 2.0 * PI] {
            let w = rotation_witness(&cfg, alpha, |c| euclidean_action(c, &m, DerivMode::Spectral)).unwrap();
            assert!(w < 1e-10, "α = {alpha}: {w}");
        }
        let packet = gaussian_packet(g, 0.6, [1.0, 2.0], [ONE, C64::new(0.3, -0.4)]);
        let w = rotation_witness(&packet, FRAC_PI_2, |c| euclidean_action(c, &m, DerivMode::Spectral)).unwrap();
        assert!(w < 1e-6);
    }

    #[test]
    fn minkowski_action_is_not_rotation_invariant() {
        let g = grid(32);
        let m = ScalarField::constant(g, ONE);
        let cfg = random_smooth_field(g, 3, 12);
        let w = rotation_witness(&cfg, FRAC_PI_2, |c| dirac_action(c, &m, DerivMode::Spectral)).unwrap();
        assert!(w > 1e-2);
    }

    #[test]
    fn small_angle_rotation_by_resampling() {
        let g = grid(16);
        let m = ScalarField::constant(g, ONE);
        let cfg = gaussian_packet(g, 0.7, [0.0, 0.0], [ONE, C64::new(0.0, 0.5)]);
        let w = rotation_witness(&cfg, 0.3, |c| euclidean_action(c, &m, DerivMode::Spectral)).unwrap();
        assert!(w < 1e-3, "{w}");
    }

    #[test]
    fn on_shell_current_is_conserved() {
        let g = grid(32);
        let m = 4.0;
        let a = plane_wave(0.0, m, ONE);
        let b = plane_wave(3.0, m, C64::new(0.5, 0.2));
        let cfg = FieldConfiguration::from_fn(g, |t, x| {
            let (u, v) = (a(t, x), b(t, x));
            [u[0] + v[0], u[1] + v[1]]
        });
        assert!(conserved_current(&cfg, DerivMode::Spectral).divergence < 1e-10);
        let st = FieldConfiguration::from_fn(g, |_, _| [ONE, I]);
        assert!(conserved_current(&st, DerivMode::Spectral).divergence < 1e-12);
        let off = random_smooth_field(g, 2, 3);
        assert!(conserved_current(&off, DerivMode::Spectral).divergence > 1e-3);
    }

    #[test]
    fn central_differences_converge() {
        let s = |n: usize| {
            let g = grid(n);
            let cfg = random_smooth_field(g, 2, 4);
            let m = ScalarField::constant(g, ONE);
            let a = euclidean_action(&cfg, &m, DerivMode::Central).unwrap();
            let b = euclidean_action(&cfg, &m, DerivMode::Spectral).unwrap();
            (a - b).norm() / b.norm()
        };
        let (e1, e2) = (s(32), s(64));
        assert!(e2 < e1 / 3.0, "{e1} {e2}");
    }

    #[test]
    fn lattice_exponent_converges_to_general_action() {
        let (j, m0) = (C64::new(0.7, 0.2), C64::new(-0.3, 0.5));
        let err = |n: usize| {
            let g = grid(n);
            let cfg = random_smooth_field(g, 2, 21);
            let h = g.spacing();
            let phi = crate::oracle::lattice_variables(&cfg.flavors[0].psi, h);
            let back = crate::oracle::rescale_fields(&phi, h);
            assert!(back
                .iter()
                .zip(&cfg.flavors[0].psi)
                .all(|(a, b)| (a[0] - b[0]).norm() + (a[1] - b[1]).norm() < 1e-12));
            let lat = crate::oracle::discrete_exponent(&phi, n, n, h, h, j, m0);
            let cont = general_action(&cfg, &vec![j; n], &ScalarField::constant(g, m0), DerivMode::Spectral).unwrap();
            (lat - cont).norm() / cont.norm()
        };
        let (e1, e2, e3) = (err(32), err(64), err(128));
        assert!(e2 < 0.6 * e1 && e3 < 0.6 * e2, "{e1} {e2} {e3}");
        assert!(e3 < 0.2, "{e3}");
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let cfg = FieldConfiguration::zeros(grid(8), &[0]);
        let m = ScalarField::constant(grid(16), ONE);
        assert!(matches!(
            dirac_action(&cfg, &m, DerivMode::Spectral),
            Err(Error::Dimension(_))
        ));
    }
}
