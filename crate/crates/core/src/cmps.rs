//! One-dimensional continuous MPS on `[0, l]`: the discretized
//! path-ordered exponential and the same state from coherent-state
//! path integrals.
//!
//! Step `j` (position `jδ`) carries one physical mode with occupation
//! `n_j ≤ n_max`; its tensor is `A^0 = 1 − iδK` and
//! `A^n = (√δ R)^n/√(n!)`. Amplitudes are
//! `⟨ω_L| A^{n_N} ··· A^{n_1} |ω_R⟩`.

use rayon::prelude::*;

use crate::error::{checked_pow, Budget, Error, Result};
use crate::fock::PhysicalState;
use crate::grassmann::{CoherentLayout, Grassmann};
use crate::linalg::{c, inner, max_abs, CMat, C64, ONE, ZERO};
use crate::model::CmpsParams;

#[derive(Debug, Clone, PartialEq)]
pub struct CmpsData {
    pub k: CMat,
    pub r: CMat,
    pub omega_l: Vec<C64>,
    pub omega_r: Vec<C64>,
    pub length: f64,
    pub n_steps: usize,
}

impl CmpsData {
    pub fn new(k: CMat, r: CMat, omega_l: Vec<C64>, omega_r: Vec<C64>, length: f64, n_steps: usize) -> Result<Self> {
        let d = k.nrows();
        if d == 0 || k.shape() != (d, d) || r.shape() != (d, d) {
            return Err(Error::Dimension("K and R must be square of equal size".into()));
        }
        if crate::linalg::max_abs_diff(&k, &k.adjoint()) > 1e-12 {
            return Err(Error::config("cmps.k", "K must be hermitian"));
        }
        if omega_l.len() != d || omega_r.len() != d {
            return Err(Error::Dimension("boundary vectors must have length D".into()));
        }
        if crate::linalg::vec_norm(&omega_l) == 0.0 || crate::linalg::vec_norm(&omega_r) == 0.0 {
            return Err(Error::config("cmps.omega", "boundary vectors must be nonzero"));
        }
        if n_steps == 0 || !(length >= 0.0) {
            return Err(Error::config("cmps", "need n_steps ≥ 1 and l ≥ 0"));
        }
        Ok(Self {
            k,
            r,
            omega_l,
            omega_r,
            length,
            n_steps,
        })
    }

    pub fn from_params(p: &CmpsParams) -> Result<Self> {
        Self::new(
            p.k.clone(),
            p.r.clone(),
            p.omega_l.clone(),
            p.omega_r.clone(),
            p.length,
            p.n_steps,
        )
    }

    /// `D = 1`, `K = k`, `R = r`, `ω = 1`.
    pub fn scalar(k: f64, r: C64, length: f64, n_steps: usize) -> Self {
        Self::new(
            CMat::from_element(1, 1, c(k, 0.0)),
            CMat::from_element(1, 1, r),
            vec![ONE],
            vec![ONE],
            length,
            n_steps,
        )
        .expect("scalar cMPS is valid")
    }

    pub fn d(&self) -> usize {
        self.k.nrows()
    }

    pub fn delta(&self) -> f64 {
        self.length / self.n_steps as f64
    }

    pub fn with_steps(&self, n_steps: usize) -> Self {
        Self {
            n_steps,
            ..self.clone()
        }
    }
}

/// `(A^0, A^1) = (1 − iδK, √δ R)`.
pub fn discretize_step(data: &CmpsData, delta: f64) -> Result<(CMat, CMat)> {
    if !(delta > 0.0) {
        return Err(Error::config("delta", "step must be positive"));
    }
    let t = step_tensors(data, delta, 1);
    Ok((t[0].clone(), t[1].clone()))
}

/// `A^0, …, A^{n_max}` of the first-order step.
pub fn step_tensors(data: &CmpsData, delta: f64, n_max: usize) -> Vec<CMat> {
    let d = data.d();
    let a0 = CMat::identity(d, d) - &data.k * c(0.0, delta);
    let sr = &data.r * c(delta.sqrt(), 0.0);
    let mut out = vec![a0];
    let mut power = CMat::identity(d, d);
    let mut fact = 1.0;
    for n in 1..=n_max {
        power = &power * &sr;
        fact *= n as f64;
        out.push(&power / c(fact.sqrt(), 0.0));
    }
    out
}

/// `⟨n| exp(−iδK⊗1 + √δR⊗a† − √δR†⊗a) |0⟩` on a physical mode truncated
/// at `n_max`.
pub fn exponential_step_tensors(data: &CmpsData, delta: f64, n_max: usize) -> Vec<CMat> {
    let d = data.d();
    let p = n_max + 1;
    let mut g = CMat::zeros(d * p, d * p);
    let sd = delta.sqrt();
    // index = n·D + i
    for n in 0..p {
        for i in 0..d {
            for j in 0..d {
                g[(n * d + i, n * d + j)] += -c(0.0, delta) * data.k[(i, j)];
                if n + 1 < p {
                    let amp = ((n + 1) as f64).sqrt() * sd;
                    // a†: |n⟩ → √(n+1)|n+1⟩
                    g[((n + 1) * d + i, n * d + j)] += data.r[(i, j)] * amp;
                    // −a: |n+1⟩ → −√(n+1)|n⟩
                    g[(n * d + i, (n + 1) * d + j)] -= data.r[(j, i)].conj() * amp;
                }
            }
        }
    }
    let e = g.exp();
    (0..p).map(|n| e.view((n * d, 0), (d, d)).into_owned()).collect()
}

/// `max‖A^0†A^0 − 1‖` at step δ; equals `δ²‖K²‖` for the first-order step.
pub fn unitarity_defect(data: &CmpsData, delta: f64) -> f64 {
    let a0 = &step_tensors(data, delta, 0)[0];
    let d = data.d();
    crate::linalg::spectral_norm(&(a0.adjoint() * a0 - CMat::identity(d, d)))
}

/// A physical state with its norm reported separately.
#[derive(Debug, Clone)]
pub struct CmpsState {
    pub state: PhysicalState,
    pub norm: f64,
}

fn decode(code: usize, base: usize, len: usize) -> Vec<u8> {
    let mut rest = code;
    (0..len)
        .map(|_| {
            let n = rest % base;
            rest /= base;
            n as u8
        })
        .collect()
}

fn mat_vec(m: &CMat, v: &[C64]) -> Vec<C64> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum())
        .collect()
}

/// Amplitudes of every occupation pattern of the `n_steps` physical modes.
pub fn path_ordered_state(data: &CmpsData, n_max: usize, budget: &Budget) -> Result<CmpsState> {
    path_ordered_with(data, &step_tensors(data, data.delta(), n_max), budget)
}

/// As [`path_ordered_state`] with externally supplied step tensors.
pub fn path_ordered_with(data: &CmpsData, tensors: &[CMat], budget: &Budget) -> Result<CmpsState> {
    let n_max = tensors.len() - 1;
    let base = n_max + 1;
    let n = data.n_steps;
    let dim = checked_pow(base as u128, n);
    budget.check(dim.saturating_mul(data.d() as u128), || {
        let mut k = 0;
        while checked_pow(base as u128, k + 1).saturating_mul(data.d() as u128) <= budget.max_amplitudes {
            k += 1;
        }
        format!("at n_max = {n_max} the budget admits n_steps ≤ {k}")
    })?;
    let amplitudes: Vec<C64> = (0..dim as usize)
        .into_par_iter()
        .map(|code| {
            let occ = decode(code, base, n);
            let mut v = data.omega_r.clone();
            for &o in &occ {
                v = mat_vec(&tensors[o as usize], &v);
            }
            inner(&data.omega_l, &v)
        })
        .collect();
    let state = PhysicalState {
        n_x: 1,
        n_t: n,
        n_max,
        amplitudes,
    };
    Ok(CmpsState {
        norm: state.norm(),
        state,
    })
}

/// `E = Σ_n A^n ⊗ conj(A^n)` and `E_N = Σ_n n A^n ⊗ conj(A^n)`.
pub fn transfer_matrices(tensors: &[CMat]) -> (CMat, CMat) {
    let d = tensors[0].nrows();
    let mut e = CMat::zeros(d * d, d * d);
    let mut en = CMat::zeros(d * d, d * d);
    for (n, a) in tensors.iter().enumerate() {
        let t = a.kronecker(&a.conjugate());
        en += &t * c(n as f64, 0.0);
        e += t;
    }
    (e, en)
}

fn doubled(v: &[C64]) -> CMat {
    let d = v.len();
    CMat::from_fn(d * d, 1, |i, _| v[i / d] * v[i % d].conj())
}

/// `⟨χ|χ⟩` via transfer matrices.
pub fn norm_squared(data: &CmpsData, n_max: usize) -> C64 {
    let tensors = step_tensors(data, data.delta(), n_max);
    let (e, _) = transfer_matrices(&tensors);
    let mut v = doubled(&data.omega_r);
    for _ in 0..data.n_steps {
        v = &e * v;
    }
    (doubled(&data.omega_l).adjoint() * v)[(0, 0)]
}

/// `⟨ψ†ψ⟩` at the middle of the interval: occupation of mode
/// `⌊n_steps/2⌋` divided by δ.
pub fn density_at_middle(data: &CmpsData, n_max: usize) -> C64 {
    let tensors = step_tensors(data, data.delta(), n_max);
    let (e, en) = transfer_matrices(&tensors);
    let mid = data.n_steps / 2;
    let mut num = doubled(&data.omega_r);
    let mut den = num.clone();
    for j in 0..data.n_steps {
        num = if j == mid { &en * num } else { &e * num };
        den = &e * den;
    }
    let l = doubled(&data.omega_l).adjoint();
    (&l * num)[(0, 0)] / (&l * den)[(0, 0)] / data.delta()
}

/// Neville extrapolation of `f(h)` to `h = 0`.
pub fn richardson(hs: &[f64], values: &[C64]) -> C64 {
    assert_eq!(hs.len(), values.len());
    let n = hs.len();
    let mut p = values.to_vec();
    for m in 1..n {
        for i in 0..n - m {
            p[i] = (p[i + 1] * hs[i] - p[i] * hs[i + m]) / (hs[i] - hs[i + m]);
        }
    }
    p[0]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    Density,
    Norm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservableRow {
    pub n_steps: usize,
    pub delta: f64,
    pub value: C64,
}

/// Observable at each step count, plus the Richardson limit.
pub fn observable_series(
    data: &CmpsData,
    observable: Observable,
    steps: &[usize],
    n_max: usize,
) -> (Vec<ObservableRow>, C64) {
    let rows: Vec<ObservableRow> = steps
        .iter()
        .map(|&n| {
            let d = data.with_steps(n);
            let value = match observable {
                Observable::Density => density_at_middle(&d, n_max),
                Observable::Norm => norm_squared(&d, n_max),
            };
            ObservableRow {
                n_steps: n,
                delta: d.delta(),
                value,
            }
        })
        .collect();
    let hs: Vec<f64> = rows.iter().map(|r| r.delta).collect();
    let vs: Vec<C64> = rows.iter().map(|r| r.value).collect();
    let limit = richardson(&hs, &vs);
    (rows, limit)
}

/// Auxiliary statistics of the 1D path integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuxKind {
    Fermionic,
    Bosonic,
}

/// How the weight of the continuum action is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignMode {
    /// `e^{iS}`: the K-term weighs each step by `1 − iδ φ*Kφ`.
    Oscillatory,
    /// `e^{−S}` with the same `S`: the K-term becomes `1 + δ φ*Kφ`.
    Euclidean,
}

/// One-body matrices whose coherent symbols make up step `n`: the step
/// symbol is `(δ_{n0} + φ'* M_n φ) e^{φ'*φ}`.
fn symbol_matrices(data: &CmpsData, delta: f64, n_max: usize, sign: SignMode) -> Vec<CMat> {
    let mut t = step_tensors(data, delta, n_max);
    let d = data.d();
    t[0] = match sign {
        SignMode::Oscillatory => &data.k * c(0.0, -delta),
        SignMode::Euclidean => &data.k * c(delta, 0.0),
    };
    let _ = d;
    t
}

/// Fermionic step symbol `⟨φ(s_out)| Â^n |φ(s_in)⟩` for the one-body
/// operator whose single-particle block is `A^n`.
pub fn coherent_step(layout: &CoherentLayout, m: &CMat, identity: bool, s_out: usize, s_in: usize) -> Grassmann {
    let mut g = layout.bilinear(s_out, s_in, m);
    if identity {
        g = &g + &Grassmann::one();
    }
    &g * &layout.raw_overlap(s_out, s_in)
}

/// Coherent symbol of a normal-ordered one-body operator restricted to the
/// single-particle sector: `(s + φ'* M φ) e^{φ'*φ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BosonicSymbol {
    pub scalar: C64,
    pub bilinear: CMat,
}

impl BosonicSymbol {
    /// `∫ d²φ/π^D e^{−|φ|²} ⟨φ'|A|φ⟩⟨φ|B|φ''⟩` projected on the
    /// single-particle sector. Substituting `φ → φ'' + η`, `φ* → φ'* + η*`
    /// with the Wick contraction `⟨η_j η*_k⟩ = δ_jk` gives
    /// `ab + φ'*(aB + bA + AB)φ''`; the product of two bilinears only
    /// contributes to two-particle matrix elements.
    pub fn compose(&self, b: &BosonicSymbol) -> BosonicSymbol {
        BosonicSymbol {
            scalar: self.scalar * b.scalar,
            bilinear: &b.bilinear * self.scalar + &self.bilinear * b.scalar + &self.bilinear * &b.bilinear,
        }
    }

    /// `⟨ω_L| op |ω_R⟩` read off the symbol: the coefficient of
    /// `φ'*_i φ_j` is `⟨i|op|j⟩ − s δ_ij`.
    pub fn matrix_element(&self, l: &[C64], r: &[C64]) -> C64 {
        let d = l.len();
        let mut acc = self.scalar * inner(l, r);
        for i in 0..d {
            for j in 0..d {
                acc += l[i].conj() * self.bilinear[(i, j)] * r[j];
            }
        }
        acc
    }
}

#[derive(Debug, Clone)]
pub struct PathIntegralState {
    pub state: PhysicalState,
    pub sign: SignMode,
    pub kind: AuxKind,
}

/// The cMPS state from coherent-state resolutions between the steps,
/// integrated exactly.
pub fn path_integral_state_1d(
    data: &CmpsData,
    n_max: usize,
    kind: AuxKind,
    sign: SignMode,
) -> Result<PathIntegralState> {
    let delta = data.delta();
    let mats = symbol_matrices(data, delta, n_max, sign);
    let n = data.n_steps;
    let base = n_max + 1;
    let dim = base.checked_pow(n as u32).ok_or_else(|| Error::Resource {
        needed: u128::MAX,
        allowed: usize::MAX as u128,
        suggestion: "reduce n_steps".into(),
    })?;
    let amplitudes = match kind {
        AuxKind::Fermionic => fermionic_amplitudes(data, &mats, base)?,
        AuxKind::Bosonic => (0..dim)
            .into_par_iter()
            .map(|code| {
                let occ = decode(code, base, n);
                let mut acc = BosonicSymbol {
                    scalar: ONE,
                    bilinear: CMat::zeros(data.d(), data.d()),
                };
                for &o in &occ {
                    let step = BosonicSymbol {
                        scalar: if o == 0 { ONE } else { ZERO },
                        bilinear: mats[o as usize].clone(),
                    };
                    acc = step.compose(&acc);
                }
                acc.matrix_element(&data.omega_l, &data.omega_r)
            })
            .collect(),
    };
    Ok(PathIntegralState {
        state: PhysicalState {
            n_x: 1,
            n_t: n,
            n_max,
            amplitudes,
        },
        sign,
        kind,
    })
}

fn fermionic_amplitudes(data: &CmpsData, mats: &[CMat], base: usize) -> Result<Vec<C64>> {
    let d = data.d();
    let n = data.n_steps;
    let layout = CoherentLayout::new(d, n + 1)?;
    let mut b0 = Grassmann::zero();
    for i in 0..d {
        b0 = &b0 + &layout.bra_fock(0, &[i]).scale(data.omega_r[i]);
    }
    let mut current = vec![b0];
    for s in 0..n {
        let steps: Vec<Grassmann> = (0..base)
            .map(|o| coherent_step(&layout, &mats[o], o == 0, s + 1, s))
            .collect();
        let w = layout.weight(s);
        let measure = layout.measure(s);
        let stride = current.len();
        current = (0..stride * base)
            .into_par_iter()
            .map(|code| {
                let (old, o) = (code % stride, code / stride);
                (&steps[o] * &(&w * &current[old])).integrate(&measure)
            })
            .collect();
    }
    let mut left = Grassmann::zero();
    for i in 0..d {
        left = &left + &layout.ket_fock(n, &[i]).scale(data.omega_l[i].conj());
    }
    let lw = &left * &layout.weight(n);
    let measure = layout.measure(n);
    Ok(current.iter().map(|b| (&lw * b).integrate(&measure).body()).collect())
}

/// Runs both sign modes and returns the one reproducing the path-ordered
/// state, with its worst deviation.
pub fn select_sign_mode(data: &CmpsData, n_max: usize, kind: AuxKind) -> Result<(SignMode, f64)> {
    let reference = path_ordered_state(data, n_max, &Budget::default())?.state;
    let mut best = None;
    for sign in [SignMode::Oscillatory, SignMode::Euclidean] {
        let pi = path_integral_state_1d(data, n_max, kind, sign)?.state;
        let dev = max_deviation(&reference, &pi);
        if best.is_none_or(|(_, d)| dev < d) {
            best = Some((sign, dev));
        }
    }
    Ok(best.expect("two modes"))
}

pub fn max_deviation(a: &PhysicalState, b: &PhysicalState) -> f64 {
    a.amplitudes
        .iter()
        .zip(&b.amplitudes)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Largest `‖A^n_exp − A^n‖` between the exponential and first-order steps.
pub fn step_mode_difference(data: &CmpsData, delta: f64, n_max: usize) -> f64 {
    let a = step_tensors(data, delta, n_max);
    let b = exponential_step_tensors(data, delta, n_max);
    a.iter().zip(&b).map(|(x, y)| max_abs(&(x - y))).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(d: usize, seed: u64, n_steps: usize) -> CmpsData {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = || c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let a = CMat::from_fn(d, d, |_, _| g());
        let k = (&a + a.adjoint()) * c(0.5, 0.0);
        let r = CMat::from_fn(d, d, |_, _| g());
        let l = (0..d).map(|_| g()).collect();
        let w = (0..d).map(|_| g()).collect();
        CmpsData::new(k, r, l, w, 1.0, n_steps).unwrap()
    }

    #[test]
    fn trivial_step() {
        let d = CmpsData::new(
            CMat::zeros(2, 2),
            CMat::zeros(2, 2),
            vec![ONE, ZERO],
            vec![ONE, ONE],
            1.0,
            3,
        )
        .unwrap();
        let (a0, a1) = discretize_step(&d, 0.1).unwrap();
        assert_eq!(a0, CMat::identity(2, 2));
        assert_eq!(a1, CMat::zeros(2, 2));
        assert!(discretize_step(&d, 0.0).is_err());
    }

    #[test]
    fn scalar_step() {
        let d = CmpsData::scalar(0.7, c(0.3, 0.0), 1.0, 1);
        let (a0, a1) = discretize_step(&d, 0.04).unwrap();
        assert!((a0[(0, 0)] - c(1.0, -0.028)).norm() < 1e-16);
        assert!((a1[(0, 0)] - c(0.06, 0.0)).norm() < 1e-16);
    }

    #[test]
    fn exponential_step_is_second_order_without_creation() {
        let mut d = random(2, 1, 4);
        d.r = CMat::zeros(2, 2);
        let e1 = step_mode_difference(&d, 1e-2, 2);
        let e2 = step_mode_difference(&d, 1e-3, 2);
        assert!((e1 / e2 - 100.0).abs() < 5.0, "{}", e1 / e2);
    }

    #[test]
    fn no_creation_gives_stepwise_propagator() {
        let mut d = random(2, 2, 5);
        d.r = CMat::zeros(2, 2);
        let s = path_ordered_state(&d, 1, &Budget::default()).unwrap();
        let a0 = &step_tensors(&d, d.delta(), 0)[0];
        let mut v = d.omega_r.clone();
        for _ in 0..5 {
            v = mat_vec(a0, &v);
        }
        assert!((s.state.amplitudes[0] - inner(&d.omega_l, &v)).norm() < 1e-14);
        assert!(s.state.amplitudes[1..].iter().all(|a| *a == ZERO));
    }

    #[test]
    fn one_step_scalar_amplitudes() {
        let d = CmpsData::scalar(0.0, c(0.8, 0.0), 0.25, 1);
        let s = path_ordered_state(&d, 1, &Budget::default()).unwrap();
        assert_eq!(s.state.amplitudes.len(), 2);
        assert!((s.state.amplitudes[0] - ONE).norm() < 1e-15);
        assert!((s.state.amplitudes[1] - c(0.4, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn budget_is_enforced() {
        let d = CmpsData::scalar(0.0, ONE, 1.0, 30);
        let r = path_ordered_state(&d, 2, &Budget { max_amplitudes: 1000 });
        assert!(matches!(r, Err(Error::Resource { .. })));
    }

    #[test]
    fn norm_from_transfer_matches_state() {
        let d = random(2, 3, 4);
        let s = path_ordered_state(&d, 2, &Budget::default()).unwrap();
        let n2 = norm_squared(&d, 2);
        assert!((n2.re - s.norm * s.norm).abs() < 1e-12 * n2.re.max(1.0) && n2.im.abs() < 1e-12);
    }

    #[test]
    fn density_extrapolates_to_r_squared() {
        let r = c(0.6, 0.3);
        let d = CmpsData::scalar(0.4, r, 1.0, 8);
        let (_, limit) = observable_series(&d, Observable::Density, &[8, 16, 32, 64], 2);
        assert!((limit.re - r.norm_sqr()).abs() < 1e-4, "{limit}");
    }

    #[test]
    fn fermionic_path_integral_matches() {
        for (dd, n, seed) in [(1, 2, 4), (1, 4, 5), (2, 3, 6), (2, 4, 7)] {
            let d = random(dd, seed, n);
            let a = path_ordered_state(&d, 2, &Budget::default()).unwrap().state;
            let b = path_integral_state_1d(&d, 2, AuxKind::Fermionic, SignMode::Oscillatory)
                .unwrap()
                .state;
            assert!(max_deviation(&a, &b) < 1e-12, "D={dd} n={n}");
        }
    }

    #[test]
    fn bosonic_operator_route_matches() {
        let d = random(2, 8, 4);
        let a = path_ordered_state(&d, 2, &Budget::default()).unwrap().state;
        let b = path_integral_state_1d(&d, 2, AuxKind::Bosonic, SignMode::Oscillatory)
            .unwrap()
            .state;
        assert!(max_deviation(&a, &b) < 1e-12);
    }

    #[test]
    fn oscillatory_sign_is_selected() {
        let d = random(2, 9, 3);
        for kind in [AuxKind::Fermionic, AuxKind::Bosonic] {
            let (mode, dev) = select_sign_mode(&d, 1, kind).unwrap();
            assert_eq!(mode, SignMode::Oscillatory);
            assert!(dev < 1e-12);
        }
    }

    #[test]
    fn vacuum_amplitude_without_couplings() {
        let d = CmpsData::new(
            CMat::zeros(2, 2),
            CMat::zeros(2, 2),
            vec![ONE, c(0.0, 1.0)],
            vec![c(0.5, 0.0), ONE],
            1.0,
            2,
        )
        .unwrap();
        let s = path_integral_state_1d(&d, 1, AuxKind::Fermionic, SignMode::Oscillatory)
            .unwrap()
            .state;
        assert!((s.amplitudes[0] - inner(&d.omega_l, &d.omega_r)).norm() < 1e-15);
    }

    #[test]
    fn payload_symbol_is_phi_bar_r_phi() {
        let d = CmpsData::scalar(0.0, c(0.9, -0.2), 1.0, 2);
        let delta = d.delta();
        let layout = CoherentLayout::new(1, 3).unwrap();
        let mats = symbol_matrices(&d, delta, 1, SignMode::Oscillatory);
        for s in 0..2 {
            let step = coherent_step(&layout, &mats[1], false, s + 1, s);
            let expect = &layout.bilinear(s + 1, s, &d.r).scale(c(delta.sqrt(), 0.0)) * &layout.raw_overlap(s + 1, s);
            assert!((&step - &expect).max_abs() < 1e-15);
        }
    }

    #[test]
    fn unitarity_defect_is_quadratic() {
        let d = random(2, 10, 1);
        let c1 = unitarity_defect(&d, 1e-2) / 1e-4;
        let c2 = unitarity_defect(&d, 1e-3) / 1e-6;
        assert!((c1 - c2).abs() < 1e-6 * c1.max(1.0));
        let k2 = crate::linalg::spectral_norm(&(&d.k * &d.k));
        assert!((c1 - k2).abs() < 1e-8 * k2.max(1.0));
    }

    #[test]
    fn norm_is_phase_invariant() {
        let d = random(2, 11, 4);
        let mut e = d.clone();
        e.r = &d.r * C64::from_polar(1.0, 0.83);
        let a = path_ordered_state(&d, 2, &Budget::default()).unwrap().norm;
        let b = path_ordered_state(&e, 2, &Budget::default()).unwrap().norm;
        assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn richardson_is_exact_on_polynomials() {
        let hs = [0.4, 0.2, 0.1, 0.05];
        let vals: Vec<C64> = hs.iter().map(|h| c(2.0 + h - 3.0 * h * h + h * h * h, 0.0)).collect();
        assert!((richardson(&hs, &vals) - c(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn exponential_tensors_match_dense_reference() {
        let d = random(1, 12, 1);
        let t = exponential_step_tensors(&d, 0.01, 3);
        let f = step_tensors(&d, 0.01, 3);
        for (a, b) in t.iter().zip(&f) {
            assert!(max_abs_diff(a, b) < 0.01);
        }
    }
}
