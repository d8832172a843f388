//! Exact Grassmann algebra over at most 64 generators, with Berezin
//! integration and fermionic coherent-state helpers.
//!
//! A monomial is a bitmask; bit `i` set means generator `θ_i` is present and
//! monomials are stored in ascending generator order.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64, ONE, ZERO};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Grassmann {
    terms: BTreeMap<u64, C64>,
}

/// Sign of `θ_A θ_B` relative to the ordered monomial `θ_{A∪B}`.
#[inline]
fn merge_sign(a: u64, b: u64) -> bool {
    let mut inversions = 0u32;
    let mut rest = b;
    while rest != 0 {
        let i = rest.trailing_zeros();
        rest &= rest - 1;
        // generators of `a` above `i` must hop over θ_i
        inversions += if i == 63 { 0 } else { (a >> (i + 1)).count_ones() };
    }
    inversions % 2 == 1
}

impl Grassmann {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn scalar(c: C64) -> Self {
        let mut g = Self::zero();
        if c != ZERO {
            g.terms.insert(0, c);
        }
        g
    }

    pub fn one() -> Self {
        Self::scalar(ONE)
    }

    pub fn generator(i: usize) -> Self {
        assert!(i < 64, "at most 64 generators");
        let mut g = Self::zero();
        g.terms.insert(1u64 << i, ONE);
        g
    }

    /// Ordered product `θ_{i1} θ_{i2} ···` of the listed generators.
    pub fn product_of(gens: &[usize]) -> Self {
        gens.iter().fold(Self::one(), |acc, &i| &acc * &Self::generator(i))
    }

    pub fn terms(&self) -> impl Iterator<Item = (u64, C64)> + '_ {
        self.terms.iter().map(|(&m, &c)| (m, c))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, mask: u64) -> C64 {
        self.terms.get(&mask).copied().unwrap_or(ZERO)
    }

    /// Body (the coefficient of the empty monomial).
    pub fn body(&self) -> C64 {
        self.coefficient(0)
    }

    pub fn is_even(&self) -> bool {
        self.terms.keys().all(|m| m.count_ones() % 2 == 0)
    }

    pub fn max_degree(&self) -> u32 {
        self.terms.keys().map(|m| m.count_ones()).max().unwrap_or(0)
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    fn add_term(&mut self, mask: u64, c: C64) {
        if c == ZERO {
            return;
        }
        let e = self.terms.entry(mask).or_insert(ZERO);
        *e += c;
        if *e == ZERO {
            self.terms.remove(&mask);
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = Self::zero();
        for (&m, &c) in &self.terms {
            out.add_term(m, c * s);
        }
        out
    }

    /// Drop coefficients below `tol` in magnitude.
    pub fn prune(mut self, tol: f64) -> Self {
        self.terms.retain(|_, c| c.norm() > tol);
        self
    }

    /// `exp(x)` for an even element: `e^{body}·Σ_k N^k/k!` with `N` nilpotent.
    pub fn exp(&self) -> Result<Self> {
        if !self.is_even() {
            return Err(Error::Unsupported("exponential of an odd Grassmann element".into()));
        }
        let body = self.body();
        let mut nil = self.clone();
        nil.terms.remove(&0);
        let mut sum = Self::one();
        let mut power = Self::one();
        let mut k = 1.0;
        loop {
            power = (&power * &nil).scale(C64::new(1.0 / k, 0.0));
            if power.is_empty() {
                break;
            }
            sum = &sum + &power;
            k += 1.0;
        }
        Ok(sum.scale(body.exp()))
    }

    /// `∫ dθ_i F`: move `θ_i` to the front of each monomial and strip it.
    pub fn integrate_one(&self, i: usize) -> Self {
        let bit = 1u64 << i;
        let mut out = Self::zero();
        for (&m, &c) in &self.terms {
            if m & bit == 0 {
                continue;
            }
            let before = (m & (bit - 1)).count_ones();
            let s = if before % 2 == 1 { -c } else { c };
            out.add_term(m & !bit, s);
        }
        out
    }

    /// `∫ dθ_{g1} dθ_{g2} ··· dθ_{gk} F`, innermost (`g_k`) first.
    pub fn integrate(&self, measure: &[usize]) -> Self {
        measure.iter().rev().fold(self.clone(), |acc, &g| acc.integrate_one(g))
    }

    /// Complex conjugation as an anti-linear involution: coefficients are
    /// conjugated, each generator is mapped through `conj_gen`, and the order
    /// of every monomial is reversed.
    pub fn conjugate(&self, conj_gen: impl Fn(usize) -> usize) -> Self {
        let mut out = Self::zero();
        for (&m, &c) in &self.terms {
            let mut gens: Vec<usize> = (0..64).filter(|&i| m & (1u64 << i) != 0).collect();
            gens.reverse();
            let mapped: Vec<usize> = gens.iter().map(|&i| conj_gen(i)).collect();
            let mono = Self::product_of(&mapped);
            out = &out + &mono.scale(c.conj());
        }
        out
    }
}

impl Add for &Grassmann {
    type Output = Grassmann;
    fn add(self, rhs: &Grassmann) -> Grassmann {
        let mut out = self.clone();
        for (&m, &c) in &rhs.terms {
            out.add_term(m, c);
        }
        out
    }
}

impl Sub for &Grassmann {
    type Output = Grassmann;
    fn sub(self, rhs: &Grassmann) -> Grassmann {
        self + &rhs.scale(-ONE)
    }
}

impl Neg for &Grassmann {
    type Output = Grassmann;
    fn neg(self) -> Grassmann {
        self.scale(-ONE)
    }
}

impl Mul for &Grassmann {
    type Output = Grassmann;
    fn mul(self, rhs: &Grassmann) -> Grassmann {
        let mut out = Grassmann::zero();
        for (&a, &ca) in &self.terms {
            for (&b, &cb) in &rhs.terms {
                if a & b != 0 {
                    continue;
                }
                let v = ca * cb;
                out.add_term(a | b, if merge_sign(a, b) { -v } else { v });
            }
        }
        out
    }
}

/// Generator layout for fermionic coherent labels: `n_slices` slices of
/// `modes` complex Grassmann variables, each a pair `(φ, φ*)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoherentLayout {
    pub modes: usize,
    pub slices: usize,
}

impl CoherentLayout {
    pub fn new(modes: usize, slices: usize) -> Result<Self> {
        if 2 * modes * slices > 64 {
            return Err(Error::Resource {
                needed: (modes * slices) as u128,
                allowed: 32,
                suggestion: "at most 32 Grassmann pairs fit the exact engine".into(),
            });
        }
        Ok(Self { modes, slices })
    }

    pub fn pairs(&self) -> usize {
        self.modes * self.slices
    }

    /// Generator index of `φ_i` on slice `s`.
    pub fn phi(&self, s: usize, i: usize) -> usize {
        2 * (s * self.modes + i)
    }

    /// Generator index of `φ*_i` on slice `s`.
    pub fn phi_bar(&self, s: usize, i: usize) -> usize {
        self.phi(s, i) + 1
    }

    /// Partner of a generator under conjugation.
    pub fn conj(g: usize) -> usize {
        g ^ 1
    }

    /// Pair measure `Π_i dφ*_i dφ_i` for one slice.
    pub fn measure(&self, s: usize) -> Vec<usize> {
        (0..self.modes)
            .flat_map(|i| [self.phi_bar(s, i), self.phi(s, i)])
            .collect()
    }

    /// `Σ_i φ*_i(s_out) φ_i(s_in)`.
    pub fn bilinear(&self, s_out: usize, s_in: usize, h: &CMat) -> Grassmann {
        let mut out = Grassmann::zero();
        for i in 0..self.modes {
            for j in 0..self.modes {
                let c = h[(i, j)];
                if c != ZERO {
                    out = &out + &Grassmann::product_of(&[self.phi_bar(s_out, i), self.phi(s_in, j)]).scale(c);
                }
            }
        }
        out
    }

    /// Unnormalized overlap `⟨φ(s_out)|φ(s_in)⟩ = exp(Σ φ*φ)` of the
    /// states `|φ⟩ = exp(−Σ φ_i c†_i)|0⟩`.
    pub fn raw_overlap(&self, s_out: usize, s_in: usize) -> Grassmann {
        let mut out = Grassmann::one();
        for i in 0..self.modes {
            let f = &Grassmann::one() + &Grassmann::product_of(&[self.phi_bar(s_out, i), self.phi(s_in, i)]);
            out = &out * &f;
        }
        out
    }

    /// Normalized overlap `exp(φ'*φ − ½φ'*φ' − ½φ*φ)`.
    pub fn overlap(&self, s_out: usize, s_in: usize) -> Grassmann {
        let exponent = {
            let id = CMat::identity(self.modes, self.modes);
            let cross = self.bilinear(s_out, s_in, &id);
            let a = self.bilinear(s_out, s_out, &id).scale(C64::new(-0.5, 0.0));
            let b = self.bilinear(s_in, s_in, &id).scale(C64::new(-0.5, 0.0));
            &(&cross + &a) + &b
        };
        exponent.exp().expect("bilinears are even")
    }

    /// Resolution weight `exp(−Σ φ*φ)` of one slice.
    pub fn weight(&self, s: usize) -> Grassmann {
        let mut out = Grassmann::one();
        for i in 0..self.modes {
            let f = &Grassmann::one() - &Grassmann::product_of(&[self.phi_bar(s, i), self.phi(s, i)]);
            out = &out * &f;
        }
        out
    }

    /// `⟨φ(s)|c†_{m1}···c†_{mk}|0⟩ = φ*_{m1}···φ*_{mk}`.
    pub fn bra_fock(&self, s: usize, modes: &[usize]) -> Grassmann {
        let gens: Vec<usize> = modes.iter().map(|&m| self.phi_bar(s, m)).collect();
        Grassmann::product_of(&gens)
    }

    /// `⟨0|c_{mk}···c_{m1}|φ(s)⟩ = φ_{mk}···φ_{m1}`.
    pub fn ket_fock(&self, s: usize, modes: &[usize]) -> Grassmann {
        let gens: Vec<usize> = modes.iter().rev().map(|&m| self.phi(s, m)).collect();
        Grassmann::product_of(&gens)
    }
}

/// `∫ Π dθ*_i dθ_i exp(−Σ θ*_i A_ij θ_j)`.
pub fn gaussian_integral(a: &CMat) -> Result<C64> {
    let n = a.nrows();
    let layout = CoherentLayout::new(n, 1)?;
    let exponent = layout.bilinear(0, 0, &(-a));
    let e = exponent.exp()?;
    Ok(e.integrate(&layout.measure(0)).body())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_element(rng: &mut ChaCha8Rng, n: usize, terms: usize) -> Grassmann {
        let mut g = Grassmann::zero();
        for _ in 0..terms {
            let mask = rng.gen::<u64>() & ((1u64 << n) - 1);
            let gens: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
            g = &g + &Grassmann::product_of(&gens).scale(c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        }
        g
    }

    #[test]
    fn berezin_rules() {
        let t = Grassmann::generator(0);
        assert_eq!(t.integrate_one(0).body(), ONE);
        assert!(Grassmann::one().integrate_one(0).is_empty());
    }

    #[test]
    fn pair_gaussian_gives_a() {
        let a = c(1.7, -0.4);
        let layout = CoherentLayout::new(1, 1).unwrap();
        let e = layout.bilinear(0, 0, &CMat::from_element(1, 1, -a)).exp().unwrap();
        assert!((e.integrate(&layout.measure(0)).body() - a).norm() < 1e-15);
    }

    #[test]
    fn anticommuting_generators() {
        let a = Grassmann::generator(2);
        let b = Grassmann::generator(5);
        assert_eq!(&a * &b, -&(&b * &a));
        assert!((&a * &a).is_empty());
    }

    #[test]
    fn gaussian_integrals_are_determinants() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=4 {
            let a = CMat::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let det = a.determinant();
            let g = gaussian_integral(&a).unwrap();
            assert!((g - det).norm() < 1e-12, "n={n}: {g} vs {det}");
        }
    }

    /// Brute-force check of the n=3 case by expanding the exponential as a
    /// plain product `Π_ij (1 − A_ij θ*_i θ_j)` (pair bilinears commute).
    #[test]
    fn gaussian_by_product_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 3;
        let a = CMat::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let layout = CoherentLayout::new(n, 1).unwrap();
        let mut e = Grassmann::one();
        for i in 0..n {
            for j in 0..n {
                let term = Grassmann::product_of(&[layout.phi_bar(0, i), layout.phi(0, j)]).scale(-a[(i, j)]);
                e = &e * &(&Grassmann::one() + &term);
            }
        }
        let v = e.integrate(&layout.measure(0)).body();
        assert!((v - a.determinant()).norm() < 1e-12);
    }

    #[test]
    fn overlap_of_zero_labels_is_one() {
        let layout = CoherentLayout::new(2, 2).unwrap();
        assert_eq!(layout.overlap(1, 0).body(), ONE);
    }

    #[test]
    fn exp_of_odd_is_rejected() {
        assert!(Grassmann::generator(0).exp().is_err());
    }

    proptest! {
        #[test]
        fn product_is_associative(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 6;
            let a = random_element(&mut rng, n, 5);
            let b = random_element(&mut rng, n, 5);
            let cc = random_element(&mut rng, n, 5);
            let l = &(&a * &b) * &cc;
            let r = &a * &(&b * &cc);
            prop_assert!((&l - &r).max_abs() < 1e-12);
        }

        #[test]
        fn odd_elements_anticommute(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 6;
            let odd = |rng: &mut ChaCha8Rng| {
                let mut g = Grassmann::zero();
                for _ in 0..4 {
                    let k = [1usize, 3][rng.gen_range(0..2)];
                    let mut gens: Vec<usize> = (0..n).collect();
                    for i in (1..n).rev() { gens.swap(i, rng.gen_range(0..=i)); }
                    gens.truncate(k);
                    g = &g + &Grassmann::product_of(&gens).scale(c(rng.gen_range(-1.0..1.0), 0.3));
                }
                g
            };
            let a = odd(&mut rng);
            let b = odd(&mut rng);
            prop_assert!((&(&a * &b) + &(&b * &a)).max_abs() < 1e-12);
        }
    }
}
