//! Dense truncated polynomials in four variables.

use std::collections::HashMap;
use std::fmt::Debug;
use std::ops::{AddAssign, Neg};
use std::sync::OnceLock;

use num_complex::Complex64;
use num_traits::Num;

pub const NVARS: usize = 4;
pub const MAX_DEGREE: usize = 6;

pub type Exponent = [u8; NVARS];

pub trait Coef: Copy + Debug + Num + Neg<Output = Self> + AddAssign + From<f64> {}
impl<T> Coef for T where T: Copy + Debug + Num + Neg<Output = T> + AddAssign + From<f64> {}

#[derive(Debug)]
struct MonomialTable {
    exps: Vec<Exponent>,
    index: HashMap<Exponent, usize>,
}

fn table(deg: usize) -> &'static MonomialTable {
    static TABLES: [OnceLock<MonomialTable>; MAX_DEGREE + 1] = [const { OnceLock::new() }; MAX_DEGREE + 1];
    assert!(deg <= MAX_DEGREE, "degree {deg} above {MAX_DEGREE}");
    TABLES[deg].get_or_init(|| {
        let mut exps = Vec::new();
        for total in 0..=deg {
            for i in (0..=total).rev() {
                for j in (0..=total - i).rev() {
                    for k in (0..=total - i - j).rev() {
                        let l = total - i - j - k;
                        exps.push([i as u8, j as u8, k as u8, l as u8]);
                    }
                }
            }
        }
        let index = exps.iter().enumerate().map(|(n, e)| (*e, n)).collect();
        MonomialTable { exps, index }
    })
}

fn total(e: &Exponent) -> usize {
    e.iter().map(|&v| v as usize).sum()
}

/// Number of monomials of total degree at most `deg`.
pub fn monomial_count(deg: usize) -> usize {
    table(deg).exps.len()
}

/// Polynomial truncated at total degree `deg`.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly<T: Coef> {
    deg: usize,
    coef: Vec<T>,
}

impl<T: Coef> Poly<T> {
    pub fn zero(deg: usize) -> Self {
        Self { deg, coef: vec![T::zero(); monomial_count(deg)] }
    }

    pub fn constant(deg: usize, c: T) -> Self {
        let mut p = Self::zero(deg);
        p.coef[0] = c;
        p
    }

    pub fn variable(deg: usize, var: usize) -> Self {
        let mut e = [0u8; NVARS];
        e[var] = 1;
        let mut p = Self::zero(deg);
        if deg >= 1 {
            p.set(e, T::one());
        }
        p
    }

    /// Linear form sum_j a_j w_j.
    pub fn linear(deg: usize, a: &[T; NVARS]) -> Self {
        let mut p = Self::zero(deg);
        for (var, &c) in a.iter().enumerate() {
            let mut e = [0u8; NVARS];
            e[var] = 1;
            p.set(e, c);
        }
        p
    }

    pub fn degree(&self) -> usize {
        self.deg
    }

    pub fn terms(&self) -> impl Iterator<Item = (Exponent, T)> + '_ {
        table(self.deg).exps.iter().copied().zip(self.coef.iter().copied())
    }

    pub fn coeff(&self, e: Exponent) -> T {
        table(self.deg).index.get(&e).map_or(T::zero(), |&n| self.coef[n])
    }

    pub fn set(&mut self, e: Exponent, c: T) {
        let n = *table(self.deg)
            .index
            .get(&e)
            .unwrap_or_else(|| panic!("exponent {e:?} above degree {}", self.deg));
        self.coef[n] = c;
    }

    /// Homogeneous component of the given degree.
    pub fn homogeneous(&self, d: usize) -> Self {
        let mut p = Self::zero(self.deg);
        for (n, e) in table(self.deg).exps.iter().enumerate() {
            if total(e) == d {
                p.coef[n] = self.coef[n];
            }
        }
        p
    }

    pub fn truncate(&self, deg: usize) -> Self {
        let mut p = Self::zero(deg);
        for (e, c) in self.terms() {
            if total(&e) <= deg {
                p.set(e, c);
            }
        }
        p
    }

    pub fn scale(&self, s: T) -> Self {
        Self { deg: self.deg, coef: self.coef.iter().map(|&c| c * s).collect() }
    }

    pub fn add(&self, o: &Self) -> Self {
        assert_eq!(self.deg, o.deg);
        Self {
            deg: self.deg,
            coef: self.coef.iter().zip(&o.coef).map(|(&a, &b)| a + b).collect(),
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(-T::one()))
    }

    pub fn mul(&self, o: &Self) -> Self {
        assert_eq!(self.deg, o.deg);
        let t = table(self.deg);
        let mut out = Self::zero(self.deg);
        for (a, &ca) in t.exps.iter().zip(&self.coef) {
            if ca == T::zero() {
                continue;
            }
            let da = total(a);
            for (b, &cb) in t.exps.iter().zip(&o.coef) {
                if cb == T::zero() || da + total(b) > self.deg {
                    continue;
                }
                let e = [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]];
                out.coef[t.index[&e]] += ca * cb;
            }
        }
        out
    }

    pub fn pow(&self, n: usize) -> Self {
        let mut out = Self::constant(self.deg, T::one());
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    pub fn derivative(&self, var: usize) -> Self {
        let mut out = Self::zero(self.deg);
        for (e, c) in self.terms() {
            if e[var] == 0 {
                continue;
            }
            let mut d = e;
            d[var] -= 1;
            out.set(d, c * T::from(e[var] as f64));
        }
        out
    }

    pub fn eval(&self, w: &[T; NVARS]) -> T {
        let mut acc = T::zero();
        for (e, c) in self.terms() {
            let mut m = c;
            for (v, &p) in e.iter().enumerate() {
                for _ in 0..p {
                    m = m * w[v];
                }
            }
            acc += m;
        }
        acc
    }

    /// Substitutes each variable by a polynomial of the same truncation degree.
    pub fn compose(&self, subs: &[Self; NVARS]) -> Self {
        let deg = self.deg;
        let powers: Vec<Vec<Self>> = subs
            .iter()
            .map(|s| {
                let mut v = vec![Self::constant(deg, T::one())];
                for k in 1..=deg {
                    v.push(v[k - 1].mul(s));
                }
                v
            })
            .collect();
        let mut out = Self::zero(deg);
        for (e, c) in self.terms() {
            if c == T::zero() {
                continue;
            }
            let mut m = Self::constant(deg, c);
            for v in 0..NVARS {
                if e[v] > 0 {
                    m = m.mul(&powers[v][e[v] as usize]);
                }
            }
            out = out.add(&m);
        }
        out
    }

    /// Substitutes w_i -> sum_j m[i][j] z_j.
    pub fn compose_linear(&self, m: &[[T; NVARS]; NVARS]) -> Self {
        let subs = std::array::from_fn(|i| Self::linear(self.deg, &m[i]));
        self.compose(&subs)
    }
}

impl Poly<f64> {
    pub fn to_complex(&self) -> Poly<Complex64> {
        Poly {
            deg: self.deg,
            coef: self.coef.iter().map(|&c| Complex64::new(c, 0.0)).collect(),
        }
    }
}

/// Taylor polynomial of m / |(x, y) - c| about (x0, y0) in the shifts (w0, w1).
pub fn inverse_distance_taylor(deg: usize, m: f64, x0: f64, y0: f64, cx: f64, cy: f64) -> Poly<f64> {
    let dx = x0 - cx;
    let dy = y0 - cy;
    let r2 = dx * dx + dy * dy;
    let w0 = Poly::<f64>::variable(deg, 0);
    let w1 = Poly::<f64>::variable(deg, 1);
    // r^2 = r0^2 (1 + u)
    let u = w0
        .scale(2.0 * dx)
        .add(&w1.scale(2.0 * dy))
        .add(&w0.mul(&w0))
        .add(&w1.mul(&w1))
        .scale(1.0 / r2);
    let mut out = Poly::zero(deg);
    let mut binom = 1.0;
    let mut upow = Poly::constant(deg, 1.0);
    for n in 0..=deg {
        out = out.add(&upow.scale(binom));
        binom *= (-0.5 - n as f64) / (n as f64 + 1.0);
        upow = upow.mul(&u);
    }
    out.scale(m / r2.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monomial_counts() {
        assert_eq!(monomial_count(3), 35);
        assert_eq!(monomial_count(4), 70);
    }

    #[test]
    fn product_and_evaluation_agree() {
        let mut a = Poly::<f64>::zero(3);
        a.set([1, 0, 0, 0], 2.0);
        a.set([0, 1, 1, 0], -1.5);
        a.set([0, 0, 0, 0], 0.5);
        let mut b = Poly::<f64>::zero(3);
        b.set([0, 0, 0, 1], 3.0);
        b.set([1, 0, 0, 0], 1.0);
        let w = [0.3, -0.2, 0.7, 0.1];
        let ab = a.mul(&b);
        // no truncation occurs: degrees 2 and 1
        assert!((ab.eval(&w) - a.eval(&w) * b.eval(&w)).abs() < 1e-15);
    }

    #[test]
    fn truncation_drops_high_degrees() {
        let x = Poly::<f64>::variable(3, 0);
        assert_eq!(x.pow(4), Poly::zero(3));
        assert_eq!(x.pow(3).coeff([3, 0, 0, 0]), 1.0);
    }

    #[test]
    fn derivative_of_monomial() {
        let mut p = Poly::<f64>::zero(4);
        p.set([2, 1, 0, 1], 5.0);
        let d = p.derivative(0);
        assert_eq!(d.coeff([1, 1, 0, 1]), 10.0);
    }

    #[test]
    fn composition_with_linear_map() {
        let mut p = Poly::<f64>::zero(3);
        p.set([1, 1, 0, 0], 1.0);
        p.set([0, 0, 2, 0], 2.0);
        let m = [
            [1.0, 2.0, 0.0, 0.0],
            [0.0, 1.0, -1.0, 0.0],
            [0.5, 0.0, 0.0, 1.0],
            [0.0, 0.0, 0.0, 1.0],
        ];
        let q = p.compose_linear(&m);
        let z = [0.1, -0.3, 0.2, 0.4];
        let w: [f64; 4] = std::array::from_fn(|i| (0..4).map(|j| m[i][j] * z[j]).sum());
        assert!((q.eval(&z) - p.eval(&w)).abs() < 1e-15);
    }

    #[test]
    fn inverse_distance_series_is_accurate() {
        let p = inverse_distance_taylor(4, 0.7, 0.4, 0.1, -0.5, 0.0);
        let h = 1e-3;
        let exact = 0.7 / ((0.4 + h + 0.5f64).powi(2) + (0.1 - h).powi(2)).sqrt();
        assert!((p.eval(&[h, -h, 0.0, 0.0]) - exact).abs() < 1e-14);
    }
}
