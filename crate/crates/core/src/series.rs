//! Formal power series machinery.
//!
//! One-variable exact series, truncated noncommutative series over a plain
//! alphabet, the defining quadratic system for the semicircular word series,
//! Hadamard products, and reconstruction of a bivariate annihilating
//! polynomial for a moment generating function.
//!
//! Reconstruction works from truncated moment data: the coefficients of a
//! candidate `P(z, g) = sum c_ij z^i g^j` with `P(z, G(z)) = O(z^{deg_z - K})`
//! satisfy an exact linear system, solved by exact elimination. Iterative
//! deepening on the total degree (ties broken toward smaller g-degree) keeps
//! the output minimal and deterministic, and an over-determined margin of
//! matching orders guards against spurious kernels.

use crate::moments::{MomentSequence, MomentsError, TraceOracle};
use crate::ncpoly::Family;
use crate::scalar::{GaussianRational, Rat};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SeriesError {
    #[error("constant term is zero; series is not invertible")]
    NonInvertibleConstantTerm,
    #[error("alphabet sizes differ ({0} vs {1})")]
    AlphabetMismatch(usize, usize),
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("operation requires a pure semicircular family")]
    NotPureSemicircular,
    #[error("needed moments to order {needed}, only {available} available")]
    InsufficientMoments { needed: usize, available: usize },
    #[error("no annihilator within degree budget; tried {tried:?}, skipped for insufficient moment order {skipped:?}")]
    DegreeBudgetExhausted {
        tried: Vec<(usize, usize)>,
        skipped: Vec<(usize, usize)>,
    },
    #[error("malformed annihilator text: {0}")]
    Parse(String),
    #[error(transparent)]
    Moments(#[from] MomentsError),
}

/// Truncated one-variable power series with exact coefficients `c_0..c_K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PowerSeries1 {
    coeffs: Vec<GaussianRational>,
}

impl PowerSeries1 {
    pub fn new(coeffs: Vec<GaussianRational>) -> Self {
        assert!(!coeffs.is_empty(), "series needs at least the constant term");
        PowerSeries1 { coeffs }
    }

    pub fn zero(order: usize) -> Self {
        PowerSeries1 {
            coeffs: vec![GaussianRational::zero(); order + 1],
        }
    }

    pub fn one(order: usize) -> Self {
        let mut s = Self::zero(order);
        s.coeffs[0] = GaussianRational::one();
        s
    }

    pub fn truncation_order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, k: usize) -> GaussianRational {
        self.coeffs.get(k).cloned().unwrap_or_else(GaussianRational::zero)
    }

    pub fn coeffs(&self) -> &[GaussianRational] {
        &self.coeffs
    }

    pub fn add(&self, rhs: &PowerSeries1) -> PowerSeries1 {
        let k = self.truncation_order().min(rhs.truncation_order());
        PowerSeries1::new(
            (0..=k)
                .map(|i| &self.coeffs[i] + &rhs.coeffs[i])
                .collect(),
        )
    }

    pub fn mul(&self, rhs: &PowerSeries1) -> PowerSeries1 {
        let k = self.truncation_order().min(rhs.truncation_order());
        let mut out = vec![GaussianRational::zero(); k + 1];
        for i in 0..=k {
            if self.coeffs[i].is_zero() {
                continue;
            }
            for j in 0..=(k - i) {
                let p = &self.coeffs[i] * &rhs.coeffs[j];
                out[i + j] += &p;
            }
        }
        PowerSeries1::new(out)
    }

    /// Multiplicative inverse up to the truncation order.
    pub fn inverse(&self) -> Result<PowerSeries1, SeriesError> {
        let c0 = &self.coeffs[0];
        let c0_inv = c0.inv().ok_or(SeriesError::NonInvertibleConstantTerm)?;
        let k = self.truncation_order();
        let mut out = vec![GaussianRational::zero(); k + 1];
        out[0] = c0_inv.clone();
        for n in 1..=k {
            let mut acc = GaussianRational::zero();
            for i in 1..=n {
                acc += &(&self.coeffs[i] * &out[n - i]);
            }
            out[n] = &(&acc * &c0_inv) * &GaussianRational::from_int(-1);
        }
        Ok(PowerSeries1::new(out))
    }
}

/// The series `sum_k m_k z^{k+1}`; its evaluation at `1/z` is the Cauchy
/// transform expansion.
pub fn moment_gf(m: &MomentSequence) -> PowerSeries1 {
    let mut coeffs = vec![GaussianRational::zero(); m.values.len() + 1];
    for (k, v) in m.values.iter().enumerate() {
        coeffs[k + 1] = GaussianRational::from_rat(v.clone());
    }
    PowerSeries1::new(coeffs)
}

/// Truncated series in noncommuting letters `0..alphabet`: a complete
/// coefficient table for every word up to `max_len`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NcSeries {
    alphabet: usize,
    max_len: usize,
    coeffs: BTreeMap<Vec<u8>, Rat>,
}

impl NcSeries {
    /// Build from a coefficient function, evaluated on every word.
    pub fn from_fn(
        alphabet: usize,
        max_len: usize,
        mut f: impl FnMut(&[u8]) -> Rat,
    ) -> Self {
        let mut coeffs = BTreeMap::new();
        let mut stack: Vec<Vec<u8>> = vec![Vec::new()];
        while let Some(w) = stack.pop() {
            if w.len() < max_len {
                for l in 0..alphabet {
                    let mut v = w.clone();
                    v.push(l as u8);
                    stack.push(v);
                }
            }
            let c = f(&w);
            coeffs.insert(w, c);
        }
        NcSeries {
            alphabet,
            max_len,
            coeffs,
        }
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn coeff(&self, w: &[u8]) -> Rat {
        self.coeffs.get(w).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn set_coeff(&mut self, w: &[u8], v: Rat) {
        assert!(w.len() <= self.max_len, "word longer than truncation");
        self.coeffs.insert(w.to_vec(), v);
    }

    pub fn words(&self) -> impl Iterator<Item = (&Vec<u8>, &Rat)> {
        self.coeffs.iter()
    }

    /// Coefficient-wise product.
    pub fn hadamard(&self, rhs: &NcSeries) -> Result<NcSeries, SeriesError> {
        if self.alphabet != rhs.alphabet {
            return Err(SeriesError::AlphabetMismatch(self.alphabet, rhs.alphabet));
        }
        if self.max_len != rhs.max_len {
            return Err(SeriesError::LengthMismatch(self.max_len, rhs.max_len));
        }
        let coeffs = self
            .coeffs
            .iter()
            .map(|(w, c)| (w.clone(), c * rhs.coeffs.get(w).unwrap()))
            .collect();
        Ok(NcSeries {
            alphabet: self.alphabet,
            max_len: self.max_len,
            coeffs,
        })
    }

    /// Characteristic series of all words: the Hadamard unit.
    pub fn all_words(alphabet: usize, max_len: usize) -> NcSeries {
        NcSeries::from_fn(alphabet, max_len, |_| Rat::one())
    }
}

/// The word series whose coefficient at `w` is the trace of the
/// corresponding product of free unit-variance semicircular elements,
/// complete to length `max_len`.
pub fn p_semi(max_len: usize, family: &Family) -> Result<NcSeries, SeriesError> {
    if !family.is_pure_semicircular() {
        return Err(SeriesError::NotPureSemicircular);
    }
    let oracle = TraceOracle::new(family.clone());
    let n = family.len();
    let mut err = None;
    let series = NcSeries::from_fn(n, max_len, |w| {
        let word = crate::ncpoly::Word(
            w.iter()
                .map(|&l| family.letter(l as usize, false).unwrap())
                .collect(),
        );
        match oracle.trace_word(&word) {
            Ok(v) => v.re,
            Err(e) => {
                err = Some(e);
                Rat::zero()
            }
        }
    });
    match err {
        Some(e) => Err(SeriesError::Moments(e)),
        None => Ok(series),
    }
}

/// Check that `P - e` solves the quadratic fixed-point system
/// `z = sum_j (x_j z x_j z + x_j^2 z + x_j z x_j + x_j^2)`
/// at every word up to the truncation length.
///
/// The right-hand side at a word of length `k` only involves coefficients up
/// to length `k - 2`, so the whole table is checkable; verifying every
/// length is what makes single-coefficient perturbations detectable.
pub fn verify_proper_system(p: &NcSeries) -> bool {
    if p.coeff(&[]) != Rat::one() {
        return false;
    }
    let z = |w: &[u8]| -> Rat {
        if w.is_empty() {
            Rat::zero()
        } else {
            p.coeff(w)
        }
    };
    for (w, _) in p.words() {
        if w.is_empty() {
            continue;
        }
        let mut rhs = Rat::zero();
        let first = w[0];
        let rest = &w[1..];
        // x_j z x_j z
        for (pos, &l) in rest.iter().enumerate() {
            if l == first {
                rhs += z(&rest[..pos]) * z(&rest[pos + 1..]);
            }
        }
        // x_j^2 z and x_j^2
        if w.len() >= 2 && w[1] == first {
            if w.len() == 2 {
                rhs += Rat::one();
            }
            rhs += z(&w[2..]);
        }
        // x_j z x_j
        if w.len() >= 2 && *w.last().unwrap() == first {
            rhs += z(&w[1..w.len() - 1]);
        }
        if z(w) != rhs {
            return false;
        }
    }
    true
}

/// Bivariate integer polynomial `P(z, g) = sum c[i][j] z^i g^j` annihilating
/// a Cauchy transform; content-normalized with positive leading sign in the
/// (g, z)-graded order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnihilatorPoly {
    /// `coeffs[i][j]` multiplies `z^i g^j`.
    coeffs: Vec<Vec<BigInt>>,
    deg_z: usize,
    deg_g: usize,
}

impl AnnihilatorPoly {
    pub fn from_coeffs(coeffs: Vec<Vec<BigInt>>) -> Self {
        let deg_g = coeffs.iter().map(|r| r.len()).max().unwrap_or(1).saturating_sub(1);
        let mut padded = coeffs;
        for r in &mut padded {
            r.resize(deg_g + 1, BigInt::zero());
        }
        let mut p = AnnihilatorPoly {
            deg_z: padded.len().saturating_sub(1),
            deg_g,
            coeffs: padded,
        };
        p.trim();
        p.normalize();
        p
    }

    pub fn deg_z(&self) -> usize {
        self.deg_z
    }

    pub fn deg_g(&self) -> usize {
        self.deg_g
    }

    pub fn coeff(&self, i: usize, j: usize) -> BigInt {
        self.coeffs
            .get(i)
            .and_then(|r| r.get(j))
            .cloned()
            .unwrap_or_else(BigInt::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs
            .iter()
            .all(|r| r.iter().all(|c| c.is_zero()))
    }

    /// Coefficients of `g^j` as a polynomial in `z` (low degree first).
    pub fn g_slice(&self, j: usize) -> Vec<BigInt> {
        (0..=self.deg_z).map(|i| self.coeff(i, j)).collect()
    }

    fn trim(&mut self) {
        while self.deg_g > 0
            && (0..=self.deg_z).all(|i| self.coeff(i, self.deg_g).is_zero())
        {
            for r in &mut self.coeffs {
                r.truncate(self.deg_g);
            }
            self.deg_g -= 1;
        }
        while self.deg_z > 0 && self.coeffs[self.deg_z].iter().all(|c| c.is_zero()) {
            self.coeffs.pop();
            self.deg_z -= 1;
        }
    }

    fn normalize(&mut self) {
        let mut content = BigInt::zero();
        for r in &self.coeffs {
            for c in r {
                content = content.gcd(c);
            }
        }
        if content.is_zero() {
            return;
        }
        // leading term in (g, z) order gets a positive sign
        let mut lead_sign = BigInt::one();
        'outer: for j in (0..=self.deg_g).rev() {
            for i in (0..=self.deg_z).rev() {
                let c = self.coeff(i, j);
                if !c.is_zero() {
                    lead_sign = if c.is_negative() {
                        -BigInt::one()
                    } else {
                        BigInt::one()
                    };
                    break 'outer;
                }
            }
        }
        let div = content * lead_sign;
        for r in &mut self.coeffs {
            for c in r.iter_mut() {
                *c = &*c / &div;
            }
        }
    }

    /// Text format: one line `deg_z deg_g`, then one line per z-degree with
    /// the integer coefficients of `g^0..g^deg_g`. Round-trips exactly.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.deg_z, self.deg_g);
        for i in 0..=self.deg_z {
            let row: Vec<String> = (0..=self.deg_g)
                .map(|j| self.coeff(i, j).to_string())
                .collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, SeriesError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| SeriesError::Parse("empty input".into()))?;
        let mut it = header.split_whitespace();
        let dz: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| SeriesError::Parse("bad deg_z".into()))?;
        let dg: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| SeriesError::Parse("bad deg_g".into()))?;
        let mut coeffs = Vec::with_capacity(dz + 1);
        for i in 0..=dz {
            let line = lines
                .next()
                .ok_or_else(|| SeriesError::Parse(format!("missing row {i}")))?;
            let row: Result<Vec<BigInt>, _> = line
                .split_whitespace()
                .map(|t| t.parse::<BigInt>())
                .collect();
            let row = row.map_err(|e| SeriesError::Parse(format!("row {i}: {e}")))?;
            if row.len() != dg + 1 {
                return Err(SeriesError::Parse(format!(
                    "row {i} has {} entries, expected {}",
                    row.len(),
                    dg + 1
                )));
            }
            coeffs.push(row);
        }
        Ok(AnnihilatorPoly {
            coeffs,
            deg_z: dz,
            deg_g: dg,
        })
    }
}

impl fmt::Display for AnnihilatorPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for j in (0..=self.deg_g).rev() {
            for i in (0..=self.deg_z).rev() {
                let c = self.coeff(i, j);
                if c.is_zero() {
                    continue;
                }
                if !first {
                    write!(f, " {} ", if c.is_negative() { "-" } else { "+" })?;
                } else if c.is_negative() {
                    write!(f, "-")?;
                }
                first = false;
                let a = c.abs();
                let unit = i == 0 && j == 0;
                if !a.is_one() || unit {
                    write!(f, "{a}")?;
                }
                if i > 0 {
                    write!(f, "z{}", if i > 1 { format!("^{i}") } else { String::new() })?;
                }
                if j > 0 {
                    write!(f, "g{}", if j > 1 { format!("^{j}") } else { String::new() })?;
                }
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

/// Powers of the Cauchy-transform expansion: `gpow[j][t]` is the coefficient
/// of `z^{-t}` in `G(z)^j`, valid for `t <= K`.
fn g_powers(m: &MomentSequence, max_j: usize) -> Vec<Vec<Rat>> {
    let k = m.order();
    let mut g = vec![Rat::zero(); k + 1];
    for t in 1..=k {
        g[t] = m.values[t - 1].clone();
    }
    let mut out: Vec<Vec<Rat>> = Vec::with_capacity(max_j + 1);
    let mut unit = vec![Rat::zero(); k + 1];
    unit[0] = Rat::one();
    out.push(unit);
    for j in 1..=max_j {
        let prev = &out[j - 1];
        let mut next = vec![Rat::zero(); k + 1];
        for a in 0..=k {
            if prev[a].is_zero() {
                continue;
            }
            for b in 1..=(k - a) {
                if !g[b].is_zero() {
                    next[a + b] += &prev[a] * &g[b];
                }
            }
        }
        out.push(next);
    }
    out
}

/// Default over-determination margin for annihilator reconstruction.
pub const DEFAULT_MARGIN: usize = 10;

/// Reconstruct a minimal annihilating polynomial for the Cauchy transform
/// determined by `m`, searching total degree levels up to
/// `(max_deg_z, max_deg_g)`.
///
/// A degree level `(a, b)` is attempted only when the available moment order
/// covers `(a+1)(b+1) + margin` matching conditions; the error distinguishes
/// levels skipped for lack of moments from levels genuinely tried.
pub fn find_annihilator(
    m: &MomentSequence,
    max_deg_z: usize,
    max_deg_g: usize,
    margin: usize,
) -> Result<AnnihilatorPoly, SeriesError> {
    let k = m.order();
    let gpow = g_powers(m, max_deg_g);
    let mut tried = Vec::new();
    let mut skipped = Vec::new();
    for total in 1..=(max_deg_z + max_deg_g) {
        for dg in 1..=total.min(max_deg_g) {
            let dz = total - dg;
            if dz > max_deg_z {
                continue;
            }
            if (dz + 1) * (dg + 1) + margin > k {
                skipped.push((dz, dg));
                continue;
            }
            tried.push((dz, dg));
            if let Some(poly) = solve_level(&gpow, dz, dg, k) {
                return Ok(poly);
            }
        }
    }
    Err(SeriesError::DegreeBudgetExhausted { tried, skipped })
}

fn solve_level(gpow: &[Vec<Rat>], dz: usize, dg: usize, k: usize) -> Option<AnnihilatorPoly> {
    // columns ordered by (j, i); rows are the z^s coefficients for
    // s = dz down to dz - K
    let ncols = (dz + 1) * (dg + 1);
    let mut rows: Vec<Vec<Rat>> = Vec::with_capacity(k + 1);
    for row_idx in 0..=k {
        let mut row = Vec::with_capacity(ncols);
        for j in 0..=dg {
            for i in 0..=dz {
                // s = dz - row_idx; coefficient of z^s in z^i g^j
                let t = i as i64 - (dz as i64 - row_idx as i64);
                let v = if t < 0 || t as usize > k {
                    Rat::zero()
                } else {
                    gpow[j][t as usize].clone()
                };
                row.push(v);
            }
        }
        rows.push(row);
    }
    let kernel = rational_kernel(rows, ncols);
    let vec = kernel.into_iter().next()?;
    let mut coeffs = vec![vec![BigInt::zero(); dg + 1]; dz + 1];
    for (col, v) in vec.into_iter().enumerate() {
        let j = col / (dz + 1);
        let i = col % (dz + 1);
        coeffs[i][j] = v;
    }
    let poly = AnnihilatorPoly::from_coeffs(coeffs);
    if poly.is_zero() {
        None
    } else {
        Some(poly)
    }
}

/// True when `P(z, G)` vanishes through order `order` in the `1/z`
/// expansion.
pub fn verify_annihilator(
    p: &AnnihilatorPoly,
    m: &MomentSequence,
    order: usize,
) -> Result<bool, SeriesError> {
    if m.order() < order {
        return Err(SeriesError::InsufficientMoments {
            needed: order,
            available: m.order(),
        });
    }
    let gpow = g_powers(m, p.deg_g());
    for row_idx in 0..=order {
        let mut acc = Rat::zero();
        for j in 0..=p.deg_g() {
            for i in 0..=p.deg_z() {
                let t = i as i64 - (p.deg_z() as i64 - row_idx as i64);
                if t < 0 || t as usize > m.order() {
                    continue;
                }
                let c = p.coeff(i, j);
                if !c.is_zero() {
                    acc += Rat::from_integer(c) * &gpow[j][t as usize];
                }
            }
        }
        if !acc.is_zero() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Kernel basis of a rational matrix, as primitive integer vectors.
///
/// Deterministic: full Gauss-Jordan elimination with first-nonzero pivoting;
/// one basis vector per free column, ordered by column index.
fn rational_kernel(mut rows: Vec<Vec<Rat>>, ncols: usize) -> Vec<Vec<BigInt>> {
    let nrows = rows.len();
    let mut pivot_of_col: Vec<Option<usize>> = vec![None; ncols];
    let mut rank = 0usize;
    for col in 0..ncols {
        let mut pivot = None;
        for r in rank..nrows {
            if !rows[r][col].is_zero() {
                pivot = Some(r);
                break;
            }
        }
        let Some(p) = pivot else { continue };
        rows.swap(rank, p);
        let inv = {
            let pv = &rows[rank][col];
            Rat::one() / pv
        };
        for c in col..ncols {
            rows[rank][c] = &rows[rank][c] * &inv;
        }
        for r in 0..nrows {
            if r != rank && !rows[r][col].is_zero() {
                let factor = rows[r][col].clone();
                for c in col..ncols {
                    let sub = &rows[rank][c] * &factor;
                    rows[r][c] -= sub;
                }
            }
        }
        pivot_of_col[col] = Some(rank);
        rank += 1;
    }
    let mut basis = Vec::new();
    for free in 0..ncols {
        if pivot_of_col[free].is_some() {
            continue;
        }
        let mut v = vec![Rat::zero(); ncols];
        v[free] = Rat::one();
        for col in 0..ncols {
            if let Some(r) = pivot_of_col[col] {
                v[col] = -rows[r][free].clone();
            }
        }
        basis.push(primitive_integer_vector(&v));
    }
    basis
}

fn primitive_integer_vector(v: &[Rat]) -> Vec<BigInt> {
    let mut lcm = BigInt::one();
    for x in v {
        lcm = lcm.lcm(x.denom());
    }
    let mut ints: Vec<BigInt> = v.iter().map(|x| x.numer() * (&lcm / x.denom())).collect();
    let mut gcd = BigInt::zero();
    for x in &ints {
        gcd = gcd.gcd(x);
    }
    if !gcd.is_zero() && !gcd.is_one() {
        for x in &mut ints {
            *x = &*x / &gcd;
        }
    }
    ints
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::moment_sequence;
    use crate::ncpoly::{Family, MatrixPolynomial, NcPolynomial};

    fn rat(n: i64) -> Rat {
        Rat::from_integer(n.into())
    }

    fn g(n: i64) -> GaussianRational {
        GaussianRational::from_int(n)
    }

    fn semicircle_moments(order: usize) -> MomentSequence {
        let f = Family::standard_semicircular(1);
        let o = TraceOracle::new(f.clone());
        let mut a = MatrixPolynomial::zero(f.clone(), 1, 1);
        a.set(0, 0, NcPolynomial::generator(&f, 0).unwrap());
        moment_sequence(&o, &a, order).unwrap()
    }

    fn point_mass_at_zero(order: usize) -> MomentSequence {
        let mut values = vec![Rat::zero(); order + 1];
        values[0] = Rat::one();
        MomentSequence {
            values,
            element_norm_bound: Rat::one(),
        }
    }

    #[test]
    fn geometric_series_inverse() {
        // (1 - z)^{-1} = 1 + z + z^2 + ...
        let mut coeffs = vec![g(1), g(-1)];
        coeffs.resize(11, GaussianRational::zero());
        let one_minus_z = PowerSeries1::new(coeffs);
        let inv = one_minus_z.inverse().unwrap();
        for k in 0..=10 {
            assert_eq!(inv.coeff(k), g(1));
        }
        assert_eq!(one_minus_z.mul(&inv), PowerSeries1::one(10));
    }

    #[test]
    fn inverse_requires_unit() {
        let s = PowerSeries1::new(vec![g(0), g(1)]);
        assert!(matches!(
            s.inverse(),
            Err(SeriesError::NonInvertibleConstantTerm)
        ));
    }

    #[test]
    fn p_semi_coefficients() {
        let f = Family::standard_semicircular(2);
        let p = p_semi(6, &f).unwrap();
        assert_eq!(p.coeff(&[]), rat(1));
        assert_eq!(p.coeff(&[0, 0]), rat(1));
        assert_eq!(p.coeff(&[0, 1, 0, 1]), rat(0));
        assert_eq!(p.coeff(&[0, 0, 1, 1]), rat(1));
        assert_eq!(p.coeff(&[0]), rat(0));
    }

    #[test]
    fn proper_system_holds_for_p_semi() {
        for n in 1..=2 {
            let f = Family::standard_semicircular(n);
            let p = p_semi(8, &f).unwrap();
            assert!(verify_proper_system(&p), "system fails for n={n}");
        }
    }

    #[test]
    fn proper_system_detects_any_perturbation() {
        let f = Family::standard_semicircular(1);
        let p = p_semi(6, &f).unwrap();
        let words: Vec<Vec<u8>> = p.words().map(|(w, _)| w.clone()).collect();
        for w in words {
            let mut q = p.clone();
            q.set_coeff(&w, p.coeff(&w) + rat(1));
            assert!(!verify_proper_system(&q), "perturbation at {w:?} undetected");
        }
    }

    #[test]
    fn hadamard_unit_zero_and_square() {
        let f = Family::standard_semicircular(1);
        let p = p_semi(4, &f).unwrap();
        let unit = NcSeries::all_words(1, 4);
        assert_eq!(p.hadamard(&unit).unwrap(), p);
        let zero = NcSeries::from_fn(1, 4, |_| Rat::zero());
        assert_eq!(p.hadamard(&zero).unwrap(), zero);
        let sq = p.hadamard(&p).unwrap();
        assert_eq!(sq.coeff(&[0, 0, 0, 0]), rat(4));
        let other = NcSeries::all_words(2, 4);
        assert!(matches!(
            p.hadamard(&other),
            Err(SeriesError::AlphabetMismatch(1, 2))
        ));
    }

    #[test]
    fn hadamard_with_regular_language_filters_coefficients() {
        // words avoiding the letter-repeat pattern "00"
        let f = Family::standard_semicircular(2);
        let p = p_semi(5, &f).unwrap();
        let lang = NcSeries::from_fn(2, 5, |w| {
            if w.windows(2).any(|p| p == [0, 0]) {
                Rat::zero()
            } else {
                Rat::one()
            }
        });
        let filtered = p.hadamard(&lang).unwrap();
        for (w, c) in filtered.words() {
            if w.windows(2).any(|p| p == [0, 0]) {
                assert!(c.is_zero());
            } else {
                assert_eq!(*c, p.coeff(w));
            }
        }
    }

    #[test]
    fn moment_gf_examples() {
        let m = point_mass_at_zero(6);
        let s = moment_gf(&m);
        assert_eq!(s.coeff(0), g(0));
        assert_eq!(s.coeff(1), g(1));
        assert_eq!(s.coeff(2), g(0));

        let sc = semicircle_moments(7);
        let s = moment_gf(&sc);
        // z + z^3 + 2 z^5 + 5 z^7
        assert_eq!(s.coeff(1), g(1));
        assert_eq!(s.coeff(3), g(1));
        assert_eq!(s.coeff(5), g(2));
        assert_eq!(s.coeff(7), g(5));

        let ones = MomentSequence {
            values: vec![Rat::one(); 6],
            element_norm_bound: Rat::one(),
        };
        let s = moment_gf(&ones);
        for k in 1..=6 {
            assert_eq!(s.coeff(k), g(1));
        }
    }

    #[test]
    fn semicircle_annihilator() {
        let m = semicircle_moments(40);
        let p = find_annihilator(&m, 8, 8, DEFAULT_MARGIN).unwrap();
        // g^2 - z g + 1
        assert_eq!(p.deg_z(), 1);
        assert_eq!(p.deg_g(), 2);
        assert_eq!(p.coeff(0, 2), BigInt::from(1));
        assert_eq!(p.coeff(1, 1), BigInt::from(-1));
        assert_eq!(p.coeff(0, 0), BigInt::from(1));
        assert_eq!(p.coeff(1, 0), BigInt::from(0));
        assert_eq!(p.to_string(), "g^2 - zg + 1");
    }

    #[test]
    fn point_mass_annihilator() {
        let m = point_mass_at_zero(30);
        let p = find_annihilator(&m, 8, 8, DEFAULT_MARGIN).unwrap();
        // z g - 1
        assert_eq!(p.deg_z(), 1);
        assert_eq!(p.deg_g(), 1);
        assert_eq!(p.coeff(1, 1), BigInt::from(1));
        assert_eq!(p.coeff(0, 0), BigInt::from(-1));
    }

    #[test]
    fn doubled_variance_annihilator() {
        let f = Family::standard_semicircular(2);
        let o = TraceOracle::new(f.clone());
        let p01 = NcPolynomial::generator(&f, 0)
            .unwrap()
            .add(&NcPolynomial::generator(&f, 1).unwrap())
            .unwrap();
        let mut a = MatrixPolynomial::zero(f.clone(), 1, 1);
        a.set(0, 0, p01);
        let m = moment_sequence(&o, &a, 40).unwrap();
        let p = find_annihilator(&m, 8, 8, DEFAULT_MARGIN).unwrap();
        // 2 g^2 - z g + 1
        assert_eq!(p.coeff(0, 2), BigInt::from(2));
        assert_eq!(p.coeff(1, 1), BigInt::from(-1));
        assert_eq!(p.coeff(0, 0), BigInt::from(1));
    }

    #[test]
    fn annihilator_verifies_and_rejects() {
        let m = semicircle_moments(60);
        let p = find_annihilator(&m, 8, 8, DEFAULT_MARGIN).unwrap();
        assert!(verify_annihilator(&p, &m, 60).unwrap());
        let pm = point_mass_at_zero(60);
        assert!(!verify_annihilator(&p, &pm, 60).unwrap());
        // perturbed coefficient
        let mut coeffs = vec![vec![BigInt::zero(); 3]; 2];
        coeffs[0][2] = BigInt::from(1);
        coeffs[1][1] = BigInt::from(-1);
        coeffs[0][0] = BigInt::from(2); // should be 1
        let bad = AnnihilatorPoly::from_coeffs(coeffs);
        assert!(!verify_annihilator(&bad, &m, 60).unwrap());
        assert!(matches!(
            verify_annihilator(&p, &m, 120),
            Err(SeriesError::InsufficientMoments { .. })
        ));
    }

    #[test]
    fn annihilator_stable_under_longer_matching() {
        let m1 = semicircle_moments(40);
        let m2 = semicircle_moments(80);
        let p1 = find_annihilator(&m1, 8, 8, DEFAULT_MARGIN).unwrap();
        let p2 = find_annihilator(&m2, 8, 8, DEFAULT_MARGIN).unwrap();
        assert_eq!(p1, p2);
    }

    #[test]
    fn budget_exhaustion_reports_degrees() {
        let m = semicircle_moments(40);
        let err = find_annihilator(&m, 0, 1, DEFAULT_MARGIN).unwrap_err();
        match err {
            SeriesError::DegreeBudgetExhausted { tried, .. } => {
                assert_eq!(tried, vec![(0, 1)]);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn text_round_trip_is_exact() {
        let m = semicircle_moments(40);
        let p = find_annihilator(&m, 8, 8, DEFAULT_MARGIN).unwrap();
        let text = p.to_text();
        let q = AnnihilatorPoly::from_text(&text).unwrap();
        assert_eq!(p, q);
        assert_eq!(text, q.to_text());
        assert!(AnnihilatorPoly::from_text("1 x\n").is_err());
        assert!(AnnihilatorPoly::from_text("").is_err());
    }

    #[test]
    fn series_ring_axioms_hold_exactly() {
        // deterministic pseudo-random series at order 50
        let order = 50;
        let mk = |seed: u64| {
            let mut state = seed;
            let coeffs: Vec<GaussianRational> = (0..=order)
                .map(|_| {
                    state = state
                        .wrapping_mul(6364136223846793005)
                        .wrapping_add(1442695040888963407);
                    let n = ((state >> 33) % 17) as i64 - 8;
                    let d = ((state >> 21) % 7) as i64 + 1;
                    GaussianRational::from_rat(Rat::new(n.into(), d.into()))
                })
                .collect();
            PowerSeries1::new(coeffs)
        };
        let (a, b, c) = (mk(1), mk(2), mk(3));
        assert_eq!(a.mul(&b), b.mul(&a));
        assert_eq!(a.mul(&b.add(&c)), a.mul(&b).add(&a.mul(&c)));
        assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
        let unit_first = mk(4).add(&PowerSeries1::one(order)).add(&PowerSeries1::one(order));
        let inv = unit_first.inverse();
        if let Ok(inv) = inv {
            assert_eq!(unit_first.mul(&inv), PowerSeries1::one(order));
        }
    }
}
