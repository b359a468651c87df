//! Noncommutative *-polynomials over a family of free generators.
//!
//! Words are stored unreduced: the polynomial ring is the free ring over the
//! alphabet, and any relations (free-group reduction for unitary letters) are
//! applied only inside the trace oracle. Stars on self-adjoint generators are
//! normalized away at construction so word keys are canonical.

use crate::scalar::{GaussianRational, Rat};
use num_traits::{One, Signed, Zero};
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NcError {
    #[error("generator families differ")]
    FamilyMismatch,
    #[error("unknown generator id {0}")]
    UnknownGenerator(usize),
    #[error("generator {0} is not of self-adjoint kind")]
    NotSelfAdjointKind(usize),
    #[error("matrix dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("matrix is not square ({0}x{1})")]
    NotSquare(usize, usize),
    #[error("invalid generator family: {0}")]
    InvalidFamily(String),
}

/// What a generator is: this fixes its single-variable *-distribution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GeneratorKind {
    /// Self-adjoint semicircular element with the given second moment.
    Semicircular { variance: Rat },
    /// Haar-distributed unitary.
    HaarUnitary,
    /// Self-adjoint element with explicitly supplied moments `m_0..m_K`.
    CustomSelfAdjoint { moments: Vec<Rat>, norm_bound: Rat },
}

impl GeneratorKind {
    pub fn is_self_adjoint(&self) -> bool {
        !matches!(self, GeneratorKind::HaarUnitary)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generator {
    pub id: usize,
    pub kind: GeneratorKind,
}

#[derive(Debug, PartialEq, Eq)]
struct FamilyInner {
    generators: Vec<Generator>,
}

/// A fixed ordered family of free generators, shared by every object built
/// over it. Cheap to clone.
#[derive(Debug, Clone)]
pub struct Family(Arc<FamilyInner>);

impl PartialEq for Family {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0 == other.0
    }
}
impl Eq for Family {}

impl Family {
    /// Build a family; generator ids must equal their positions.
    pub fn new(generators: Vec<Generator>) -> Result<Self, NcError> {
        for (i, g) in generators.iter().enumerate() {
            if g.id != i {
                return Err(NcError::InvalidFamily(format!(
                    "generator at position {i} has id {}",
                    g.id
                )));
            }
            match &g.kind {
                GeneratorKind::Semicircular { variance } => {
                    if !variance.is_positive() {
                        return Err(NcError::InvalidFamily(format!(
                            "semicircular generator {i} needs positive variance"
                        )));
                    }
                }
                GeneratorKind::CustomSelfAdjoint { moments, norm_bound } => {
                    if moments.first() != Some(&Rat::one()) {
                        return Err(NcError::InvalidFamily(format!(
                            "custom generator {i} must supply m_0 = 1"
                        )));
                    }
                    if !norm_bound.is_positive() {
                        return Err(NcError::InvalidFamily(format!(
                            "custom generator {i} needs a positive norm bound"
                        )));
                    }
                    // |m_k| <= norm_bound^k
                    let mut pow = Rat::one();
                    for (k, m) in moments.iter().enumerate() {
                        if k > 0 {
                            pow *= norm_bound;
                        }
                        if m.abs() > pow {
                            return Err(NcError::InvalidFamily(format!(
                                "custom generator {i}: |m_{k}| exceeds norm_bound^{k}"
                            )));
                        }
                    }
                }
                GeneratorKind::HaarUnitary => {}
            }
        }
        Ok(Family(Arc::new(FamilyInner { generators })))
    }

    /// `n` free semicircular generators with the given variance.
    pub fn semicircular(n: usize, variance: Rat) -> Self {
        Family::new(
            (0..n)
                .map(|id| Generator {
                    id,
                    kind: GeneratorKind::Semicircular {
                        variance: variance.clone(),
                    },
                })
                .collect(),
        )
        .expect("valid semicircular family")
    }

    /// `n` free semicircular generators with variance one.
    pub fn standard_semicircular(n: usize) -> Self {
        Family::semicircular(n, Rat::one())
    }

    /// `n` free Haar unitaries.
    pub fn haar(n: usize) -> Self {
        Family::new(
            (0..n)
                .map(|id| Generator {
                    id,
                    kind: GeneratorKind::HaarUnitary,
                })
                .collect(),
        )
        .expect("valid haar family")
    }

    pub fn len(&self) -> usize {
        self.0.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.generators.is_empty()
    }

    pub fn generator(&self, id: usize) -> Result<&Generator, NcError> {
        self.0.generators.get(id).ok_or(NcError::UnknownGenerator(id))
    }

    pub fn generators(&self) -> &[Generator] {
        &self.0.generators
    }

    pub fn is_pure_semicircular(&self) -> bool {
        self.0
            .generators
            .iter()
            .all(|g| matches!(g.kind, GeneratorKind::Semicircular { .. }))
    }

    pub fn is_pure_haar(&self) -> bool {
        self.0
            .generators
            .iter()
            .all(|g| matches!(g.kind, GeneratorKind::HaarUnitary))
    }

    pub fn all_self_adjoint(&self) -> bool {
        self.0.generators.iter().all(|g| g.kind.is_self_adjoint())
    }

    pub fn variance(&self, id: usize) -> Result<Rat, NcError> {
        match &self.generator(id)?.kind {
            GeneratorKind::Semicircular { variance } => Ok(variance.clone()),
            _ => Err(NcError::NotSelfAdjointKind(id)),
        }
    }

    /// Rational upper bound for the operator norm of a generator.
    pub fn norm_bound(&self, id: usize) -> Result<Rat, NcError> {
        Ok(match &self.generator(id)?.kind {
            GeneratorKind::Semicircular { variance } => {
                crate::scalar::rational_sqrt_upper(&(variance * Rat::from_integer(4.into())))
            }
            GeneratorKind::HaarUnitary => Rat::one(),
            GeneratorKind::CustomSelfAdjoint { norm_bound, .. } => norm_bound.clone(),
        })
    }

    /// Canonical letter: stars on self-adjoint generators are dropped.
    pub fn letter(&self, id: usize, starred: bool) -> Result<Letter, NcError> {
        let g = self.generator(id)?;
        Ok(Letter {
            generator: id,
            starred: starred && !g.kind.is_self_adjoint(),
        })
    }
}

/// A single (possibly starred) generator occurrence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Letter {
    pub generator: usize,
    pub starred: bool,
}

/// A finite product of letters; the empty word is the unit.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Word(pub Vec<Letter>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = Vec::with_capacity(self.len() + other.len());
        v.extend_from_slice(&self.0);
        v.extend_from_slice(&other.0);
        Word(v)
    }

    /// Reverse the word and flip stars according to each generator's kind.
    pub fn adjoint(&self, family: &Family) -> Result<Word, NcError> {
        let mut v = Vec::with_capacity(self.len());
        for l in self.0.iter().rev() {
            v.push(family.letter(l.generator, !l.starred)?);
        }
        Ok(Word(v))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "e");
        }
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ".")?;
            }
            write!(f, "g{}{}", l.generator, if l.starred { "*" } else { "" })?;
        }
        Ok(())
    }
}

/// Noncommutative polynomial: finite map from words to coefficients, with no
/// stored zeros.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NcPolynomial {
    family: Family,
    terms: BTreeMap<Word, GaussianRational>,
}

impl NcPolynomial {
    pub fn zero(family: Family) -> Self {
        NcPolynomial {
            family,
            terms: BTreeMap::new(),
        }
    }

    pub fn one(family: Family) -> Self {
        Self::monomial(family, Word::empty(), GaussianRational::one())
    }

    pub fn constant(family: Family, c: GaussianRational) -> Self {
        Self::monomial(family, Word::empty(), c)
    }

    pub fn monomial(family: Family, word: Word, coeff: GaussianRational) -> Self {
        let mut terms = BTreeMap::new();
        if !coeff.is_zero() {
            terms.insert(word, coeff);
        }
        NcPolynomial { family, terms }
    }

    /// The unstarred generator `id` as a degree-one monomial.
    pub fn generator(family: &Family, id: usize) -> Result<Self, NcError> {
        let l = family.letter(id, false)?;
        Ok(Self::monomial(
            family.clone(),
            Word(vec![l]),
            GaussianRational::one(),
        ))
    }

    /// The starred generator, as a monomial (trivially equal to the generator
    /// for self-adjoint kinds).
    pub fn generator_star(family: &Family, id: usize) -> Result<Self, NcError> {
        let l = family.letter(id, true)?;
        Ok(Self::monomial(
            family.clone(),
            Word(vec![l]),
            GaussianRational::one(),
        ))
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Word, &GaussianRational)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, w: &Word) -> GaussianRational {
        self.terms.get(w).cloned().unwrap_or_else(GaussianRational::zero)
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(Word::len).max().unwrap_or(0)
    }

    fn check_family(&self, other: &NcPolynomial) -> Result<(), NcError> {
        if self.family == other.family {
            Ok(())
        } else {
            Err(NcError::FamilyMismatch)
        }
    }

    fn insert(terms: &mut BTreeMap<Word, GaussianRational>, w: Word, c: GaussianRational) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match terms.entry(w) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                *e.get_mut() += &c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn add(&self, rhs: &NcPolynomial) -> Result<NcPolynomial, NcError> {
        self.check_family(rhs)?;
        let mut terms = self.terms.clone();
        for (w, c) in &rhs.terms {
            Self::insert(&mut terms, w.clone(), c.clone());
        }
        Ok(NcPolynomial {
            family: self.family.clone(),
            terms,
        })
    }

    pub fn sub(&self, rhs: &NcPolynomial) -> Result<NcPolynomial, NcError> {
        self.add(&rhs.neg())
    }

    pub fn neg(&self) -> NcPolynomial {
        self.scale(&GaussianRational::from_int(-1))
    }

    pub fn scale(&self, c: &GaussianRational) -> NcPolynomial {
        if c.is_zero() {
            return NcPolynomial::zero(self.family.clone());
        }
        NcPolynomial {
            family: self.family.clone(),
            terms: self
                .terms
                .iter()
                .map(|(w, x)| (w.clone(), x * c))
                .collect(),
        }
    }

    /// Word-concatenation product; no commutativity is assumed.
    pub fn mul(&self, rhs: &NcPolynomial) -> Result<NcPolynomial, NcError> {
        self.check_family(rhs)?;
        let mut terms = BTreeMap::new();
        for (u, a) in &self.terms {
            for (v, b) in &rhs.terms {
                Self::insert(&mut terms, u.concat(v), a * b);
            }
        }
        Ok(NcPolynomial {
            family: self.family.clone(),
            terms,
        })
    }

    /// Conjugate coefficients, reverse words, flip stars.
    pub fn adjoint(&self) -> NcPolynomial {
        let mut terms = BTreeMap::new();
        for (w, c) in &self.terms {
            let wa = w.adjoint(&self.family).expect("family owns its letters");
            Self::insert(&mut terms, wa, c.conj());
        }
        NcPolynomial {
            family: self.family.clone(),
            terms,
        }
    }

    pub fn is_selfadjoint(&self) -> bool {
        *self == self.adjoint()
    }

    /// Sum over terms of `|coeff| * prod(letter norm bounds)`: a rational
    /// upper bound for the operator norm of the evaluated element.
    pub fn norm_bound(&self) -> Result<Rat, NcError> {
        let mut total = Rat::zero();
        for (w, c) in &self.terms {
            let mut t = c.abs_bound();
            for l in &w.0 {
                t *= self.family.norm_bound(l.generator)?;
            }
            total += t;
        }
        Ok(total)
    }
}

/// Free difference quotient with respect to generator `j`: splits each word
/// at every occurrence of the (unstarred) letter `j` into a tensor of the two
/// flanking subwords, extended linearly.
pub fn diff_quotient(p: &NcPolynomial, j: usize) -> Result<TensorPolynomial, NcError> {
    let family = p.family().clone();
    if !family.generator(j)?.kind.is_self_adjoint() {
        return Err(NcError::NotSelfAdjointKind(j));
    }
    let mut out = TensorPolynomial::zero(family);
    for (w, c) in p.terms() {
        for (m, l) in w.0.iter().enumerate() {
            if l.generator == j && !l.starred {
                let left = Word(w.0[..m].to_vec());
                let right = Word(w.0[m + 1..].to_vec());
                out.add_term(left, right, c.clone());
            }
        }
    }
    Ok(out)
}

/// `n x m` array of difference quotients: entry `(i, j)` is the quotient of
/// the `j`-th polynomial with respect to generator `i`.
pub fn jacobian(
    polys: &[NcPolynomial],
    n: usize,
) -> Result<Vec<Vec<TensorPolynomial>>, NcError> {
    let family = match polys.first() {
        Some(p) => p.family().clone(),
        None => return Ok(vec![Vec::new(); n]),
    };
    for p in polys {
        if *p.family() != family {
            return Err(NcError::FamilyMismatch);
        }
    }
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = Vec::with_capacity(polys.len());
        for p in polys {
            row.push(diff_quotient(p, i)?);
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Element of the algebraic tensor square: finite bilinear combination of
/// `word (x) word`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorPolynomial {
    family: Family,
    terms: BTreeMap<(Word, Word), GaussianRational>,
}

impl TensorPolynomial {
    pub fn zero(family: Family) -> Self {
        TensorPolynomial {
            family,
            terms: BTreeMap::new(),
        }
    }

    pub fn one(family: Family) -> Self {
        let mut t = Self::zero(family);
        t.add_term(Word::empty(), Word::empty(), GaussianRational::one());
        t
    }

    pub fn simple(a: &NcPolynomial, b: &NcPolynomial) -> Result<Self, NcError> {
        if a.family() != b.family() {
            return Err(NcError::FamilyMismatch);
        }
        let mut t = Self::zero(a.family().clone());
        for (u, x) in a.terms() {
            for (v, y) in b.terms() {
                t.add_term(u.clone(), v.clone(), x * y);
            }
        }
        Ok(t)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(Word, Word), &GaussianRational)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, left: Word, right: Word, c: GaussianRational) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry((left, right)) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                *e.get_mut() += &c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn add(&self, rhs: &TensorPolynomial) -> Result<TensorPolynomial, NcError> {
        if self.family != rhs.family {
            return Err(NcError::FamilyMismatch);
        }
        let mut out = self.clone();
        for ((u, v), c) in &rhs.terms {
            out.add_term(u.clone(), v.clone(), c.clone());
        }
        Ok(out)
    }

    /// Leg-wise product: `(a (x) b)(c (x) d) = ac (x) bd`.
    pub fn mul(&self, rhs: &TensorPolynomial) -> Result<TensorPolynomial, NcError> {
        if self.family != rhs.family {
            return Err(NcError::FamilyMismatch);
        }
        let mut out = TensorPolynomial::zero(self.family.clone());
        for ((u1, v1), c1) in &self.terms {
            for ((u2, v2), c2) in &rhs.terms {
                out.add_term(u1.concat(u2), v1.concat(v2), c1 * c2);
            }
        }
        Ok(out)
    }

    pub fn scale(&self, c: &GaussianRational) -> TensorPolynomial {
        let mut out = TensorPolynomial::zero(self.family.clone());
        for ((u, v), x) in &self.terms {
            out.add_term(u.clone(), v.clone(), x * c);
        }
        out
    }
}

/// Rectangular matrix with noncommutative polynomial entries, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatrixPolynomial {
    family: Family,
    rows: usize,
    cols: usize,
    entries: Vec<NcPolynomial>,
}

impl MatrixPolynomial {
    pub fn new(
        family: Family,
        rows: usize,
        cols: usize,
        entries: Vec<NcPolynomial>,
    ) -> Result<Self, NcError> {
        if entries.len() != rows * cols {
            return Err(NcError::DimensionMismatch(rows, cols, entries.len(), 1));
        }
        for e in &entries {
            if *e.family() != family {
                return Err(NcError::FamilyMismatch);
            }
        }
        Ok(MatrixPolynomial {
            family,
            rows,
            cols,
            entries,
        })
    }

    pub fn zero(family: Family, rows: usize, cols: usize) -> Self {
        let entries = (0..rows * cols)
            .map(|_| NcPolynomial::zero(family.clone()))
            .collect();
        MatrixPolynomial {
            family,
            rows,
            cols,
            entries,
        }
    }

    pub fn identity(family: Family, n: usize) -> Self {
        let mut m = Self::zero(family.clone(), n, n);
        for i in 0..n {
            m.set(i, i, NcPolynomial::one(family.clone()));
        }
        m
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &NcPolynomial {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, p: NcPolynomial) {
        assert_eq!(*p.family(), self.family, "entry family mismatch");
        self.entries[i * self.cols + j] = p;
    }

    pub fn add(&self, rhs: &MatrixPolynomial) -> Result<MatrixPolynomial, NcError> {
        if self.family != rhs.family {
            return Err(NcError::FamilyMismatch);
        }
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(NcError::DimensionMismatch(
                self.rows, self.cols, rhs.rows, rhs.cols,
            ));
        }
        let entries = self
            .entries
            .iter()
            .zip(&rhs.entries)
            .map(|(a, b)| a.add(b))
            .collect::<Result<_, _>>()?;
        Ok(MatrixPolynomial {
            family: self.family.clone(),
            rows: self.rows,
            cols: self.cols,
            entries,
        })
    }

    pub fn mul(&self, rhs: &MatrixPolynomial) -> Result<MatrixPolynomial, NcError> {
        if self.family != rhs.family {
            return Err(NcError::FamilyMismatch);
        }
        if self.cols != rhs.rows {
            return Err(NcError::DimensionMismatch(
                self.rows, self.cols, rhs.rows, rhs.cols,
            ));
        }
        let mut out = MatrixPolynomial::zero(self.family.clone(), self.rows, rhs.cols);
        for i in 0..self.rows {
            for j in 0..rhs.cols {
                let mut acc = NcPolynomial::zero(self.family.clone());
                for k in 0..self.cols {
                    acc = acc.add(&self.get(i, k).mul(rhs.get(k, j))?)?;
                }
                out.set(i, j, acc);
            }
        }
        Ok(out)
    }

    pub fn scale(&self, c: &GaussianRational) -> MatrixPolynomial {
        MatrixPolynomial {
            family: self.family.clone(),
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|p| p.scale(c)).collect(),
        }
    }

    /// Transpose and adjoint entries.
    pub fn adjoint(&self) -> MatrixPolynomial {
        let mut out = MatrixPolynomial::zero(self.family.clone(), self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j).adjoint());
            }
        }
        out
    }

    pub fn is_selfadjoint(&self) -> bool {
        self.rows == self.cols && *self == self.adjoint()
    }

    pub fn pow(&self, k: usize) -> Result<MatrixPolynomial, NcError> {
        if self.rows != self.cols {
            return Err(NcError::NotSquare(self.rows, self.cols));
        }
        let mut acc = MatrixPolynomial::identity(self.family.clone(), self.rows);
        for _ in 0..k {
            acc = acc.mul(self)?;
        }
        Ok(acc)
    }

    /// Sum of entry norm bounds: a rational upper bound for the operator norm.
    pub fn norm_bound(&self) -> Result<Rat, NcError> {
        let mut total = Rat::zero();
        for e in &self.entries {
            total += e.norm_bound()?;
        }
        Ok(total)
    }

    pub fn total_terms(&self) -> usize {
        self.entries.iter().map(NcPolynomial::num_terms).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::GaussianRational as G;

    fn fam2() -> Family {
        Family::standard_semicircular(2)
    }

    fn x(f: &Family, id: usize) -> NcPolynomial {
        NcPolynomial::generator(f, id).unwrap()
    }

    #[test]
    fn additive_identity_and_inverse() {
        let f = fam2();
        let p = x(&f, 0).add(&x(&f, 1)).unwrap();
        let zero = NcPolynomial::zero(f.clone());
        assert_eq!(p.add(&zero).unwrap(), p);
        assert!(p.add(&p.neg()).unwrap().is_zero());
    }

    #[test]
    fn like_terms_merge() {
        let f = fam2();
        let p = x(&f, 0).add(&x(&f, 1)).unwrap();
        let q = p.add(&x(&f, 1)).unwrap();
        assert_eq!(q.num_terms(), 2);
        let w1 = Word(vec![f.letter(1, false).unwrap()]);
        assert_eq!(q.coefficient(&w1), G::from_int(2));
    }

    #[test]
    fn multiplication_is_noncommutative() {
        let f = fam2();
        let ab = x(&f, 0).mul(&x(&f, 1)).unwrap();
        let ba = x(&f, 1).mul(&x(&f, 0)).unwrap();
        assert_ne!(ab, ba);
        let one = NcPolynomial::one(f.clone());
        assert_eq!(one.mul(&ab).unwrap(), ab);
    }

    #[test]
    fn product_expansion() {
        let f = fam2();
        let s = x(&f, 0).add(&x(&f, 1)).unwrap();
        let d = x(&f, 0).sub(&x(&f, 1)).unwrap();
        let p = s.mul(&d).unwrap();
        // x0x0 - x0x1 + x1x0 - x1x1
        assert_eq!(p.num_terms(), 4);
        let l0 = f.letter(0, false).unwrap();
        let l1 = f.letter(1, false).unwrap();
        assert_eq!(p.coefficient(&Word(vec![l0, l1])), G::from_int(-1));
        assert_eq!(p.coefficient(&Word(vec![l1, l0])), G::from_int(1));
    }

    #[test]
    fn adjoint_is_antihomomorphism() {
        let f = fam2();
        let p = x(&f, 0).mul(&x(&f, 1)).unwrap().scale(&G::i());
        // (i x0 x1)* = -i x1 x0
        let pa = p.adjoint();
        let l0 = f.letter(0, false).unwrap();
        let l1 = f.letter(1, false).unwrap();
        assert_eq!(
            pa.coefficient(&Word(vec![l1, l0])),
            &G::i() * &G::from_int(-1)
        );
        assert_eq!(pa.adjoint(), p);
    }

    #[test]
    fn haar_star_letters_survive() {
        let f = Family::haar(1);
        let u = NcPolynomial::generator(&f, 0).unwrap();
        let ua = u.adjoint();
        let starred = Word(vec![f.letter(0, true).unwrap()]);
        assert_eq!(ua.coefficient(&starred), G::one());
        assert_ne!(u, ua);
    }

    #[test]
    fn stars_normalize_on_selfadjoint_kinds() {
        let f = fam2();
        let l = f.letter(0, true).unwrap();
        assert!(!l.starred);
    }

    #[test]
    fn diff_quotient_base_cases() {
        let f = fam2();
        let d = diff_quotient(&x(&f, 0), 0).unwrap();
        assert_eq!(d, TensorPolynomial::one(f.clone()));
        let d2 = diff_quotient(&x(&f, 1), 0).unwrap();
        assert!(d2.is_zero());
        // d/dx0 (x0 x0) = e (x) x0 + x0 (x) e
        let sq = x(&f, 0).mul(&x(&f, 0)).unwrap();
        let d3 = diff_quotient(&sq, 0).unwrap();
        let w0 = Word(vec![f.letter(0, false).unwrap()]);
        let mut expect = TensorPolynomial::zero(f.clone());
        expect.add_term(Word::empty(), w0.clone(), G::one());
        expect.add_term(w0, Word::empty(), G::one());
        assert_eq!(d3, expect);
    }

    #[test]
    fn jacobian_shape_and_constants() {
        let f = fam2();
        let p = x(&f, 0).mul(&x(&f, 1)).unwrap();
        let j = jacobian(&[p], 2).unwrap();
        assert_eq!(j.len(), 2);
        let w0 = Word(vec![f.letter(0, false).unwrap()]);
        let w1 = Word(vec![f.letter(1, false).unwrap()]);
        let mut e0 = TensorPolynomial::zero(f.clone());
        e0.add_term(Word::empty(), w1, G::one());
        let mut e1 = TensorPolynomial::zero(f.clone());
        e1.add_term(w0, Word::empty(), G::one());
        assert_eq!(j[0][0], e0);
        assert_eq!(j[1][0], e1);

        let c = NcPolynomial::constant(f.clone(), G::from_int(5));
        let jc = jacobian(&[c], 2).unwrap();
        assert!(jc[0][0].is_zero() && jc[1][0].is_zero());
    }

    #[test]
    fn matrix_algebra() {
        let f = fam2();
        let mut a = MatrixPolynomial::zero(f.clone(), 2, 2);
        a.set(0, 1, x(&f, 0));
        let id = MatrixPolynomial::identity(f.clone(), 2);
        assert_eq!(a.mul(&id).unwrap(), a);
        // ([[0,x0],[0,0]])* = [[0,0],[x0,0]]
        let aa = a.adjoint();
        assert_eq!(*aa.get(1, 0), x(&f, 0));
        assert!(aa.get(0, 1).is_zero());
        // [[x0,0],[0,0]] is self-adjoint
        let mut b = MatrixPolynomial::zero(f.clone(), 2, 2);
        b.set(0, 0, x(&f, 0));
        assert!(b.is_selfadjoint());
        assert!(!a.is_selfadjoint());
        assert!(a.adjoint().mul(&a).unwrap().is_selfadjoint());
    }

    #[test]
    fn family_mismatch_is_detected() {
        let f = fam2();
        let g = Family::standard_semicircular(3);
        let p = x(&f, 0);
        let q = NcPolynomial::generator(&g, 0).unwrap();
        assert_eq!(p.add(&q).unwrap_err(), NcError::FamilyMismatch);
        assert_eq!(p.mul(&q).unwrap_err(), NcError::FamilyMismatch);
    }

    #[test]
    fn family_validation() {
        assert!(Family::new(vec![Generator {
            id: 1,
            kind: GeneratorKind::HaarUnitary
        }])
        .is_err());
        assert!(Family::new(vec![Generator {
            id: 0,
            kind: GeneratorKind::CustomSelfAdjoint {
                moments: vec![Rat::from_integer(2.into())],
                norm_bound: Rat::from_integer(1.into()),
            },
        }])
        .is_err());
    }
}
