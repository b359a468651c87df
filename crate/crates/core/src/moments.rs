//! Exact trace oracles for words, polynomials, and matrix polynomials over
//! freely independent generator families.
//!
//! Three word-trace paths:
//! - pure semicircular words: the splitting recursion on the leading letter,
//!   memoized;
//! - pure Haar words: free-group reduction;
//! - mixed or custom words: alternating-centering reduction, which only needs
//!   each generator's single-variable moments.
//!
//! [`pairing_oracle`] enumerates every pairing of a pure-semicircular word
//! and keeps the non-crossing colour-consistent ones; it is deliberately
//! independent of the recursion so the two can check each other.
//!
//! Moment sequences of matrix polynomials over pure-semicircular families are
//! computed by a prefix-automaton transfer recursion (see
//! [`semicircular_matrix_moments`]) which stays polynomial in the order where
//! direct word expansion would be exponential.

use crate::ncpoly::{Family, GeneratorKind, Letter, MatrixPolynomial, NcError, NcPolynomial, Word};
use crate::scalar::{GaussianRational, Rat};
use num_traits::{One, Zero};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Mutex;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MomentsError {
    #[error(transparent)]
    Nc(#[from] NcError),
    #[error("letter uses generator {0} unknown to this oracle")]
    UnknownGenerator(usize),
    #[error("custom generator {generator} queried at moment order {order}, only {supplied} supplied")]
    CustomMomentsExhausted {
        generator: usize,
        order: usize,
        supplied: usize,
    },
    #[error("pairing oracle requires pure semicircular letters")]
    NonSemicircularLetter,
    #[error("matrix is not self-adjoint")]
    NotSelfAdjoint,
    #[error("matrix trace requires a square matrix ({0}x{1})")]
    NonSquare(usize, usize),
    #[error("direct moment expansion exceeded the term budget at order {order} ({terms} terms); only pure-semicircular families have a fast path")]
    ExpansionTooLarge { order: usize, terms: usize },
    #[error("transfer recursion failed to stabilize (internal error)")]
    RecursionUnstable,
    #[error("moment values of a self-adjoint element must be real")]
    NonRealMoment,
}

/// Memoizing trace oracle for one generator family.
///
/// Queries are safe from multiple threads; the cache behaves as a per-key
/// atomic map.
pub struct TraceOracle {
    family: Family,
    cache: Mutex<HashMap<Word, GaussianRational>>,
}

impl TraceOracle {
    pub fn new(family: Family) -> Self {
        TraceOracle {
            family,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// Exact trace of a word.
    pub fn trace_word(&self, w: &Word) -> Result<GaussianRational, MomentsError> {
        for l in &w.0 {
            if l.generator >= self.family.len() {
                return Err(MomentsError::UnknownGenerator(l.generator));
            }
        }
        self.trace_inner(w)
    }

    fn trace_inner(&self, w: &Word) -> Result<GaussianRational, MomentsError> {
        if w.is_empty() {
            return Ok(GaussianRational::one());
        }
        if let Some(v) = self.cache.lock().unwrap().get(w) {
            return Ok(v.clone());
        }
        let kind_of = |l: &Letter| &self.family.generator(l.generator).unwrap().kind;
        let all_semi = w
            .0
            .iter()
            .all(|l| matches!(kind_of(l), GeneratorKind::Semicircular { .. }));
        let all_haar = w
            .0
            .iter()
            .all(|l| matches!(kind_of(l), GeneratorKind::HaarUnitary));
        let v = if all_semi {
            self.trace_semicircular(w)?
        } else if all_haar {
            Self::trace_haar(w)
        } else {
            self.trace_by_centering(w)?
        };
        self.cache.lock().unwrap().insert(w.clone(), v.clone());
        Ok(v)
    }

    /// Splitting recursion on the leading semicircular letter: the trace of
    /// `S_j w` is the variance-weighted sum of `tau(u) tau(v)` over all ways
    /// to write `w = u x_j v`.
    fn trace_semicircular(&self, w: &Word) -> Result<GaussianRational, MomentsError> {
        if w.len() % 2 == 1 {
            return Ok(GaussianRational::zero());
        }
        let j = w.0[0].generator;
        let var = GaussianRational::from_rat(self.family.variance(j).map_err(MomentsError::Nc)?);
        let rest = &w.0[1..];
        let mut acc = GaussianRational::zero();
        for (m, l) in rest.iter().enumerate() {
            if l.generator == j {
                let u = Word(rest[..m].to_vec());
                let v = Word(rest[m + 1..].to_vec());
                let t = &self.trace_inner(&u)? * &self.trace_inner(&v)?;
                acc += &(&var * &t);
            }
        }
        Ok(acc)
    }

    /// Free-group reduction: the trace is one exactly when the word reduces
    /// to the identity.
    fn trace_haar(w: &Word) -> GaussianRational {
        let mut stack: Vec<Letter> = Vec::with_capacity(w.len());
        for l in &w.0 {
            match stack.last() {
                Some(top) if top.generator == l.generator && top.starred != l.starred => {
                    stack.pop();
                }
                _ => stack.push(*l),
            }
        }
        if stack.is_empty() {
            GaussianRational::one()
        } else {
            GaussianRational::zero()
        }
    }

    /// Alternating-centering reduction for mixed families.
    ///
    /// Split the word into maximal single-generator blocks. A product of
    /// centered blocks from alternating free subalgebras has trace zero, so
    /// expanding every block as `(b - tau(b)) + tau(b)` expresses the trace
    /// through traces of strictly shorter words.
    fn trace_by_centering(&self, w: &Word) -> Result<GaussianRational, MomentsError> {
        let blocks = split_blocks(w);
        if blocks.len() == 1 {
            return self.single_generator_trace(&blocks[0]);
        }
        let mut block_traces = Vec::with_capacity(blocks.len());
        for b in &blocks {
            block_traces.push(self.single_generator_trace(b)?);
        }
        // tau(w) = sum over nonempty subsets S of (-1)^{|S|+1} prod_{i in S}
        // tau(b_i) * tau(word with blocks S removed); subsets containing a
        // zero-trace block contribute nothing.
        let nonzero: Vec<usize> = (0..blocks.len())
            .filter(|&i| !block_traces[i].is_zero())
            .collect();
        let mut acc = GaussianRational::zero();
        for mask in 1u64..(1u64 << nonzero.len()) {
            let mut scalar = GaussianRational::one();
            let mut removed = vec![false; blocks.len()];
            let mut bits = 0u32;
            for (pos, &i) in nonzero.iter().enumerate() {
                if mask & (1 << pos) != 0 {
                    scalar *= &block_traces[i];
                    removed[i] = true;
                    bits += 1;
                }
            }
            let mut rest = Vec::new();
            for (i, b) in blocks.iter().enumerate() {
                if !removed[i] {
                    rest.extend_from_slice(&b.0);
                }
            }
            let t = self.trace_inner(&Word(rest))?;
            let term = &scalar * &t;
            if bits % 2 == 1 {
                acc += &term;
            } else {
                acc -= &term;
            }
        }
        Ok(acc)
    }

    /// Trace of a word in a single generator.
    fn single_generator_trace(&self, b: &Word) -> Result<GaussianRational, MomentsError> {
        let j = b.0[0].generator;
        match &self.family.generator(j).map_err(MomentsError::Nc)?.kind {
            GeneratorKind::Semicircular { .. } => self.trace_semicircular(b),
            GeneratorKind::HaarUnitary => Ok(Self::trace_haar(b)),
            GeneratorKind::CustomSelfAdjoint { moments, .. } => {
                let k = b.len();
                moments
                    .get(k)
                    .map(|m| GaussianRational::from_rat(m.clone()))
                    .ok_or(MomentsError::CustomMomentsExhausted {
                        generator: j,
                        order: k,
                        supplied: moments.len().saturating_sub(1),
                    })
            }
        }
    }

    /// Linear extension of the word trace.
    pub fn trace_poly(&self, p: &NcPolynomial) -> Result<GaussianRational, MomentsError> {
        if *p.family() != self.family {
            return Err(MomentsError::Nc(NcError::FamilyMismatch));
        }
        let mut acc = GaussianRational::zero();
        for (w, c) in p.terms() {
            acc += &(c * &self.trace_word(w)?);
        }
        Ok(acc)
    }

    /// Sum of diagonal entry traces; divided by the dimension when
    /// `normalized`.
    pub fn matrix_trace(
        &self,
        a: &MatrixPolynomial,
        normalized: bool,
    ) -> Result<GaussianRational, MomentsError> {
        if a.rows() != a.cols() {
            return Err(MomentsError::NonSquare(a.rows(), a.cols()));
        }
        let mut acc = GaussianRational::zero();
        for i in 0..a.rows() {
            acc += &self.trace_poly(a.get(i, i))?;
        }
        if normalized {
            let ell = GaussianRational::from_int(a.rows() as i64);
            acc = &acc * &ell.inv().expect("positive dimension");
        }
        Ok(acc)
    }
}

fn split_blocks(w: &Word) -> Vec<Word> {
    let mut blocks: Vec<Word> = Vec::new();
    for l in &w.0 {
        match blocks.last_mut() {
            Some(b) if b.0[0].generator == l.generator => b.0.push(*l),
            _ => blocks.push(Word(vec![*l])),
        }
    }
    blocks
}

/// Exhaustively enumerate all pairings of the word positions and add the
/// variance products of those that are non-crossing with both partners of
/// every pair carrying the same generator.
pub fn pairing_oracle(family: &Family, w: &Word) -> Result<Rat, MomentsError> {
    let mut vars = Vec::with_capacity(w.len());
    for l in &w.0 {
        match &family
            .generator(l.generator)
            .map_err(|_| MomentsError::UnknownGenerator(l.generator))?
            .kind
        {
            GeneratorKind::Semicircular { variance } => vars.push(variance.clone()),
            _ => return Err(MomentsError::NonSemicircularLetter),
        }
    }
    if w.len() % 2 == 1 {
        return Ok(Rat::zero());
    }
    let colors: Vec<usize> = w.0.iter().map(|l| l.generator).collect();
    let mut total = Rat::zero();
    let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(w.len() / 2);
    enumerate_pairings(
        &mut (0..w.len()).collect::<Vec<_>>(),
        &mut pairs,
        &colors,
        &vars,
        &mut total,
    );
    Ok(total)
}

fn enumerate_pairings(
    free: &mut Vec<usize>,
    pairs: &mut Vec<(usize, usize)>,
    colors: &[usize],
    vars: &[Rat],
    total: &mut Rat,
) {
    if free.is_empty() {
        if is_noncrossing(pairs) {
            let mut weight = Rat::one();
            for &(a, b) in pairs.iter() {
                if colors[a] != colors[b] {
                    return;
                }
                weight *= &vars[a];
            }
            *total += weight;
        }
        return;
    }
    let first = free[0];
    for idx in 1..free.len() {
        let partner = free[idx];
        let mut rest: Vec<usize> = Vec::with_capacity(free.len() - 2);
        rest.extend(free.iter().skip(1).filter(|&&p| p != partner));
        pairs.push((first, partner));
        enumerate_pairings(&mut rest, pairs, colors, vars, total);
        pairs.pop();
    }
}

fn is_noncrossing(pairs: &[(usize, usize)]) -> bool {
    for (i, &(a, b)) in pairs.iter().enumerate() {
        for &(c, d) in &pairs[i + 1..] {
            let (a, b) = (a.min(b), a.max(b));
            let (c, d) = (c.min(d), c.max(d));
            let crossed = (a < c && c < b && b < d) || (c < a && a < d && d < b);
            if crossed {
                return false;
            }
        }
    }
    true
}

/// Exact moments `m_0..m_K` of a self-adjoint element together with a
/// rational norm bound.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MomentSequence {
    pub values: Vec<Rat>,
    pub element_norm_bound: Rat,
}

impl MomentSequence {
    pub fn order(&self) -> usize {
        self.values.len().saturating_sub(1)
    }

    pub fn norm_bound_f64(&self) -> f64 {
        use num_traits::ToPrimitive;
        self.element_norm_bound.to_f64().unwrap_or(f64::INFINITY)
    }
}

/// Term budget for the direct (word-expansion) moment route.
const DIRECT_TERM_BUDGET: usize = 2_000_000;

/// Exact moments of a self-adjoint matrix polynomial under the normalized
/// trace.
///
/// Pure-semicircular families go through the transfer recursion; anything
/// else multiplies out powers and traces them, which is only viable at small
/// orders and is guarded by a term budget.
pub fn moment_sequence(
    oracle: &TraceOracle,
    a: &MatrixPolynomial,
    order: usize,
) -> Result<MomentSequence, MomentsError> {
    if !a.is_selfadjoint() {
        return Err(MomentsError::NotSelfAdjoint);
    }
    let norm = a.norm_bound().map_err(MomentsError::Nc)?;
    let values = if a.family().is_pure_semicircular() {
        semicircular_matrix_moments(a, order)?
    } else {
        direct_matrix_moments(oracle, a, order)?
    };
    Ok(MomentSequence {
        values,
        element_norm_bound: norm,
    })
}

/// Moments by explicit powers `A^k`; the independent slow route.
pub fn direct_matrix_moments(
    oracle: &TraceOracle,
    a: &MatrixPolynomial,
    order: usize,
) -> Result<Vec<Rat>, MomentsError> {
    if a.rows() != a.cols() {
        return Err(MomentsError::NonSquare(a.rows(), a.cols()));
    }
    let mut values = Vec::with_capacity(order + 1);
    values.push(Rat::one());
    let mut power = MatrixPolynomial::identity(a.family().clone(), a.rows());
    for k in 1..=order {
        power = power.mul(a).map_err(MomentsError::Nc)?;
        if power.total_terms() > DIRECT_TERM_BUDGET {
            return Err(MomentsError::ExpansionTooLarge {
                order: k,
                terms: power.total_terms(),
            });
        }
        let t = oracle.matrix_trace(&power, true)?;
        if !t.is_real() {
            return Err(MomentsError::NonRealMoment);
        }
        values.push(t.re);
    }
    Ok(values)
}

/// Transfer recursion for moments of a matrix polynomial in free
/// semicircular variables.
///
/// Write the matrix as a weighted prefix automaton `A = L (I - M)^{-1} G`
/// with `M` linear in the generators and nilpotent. The normalized trace of
/// `A^k` equals the trace of the expectation of `((I - M)^{-1} P)^k` with
/// `P = G L`, and those expectations satisfy a quadratic recursion coming
/// from non-crossing pairings of the semicircular letters: with
/// `eta(W) = sum_j var_j T_j W T_j`,
///
/// ```text
/// (I - eta(Th_0)) Th_0 = I
/// Th_k = P Th_{k-1} + sum_{i=1..k} eta(Th_i) Th_{k-i}
/// m_k  = trace(Th_{k-1} P) / ell
/// ```
///
/// Each order is solved by a finite fixed-point iteration: `eta` strictly
/// lowers the prefix-length grading, so the updates vanish after at most the
/// automaton depth.
pub fn semicircular_matrix_moments(
    a: &MatrixPolynomial,
    order: usize,
) -> Result<Vec<Rat>, MomentsError> {
    if a.rows() != a.cols() {
        return Err(MomentsError::NonSquare(a.rows(), a.cols()));
    }
    let ell = a.rows();
    let family = a.family().clone();
    let n_gen = family.len();
    if !family.is_pure_semicircular() {
        return Err(MomentsError::NonSemicircularLetter);
    }
    if order == 0 {
        return Ok(vec![Rat::one()]);
    }

    // prefix states over all words appearing in any entry
    let mut states: BTreeSet<Word> = BTreeSet::new();
    states.insert(Word::empty());
    let mut max_depth = 0usize;
    for i in 0..ell {
        for j in 0..ell {
            for (w, _) in a.get(i, j).terms() {
                max_depth = max_depth.max(w.len());
                for p in 0..=w.len() {
                    states.insert(Word(w.0[..p].to_vec()));
                }
            }
        }
    }
    let states: Vec<Word> = states.into_iter().collect();
    let index: BTreeMap<&Word, usize> = states.iter().zip(0..).map(|(w, i)| (w, i)).collect();
    let q = states.len();
    let dim = q * ell;

    // transitions: state s -> s.x_j
    let mut trans: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_gen];
    for (si, s) in states.iter().enumerate() {
        for j in 0..n_gen {
            let mut ext = s.0.clone();
            ext.push(family.letter(j, false).map_err(MomentsError::Nc)?);
            if let Some(&ti) = index.get(&Word(ext)) {
                trans[j].push((si, ti));
            }
        }
    }
    let variances: Vec<GaussianRational> = (0..n_gen)
        .map(|j| GaussianRational::from_rat(family.variance(j).unwrap()))
        .collect();

    // P[(s,a),(e,b)] = coefficient of word(s) in entry (a,b); the empty word
    // has state index of Word::empty()
    let e_state = index[&Word::empty()];
    let mut p_mat = DenseMat::zeros(dim);
    for (si, s) in states.iter().enumerate() {
        for ai in 0..ell {
            for bi in 0..ell {
                let c = a.get(ai, bi).coefficient(s);
                if !c.is_zero() {
                    p_mat.set(si * ell + ai, e_state * ell + bi, c);
                }
            }
        }
    }

    let eta = |w: &DenseMat| -> DenseMat {
        let mut out = DenseMat::zeros(dim);
        for j in 0..n_gen {
            // T_j W T_j with T_j = trans_j (x) I_ell; the same (not
            // transposed) matrix sits on both sides because the paired
            // letters carry identical coefficient matrices
            for &(s_row, t_row) in &trans[j] {
                for &(s_col, t_col) in &trans[j] {
                    for ai in 0..ell {
                        for bi in 0..ell {
                            let v = w.get(t_row * ell + ai, s_col * ell + bi);
                            if !v.is_zero() {
                                let scaled = &variances[j] * v;
                                out.add_to(s_row * ell + ai, t_col * ell + bi, &scaled);
                            }
                        }
                    }
                }
            }
        }
        out
    };

    let iter_cap = 2 * max_depth + 6;
    // theta_0: X = I + eta(X) X
    let identity = DenseMat::identity(dim);
    let mut theta0 = identity.clone();
    let mut stabilized = false;
    for _ in 0..iter_cap {
        let next = identity.add(&eta(&theta0).mul(&theta0));
        if next == theta0 {
            stabilized = true;
            break;
        }
        theta0 = next;
    }
    if !stabilized {
        return Err(MomentsError::RecursionUnstable);
    }
    let eta0 = eta(&theta0);

    let mut thetas: Vec<DenseMat> = vec![theta0.clone()];
    let mut etas: Vec<DenseMat> = vec![eta0.clone()];
    let mut values = Vec::with_capacity(order + 1);
    values.push(Rat::one());
    let ell_inv = GaussianRational::from_int(ell as i64).inv().unwrap();

    for k in 1..=order {
        // m_k = trace(theta_{k-1} P)/ell
        let m = thetas[k - 1].trace_of_product(&p_mat);
        let m = &m * &ell_inv;
        if !m.is_real() {
            return Err(MomentsError::NonRealMoment);
        }
        values.push(m.re);
        if k == order {
            break;
        }
        // theta_k = RHS + eta(theta_0) theta_k + eta(theta_k) theta_0
        let mut rhs = p_mat.mul(&thetas[k - 1]);
        for i in 1..k {
            rhs = rhs.add(&etas[i].mul(&thetas[k - i]));
        }
        let mut x = rhs.clone();
        let mut ok = false;
        for _ in 0..iter_cap {
            let next = rhs.add(&eta0.mul(&x)).add(&eta(&x).mul(&theta0));
            if next == x {
                ok = true;
                break;
            }
            x = next;
        }
        if !ok {
            return Err(MomentsError::RecursionUnstable);
        }
        etas.push(eta(&x));
        thetas.push(x);
    }
    Ok(values)
}

/// Dense square matrix of Gaussian rationals; plain representation for the
/// transfer recursion.
#[derive(Clone, PartialEq, Eq)]
struct DenseMat {
    n: usize,
    data: Vec<GaussianRational>,
}

impl DenseMat {
    fn zeros(n: usize) -> Self {
        DenseMat {
            n,
            data: vec![GaussianRational::zero(); n * n],
        }
    }

    fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, GaussianRational::one());
        }
        m
    }

    fn get(&self, i: usize, j: usize) -> &GaussianRational {
        &self.data[i * self.n + j]
    }

    fn set(&mut self, i: usize, j: usize, v: GaussianRational) {
        self.data[i * self.n + j] = v;
    }

    fn add_to(&mut self, i: usize, j: usize, v: &GaussianRational) {
        self.data[i * self.n + j] += v;
    }

    fn add(&self, rhs: &DenseMat) -> DenseMat {
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
        out
    }

    fn mul(&self, rhs: &DenseMat) -> DenseMat {
        let n = self.n;
        let mut out = DenseMat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let b = rhs.get(k, j);
                    if !b.is_zero() {
                        let prod = a * b;
                        out.add_to(i, j, &prod);
                    }
                }
            }
        }
        out
    }

    fn trace_of_product(&self, rhs: &DenseMat) -> GaussianRational {
        let mut acc = GaussianRational::zero();
        for i in 0..self.n {
            for k in 0..self.n {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                let b = rhs.get(k, i);
                if !b.is_zero() {
                    acc += &(a * b);
                }
            }
        }
        acc
    }
}
