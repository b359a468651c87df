//! Numeric side of the engine: evaluate the Cauchy transform near the real
//! axis on a certified branch, invert to densities, detect atoms, snap masses
//! to the admissible lattice, extract support components, and estimate
//! spectral diagnostics at zero.
//!
//! Branch selection works by homotopy continuation: the Laurent series seeds
//! the transform high above the real axis where it converges, and the root of
//! the annihilating polynomial closest to the series value is tracked
//! downward with steps small enough that the tracked root never moves more
//! than a fraction of the minimal root gap.

use crate::moments::MomentSequence;
use crate::scalar::Rat;
use crate::series::AnnihilatorPoly;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CauchyError {
    #[error("|z| = {z_abs} is inside the series radius (norm bound {norm_bound})")]
    SeriesRadiusViolation { z_abs: f64, norm_bound: f64 },
    #[error("no annihilator root near the series seed (distance {dist:.3e}, tail bound {tail:.3e})")]
    SeedMismatch { dist: f64, tail: f64 },
    #[error("branch collision at height {height:.3e}: root gap {gap:.3e}")]
    BranchCollision { height: f64, gap: f64 },
    #[error("tracked root failed the residual tolerance at height {height:.3e} (residual {residual:.3e})")]
    ResidualTooLarge { height: f64, residual: f64 },
    #[error("tracked root has positive imaginary part {im:.3e} at height {height:.3e}")]
    PositiveImaginaryPart { height: f64, im: f64 },
    #[error("atom-mass ladder did not converge (last extrapolations {0:?})")]
    NonConvergentLadder(Vec<f64>),
    #[error("mass {mass} is not within {tol} of a lattice point k/{denominator}")]
    OffGridMass { mass: f64, tol: f64, denominator: u64 },
    #[error("annihilator is degenerate: {0}")]
    DegenerateAnnihilator(String),
    #[error("invalid support for this operation: {0}")]
    InvalidSupport(String),
    #[error("fewer than two resolved decades near zero ({0} resolved points)")]
    InsufficientDecades(usize),
    #[error("ladder is oscillating without stabilizing: {0}")]
    InconclusiveLadder(String),
}

/// Default epsilon ladder for Stieltjes inversion, decades from 1e-2 to 1e-6.
pub fn default_eps_ladder() -> Vec<f64> {
    vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6]
}

/// Uniformly spaced grid of `points` values covering `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    assert!(points >= 2);
    let step = (hi - lo) / (points - 1) as f64;
    (0..points).map(|i| lo + step * i as f64).collect()
}

/// Truncated Laurent evaluation of the Cauchy transform outside the spectral
/// radius, returning the value and a tail bound.
pub fn eval_g_series(z: Complex64, m: &MomentSequence) -> Result<(Complex64, f64), CauchyError> {
    let nb = m.norm_bound_f64();
    let za = z.norm();
    if za <= nb {
        return Err(CauchyError::SeriesRadiusViolation {
            z_abs: za,
            norm_bound: nb,
        });
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for v in m.values.iter().rev() {
        let vf = v.to_f64().unwrap_or(f64::NAN);
        acc = (acc + vf) / z;
    }
    let k = m.order();
    let ratio = nb / za;
    let tail = ratio.powi(k as i32 + 1) / (za - nb);
    Ok((acc, tail))
}

/// Branch-tracked evaluator for one verified annihilator and its moment data.
pub struct CauchyEvaluator {
    /// per g-degree, the z-polynomial coefficients (low degree first)
    g_polys: Vec<Vec<f64>>,
    moments: MomentSequence,
    norm_bound: f64,
}

impl CauchyEvaluator {
    pub fn new(p: &AnnihilatorPoly, m: &MomentSequence) -> Self {
        let g_polys: Vec<Vec<f64>> = (0..=p.deg_g())
            .map(|j| {
                p.g_slice(j)
                    .iter()
                    .map(bigint_to_f64)
                    .collect::<Vec<f64>>()
            })
            .collect();
        CauchyEvaluator {
            g_polys,
            norm_bound: m.norm_bound_f64(),
            moments: m.clone(),
        }
    }

    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    pub fn moments(&self) -> &MomentSequence {
        &self.moments
    }

    /// Coefficients of `g -> P(z, g)` at a fixed complex `z`.
    fn coeffs_at(&self, z: Complex64) -> Vec<Complex64> {
        self.g_polys.iter().map(|poly| horner(poly, z)).collect()
    }

    fn residual(&self, z: Complex64, g: Complex64) -> (f64, f64) {
        let coeffs = self.coeffs_at(z);
        let mut val = Complex64::new(0.0, 0.0);
        let mut scale = 0.0;
        let gm = g.norm().max(1.0);
        let mut gp = Complex64::new(1.0, 0.0);
        let mut gpn = 1.0;
        for c in &coeffs {
            val += c * gp;
            scale += c.norm() * gpn;
            gp *= g;
            gpn *= gm;
        }
        (val.norm(), scale.max(f64::MIN_POSITIVE))
    }

    fn newton_polish(&self, z: Complex64, mut g: Complex64) -> Complex64 {
        let coeffs = self.coeffs_at(z);
        for _ in 0..3 {
            let (p, dp) = horner_with_derivative(&coeffs, g);
            if dp.norm() < 1e-300 {
                break;
            }
            let step = p / dp;
            g -= step;
            if step.norm() < 1e-16 * g.norm().max(1.0) {
                break;
            }
        }
        g
    }

    /// Values of the tracked branch at `x + i t` for each target height in
    /// `targets` (strictly positive, sorted descending).
    pub fn branch_values(&self, x: f64, targets: &[f64]) -> Result<Vec<Complex64>, CauchyError> {
        assert!(
            targets.windows(2).all(|w| w[0] > w[1]) && targets.iter().all(|&t| t > 0.0),
            "targets must be positive and strictly decreasing"
        );
        // seed high enough that the series tail is negligible
        let mut height = self.norm_bound + 1.0;
        let mut seed = eval_g_series(Complex64::new(x, height), &self.moments)?;
        while seed.1 > 1e-10 && height < 1e4 * (self.norm_bound + 1.0) {
            height *= 1.5;
            seed = eval_g_series(Complex64::new(x, height), &self.moments)?;
        }
        let (series_val, tail) = seed;
        let roots0 = self.roots_at(Complex64::new(x, height));
        let (nearest, dist) = nearest_root(&roots0, series_val).ok_or(
            CauchyError::DegenerateAnnihilator("no roots at seed".into()),
        )?;
        let seed_tol = (3.0 * tail + 1e-8).max(1e-8);
        if dist > seed_tol {
            return Err(CauchyError::SeedMismatch { dist, tail });
        }

        let mut out = Vec::with_capacity(targets.len());
        let mut cur_t = height;
        let mut cur_g = nearest;
        for &target in targets {
            if target >= cur_t {
                // ladder value above the seed height: evaluate directly
                let z = Complex64::new(x, target);
                let g = self.track_step(z, cur_g)?;
                out.push(g);
                continue;
            }
            let mut factor = 0.5f64;
            while cur_t > target {
                let proposed = (cur_t * factor).max(target);
                let z = Complex64::new(x, proposed);
                match self.try_step(z, cur_g) {
                    Ok(g) => {
                        cur_t = proposed;
                        cur_g = g;
                        factor = (factor * 0.8).max(0.25);
                    }
                    Err(StepReject::Collision(gap)) => {
                        return Err(CauchyError::BranchCollision {
                            height: proposed,
                            gap,
                        });
                    }
                    Err(StepReject::TooFar) => {
                        factor = factor.sqrt();
                        if 1.0 - factor < 1e-12 {
                            return Err(CauchyError::BranchCollision {
                                height: proposed,
                                gap: 0.0,
                            });
                        }
                    }
                }
            }
            out.push(cur_g);
        }
        Ok(out)
    }

    /// Value of the tracked branch at `x + i eps`.
    pub fn eval_g_branch(&self, x: f64, eps: f64) -> Result<Complex64, CauchyError> {
        Ok(self.branch_values(x, &[eps])?[0])
    }

    fn roots_at(&self, z: Complex64) -> Vec<Complex64> {
        durand_kerner(&self.coeffs_at(z))
    }

    fn try_step(&self, z: Complex64, prev: Complex64) -> Result<Complex64, StepReject> {
        let roots = self.roots_at(z);
        let (nearest, d_move) = match nearest_root(&roots, prev) {
            Some(v) => v,
            None => return Err(StepReject::Collision(0.0)),
        };
        let gap = min_root_gap(&roots);
        if gap < 1e-13 * root_scale(&roots) {
            return Err(StepReject::Collision(gap));
        }
        if roots.len() > 1 && d_move > 0.45 * gap {
            return Err(StepReject::TooFar);
        }
        Ok(self.check_invariants(z, nearest)?)
    }

    fn track_step(&self, z: Complex64, prev: Complex64) -> Result<Complex64, CauchyError> {
        let roots = self.roots_at(z);
        let (nearest, _) = nearest_root(&roots, prev)
            .ok_or(CauchyError::DegenerateAnnihilator("no roots".into()))?;
        self.check_invariants(z, nearest)
    }

    fn check_invariants(&self, z: Complex64, g: Complex64) -> Result<Complex64, CauchyError> {
        let g = self.newton_polish(z, g);
        let (res, scale) = self.residual(z, g);
        if res > 1e-10 * scale {
            return Err(CauchyError::ResidualTooLarge {
                height: z.im,
                residual: res / scale,
            });
        }
        if g.im > 1e-7 {
            return Err(CauchyError::PositiveImaginaryPart {
                height: z.im,
                im: g.im,
            });
        }
        Ok(g)
    }
}

enum StepReject {
    TooFar,
    Collision(f64),
}

impl From<CauchyError> for StepReject {
    fn from(e: CauchyError) -> Self {
        match e {
            CauchyError::BranchCollision { gap, .. } => StepReject::Collision(gap),
            // residual or invariant failures at a trial point: retry smaller
            _ => StepReject::TooFar,
        }
    }
}

fn bigint_to_f64(c: &BigInt) -> f64 {
    c.to_f64().unwrap_or(f64::NAN)
}

fn horner(poly: &[f64], z: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for c in poly.iter().rev() {
        acc = acc * z + c;
    }
    acc
}

fn horner_with_derivative(coeffs: &[Complex64], g: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for c in coeffs.iter().rev() {
        dp = dp * g + p;
        p = p * g + c;
    }
    (p, dp)
}

fn nearest_root(roots: &[Complex64], target: Complex64) -> Option<(Complex64, f64)> {
    roots
        .iter()
        .map(|&r| (r, (r - target).norm()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

fn min_root_gap(roots: &[Complex64]) -> f64 {
    let mut gap = f64::INFINITY;
    for i in 0..roots.len() {
        for j in (i + 1)..roots.len() {
            gap = gap.min((roots[i] - roots[j]).norm());
        }
    }
    gap
}

fn root_scale(roots: &[Complex64]) -> f64 {
    roots.iter().map(|r| r.norm()).fold(1.0, f64::max)
}

/// All complex roots of a polynomial with complex coefficients (low degree
/// first) by the Weierstrass simultaneous iteration. Near-zero leading
/// coefficients are deflated, dropping the corresponding roots at infinity.
pub fn durand_kerner(coeffs: &[Complex64]) -> Vec<Complex64> {
    let max_c = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if max_c == 0.0 {
        return Vec::new();
    }
    let mut top = coeffs.len();
    while top > 1 && coeffs[top - 1].norm() <= 1e-14 * max_c {
        top -= 1;
    }
    let deg = top.saturating_sub(1);
    if deg == 0 {
        return Vec::new();
    }
    let lead = coeffs[deg];
    let monic: Vec<Complex64> = coeffs[..=deg].iter().map(|c| c / lead).collect();
    let radius = 1.0 + monic.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let rot = Complex64::new(0.4, 0.9);
    let mut w: Vec<Complex64> = (0..deg)
        .map(|i| radius * rot.powu(i as u32 + 1))
        .collect();
    for _ in 0..300 {
        let mut max_delta = 0.0f64;
        for i in 0..deg {
            let p = horner_c(&monic, w[i]);
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..deg {
                if j != i {
                    denom *= w[i] - w[j];
                }
            }
            if denom.norm() < 1e-300 {
                continue;
            }
            let delta = p / denom;
            w[i] -= delta;
            max_delta = max_delta.max(delta.norm() / w[i].norm().max(1.0));
        }
        if max_delta < 1e-14 {
            break;
        }
    }
    w
}

fn horner_c(poly: &[Complex64], z: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for c in poly.iter().rev() {
        acc = acc * z + c;
    }
    acc
}

/// Density samples on a grid, with per-point failures reported rather than
/// aborting the profile.
#[derive(Debug, Clone)]
pub struct DensityProfile {
    pub samples: Vec<(f64, f64)>,
    pub skipped: Vec<(f64, String)>,
}

/// Stieltjes inversion along the epsilon ladder with first-order Richardson
/// extrapolation; negative values within tolerance are clipped at zero.
pub fn density_profile(ev: &CauchyEvaluator, grid: &[f64], eps_ladder: &[f64]) -> DensityProfile {
    assert!(eps_ladder.len() >= 2, "ladder needs at least two heights");
    let results: Vec<(f64, Result<f64, CauchyError>)> = grid
        .par_iter()
        .map(|&x| {
            let r = ev.branch_values(x, eps_ladder).map(|vals| {
                let n = vals.len();
                let f_last = -vals[n - 1].im / std::f64::consts::PI;
                let f_prev = -vals[n - 2].im / std::f64::consts::PI;
                richardson(f_prev, f_last, eps_ladder[n - 2], eps_ladder[n - 1])
            });
            (x, r)
        })
        .collect();
    let mut samples = Vec::with_capacity(grid.len());
    let mut skipped = Vec::new();
    for (x, r) in results {
        match r {
            Ok(f) => samples.push((x, f.max(0.0))),
            Err(e) => skipped.push((x, e.to_string())),
        }
    }
    DensityProfile { samples, skipped }
}

/// First-order Richardson extrapolation to zero step from two values.
fn richardson(v_coarse: f64, v_fine: f64, h_coarse: f64, h_fine: f64) -> f64 {
    v_fine + (v_fine - v_coarse) * h_fine / (h_coarse - h_fine)
}

/// Real points where the tracked branch can be singular: real roots of the
/// discriminant with respect to `g` together with real roots of the leading
/// `g`-coefficient, restricted to the spectral interval.
pub fn atom_candidates(p: &AnnihilatorPoly, norm_bound: f64) -> Result<Vec<f64>, CauchyError> {
    let n = p.deg_g();
    if n == 0 {
        return Err(CauchyError::DegenerateAnnihilator("no g dependence".into()));
    }
    let mut roots: Vec<f64> = Vec::new();
    let lead: Vec<Rat> = p.g_slice(n).into_iter().map(Rat::from_integer).collect();
    roots.extend(real_roots_of_rational_poly(&lead));
    if n >= 2 {
        let disc = discriminant_in_g(p);
        if disc.iter().all(|c| c.is_zero()) {
            return Err(CauchyError::DegenerateAnnihilator(
                "identically zero discriminant".into(),
            ));
        }
        roots.extend(real_roots_of_rational_poly(&disc));
    }
    roots.retain(|x| x.abs() <= norm_bound + 1e-9);
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-8);
    Ok(roots)
}

/// Resultant of `P` and `dP/dg` with respect to `g`, an exact polynomial in
/// `z`, computed by evaluation at rational nodes and Lagrange interpolation.
fn discriminant_in_g(p: &AnnihilatorPoly) -> Vec<Rat> {
    let n = p.deg_g();
    let slices: Vec<Vec<Rat>> = (0..=n)
        .map(|j| p.g_slice(j).into_iter().map(Rat::from_integer).collect())
        .collect();
    let dslices: Vec<Vec<Rat>> = (1..=n)
        .map(|j| {
            slices[j]
                .iter()
                .map(|c| c * Rat::from_integer(j.into()))
                .collect()
        })
        .collect();
    let deg_bound = (2 * n - 1) * p.deg_z();
    let nodes: Vec<Rat> = (0..=deg_bound as i64)
        .map(|k| Rat::from_integer(k.into()))
        .collect();
    let mut values = Vec::with_capacity(nodes.len());
    for node in &nodes {
        let pv: Vec<Rat> = slices.iter().map(|s| eval_rat_poly(s, node)).collect();
        let dv: Vec<Rat> = dslices.iter().map(|s| eval_rat_poly(s, node)).collect();
        values.push(sylvester_resultant(&pv, &dv));
    }
    lagrange_interpolate(&nodes, &values)
}

fn eval_rat_poly(coeffs: &[Rat], x: &Rat) -> Rat {
    let mut acc = Rat::zero();
    for c in coeffs.iter().rev() {
        acc = acc * x + c;
    }
    acc
}

/// Resultant of two scalar polynomials given by coefficient vectors (low
/// degree first) via the Sylvester determinant.
fn sylvester_resultant(p: &[Rat], q: &[Rat]) -> Rat {
    let dp = trimmed_degree(p);
    let dq = trimmed_degree(q);
    let (dp, dq) = match (dp, dq) {
        (Some(a), Some(b)) => (a, b),
        _ => return Rat::zero(),
    };
    if dp == 0 && dq == 0 {
        return Rat::one();
    }
    let size = dp + dq;
    let mut m = vec![vec![Rat::zero(); size]; size];
    for row in 0..dq {
        for (k, c) in p.iter().take(dp + 1).enumerate() {
            m[row][row + dp - k] = c.clone();
        }
    }
    for row in 0..dp {
        for (k, c) in q.iter().take(dq + 1).enumerate() {
            m[dq + row][row + dq - k] = c.clone();
        }
    }
    rational_det(m)
}

fn trimmed_degree(p: &[Rat]) -> Option<usize> {
    p.iter().rposition(|c| !c.is_zero())
}

fn rational_det(mut m: Vec<Vec<Rat>>) -> Rat {
    let n = m.len();
    let mut det = Rat::one();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !m[r][col].is_zero());
        let Some(p) = pivot else { return Rat::zero() };
        if p != col {
            m.swap(p, col);
            det = -det;
        }
        let pv = m[col][col].clone();
        det *= &pv;
        for r in (col + 1)..n {
            if m[r][col].is_zero() {
                continue;
            }
            let factor = &m[r][col] / &pv;
            for c in col..n {
                let sub = &m[col][c] * &factor;
                m[r][c] -= sub;
            }
        }
    }
    det
}

fn lagrange_interpolate(nodes: &[Rat], values: &[Rat]) -> Vec<Rat> {
    let n = nodes.len();
    let mut result = vec![Rat::zero(); n];
    for i in 0..n {
        if values[i].is_zero() {
            continue;
        }
        // basis polynomial prod_{j != i} (x - x_j) / (x_i - x_j)
        let mut basis = vec![Rat::zero(); n];
        basis[0] = Rat::one();
        let mut deg = 0usize;
        let mut denom = Rat::one();
        for j in 0..n {
            if j == i {
                continue;
            }
            denom *= &nodes[i] - &nodes[j];
            for k in (0..=deg).rev() {
                let c = basis[k].clone();
                basis[k + 1] += &c;
                basis[k] = -(&c * &nodes[j]);
            }
            deg += 1;
        }
        let scale = &values[i] / denom;
        for (k, b) in basis.iter().take(deg + 1).enumerate() {
            result[k] += b * &scale;
        }
    }
    result
}

fn real_roots_of_rational_poly(coeffs: &[Rat]) -> Vec<f64> {
    let Some(deg) = trimmed_degree(coeffs) else {
        return Vec::new();
    };
    if deg == 0 {
        return Vec::new();
    }
    let scale = coeffs
        .iter()
        .map(|c| c.to_f64().map(f64::abs).unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);
    let cf: Vec<Complex64> = coeffs[..=deg]
        .iter()
        .map(|c| Complex64::new(c.to_f64().unwrap_or(f64::NAN) / scale, 0.0))
        .collect();
    let mut out: Vec<f64> = durand_kerner(&cf)
        .into_iter()
        .filter(|r| r.im.abs() <= 1e-8 * (1.0 + r.norm()))
        .map(|r| r.re)
        .collect();
    out.sort_by(f64::total_cmp);
    out.dedup_by(|a, b| (*a - *b).abs() <= 1e-8);
    out
}

/// Extrapolated residue limit at a candidate location; values below the atom
/// threshold mean "no atom there".
pub fn atom_mass(
    ev: &CauchyEvaluator,
    location: f64,
    eps_ladder: &[f64],
) -> Result<f64, CauchyError> {
    assert!(eps_ladder.len() >= 3, "ladder needs at least three heights");
    let vals = ev.branch_values(location, eps_ladder)?;
    let masses: Vec<f64> = vals
        .iter()
        .zip(eps_ladder)
        .map(|(g, &eps)| -eps * g.im)
        .collect();
    let mut extra = Vec::with_capacity(masses.len() - 1);
    for i in 1..masses.len() {
        extra.push(richardson(
            masses[i - 1],
            masses[i],
            eps_ladder[i - 1],
            eps_ladder[i],
        ));
    }
    let n = extra.len();
    let last = extra[n - 1];
    let prev = extra[n - 2];
    if (last - prev).abs() > (1e-4_f64).max(1e-2 * last.abs()) {
        return Err(CauchyError::NonConvergentLadder(extra));
    }
    Ok(last.max(0.0))
}

/// The lattice `(1/(d*ell)) Z` that atom masses must land on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AtiyahGrid {
    pub d: u64,
    pub ell: u64,
}

impl AtiyahGrid {
    pub fn new(d: u64, ell: u64) -> Self {
        assert!(d >= 1 && ell >= 1);
        AtiyahGrid { d, ell }
    }

    pub fn denominator(&self) -> u64 {
        self.d * self.ell
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.denominator() as f64
    }
}

/// Snap a numeric mass to the nearest lattice point, failing loudly when it
/// is farther than the tolerance (which signals a numerical or modeling bug,
/// not an admissible outcome).
pub fn snap_to_grid(mass: f64, grid: AtiyahGrid, tol: f64) -> Result<Rat, CauchyError> {
    let den = grid.denominator();
    let k = (mass * den as f64).round();
    let snapped = k / den as f64;
    if (mass - snapped).abs() > tol || !(0.0..=1.0 + tol).contains(&mass) {
        return Err(CauchyError::OffGridMass {
            mass,
            tol,
            denominator: den,
        });
    }
    Ok(Rat::new(BigInt::from(k as i64), BigInt::from(den)))
}

/// Maximal intervals where the sampled density exceeds the threshold;
/// single-point dips inside a run are bridged.
pub fn support_components(samples: &[(f64, f64)], threshold: f64) -> Vec<(f64, f64)> {
    let above: Vec<bool> = samples.iter().map(|&(_, f)| f > threshold).collect();
    let mut merged = above.clone();
    for i in 1..samples.len().saturating_sub(1) {
        if !above[i] && above[i - 1] && above[i + 1] {
            merged[i] = true;
        }
    }
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, &up) in merged.iter().enumerate() {
        match (up, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((samples[s].0, samples[i - 1].0));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((samples[s].0, samples[samples.len() - 1].0));
    }
    out
}

/// Atoms plus density samples on a uniform grid: the computed model of a
/// spectral measure.
#[derive(Debug, Clone)]
pub struct SpectralMeasureModel {
    pub atoms: Vec<(f64, Rat)>,
    pub density: Vec<(f64, f64)>,
    pub norm_bound: f64,
}

impl SpectralMeasureModel {
    pub fn atom_mass_total(&self) -> f64 {
        self.atoms
            .iter()
            .map(|(_, m)| m.to_f64().unwrap_or(0.0))
            .sum()
    }

    pub fn density_mass(&self) -> f64 {
        trapezoid(&self.density)
    }

    pub fn total_mass(&self) -> f64 {
        self.atom_mass_total() + self.density_mass()
    }

    /// Mass inside `[lo, hi]`: trapezoid over the samples plus atoms inside.
    pub fn mass_in(&self, lo: f64, hi: f64) -> f64 {
        let inside: Vec<(f64, f64)> = self
            .density
            .iter()
            .copied()
            .filter(|&(x, _)| x >= lo && x <= hi)
            .collect();
        let mut m = trapezoid(&inside);
        for (loc, mass) in &self.atoms {
            if *loc >= lo && *loc <= hi {
                m += mass.to_f64().unwrap_or(0.0);
            }
        }
        m
    }

    /// Check the probability normalization and support bound.
    pub fn validate(&self, tol: f64) -> Result<(), CauchyError> {
        let total = self.total_mass();
        if (total - 1.0).abs() > tol {
            return Err(CauchyError::InvalidSupport(format!(
                "total mass {total} not within {tol} of 1"
            )));
        }
        for &(x, f) in &self.density {
            if f > 0.0 && x.abs() > self.norm_bound + 1e-6 {
                return Err(CauchyError::InvalidSupport(format!(
                    "density support at {x} outside norm bound {}",
                    self.norm_bound
                )));
            }
        }
        Ok(())
    }
}

fn trapezoid(samples: &[(f64, f64)]) -> f64 {
    samples
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub enum LogEnergyOutcome {
    Finite(f64),
    /// Partial integrals keep losing about this much per decade.
    Divergent { per_decade: f64 },
}

/// Estimate of the logarithmic energy of a measure supported in
/// `[0, norm_bound]`, by cutting at a ladder of lower limits and watching the
/// partial integrals stabilize. An atom exactly at zero is excluded.
pub fn log_energy(model: &SpectralMeasureModel) -> Result<LogEnergyOutcome, CauchyError> {
    for &(x, f) in &model.density {
        if x < -1e-9 && f > 1e-12 {
            return Err(CauchyError::InvalidSupport(format!(
                "density at negative location {x}"
            )));
        }
    }
    for &(loc, _) in &model.atoms {
        if loc < -1e-9 {
            return Err(CauchyError::InvalidSupport(format!(
                "atom at negative location {loc}"
            )));
        }
    }
    let ladder = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6];
    let partials: Vec<f64> = ladder
        .iter()
        .map(|&eps| partial_log_integral(model, eps))
        .collect();
    let diffs: Vec<f64> = partials.windows(2).map(|w| w[1] - w[0]).collect();
    let last = *diffs.last().unwrap();
    let prev = diffs[diffs.len() - 2];
    if last.abs() <= 1e-3 {
        return Ok(LogEnergyOutcome::Finite(*partials.last().unwrap()));
    }
    if last < 0.0 && prev < 0.0 && last.abs() >= 0.9 * prev.abs() {
        return Ok(LogEnergyOutcome::Divergent { per_decade: last });
    }
    Err(CauchyError::InconclusiveLadder(format!(
        "partial integrals {partials:?}"
    )))
}

fn partial_log_integral(model: &SpectralMeasureModel, eps: f64) -> f64 {
    let mut acc = 0.0;
    for (loc, mass) in &model.atoms {
        if *loc > eps {
            acc += mass.to_f64().unwrap_or(0.0) * loc.ln();
        }
    }
    let pts: Vec<(f64, f64)> = model
        .density
        .iter()
        .filter(|&&(x, _)| x > eps)
        .map(|&(x, f)| (x, f * x.ln()))
        .collect();
    acc + trapezoid(&pts)
}

#[derive(Debug, Clone, PartialEq)]
pub enum NsOutcome {
    Value(f64),
    /// The distribution function is flat at resolution in a neighborhood of
    /// zero: zero is isolated in the spectrum.
    InfinityPlus,
}

/// Power-law exponent of `F(t) - F(0)` as `t -> 0+`, fitted over the
/// smallest resolved decade of the supplied samples.
pub fn novikov_shubin(samples: &[(f64, f64)], f_at_zero: f64) -> Result<NsOutcome, CauchyError> {
    const RESOLUTION: f64 = 1e-9;
    let mut pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|&&(t, _)| t > 0.0)
        .map(|&(t, f)| (t, f - f_at_zero))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pts.is_empty() {
        return Err(CauchyError::InsufficientDecades(0));
    }
    let t_min = pts[0].0;
    let resolved: Vec<(f64, f64)> = pts
        .iter()
        .copied()
        .filter(|&(_, df)| df > RESOLUTION)
        .collect();
    if resolved.is_empty() {
        return Ok(NsOutcome::InfinityPlus);
    }
    let t_r = resolved[0].0;
    if t_r >= 10.0 * t_min {
        // flat for at least a decade above the sampling floor
        return Ok(NsOutcome::InfinityPlus);
    }
    let t_max = resolved.last().unwrap().0;
    let decade: Vec<(f64, f64)> = resolved
        .iter()
        .copied()
        .filter(|&(t, _)| t < 10.0 * t_r)
        .collect();
    if decade.len() < 2 || t_max < 10.0 * t_r {
        return Err(CauchyError::InsufficientDecades(resolved.len()));
    }
    // least squares ln(dF) against ln(t) over the smallest decade
    let n = decade.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(t, df) in &decade {
        let x = t.ln();
        let y = df.ln();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-30 {
        return Err(CauchyError::InsufficientDecades(decade.len()));
    }
    Ok(NsOutcome::Value((n * sxy - sx * sy) / denom))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::{moment_sequence, TraceOracle};
    use crate::ncpoly::{Family, MatrixPolynomial, NcPolynomial};
    use crate::series::{find_annihilator, DEFAULT_MARGIN};
    use approx::assert_abs_diff_eq;

    fn semicircle() -> (AnnihilatorPoly, MomentSequence) {
        let f = Family::standard_semicircular(1);
        let o = TraceOracle::new(f.clone());
        let mut a = MatrixPolynomial::zero(f.clone(), 1, 1);
        a.set(0, 0, NcPolynomial::generator(&f, 0).unwrap());
        let m = moment_sequence(&o, &a, 60).unwrap();
        let p = find_annihilator(&m, 8, 8, DEFAULT_MARGIN).unwrap();
        (p, m)
    }

    fn point_mass_at_zero() -> (AnnihilatorPoly, MomentSequence) {
        let mut values = vec![Rat::zero(); 41];
        values[0] = Rat::one();
        let m = MomentSequence {
            values,
            element_norm_bound: Rat::one(),
        };
        let p = find_annihilator(&m, 8, 8, DEFAULT_MARGIN).unwrap();
        (p, m)
    }

    #[test]
    fn series_evaluation() {
        let (_, m) = point_mass_at_zero();
        let (v, _) = eval_g_series(Complex64::new(2.0, 0.0), &m).unwrap();
        assert_abs_diff_eq!(v.re, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-12);

        let (_, msc) = semicircle();
        let (v, tail) = eval_g_series(Complex64::new(3.0, 0.0), &msc).unwrap();
        let expect = (3.0 - 5.0_f64.sqrt()) / 2.0;
        assert!(tail < 1e-6);
        assert_abs_diff_eq!(v.re, expect, epsilon = 1e-6);

        // reflection symmetry
        let z = Complex64::new(2.7, 1.3);
        let (a, _) = eval_g_series(z, &msc).unwrap();
        let (b, _) = eval_g_series(z.conj(), &msc).unwrap();
        assert_abs_diff_eq!(a.re, b.re, epsilon = 1e-13);
        assert_abs_diff_eq!(a.im, -b.im, epsilon = 1e-13);

        assert!(matches!(
            eval_g_series(Complex64::new(1.0, 0.0), &msc),
            Err(CauchyError::SeriesRadiusViolation { .. })
        ));
    }

    #[test]
    fn branch_values_on_semicircle() {
        let (p, m) = semicircle();
        let ev = CauchyEvaluator::new(&p, &m);
        // at the center the transform tends to -i
        let g = ev.eval_g_branch(0.0, 1e-6).unwrap();
        assert_abs_diff_eq!(g.re, 0.0, epsilon = 1e-5);
        assert_abs_diff_eq!(g.im, -1.0, epsilon = 1e-5);
        // outside the support the limit is real
        let g = ev.eval_g_branch(3.0, 1e-7).unwrap();
        assert_abs_diff_eq!(g.re, (3.0 - 5.0_f64.sqrt()) / 2.0, epsilon = 1e-5);
        assert!(g.im.abs() < 1e-5);
        // branch agrees with the series where both are valid
        let (sv, tail) = eval_g_series(Complex64::new(1.1, 2.6), &m).unwrap();
        let bv = ev.branch_values(1.1, &[2.6]).unwrap()[0];
        assert!((sv - bv).norm() <= 10.0 * tail + 1e-9);
    }

    #[test]
    fn branch_on_point_mass() {
        let (p, m) = point_mass_at_zero();
        let ev = CauchyEvaluator::new(&p, &m);
        let g = ev.eval_g_branch(1.0, 1e-8).unwrap();
        assert_abs_diff_eq!(g.re, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn semicircle_density() {
        let (p, m) = semicircle();
        let ev = CauchyEvaluator::new(&p, &m);
        let grid = linspace(-3.0, 3.0, 601);
        let prof = density_profile(&ev, &grid, &default_eps_ladder());
        assert!(prof.skipped.is_empty(), "skipped: {:?}", prof.skipped);
        for &(x, f) in &prof.samples {
            let truth = if x.abs() < 2.0 {
                (4.0 - x * x).sqrt() / (2.0 * std::f64::consts::PI)
            } else {
                0.0
            };
            if x.abs() <= 1.9 || x.abs() >= 2.1 {
                assert_abs_diff_eq!(f, truth, epsilon = 2e-3);
            }
        }
        let model = SpectralMeasureModel {
            atoms: vec![],
            density: prof.samples.clone(),
            norm_bound: 2.0,
        };
        assert!(model.validate(1e-3).is_ok());
        let comps = support_components(&prof.samples, 1e-4);
        assert_eq!(comps.len(), 1);
        let step = grid[1] - grid[0];
        assert!((comps[0].0 + 2.0).abs() <= 2.0 * step);
        assert!((comps[0].1 - 2.0).abs() <= 2.0 * step);
    }

    #[test]
    fn atom_candidates_examples() {
        let (p, _) = semicircle();
        let cands = atom_candidates(&p, 2.0).unwrap();
        assert_eq!(cands.len(), 2);
        assert_abs_diff_eq!(cands[0], -2.0, epsilon = 1e-8);
        assert_abs_diff_eq!(cands[1], 2.0, epsilon = 1e-8);

        let (pz, _) = point_mass_at_zero();
        let cands = atom_candidates(&pz, 1.0).unwrap();
        assert_eq!(cands.len(), 1);
        assert_abs_diff_eq!(cands[0], 0.0, epsilon = 1e-10);

        // g (z - 5) - 1: shifted point mass
        let coeffs = vec![
            vec![BigInt::from(-1), BigInt::from(-5)],
            vec![BigInt::from(0), BigInt::from(1)],
        ];
        let shifted = AnnihilatorPoly::from_coeffs(coeffs);
        let cands = atom_candidates(&shifted, 6.0).unwrap();
        assert_eq!(cands.len(), 1);
        assert_abs_diff_eq!(cands[0], 5.0, epsilon = 1e-8);
    }

    #[test]
    fn atom_masses() {
        let ladder = default_eps_ladder();
        let (pz, mz) = point_mass_at_zero();
        let ev = CauchyEvaluator::new(&pz, &mz);
        let mass = atom_mass(&ev, 0.0, &ladder).unwrap();
        assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-6);

        let (p, m) = semicircle();
        let ev = CauchyEvaluator::new(&p, &m);
        let mass = atom_mass(&ev, 2.0, &ladder).unwrap();
        assert!(mass < 1e-4, "edge mass {mass}");
    }

    #[test]
    fn corner_projection_atom_has_half_mass() {
        // [[S,0],[0,0]]: atom of mass 1/2 at zero
        let f = Family::standard_semicircular(1);
        let o = TraceOracle::new(f.clone());
        let mut a = MatrixPolynomial::zero(f.clone(), 2, 2);
        a.set(0, 0, NcPolynomial::generator(&f, 0).unwrap());
        let m = moment_sequence(&o, &a, 60).unwrap();
        let p = find_annihilator(&m, 8, 8, DEFAULT_MARGIN).unwrap();
        let ev = CauchyEvaluator::new(&p, &m);
        let cands = atom_candidates(&p, m.norm_bound_f64()).unwrap();
        assert!(cands.iter().any(|c| c.abs() < 1e-8), "candidates {cands:?}");
        let mass = atom_mass(&ev, 0.0, &default_eps_ladder()).unwrap();
        assert_abs_diff_eq!(mass, 0.5, epsilon = 1e-4);
        let snapped = snap_to_grid(mass, AtiyahGrid::new(1, 2), 1e-2).unwrap();
        assert_eq!(snapped, Rat::new(1.into(), 2.into()));
    }

    #[test]
    fn snapping() {
        let grid = AtiyahGrid::new(1, 2);
        assert_eq!(
            snap_to_grid(0.4999, grid, 1e-2).unwrap(),
            Rat::new(1.into(), 2.into())
        );
        assert!(snap_to_grid(0.33, grid, 1e-2).is_err());
        assert_eq!(snap_to_grid(0.0, grid, 1e-2).unwrap(), Rat::zero());
    }

    #[test]
    fn support_merges_single_point_dips() {
        let samples = vec![
            (0.0, 1.0),
            (1.0, 1.0),
            (2.0, 0.0),
            (3.0, 1.0),
            (4.0, 0.0),
            (5.0, 0.0),
            (6.0, 1.0),
        ];
        let comps = support_components(&samples, 0.5);
        assert_eq!(comps, vec![(0.0, 3.0), (6.0, 6.0)]);
    }

    #[test]
    fn log_energy_controls() {
        // uniform density on [0, 1]
        let grid = linspace(0.0, 1.0, 2001);
        let density: Vec<(f64, f64)> = grid.iter().map(|&x| (x, 1.0)).collect();
        let model = SpectralMeasureModel {
            atoms: vec![],
            density,
            norm_bound: 1.0,
        };
        match log_energy(&model).unwrap() {
            LogEnergyOutcome::Finite(v) => assert_abs_diff_eq!(v, -1.0, epsilon = 1e-2),
            other => panic!("unexpected {other:?}"),
        }
        // point mass at 1
        let model = SpectralMeasureModel {
            atoms: vec![(1.0, Rat::one())],
            density: vec![],
            norm_bound: 1.0,
        };
        match log_energy(&model).unwrap() {
            LogEnergyOutcome::Finite(v) => assert_abs_diff_eq!(v, 0.0, epsilon = 1e-12),
            other => panic!("unexpected {other:?}"),
        }
        // negative support is rejected
        let model = SpectralMeasureModel {
            atoms: vec![(-1.0, Rat::one())],
            density: vec![],
            norm_bound: 1.0,
        };
        assert!(log_energy(&model).is_err());
    }

    #[test]
    fn novikov_shubin_power_laws() {
        for (alpha, expect) in [(1.0, 1.0), (0.5, 0.5), (2.0, 2.0)] {
            let samples: Vec<(f64, f64)> = (1..=4000)
                .map(|i| {
                    let t = i as f64 * 2.5e-5;
                    (t, t.powf(alpha))
                })
                .collect();
            match novikov_shubin(&samples, 0.0).unwrap() {
                NsOutcome::Value(v) => assert_abs_diff_eq!(v, expect, epsilon = 0.05 * expect),
                other => panic!("unexpected {other:?}"),
            }
        }
        // isolated zero: flat below the gap
        let samples: Vec<(f64, f64)> = (1..=4000)
            .map(|i| {
                let t = i as f64 * 2.5e-5;
                (t, if t < 0.05 { 0.25 } else { 0.25 + (t - 0.05) })
            })
            .collect();
        match novikov_shubin(&samples, 0.25).unwrap() {
            NsOutcome::InfinityPlus => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn durand_kerner_finds_known_roots() {
        // (g - 1)(g - 2i)(g + 3) with complex coefficients
        let r1 = Complex64::new(1.0, 0.0);
        let r2 = Complex64::new(0.0, 2.0);
        let r3 = Complex64::new(-3.0, 0.0);
        let c0 = -(r1 * r2 * r3);
        let c1 = r1 * r2 + r1 * r3 + r2 * r3;
        let c2 = -(r1 + r2 + r3);
        let coeffs = vec![c0, c1, c2, Complex64::new(1.0, 0.0)];
        let mut roots = durand_kerner(&coeffs);
        roots.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert_eq!(roots.len(), 3);
        assert!((roots[0] - r3).norm() < 1e-10);
        assert!((roots[1] - r2).norm() < 1e-10);
        assert!((roots[2] - r1).norm() < 1e-10);
        // degree collapse drops roots at infinity
        let tiny = vec![
            Complex64::new(-1.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(1e-18, 0.0),
        ];
        assert_eq!(durand_kerner(&tiny).len(), 1);
    }
}
