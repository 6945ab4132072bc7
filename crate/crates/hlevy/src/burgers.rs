//! The limiting laws {μ_t} of the ensemble spectra, computed by solving the
//! complex Burgers equation for the Stieltjes transform ψ(t, z) along
//! characteristics.
//!
//! ψ satisfies
//!
//! ```text
//! ∂_t ψ = −∂_z ψ · [ σ² ψ + η + ∫ (ψ + r)/(1 − r ψ) ρ(dr) ]
//! ```
//!
//! over ℝ\{0}, and the bracket equals φ(1/ψ) with φ the Voiculescu
//! transform of the generating pair: on atoms, (w + r)/(1 − r w) is exactly
//! (1 + r u)/(u − r) at u = 1/w. The equation therefore transports ψ at
//! velocity φ(1/ψ), and with μ₀ = δ₀ the solution is implicit:
//!
//! ```text
//! ψ(t, ζ) = 1/u   where   ζ = u + t φ(u),  Im u > 0.
//! ```
//!
//! The implicit equation is solved by damped Newton iteration with
//! continuation in t, keeping every iterate in the upper half-plane (the
//! Herglotz branch). Densities come from Stieltjes inversion on an ε-ladder
//! with Richardson extrapolation; an atom at 0 (free Poisson mass deficit)
//! is estimated from ε · Im ψ(iε) and its Cauchy kernel is subtracted
//! before inversion so the remaining density is the absolutely continuous
//! part.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::measures::{self, free_cumulants, GeneratingPair};

/// Numerical controls of the characteristic solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    /// Residual target for |ζ − u − t φ(u)|, relative to max(1, |ζ|).
    pub newton_tol: f64,
    /// Maximum accepted continuation stages in t.
    pub max_continuation_steps: usize,
    /// Step halving stops at this fraction of t.
    pub min_step_fraction: f64,
    /// ε-ladder for Stieltjes inversion (Richardson over ε, ε/2, ε/4).
    pub eps_ladder: [f64; 3],
    /// Mass-deficit threshold below which no atom is reported.
    pub atom_threshold: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            newton_tol: 1e-12,
            max_continuation_steps: 64,
            min_step_fraction: 1e-4,
            eps_ladder: [1e-2, 5e-3, 2.5e-3],
            atom_threshold: 1e-3,
        }
    }
}

impl SolverSettings {
    fn validate(&self) -> Result<()> {
        if !(self.newton_tol > 0.0)
            || !(self.min_step_fraction > 0.0)
            || self.eps_ladder.iter().any(|e| !(*e > 0.0))
            || !(self.atom_threshold > 0.0)
        {
            return Err(Error::Domain("solver tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Cumulative table of the absolutely continuous part on its support
/// bracket.
#[derive(Debug, Clone)]
struct CdfTable {
    lo: f64,
    hi: f64,
    /// cumulative[i] = ∫_lo^{x_i} density, on a uniform grid.
    cumulative: Vec<f64>,
}

impl CdfTable {
    fn eval(&self, x: f64) -> f64 {
        let n = self.cumulative.len();
        if x <= self.lo {
            return 0.0;
        }
        if x >= self.hi {
            return self.cumulative[n - 1];
        }
        let s = (x - self.lo) / (self.hi - self.lo) * (n - 1) as f64;
        let i = (s as usize).min(n - 2);
        let frac = s - i as f64;
        self.cumulative[i] * (1.0 - frac) + self.cumulative[i + 1] * frac
    }

    fn total(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }
}

/// The law μ_t of the limiting free Lévy process at time t, for a given
/// generating pair. μ₀ = δ₀ is built in.
#[derive(Debug)]
pub struct LimitLaw {
    pub pair: GeneratingPair,
    pub t: f64,
    pub settings: SolverSettings,
    atom_cache: OnceLock<f64>,
    table_cache: OnceLock<CdfTable>,
}

impl Clone for LimitLaw {
    fn clone(&self) -> Self {
        Self {
            pair: self.pair.clone(),
            t: self.t,
            settings: self.settings.clone(),
            atom_cache: self.atom_cache.clone(),
            table_cache: self.table_cache.clone(),
        }
    }
}

impl LimitLaw {
    pub fn new(pair: GeneratingPair, t: f64) -> Result<Self> {
        Self::with_settings(pair, t, SolverSettings::default())
    }

    pub fn with_settings(pair: GeneratingPair, t: f64, settings: SolverSettings) -> Result<Self> {
        pair.validate()?;
        settings.validate()?;
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("time must be >= 0, got {t}")));
        }
        Ok(Self {
            pair,
            t,
            settings,
            atom_cache: OnceLock::new(),
            table_cache: OnceLock::new(),
        })
    }

    /// The law is a Dirac mass (t = 0, or a pure-drift pair).
    fn dirac_location(&self) -> Option<f64> {
        if self.t == 0.0 {
            Some(0.0)
        } else if self.pair.rho_mass() == 0.0 {
            Some(self.pair.eta * self.t)
        } else {
            None
        }
    }

    /// Solve ζ = u + t φ(u) for u in the upper half-plane by damped Newton
    /// with continuation in t, starting from u = ζ at t = 0.
    fn solve_characteristic(&self, zeta: Complex64) -> Result<Complex64> {
        let t_final = self.t;
        let scale = zeta.norm().max(1.0);
        let tol = self.settings.newton_tol * scale;
        let mut u = zeta;
        if t_final == 0.0 {
            return Ok(u);
        }
        let mut t_cur = 0.0;
        let mut dt = t_final;
        let mut accepted = 0usize;
        while t_cur < t_final {
            let t_next = (t_cur + dt).min(t_final);
            match self.newton_at(u, t_next, zeta, tol) {
                Some(next) => {
                    u = next;
                    t_cur = t_next;
                    accepted += 1;
                    if accepted > self.settings.max_continuation_steps {
                        return Err(self.branch_error(zeta, u, "continuation budget exhausted"));
                    }
                    dt *= 2.0;
                }
                None => {
                    dt *= 0.5;
                    if dt < self.settings.min_step_fraction * t_final {
                        return Err(self.branch_error(
                            zeta,
                            u,
                            "Newton continuation failed to converge",
                        ));
                    }
                }
            }
        }
        Ok(u)
    }

    fn branch_error(&self, z: Complex64, last: Complex64, msg: &str) -> Error {
        Error::Branch {
            z,
            t: self.t,
            last_iterate: last,
            message: msg.into(),
        }
    }

    /// One damped Newton solve of F(u) = u + t φ(u) − ζ at fixed t,
    /// constrained to Im u > 0. Returns None on failure.
    fn newton_at(&self, start: Complex64, t: f64, zeta: Complex64, tol: f64) -> Option<Complex64> {
        let f = |u: Complex64| u + t * measures::phi_unchecked(&self.pair, u) - zeta;
        let mut u = start;
        if !(u.im > 0.0) {
            return None;
        }
        let mut fu = f(u);
        for _ in 0..100 {
            if fu.norm() <= tol {
                return Some(u);
            }
            let dfu = 1.0 + t * measures::phi_derivative(&self.pair, u);
            if dfu.norm() == 0.0 {
                return None;
            }
            let step = -fu / dfu;
            // Damp until the iterate stays in ℂ⁺ and the residual shrinks.
            let mut beta = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let cand = u + beta * step;
                if cand.im > 0.0 {
                    let fc = f(cand);
                    if fc.norm() < fu.norm() {
                        u = cand;
                        fu = fc;
                        moved = true;
                        break;
                    }
                }
                beta *= 0.5;
            }
            if !moved {
                return None;
            }
        }
        if fu.norm() <= tol {
            Some(u)
        } else {
            None
        }
    }

    /// ψ_μ(t, z) = ∫ (z − x)^{-1} μ_t(dx), Im z > 0 → Im ψ < 0.
    pub fn cauchy_transform(&self, z: Complex64) -> Result<Complex64> {
        if !(z.im > 0.0) {
            return Err(Error::Domain(format!(
                "cauchy_transform requires Im z > 0, got z = {z}"
            )));
        }
        let u = self.solve_characteristic(z)?;
        Ok(1.0 / u)
    }

    /// Mass of the atom at 0 (0 when below the detection threshold).
    ///
    /// ε·(−Im ψ(iε)) tends to the atom mass; it is extrapolated over the
    /// ε-ladder and accepted only when the raw values are already nearly
    /// constant, which separates a true atom (O(ε²) variation) from a
    /// hard-edge √ε artefact.
    pub fn atom_at_zero(&self) -> Result<f64> {
        if let Some(a) = self.atom_cache.get() {
            return Ok(*a);
        }
        let a = self.compute_atom()?;
        Ok(*self.atom_cache.get_or_init(|| a))
    }

    fn compute_atom(&self) -> Result<f64> {
        if let Some(loc) = self.dirac_location() {
            return Ok(if loc == 0.0 { 1.0 } else { 0.0 });
        }
        let ladder = self.settings.eps_ladder;
        let mut raw = [0.0; 3];
        for (k, &eps) in ladder.iter().enumerate() {
            let psi = self.cauchy_transform(Complex64::new(0.0, eps))?;
            raw[k] = eps * (-psi.im);
        }
        let largest = raw.iter().cloned().fold(f64::MIN, f64::max);
        let smallest = raw.iter().cloned().fold(f64::MAX, f64::min);
        if largest <= 0.0 || (largest - smallest) / largest > 0.15 {
            return Ok(0.0);
        }
        let a = richardson(raw);
        if a < self.settings.atom_threshold {
            Ok(0.0)
        } else {
            Ok(a.min(1.0))
        }
    }

    /// Density of the absolutely continuous part at x: Stieltjes inversion
    /// −(1/π) Im ψ(x + iε), Richardson-extrapolated over the ε-ladder, with
    /// the atom kernel removed first; small negative artefacts clip to 0.
    pub fn density(&self, x: f64) -> Result<f64> {
        if self.dirac_location().is_some() {
            return Ok(0.0);
        }
        let atom = self.atom_at_zero()?;
        let ladder = self.settings.eps_ladder;
        let mut vals = [0.0; 3];
        for (k, &eps) in ladder.iter().enumerate() {
            let z = Complex64::new(x, eps);
            let mut psi = self.cauchy_transform(z)?;
            if atom > 0.0 {
                psi -= atom / z;
            }
            vals[k] = -psi.im / PI;
        }
        Ok(richardson(vals).max(0.0))
    }

    fn table(&self) -> Result<&CdfTable> {
        if let Some(t) = self.table_cache.get() {
            return Ok(t);
        }
        let t = self.build_table()?;
        Ok(self.table_cache.get_or_init(|| t))
    }

    fn build_table(&self) -> Result<CdfTable> {
        let k = free_cumulants(&self.pair, 2)?;
        let center = self.t * k[0];
        let sd = (self.t * k[1]).sqrt().max(1e-3);
        let threshold = 1e-10;
        let probe = sd / 8.0;

        // March outward until three consecutive probes sit below threshold.
        let scan = |mut x: f64, dir: f64| -> Result<f64> {
            let mut clean = 0;
            let limit = 400.0;
            let mut steps = 0.0;
            loop {
                if self.density(x)? < threshold {
                    clean += 1;
                    if clean == 3 {
                        return Ok(x);
                    }
                } else {
                    clean = 0;
                }
                x += dir * probe;
                steps += 1.0;
                if steps > limit * 8.0 {
                    return Err(Error::Domain(
                        "support bracket scan did not terminate".into(),
                    ));
                }
            }
        };
        let lo = scan(center - 2.0 * sd, -1.0)?;
        let hi = scan(center + 2.0 * sd, 1.0)?;

        // Cumulative integral on a uniform grid, each cell refined by
        // adaptive trapezoid.
        let cells = 1024usize;
        let h = (hi - lo) / cells as f64;
        let mut cumulative = Vec::with_capacity(cells + 1);
        cumulative.push(0.0);
        let mut acc = 0.0;
        let mut f_left = self.density(lo)?;
        for i in 0..cells {
            let a = lo + i as f64 * h;
            let b = a + h;
            let f_right = self.density(b)?;
            acc += self.adaptive_trapezoid(a, b, f_left, f_right, 2e-10, 0)?;
            cumulative.push(acc);
            f_left = f_right;
        }
        Ok(CdfTable { lo, hi, cumulative })
    }

    fn adaptive_trapezoid(
        &self,
        a: f64,
        b: f64,
        fa: f64,
        fb: f64,
        tol: f64,
        depth: usize,
    ) -> Result<f64> {
        let m = 0.5 * (a + b);
        let fm = self.density(m)?;
        let coarse = 0.5 * (fa + fb) * (b - a);
        let fine = 0.25 * (fa + 2.0 * fm + fb) * (b - a);
        if depth >= 12 || (fine - coarse).abs() <= 3.0 * tol {
            // Romberg correction of the two-panel estimate.
            Ok(fine + (fine - coarse) / 3.0)
        } else {
            Ok(self.adaptive_trapezoid(a, m, fa, fm, tol / 2.0, depth + 1)?
                + self.adaptive_trapezoid(m, b, fm, fb, tol / 2.0, depth + 1)?)
        }
    }

    /// CDF of μ_t: integral of the density from the lower support bracket,
    /// plus the atom jump at 0; clipped into [0, 1].
    pub fn cdf(&self, x: f64) -> Result<f64> {
        if let Some(loc) = self.dirac_location() {
            return Ok(if x >= loc { 1.0 } else { 0.0 });
        }
        let atom = self.atom_at_zero()?;
        let table = self.table()?;
        let mut v = table.eval(x);
        if atom > 0.0 && x >= 0.0 {
            v += atom;
        }
        Ok(v.clamp(0.0, 1.0))
    }

    /// Total detected mass (atom + absolutely continuous part); 1 up to
    /// quadrature and inversion error.
    pub fn normalization(&self) -> Result<f64> {
        if self.dirac_location().is_some() {
            return Ok(1.0);
        }
        Ok(self.atom_at_zero()? + self.table()?.total())
    }

    /// Support bracket of the absolutely continuous part.
    pub fn support_bracket(&self) -> Result<(f64, f64)> {
        if let Some(loc) = self.dirac_location() {
            return Ok((loc, loc));
        }
        let t = self.table()?;
        Ok((t.lo, t.hi))
    }

    /// Quantile by bisection on the CDF: inf { x : F(x) ≥ q }.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if let Some(loc) = self.dirac_location() {
            return Ok(loc);
        }
        let (lo, hi) = self.support_bracket()?;
        let (mut a, mut b) = (lo.min(-1e-6) - 1.0, hi + 1.0);
        for _ in 0..80 {
            let m = 0.5 * (a + b);
            if self.cdf(m)? >= q {
                b = m;
            } else {
                a = m;
            }
        }
        Ok(0.5 * (a + b))
    }
}

/// Richardson extrapolation over values at ε, ε/2, ε/4: eliminates the O(ε)
/// and O(ε²) error terms.
fn richardson(v: [f64; 3]) -> f64 {
    (v[0] - 6.0 * v[1] + 8.0 * v[2]) / 3.0
}

/// Residual of the Burgers equation at (t, z) for the characteristic
/// solution, with central finite differences of step h in both t and z:
///
/// | ∂_t ψ + ∂_z ψ · (σ² ψ + η + ∫ (ψ+r)/(1−rψ) ρ_rest(dr)) |.
pub fn burgers_residual(law: &LimitLaw, z: Complex64, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::Domain("step h must be positive".into()));
    }
    if !(z.im > 2.0 * h) {
        return Err(Error::Domain(format!(
            "burgers_residual requires Im z > 2h, got z = {z}, h = {h}"
        )));
    }
    if !(law.t > h) {
        return Err(Error::Domain(format!(
            "burgers_residual requires t > h, got t = {}, h = {h}",
            law.t
        )));
    }
    let at_time = |t: f64| -> Result<LimitLaw> {
        LimitLaw::with_settings(law.pair.clone(), t, law.settings.clone())
    };
    let psi = law.cauchy_transform(z)?;
    let dpsi_dt = (at_time(law.t + h)?.cauchy_transform(z)?
        - at_time(law.t - h)?.cauchy_transform(z)?)
        / (2.0 * h);
    let dz = Complex64::new(h, 0.0);
    let dpsi_dz = (law.cauchy_transform(z + dz)? - law.cauchy_transform(z - dz)?) / (2.0 * h);
    let one = Complex64::new(1.0, 0.0);
    let drift = law.pair.sigma2 * psi
        + law.pair.eta
        + law
            .pair
            .rho_rest
            .integrate_complex(|r| (psi + r) / (one - r * psi));
    Ok((dpsi_dt + dpsi_dz * drift).norm())
}

/// Semicircle density with parameter t: (1/(2πt)) √(4t − x²) on
/// [−2√t, 2√t].
pub fn semicircle_density(t: f64, x: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("semicircle needs t > 0, got {t}")));
    }
    let s = 4.0 * t - x * x;
    Ok(if s > 0.0 { s.sqrt() / (2.0 * PI * t) } else { 0.0 })
}

/// CDF of the semicircle law with parameter t (closed form).
pub fn semicircle_cdf(t: f64, x: f64) -> f64 {
    let r = 2.0 * t.sqrt();
    if x <= -r {
        0.0
    } else if x >= r {
        1.0
    } else {
        0.5 + x * (4.0 * t - x * x).sqrt() / (4.0 * PI * t) + (x / r).asin() / PI
    }
}

/// Marchenko–Pastur parameters for rate λ at time t (jump size 1):
/// the edge pair [a, b] of the absolutely continuous part.
fn mp_edges(c: f64) -> (f64, f64) {
    let s = c.sqrt();
    ((1.0 - s) * (1.0 - s), (1.0 + s) * (1.0 + s))
}

/// Atom mass (1 − λt)⁺ at 0 of the time-t free Poisson law.
pub fn mp_atom(lambda: f64, t: f64) -> f64 {
    (1.0 - lambda * t).max(0.0)
}

/// Density of the absolutely continuous part of the time-t free Poisson
/// law (Marchenko–Pastur with ratio λt, jump size 1).
pub fn mp_density(lambda: f64, t: f64, x: f64) -> f64 {
    let c = lambda * t;
    if c <= 0.0 {
        return 0.0;
    }
    let (a, b) = mp_edges(c);
    if x <= a || x >= b {
        return 0.0;
    }
    ((b - x) * (x - a)).sqrt() / (2.0 * PI * x)
}

/// CDF of the time-t free Poisson law, atom included. The integral of the
/// density is computed after the substitution x = a + (b−a) sin²θ, which
/// removes both square-root edges, with adaptive Simpson quadrature.
pub fn mp_cdf(lambda: f64, t: f64, x: f64) -> f64 {
    let c = lambda * t;
    if c <= 0.0 {
        return if x >= 0.0 { 1.0 } else { 0.0 };
    }
    let atom = mp_atom(lambda, t);
    if x < 0.0 {
        return 0.0;
    }
    let (a, b) = mp_edges(c);
    if x <= a {
        return atom.min(1.0);
    }
    let theta_max = if x >= b {
        PI / 2.0
    } else {
        (((x - a) / (b - a)).sqrt()).asin()
    };
    let w = b - a;
    let integrand = |theta: f64| {
        let (s, cs) = theta.sin_cos();
        if a == 0.0 {
            // Hard edge: the s² factors cancel exactly.
            w * cs * cs / PI
        } else {
            let y = a + w * s * s;
            w * w * 2.0 * s * s * cs * cs / (2.0 * PI * y)
        }
    };
    let ac = adaptive_simpson(&integrand, 0.0, theta_max, 1e-12, 24);
    (atom + ac).min(1.0)
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        left + right + (left + right - whole) / 15.0
    } else {
        simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::RealMeasure;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn sc_law(sigma2: f64, t: f64) -> LimitLaw {
        LimitLaw::new(GeneratingPair::semicircle(sigma2), t).unwrap()
    }

    fn fp_pair(lambda: f64) -> GeneratingPair {
        GeneratingPair::new(lambda / 2.0, 0.0, RealMeasure::dirac(1.0, lambda / 2.0)).unwrap()
    }

    fn mixed_pair() -> GeneratingPair {
        GeneratingPair::semicircle(0.5).sum(&fp_pair(0.5)).unwrap()
    }

    /// Closed-form semicircle transform with the Herglotz branch, written
    /// with split square roots so it is valid on all of ℂ⁺.
    fn semicircle_g(t: f64, z: Complex64) -> Complex64 {
        let s = 2.0 * t.sqrt();
        (z - (z - s).sqrt() * (z + s).sqrt()) / (2.0 * t)
    }

    #[test]
    fn closed_form_g_matches_quadrature() {
        // Validate the closed form itself against direct quadrature of the
        // semicircle density before using it as an oracle.
        let t = 1.0;
        for &(re, im) in &[(0.0, 2.0), (1.3, 0.8), (-2.5, 0.4)] {
            let z = Complex64::new(re, im);
            let quad = adaptive_simpson(
                &|x: f64| {
                    let d = semicircle_density(t, x).unwrap();
                    let w = 1.0 / (z - x);
                    d * w.re
                },
                -2.0,
                2.0,
                1e-12,
                30,
            );
            let quad_im = adaptive_simpson(
                &|x: f64| {
                    let d = semicircle_density(t, x).unwrap();
                    let w = 1.0 / (z - x);
                    d * w.im
                },
                -2.0,
                2.0,
                1e-12,
                30,
            );
            let g = semicircle_g(t, z);
            assert!((g - Complex64::new(quad, quad_im)).norm() < 1e-8);
        }
    }

    #[test]
    fn characteristic_drift_identity_on_atoms() {
        // (w + r)/(1 − r w) = (1 + r u)/(u − r) at u = 1/w.
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..50 {
            let w = Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..-0.1));
            let r = rng.gen_range(-3.0..3.0);
            let u = 1.0 / w;
            let lhs = (w + r) / (1.0 - r * w);
            let rhs = (1.0 + r * u) / (u - r);
            assert!((lhs - rhs).norm() < 1e-12 * lhs.norm().max(1.0));
        }
    }

    #[test]
    fn cauchy_transform_at_t_zero_and_drift() {
        let law = sc_law(1.0, 0.0);
        let z = Complex64::new(0.0, 1.0);
        assert!((law.cauchy_transform(z).unwrap() - Complex64::new(0.0, -1.0)).norm() < 1e-14);

        let c = 0.9;
        let drift = LimitLaw::new(
            GeneratingPair::new(c, 0.0, RealMeasure::zero()).unwrap(),
            1.0,
        )
        .unwrap();
        for &(re, im) in &[(0.4, 0.7), (-1.0, 2.0)] {
            let z = Complex64::new(re, im);
            let got = drift.cauchy_transform(z).unwrap();
            assert!((got - 1.0 / (z - c)).norm() < 1e-12);
        }
    }

    #[test]
    fn cauchy_transform_semicircle_value() {
        // ψ(1, 2i) = i(1 − √2) for the unit semicircle pair.
        let law = sc_law(1.0, 1.0);
        let got = law.cauchy_transform(Complex64::new(0.0, 2.0)).unwrap();
        let expect = Complex64::new(0.0, 1.0 - 2.0_f64.sqrt());
        assert!((got - expect).norm() < 1e-12);
    }

    #[test]
    fn cauchy_transform_matches_closed_form_on_random_points() {
        let law = sc_law(1.0, 1.0);
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        for _ in 0..100 {
            let z = Complex64::new(rng.gen_range(-3.0..3.0), rng.gen_range(0.05..3.0));
            let got = law.cauchy_transform(z).unwrap();
            let expect = semicircle_g(1.0, z);
            assert!(
                (got - expect).norm() <= 1e-10,
                "z = {z}: {got} vs {expect}"
            );
        }
    }

    #[test]
    fn herglotz_and_asymptotics() {
        for pair in [GeneratingPair::semicircle(1.0), fp_pair(1.0), mixed_pair()] {
            let law = LimitLaw::new(pair, 0.8).unwrap();
            for re in [-2.0, -0.5, 0.0, 1.0, 3.0] {
                for im in [0.3, 1.0, 4.0] {
                    let psi = law.cauchy_transform(Complex64::new(re, im)).unwrap();
                    assert!(psi.im < 0.0);
                }
            }
            let z = Complex64::new(0.0, 1e6);
            let psi = law.cauchy_transform(z).unwrap();
            assert!((z * psi - 1.0).norm() <= 1e-4);
        }
    }

    #[test]
    fn density_semicircle_values() {
        let law = sc_law(1.0, 1.0);
        assert_abs_diff_eq!(law.density(0.0).unwrap(), 1.0 / PI, epsilon = 1e-7);
        assert_eq!(law.density(3.0).unwrap(), 0.0);
    }

    #[test]
    fn density_free_poisson_value() {
        // MP(1) density at x = 1 is √3/(2π).
        let law = LimitLaw::new(fp_pair(1.0), 1.0).unwrap();
        let expect = 3.0_f64.sqrt() / (2.0 * PI);
        assert_abs_diff_eq!(law.density(1.0).unwrap(), expect, epsilon = 1e-7);
        assert_abs_diff_eq!(mp_density(1.0, 1.0, 1.0), expect, epsilon = 1e-15);
    }

    #[test]
    fn semicircle_closed_forms() {
        assert_abs_diff_eq!(semicircle_density(1.0, 0.0).unwrap(), 1.0 / PI, epsilon = 1e-15);
        assert_eq!(semicircle_density(1.0, 2.0).unwrap(), 0.0);
        assert_eq!(semicircle_density(1.0, -2.0).unwrap(), 0.0);
        assert_abs_diff_eq!(
            semicircle_density(4.0, 0.0).unwrap(),
            1.0 / (2.0 * PI),
            epsilon = 1e-15
        );
        assert!(semicircle_density(0.0, 0.0).is_err());

        assert_abs_diff_eq!(semicircle_cdf(1.0, 0.0), 0.5, epsilon = 1e-15);
        assert_eq!(semicircle_cdf(1.0, -2.0), 0.0);
        assert_eq!(semicircle_cdf(1.0, 2.0), 1.0);
        // CDF consistent with the density by quadrature.
        let quad = adaptive_simpson(
            &|x| semicircle_density(1.0, x).unwrap(),
            -2.0,
            0.7,
            1e-12,
            30,
        );
        assert_abs_diff_eq!(semicircle_cdf(1.0, 0.7), quad, epsilon = 1e-9);
    }

    #[test]
    fn mp_closed_forms() {
        assert_eq!(mp_density(1.0, 1.0, 4.5), 0.0);
        assert_abs_diff_eq!(mp_atom(0.5, 1.0), 0.5, epsilon = 1e-15);
        assert_eq!(mp_atom(1.0, 1.5), 0.0);
        // CDF hits the atom immediately and 1 at the upper edge.
        assert_abs_diff_eq!(mp_cdf(0.5, 1.0, 1e-9), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(mp_cdf(0.5, 1.0, 4.0), 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(mp_cdf(1.0, 1.0, 4.0), 1.0, epsilon = 1e-9);
        assert_eq!(mp_cdf(1.0, 1.0, -0.5), 0.0);
        // At λt = 1 the law is that of the square of a semicircle variable,
        // so F(x) = 2 F_sc(√x) − 1 exactly.
        for x in [0.2_f64, 0.7, 1.3, 2.5, 3.7] {
            let expect = 2.0 * semicircle_cdf(1.0, x.sqrt()) - 1.0;
            assert_abs_diff_eq!(mp_cdf(1.0, 1.0, x), expect, epsilon = 1e-10);
        }
        // Soft edge: quadrature of the density is a valid oracle.
        let (a, _) = mp_edges(0.5);
        let quad = adaptive_simpson(&|x| mp_density(0.5, 1.0, x), a, 1.3, 1e-12, 30);
        assert_abs_diff_eq!(mp_cdf(0.5, 1.0, 1.3), 0.5 + quad, epsilon = 1e-7);
    }

    #[test]
    fn cdf_semicircle_midpoint_and_edge() {
        let law = sc_law(1.0, 1.0);
        assert_abs_diff_eq!(law.cdf(0.0).unwrap(), 0.5, epsilon = 1e-5);
        let (lo, hi) = law.support_bracket().unwrap();
        assert!(lo < -1.99 && hi > 1.99);
        let norm = law.normalization().unwrap();
        assert!(
            (norm - 1.0).abs() <= 1e-4,
            "normalization {norm}"
        );
        assert!(law.cdf(hi).unwrap() >= 1.0 - 1e-4);
    }

    #[test]
    fn cdf_free_poisson_atom() {
        // λ = 0.5 at t = 1: atom of mass 1 − λt = 0.5 at 0.
        let law = LimitLaw::new(fp_pair(0.5), 1.0).unwrap();
        let atom = law.atom_at_zero().unwrap();
        assert!((atom - 0.5).abs() <= 1e-3, "atom {atom}");
        assert!(law.cdf(-1e-6).unwrap() < 1e-3);
        let just_above = law.cdf(1e-6).unwrap();
        assert!((just_above - 0.5).abs() <= 1e-3);
        let norm = law.normalization().unwrap();
        assert!((norm - 1.0).abs() <= 1e-4, "normalization {norm}");
    }

    #[test]
    fn no_spurious_atom_for_smooth_laws() {
        for pair in [GeneratingPair::semicircle(1.0), mixed_pair()] {
            let law = LimitLaw::new(pair, 1.0).unwrap();
            assert_eq!(law.atom_at_zero().unwrap(), 0.0);
        }
        // Hard edge at λt = 1: the √ε artefact must not register as an atom.
        let law = LimitLaw::new(fp_pair(1.0), 1.0).unwrap();
        assert_eq!(law.atom_at_zero().unwrap(), 0.0);
    }

    #[test]
    fn moment_consistency_of_solver_density() {
        // First and second moments of the computed law equal t·κ₁ and
        // t·κ₂ + (t·κ₁)² within 1e-4.
        let pair = mixed_pair();
        let law = LimitLaw::new(pair.clone(), 1.0).unwrap();
        let k = free_cumulants(&pair, 2).unwrap();
        let (lo, hi) = law.support_bracket().unwrap();
        let m0 = adaptive_simpson(&|x| law.density(x).unwrap(), lo, hi, 1e-10, 24);
        let m1 = adaptive_simpson(&|x| x * law.density(x).unwrap(), lo, hi, 1e-10, 24);
        let m2 = adaptive_simpson(&|x| x * x * law.density(x).unwrap(), lo, hi, 1e-10, 24);
        assert!((m0 - 1.0).abs() <= 1e-4, "mass {m0}");
        assert!((m1 - law.t * k[0]).abs() <= 1e-4, "m1 {m1}");
        let target = law.t * k[1] + (law.t * k[0]).powi(2);
        assert!((m2 - target).abs() <= 1e-4, "m2 {m2} vs {target}");
    }

    #[test]
    fn higher_moments_follow_free_cumulants() {
        // Moment–cumulant relations for the time-t law (free cumulants
        // K_m = t·κ_m):
        //   m₃ = K₃ + 3K₂K₁ + K₁³
        //   m₄ = K₄ + 4K₃K₁ + 2K₂² + 6K₂K₁² + K₁⁴
        // checked against quadrature of the solver density. Independent of
        // the m₁/m₂ consistency test and of the closed-form comparisons.
        let pair = mixed_pair();
        let t = 0.8;
        let law = LimitLaw::new(pair.clone(), t).unwrap();
        let kap = free_cumulants(&pair, 4).unwrap();
        let k: Vec<f64> = kap.iter().map(|v| v * t).collect();
        let m3_expect = k[2] + 3.0 * k[1] * k[0] + k[0].powi(3);
        let m4_expect =
            k[3] + 4.0 * k[2] * k[0] + 2.0 * k[1] * k[1] + 6.0 * k[1] * k[0] * k[0]
                + k[0].powi(4);
        let (lo, hi) = law.support_bracket().unwrap();
        let m3 = adaptive_simpson(&|x| x.powi(3) * law.density(x).unwrap(), lo, hi, 1e-10, 24);
        let m4 = adaptive_simpson(&|x| x.powi(4) * law.density(x).unwrap(), lo, hi, 1e-10, 24);
        assert!((m3 - m3_expect).abs() <= 2e-4, "m3 {m3} vs {m3_expect}");
        assert!((m4 - m4_expect).abs() <= 5e-4, "m4 {m4} vs {m4_expect}");
    }

    #[test]
    fn atom_mass_tracks_lambda_t() {
        for (lambda, t) in [(0.3, 1.0), (1.0, 0.7), (0.5, 0.8)] {
            let law = LimitLaw::new(fp_pair(lambda), t).unwrap();
            let atom = law.atom_at_zero().unwrap();
            let expect = (1.0 - lambda * t).max(0.0);
            assert!(
                (atom - expect).abs() <= 1e-3,
                "λ = {lambda}, t = {t}: atom {atom} vs {expect}"
            );
            let norm = law.normalization().unwrap();
            assert!((norm - 1.0).abs() <= 1e-4, "normalization {norm}");
        }
    }

    #[test]
    fn residual_examples() {
        let h = 1e-4;
        // Pure drift: ψ = 1/(z − ηt) solves the equation exactly.
        let drift = LimitLaw::new(
            GeneratingPair::new(1.2, 0.0, RealMeasure::zero()).unwrap(),
            1.0,
        )
        .unwrap();
        let r = burgers_residual(&drift, Complex64::new(0.7, 1.0), h).unwrap();
        assert!(r <= 1e-8, "drift residual {r:e}");

        let sc = sc_law(1.0, 1.0);
        let r = burgers_residual(&sc, Complex64::new(1.0, 2.0), h).unwrap();
        assert!(r <= 1e-6, "semicircle residual {r:e}");

        let fp = LimitLaw::new(fp_pair(1.0), 0.7).unwrap();
        let r = burgers_residual(&fp, Complex64::new(2.0, 1.0), h).unwrap();
        assert!(r <= 1e-6, "free Poisson residual {r:e}");
    }

    #[test]
    fn residual_domain_checks() {
        let law = sc_law(1.0, 1.0);
        assert!(burgers_residual(&law, Complex64::new(0.0, 1e-5), 1e-4).is_err());
        let shallow = sc_law(1.0, 5e-5);
        assert!(burgers_residual(&shallow, Complex64::new(0.0, 1.0), 1e-4).is_err());
    }

    #[test]
    fn quantiles_invert_the_cdf() {
        let law = sc_law(1.0, 1.0);
        for q in [0.1, 0.25, 0.5, 0.9] {
            let x = law.quantile(q).unwrap();
            assert!((law.cdf(x).unwrap() - q).abs() < 1e-4);
        }
        // Atom case: all quantiles below the atom mass collapse to 0.
        let fp = LimitLaw::new(fp_pair(0.5), 1.0).unwrap();
        let x = law_quantile_near_zero(&fp, 0.3);
        assert!(x.abs() < 1e-6, "quantile {x}");
    }

    fn law_quantile_near_zero(law: &LimitLaw, q: f64) -> f64 {
        law.quantile(q).unwrap()
    }
}
