//! Finite measures on the real line, classical and free infinitely divisible
//! parametrisations, and the bijection between them.
//!
//! A free infinitely divisible law is described by its generating pair
//! (η, ρ): a real drift plus a finite measure, entering the Voiculescu
//! transform
//!
//! ```text
//! φ(z) = η + ∫ (1 + t z) / (z − t) ρ(dt),        Im z > 0.
//! ```
//!
//! A classical infinitely divisible law is described by the Lévy triplet
//! (σ², γ, ν). The bijection maps the triplet to the pair via
//!
//! ```text
//! ρ(dx) = σ² δ₀(dx) + x²/(1 + x²) ν(dx),
//! η     = γ − ∫ x (1_{[−1,1]}(x) − 1/(1+x²)) ν(dx),
//! ```
//!
//! and back. The drift γ is stored relative to the jump truncation
//! 1_{|x| ≤ 1}; under that convention the map matches classical and free
//! cumulants of every order, which is what the cumulant oracles below
//! assert.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Default sample count for gridded density parts.
pub const DEFAULT_GRID_SAMPLES: usize = 4096;

/// Tolerance for treating two atom locations as coincident.
pub const ATOM_TOL: f64 = 1e-12;

/// Tolerance on drift/variance scalars in measure comparisons.
pub const SCALAR_TOL: f64 = 1e-10;

/// A density part sampled on a uniform grid, integrated by the trapezoid
/// rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    pub lo: f64,
    pub hi: f64,
    pub samples: Vec<f64>,
}

impl GridDensity {
    /// Sample a density function on a uniform grid.
    pub fn from_fn(lo: f64, hi: f64, samples: usize, mut f: impl FnMut(f64) -> f64) -> Self {
        let n = samples.max(2);
        let nodes = (0..n).map(|i| {
            let s = i as f64 / (n as f64 - 1.0);
            lo * (1.0 - s) + hi * s
        });
        Self {
            lo,
            hi,
            samples: nodes.map(&mut f).collect(),
        }
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.samples.len() as f64 - 1.0)
    }

    pub fn node(&self, i: usize) -> f64 {
        // Evaluate as a convex combination so node(len-1) == hi exactly.
        let s = i as f64 / (self.samples.len() as f64 - 1.0);
        self.lo * (1.0 - s) + self.hi * s
    }

    fn validate(&self) -> Result<()> {
        if !(self.lo < self.hi) {
            return Err(Error::InvalidMeasure(format!(
                "density support [{}, {}] is empty or inverted",
                self.lo, self.hi
            )));
        }
        if self.samples.len() < 2 {
            return Err(Error::InvalidMeasure(
                "density needs at least two samples".into(),
            ));
        }
        if self.samples.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::InvalidMeasure(
                "density samples must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// Trapezoid quadrature of `f` against this density.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        let m = self.samples.len();
        let h = self.step();
        let mut acc = 0.0;
        for (i, &s) in self.samples.iter().enumerate() {
            let w = if i == 0 || i == m - 1 { 0.5 } else { 1.0 };
            // A zero sample contributes nothing even where f blows up.
            if s != 0.0 {
                acc += w * s * f(self.node(i));
            }
        }
        acc * h
    }
}

/// A finite nonnegative measure on ℝ: point masses plus an optional gridded
/// density.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RealMeasure {
    /// Point masses as (location, mass) with pairwise distinct locations.
    #[serde(default)]
    pub atoms: Vec<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<GridDensity>,
}

impl RealMeasure {
    /// The zero measure.
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_atoms(atoms: Vec<(f64, f64)>) -> Result<Self> {
        let m = Self {
            atoms,
            density: None,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn dirac(loc: f64, mass: f64) -> Self {
        Self {
            atoms: vec![(loc, mass)],
            density: None,
        }
    }

    /// Purely absolutely continuous measure sampled from a density function
    /// on [lo, hi] at the default grid resolution.
    pub fn from_density_fn(lo: f64, hi: f64, f: impl FnMut(f64) -> f64) -> Result<Self> {
        let m = Self {
            atoms: Vec::new(),
            density: Some(GridDensity::from_fn(lo, hi, DEFAULT_GRID_SAMPLES, f)),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.iter().all(|&(_, m)| m == 0.0)
            && self
                .density
                .as_ref()
                .is_none_or(|d| d.samples.iter().all(|&s| s == 0.0))
    }

    pub fn validate(&self) -> Result<()> {
        for &(loc, mass) in &self.atoms {
            if !loc.is_finite() || !mass.is_finite() || mass < 0.0 {
                return Err(Error::InvalidMeasure(format!(
                    "atom ({loc}, {mass}) must have finite location and mass >= 0"
                )));
            }
        }
        for (i, &(a, _)) in self.atoms.iter().enumerate() {
            for &(b, _) in &self.atoms[i + 1..] {
                if (a - b).abs() <= ATOM_TOL {
                    return Err(Error::InvalidMeasure(format!(
                        "atom locations {a} and {b} coincide within {ATOM_TOL:e}"
                    )));
                }
            }
        }
        if let Some(d) = &self.density {
            d.validate()?;
        }
        let mass = self.total_mass();
        if !mass.is_finite() {
            return Err(Error::InvalidMeasure("total mass is not finite".into()));
        }
        Ok(())
    }

    /// Σ masses + trapezoid integral of the density.
    pub fn total_mass(&self) -> f64 {
        self.integrate(|_| 1.0)
    }

    /// ∫ f dμ: exact sum over atoms plus trapezoid quadrature of the density.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        let mut acc = 0.0;
        for &(loc, mass) in &self.atoms {
            if mass != 0.0 {
                acc += mass * f(loc);
            }
        }
        if let Some(d) = &self.density {
            acc += d.integrate(&mut f);
        }
        acc
    }

    /// Complex-valued integral against the measure.
    pub fn integrate_complex(&self, mut f: impl FnMut(f64) -> Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &(loc, mass) in &self.atoms {
            if mass != 0.0 {
                acc += mass * f(loc);
            }
        }
        if let Some(d) = &self.density {
            let m = d.samples.len();
            let h = d.step();
            let mut dacc = Complex64::new(0.0, 0.0);
            for (i, &s) in d.samples.iter().enumerate() {
                let w = if i == 0 || i == m - 1 { 0.5 } else { 1.0 };
                if s != 0.0 {
                    dacc += w * s * f(d.node(i));
                }
            }
            acc += h * dacc;
        }
        acc
    }

    /// The k-th moment ∫ x^k dμ.
    pub fn moment(&self, k: u32) -> f64 {
        self.integrate(|x| x.powi(k as i32))
    }

    /// New measure with each mass element reweighted by `w(x)`. Zero masses
    /// and zero samples stay zero even where `w` is singular.
    pub fn reweighted(&self, mut w: impl FnMut(f64) -> f64) -> Result<Self> {
        let atoms = self
            .atoms
            .iter()
            .map(|&(loc, mass)| {
                if mass == 0.0 {
                    (loc, 0.0)
                } else {
                    (loc, mass * w(loc))
                }
            })
            .collect::<Vec<_>>();
        let density = self
            .density
            .as_ref()
            .map(|d| {
                let samples = d
                    .samples
                    .iter()
                    .enumerate()
                    .map(|(i, &s)| if s == 0.0 { 0.0 } else { s * w(d.node(i)) })
                    .collect::<Vec<_>>();
                GridDensity {
                    lo: d.lo,
                    hi: d.hi,
                    samples,
                }
            });
        let out = Self {
            atoms,
            density,
        };
        out.validate().map_err(|e| {
            Error::InvalidMeasure(format!("reweighting produced an invalid measure: {e}"))
        })?;
        Ok(out)
    }

    /// Approximate equality: atoms matched by location within `ATOM_TOL`,
    /// masses within `ATOM_TOL`, densities sample-wise within `tol`.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        if self.atoms.len() != other.atoms.len() {
            return false;
        }
        let mut a = self.atoms.clone();
        let mut b = other.atoms.clone();
        a.sort_by(|x, y| x.0.total_cmp(&y.0));
        b.sort_by(|x, y| x.0.total_cmp(&y.0));
        for (&(la, ma), &(lb, mb)) in a.iter().zip(&b) {
            if (la - lb).abs() > tol || (ma - mb).abs() > tol {
                return false;
            }
        }
        match (&self.density, &other.density) {
            (None, None) => true,
            (Some(x), Some(y)) => {
                x.samples.len() == y.samples.len()
                    && (x.lo - y.lo).abs() <= tol
                    && (x.hi - y.hi).abs() <= tol
                    && x.samples
                        .iter()
                        .zip(&y.samples)
                        .all(|(p, q)| (p - q).abs() <= tol)
            }
            _ => false,
        }
    }
}

/// Generating pair (η, ρ) of a free infinitely divisible law. The mass of ρ
/// at the origin is stored separately in `sigma2`; `rho_rest` is ρ restricted
/// to ℝ \ {0}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratingPair {
    pub eta: f64,
    pub sigma2: f64,
    #[serde(flatten)]
    pub rho_rest: RealMeasure,
}

impl GeneratingPair {
    pub fn new(eta: f64, sigma2: f64, rho_rest: RealMeasure) -> Result<Self> {
        let p = Self {
            eta,
            sigma2,
            rho_rest,
        };
        p.validate()?;
        Ok(p)
    }

    /// Pure semicircle component: ρ = σ² δ₀.
    pub fn semicircle(sigma2: f64) -> Self {
        Self {
            eta: 0.0,
            sigma2,
            rho_rest: RealMeasure::zero(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.eta.is_finite() {
            return Err(Error::InvalidMeasure("eta must be finite".into()));
        }
        if !self.sigma2.is_finite() || self.sigma2 < 0.0 {
            return Err(Error::InvalidMeasure("sigma2 must be finite and >= 0".into()));
        }
        self.rho_rest.validate()?;
        for &(loc, mass) in &self.rho_rest.atoms {
            if mass > 0.0 && loc.abs() <= ATOM_TOL {
                return Err(Error::InvalidMeasure(
                    "rho_rest must not carry an atom at 0; use the sigma2 field".into(),
                ));
            }
        }
        if let Some(d) = &self.rho_rest.density {
            let h = d.step();
            for (i, &s) in d.samples.iter().enumerate() {
                if s != 0.0 && d.node(i).abs() < h {
                    return Err(Error::InvalidMeasure(
                        "rho_rest density must vanish on the grid cells adjacent to 0".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Total mass of ρ = σ² + mass(ρ restricted to ℝ\{0}).
    pub fn rho_mass(&self) -> f64 {
        self.sigma2 + self.rho_rest.total_mass()
    }

    /// Pointwise sum of pairs; the Voiculescu transform is affine in (η, ρ),
    /// so this is the free convolution of the underlying laws.
    pub fn sum(&self, other: &Self) -> Result<Self> {
        let mut atoms = self.rho_rest.atoms.clone();
        for &(loc, mass) in &other.rho_rest.atoms {
            if let Some(slot) = atoms.iter_mut().find(|(l, _)| (*l - loc).abs() <= ATOM_TOL) {
                slot.1 += mass;
            } else {
                atoms.push((loc, mass));
            }
        }
        if self.rho_rest.density.is_some() && other.rho_rest.density.is_some() {
            return Err(Error::InvalidMeasure(
                "summing two density-carrying pairs is not supported".into(),
            ));
        }
        let density = self
            .rho_rest
            .density
            .clone()
            .or_else(|| other.rho_rest.density.clone());
        GeneratingPair::new(
            self.eta + other.eta,
            self.sigma2 + other.sigma2,
            RealMeasure { atoms, density },
        )
    }
}

/// Classical Lévy triplet (σ², γ, ν) with γ relative to the truncation
/// 1_{|x| ≤ 1}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalTriplet {
    pub sigma2: f64,
    pub gamma: f64,
    #[serde(flatten)]
    pub nu: RealMeasure,
}

impl ClassicalTriplet {
    pub fn new(sigma2: f64, gamma: f64, nu: RealMeasure) -> Result<Self> {
        let t = Self { sigma2, gamma, nu };
        t.validate()?;
        Ok(t)
    }

    /// Poisson(λ) with unit jumps: ν = λ δ₁, γ = λ under the |x| ≤ 1
    /// truncation.
    pub fn poisson(lambda: f64) -> Self {
        Self {
            sigma2: 0.0,
            gamma: lambda,
            nu: RealMeasure::dirac(1.0, lambda),
        }
    }

    /// Compound Poisson with rate λ and jump size `s` (plus an independent
    /// Gaussian component), γ set so the first cumulant is λ s.
    pub fn gaussian_plus_compound_poisson(sigma2: f64, lambda: f64, jump: f64) -> Self {
        let gamma = if jump.abs() <= 1.0 { lambda * jump } else { 0.0 };
        Self {
            sigma2,
            gamma,
            nu: RealMeasure::dirac(jump, lambda),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.sigma2.is_finite() || self.sigma2 < 0.0 {
            return Err(Error::InvalidMeasure("sigma2 must be finite and >= 0".into()));
        }
        if !self.gamma.is_finite() {
            return Err(Error::InvalidMeasure("gamma must be finite".into()));
        }
        self.nu.validate()?;
        for &(loc, mass) in &self.nu.atoms {
            if mass > 0.0 && loc.abs() <= ATOM_TOL {
                return Err(Error::InvalidMeasure("nu must not charge 0".into()));
            }
        }
        // ∫ (1 ∧ x²) ν(dx) < ∞ by quadrature.
        let small = self.nu.integrate(|x| x.abs().min(1.0).powi(2).min(1.0));
        if !small.is_finite() {
            return Err(Error::InvalidMeasure(
                "∫ (1 ∧ x²) ν(dx) is not finite".into(),
            ));
        }
        Ok(())
    }
}

/// Bercovici–Pata bijection, classical → free.
pub fn bp_to_free(t: &ClassicalTriplet) -> Result<GeneratingPair> {
    t.validate()?;
    let rho_rest = t.nu.reweighted(|x| x * x / (1.0 + x * x))?;
    let correction = t
        .nu
        .integrate(|x| x * (indicator_unit(x) - 1.0 / (1.0 + x * x)));
    if !correction.is_finite() {
        return Err(Error::InvalidMeasure(
            "drift correction integral diverges".into(),
        ));
    }
    GeneratingPair::new(t.gamma - correction, t.sigma2, rho_rest)
}

/// Bercovici–Pata bijection, free → classical. Inverse of [`bp_to_free`].
pub fn bp_to_classical(p: &GeneratingPair) -> Result<ClassicalTriplet> {
    p.validate()?;
    let nu = p.rho_rest.reweighted(|x| (1.0 + x * x) / (x * x))?;
    if !nu.total_mass().is_finite() {
        return Err(Error::InvalidMeasure(
            "(1+x²)/x² reweighting of rho diverges near 0".into(),
        ));
    }
    // γ = η + ∫_{|r|≤1} r ρ(dr) − ∫_{|r|>1} (1/r) ρ(dr); the atom at 0
    // contributes to neither integral.
    let gamma = p.eta
        + p.rho_rest
            .integrate(|r| if r.abs() <= 1.0 { r } else { -1.0 / r });
    ClassicalTriplet::new(p.sigma2, gamma, nu)
}

fn indicator_unit(x: f64) -> f64 {
    if x.abs() <= 1.0 {
        1.0
    } else {
        0.0
    }
}

/// Voiculescu transform φ(z) = η + σ²/z + ∫ (1+tz)/(z−t) ρ_rest(dt) on the
/// upper half-plane.
pub fn voiculescu_phi(p: &GeneratingPair, z: Complex64) -> Result<Complex64> {
    if !(z.im > 0.0) {
        return Err(Error::Domain(format!(
            "voiculescu_phi requires Im z > 0, got z = {z}"
        )));
    }
    Ok(phi_unchecked(p, z))
}

/// φ evaluated without the half-plane check; used by the characteristic
/// solver whose iterates are already constrained to ℂ⁺.
pub(crate) fn phi_unchecked(p: &GeneratingPair, z: Complex64) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    p.eta + p.sigma2 / z + p.rho_rest.integrate_complex(|t| (one + t * z) / (z - t))
}

/// Derivative φ′(z) = −σ²/z² − ∫ (1+t²)/(z−t)² ρ_rest(dt).
pub(crate) fn phi_derivative(p: &GeneratingPair, z: Complex64) -> Complex64 {
    -p.sigma2 / (z * z)
        - p.rho_rest.integrate_complex(|t| {
            let d = z - t;
            (1.0 + t * t) / (d * d)
        })
}

/// Free cumulants κ₁..κ_m from the Laurent expansion of φ at infinity:
/// κ₁ = η + ∫ t ρ(dt) and κ_m = ∫ t^{m−2} (1+t²) ρ(dt) for m ≥ 2 (the atom
/// at 0 contributes σ² to κ₂ only).
pub fn free_cumulants(p: &GeneratingPair, m_max: usize) -> Result<Vec<f64>> {
    if m_max < 1 {
        return Err(Error::Domain("m_max must be >= 1".into()));
    }
    p.validate()?;
    let probe = p.rho_rest.integrate(|t| t.abs().powi(m_max as i32));
    if !probe.is_finite() {
        return Err(Error::MomentDivergence(format!(
            "∫ |t|^{m_max} ρ(dt) diverges"
        )));
    }
    let mut out = Vec::with_capacity(m_max);
    out.push(p.eta + p.rho_rest.moment(1));
    for m in 2..=m_max {
        let mut k = p
            .rho_rest
            .integrate(|t| t.powi(m as i32 - 2) * (1.0 + t * t));
        if m == 2 {
            k += p.sigma2;
        }
        out.push(k);
    }
    Ok(out)
}

/// Classical cumulants c₁..c_m: c₁ = γ + ∫_{|x|>1} x ν(dx),
/// c₂ = σ² + ∫ x² ν(dx), c_m = ∫ x^m ν(dx) for m ≥ 3.
pub fn classical_cumulants(t: &ClassicalTriplet, m_max: usize) -> Result<Vec<f64>> {
    if m_max < 1 {
        return Err(Error::Domain("m_max must be >= 1".into()));
    }
    t.validate()?;
    let probe = t.nu.integrate(|x| x.abs().powi(m_max as i32));
    if !probe.is_finite() {
        return Err(Error::MomentDivergence(format!(
            "∫ |x|^{m_max} ν(dx) diverges"
        )));
    }
    let mut out = Vec::with_capacity(m_max);
    out.push(t.gamma + t.nu.integrate(|x| if x.abs() > 1.0 { x } else { 0.0 }));
    for m in 2..=m_max {
        let mut c = t.nu.moment(m as u32);
        if m == 2 {
            c += t.sigma2;
        }
        out.push(c);
    }
    Ok(out)
}
