//! Construction and simulation of the n×n Hermitian Lévy ensembles attached
//! to a generating pair (η, ρ).
//!
//! The ensemble for dimension n has Lévy triplet
//!
//! ```text
//! σ_n² = σ² + (n−1)/n²,
//! γ    = η + ∫_{|r|≤1} r ρ(dr) − ∫_{|r|>1} (1/r) ρ(dr),
//! ν_n  = polar (π_n, ρ_n^α),   ρ_n^α(dr) = (1+r²)/r² [ρ(−dr)+ρ(dr)] 1_{(0, n^{2α}/(n^α−1))}(r),
//! ```
//!
//! with the spherical part π_n carried by rank-one directions u u* for u Haar
//! on the unit sphere of ℂⁿ and total mass n. Sample paths are simulated as
//!
//! ```text
//! X(t) = γ t I + √(σ_n²/n) H(t) + Σ_{jumps ≤ t} s_j r_j v_j v_j*
//!        − t I ∫_{0 < r ≤ 1} s(r) r ρ_n^α(dr)
//! ```
//!
//! where H is the Hermitian Brownian motion (diagonal variance t, complex
//! off-diagonal entries with variance t/2 per real part), jump times arrive
//! at rate n · mass(ρ_n^α), and s = ±1 records which side of ρ a folded
//! radial mass came from. No time-discretisation bias exists: the process is
//! additive, so Brownian increments are drawn exactly between consecutive
//! skeleton times (uniform grid merged with the exact jump times).

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{GeneratingPair, GridDensity, RealMeasure};
use crate::rng::path_rng;

/// Hard cap on the expected number of jumps of a single path.
pub const MAX_EXPECTED_JUMPS: f64 = 1e7;

/// Hermitian matrix stored as the packed upper triangle (row-major, diagonal
/// included). Hermiticity holds exactly by storage: the lower triangle is
/// never materialised and diagonal entries keep a hard zero imaginary part.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    n: usize,
    /// Upper triangle entries a_{ij}, i ≤ j, row-major.
    data: Vec<Complex64>,
}

impl HermitianMatrix {
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "matrix dimension must be >= 1");
        Self {
            n,
            data: vec![Complex64::new(0.0, 0.0); n * (n + 1) / 2],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i <= j && j < self.n);
        i * self.n - i * (i + 1) / 2 + j
    }

    /// Entry (i, j); the lower triangle is served as the conjugate of the
    /// stored upper triangle.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        if i <= j {
            self.data[self.idx(i, j)]
        } else {
            self.data[self.idx(j, i)].conj()
        }
    }

    /// Packed upper triangle, row-major.
    pub fn packed(&self) -> &[Complex64] {
        &self.data
    }

    pub fn from_packed(n: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != n * (n + 1) / 2 {
            return Err(Error::Domain(format!(
                "packed length {} does not match n = {n}",
                data.len()
            )));
        }
        let mut m = Self { n, data };
        for i in 0..n {
            let k = m.idx(i, i);
            m.data[k].im = 0.0;
        }
        Ok(m)
    }

    /// Build from a dense row-major complex matrix, reading the upper
    /// triangle and the real part of the diagonal.
    pub fn from_dense_upper(n: usize, dense: &[Complex64]) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v = dense[i * n + j];
                let k = m.idx(i, j);
                m.data[k] = if i == j { Complex64::new(v.re, 0.0) } else { v };
            }
        }
        m
    }

    pub fn add_assign(&mut self, other: &Self) {
        assert_eq!(self.n, other.n);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// A += c·I.
    pub fn add_scaled_identity(&mut self, c: f64) {
        for i in 0..self.n {
            let k = self.idx(i, i);
            self.data[k].re += c;
        }
    }

    /// A += c · v v* for a complex vector v.
    pub fn add_rank_one(&mut self, c: f64, v: &[Complex64]) {
        assert_eq!(v.len(), self.n);
        let n = self.n;
        let mut k = 0;
        for i in 0..n {
            let vi = v[i];
            // Diagonal: c |v_i|², exactly real.
            self.data[k].re += c * (vi.re * vi.re + vi.im * vi.im);
            k += 1;
            for vj in &v[i + 1..n] {
                self.data[k] += c * vi * vj.conj();
                k += 1;
            }
        }
    }

    pub fn scale(&mut self, c: f64) {
        for a in &mut self.data {
            *a *= c;
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.data[self.idx(i, i)].re).sum()
    }

    /// tr(A²) = Σ_{ij} |a_{ij}|², the squared Frobenius norm.
    pub fn trace_of_square(&self) -> f64 {
        let mut diag = 0.0;
        let mut off = 0.0;
        let mut k = 0;
        for i in 0..self.n {
            diag += self.data[k].norm_sqr();
            k += 1;
            for _ in i + 1..self.n {
                off += self.data[k].norm_sqr();
                k += 1;
            }
        }
        diag + 2.0 * off
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.trace_of_square().sqrt()
    }

    /// Dense row-major copy (both triangles).
    pub fn to_dense(&self) -> Vec<Complex64> {
        let n = self.n;
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in i..n {
                let v = self.data[self.idx(i, j)];
                out[i * n + j] = v;
                out[j * n + i] = v.conj();
            }
        }
        out
    }

    /// y = A x.
    pub fn mul_vec(&self, x: &[Complex64], y: &mut [Complex64]) {
        let n = self.n;
        assert!(x.len() == n && y.len() == n);
        for v in y.iter_mut() {
            *v = Complex64::new(0.0, 0.0);
        }
        let mut k = 0;
        for i in 0..n {
            let d = self.data[k];
            y[i] += d * x[i];
            k += 1;
            for j in i + 1..n {
                let a = self.data[k];
                y[i] += a * x[j];
                y[j] += a.conj() * x[i];
                k += 1;
            }
        }
    }

    /// A − B.
    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Self { n: self.n, data }
    }
}

/// One side of the folded radial measure ρ_n^α, tagged with the sign its
/// jumps carry: mass folded from ρ's positive side drives jumps +r v v*,
/// mass from the negative side drives −r v v*.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedRadial {
    /// Folded from ρ restricted to (0, ∞); jumps have sign +1.
    pub pos: RealMeasure,
    /// Folded from ρ restricted to (−∞, 0); jumps have sign −1.
    pub neg: RealMeasure,
}

impl SignedRadial {
    pub fn total_mass(&self) -> f64 {
        self.pos.total_mass() + self.neg.total_mass()
    }

    /// ∫_{0<r≤1} s(r) · r dρ_n^α, the compensator drift per unit time and
    /// per diagonal entry.
    pub fn signed_compensator(&self) -> f64 {
        let clip = |r: f64| if r > 0.0 && r <= 1.0 { r } else { 0.0 };
        self.pos.integrate(clip) - self.neg.integrate(clip)
    }

    /// ∫ s(r) · r dρ_n^α over the whole support.
    pub fn signed_first_moment(&self) -> f64 {
        self.pos.moment(1) - self.neg.moment(1)
    }

    pub fn is_empty(&self) -> bool {
        self.pos.is_zero() && self.neg.is_zero()
    }
}

/// Record of an optional small-jump truncation applied to the radial part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallJumpTruncation {
    pub eps: f64,
    pub dropped_mass: f64,
    /// Signed drift ∫_{0<r<ε} s(r) r dρ_n^α of the dropped band; it stays in
    /// the compensator so the path keeps the right mean.
    pub dropped_drift: f64,
}

/// Everything needed to simulate the n×n ensemble for one generating pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixEnsembleParams {
    pub n: usize,
    pub alpha: f64,
    /// σ_n² = σ² + (n−1)/n².
    pub sigma_n2: f64,
    /// Drift γ; the deterministic part of the path is γ t I.
    pub gamma: f64,
    /// Folded radial measure on (0, r_max), with per-side sign tags.
    pub radial: SignedRadial,
    /// Total jump rate n · mass(ρ_n^α).
    pub jump_rate: f64,
    /// ∫_{0<r≤1} s(r) r dρ_n^α of the untruncated radial measure.
    pub compensator_drift: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<SmallJumpTruncation>,
}

/// Truncation radius r_max = n^{2α}/(n^α − 1), read as ∞ when n = 1.
pub fn radial_truncation_radius(n: usize, alpha: f64) -> f64 {
    if n == 1 {
        f64::INFINITY
    } else {
        let nf = n as f64;
        nf.powf(2.0 * alpha) / (nf.powf(alpha) - 1.0)
    }
}

/// Fold one side of ρ onto (0, r_max) with the (1+r²)/r² weight.
fn fold_side(rho: &RealMeasure, negative_side: bool, r_max: f64) -> Result<RealMeasure> {
    let weight = |r: f64| (1.0 + r * r) / (r * r);
    let mut atoms = Vec::new();
    for &(loc, mass) in &rho.atoms {
        let keep = if negative_side { loc < 0.0 } else { loc > 0.0 };
        if !keep || mass == 0.0 {
            continue;
        }
        let r = loc.abs();
        if r < r_max {
            atoms.push((r, mass * weight(r)));
        }
    }
    let density = match &rho.density {
        None => None,
        Some(d) => {
            // Collect grid nodes on the requested side, reflected onto (0, ∞).
            let m = d.samples.len();
            let mut nodes: Vec<(f64, f64)> = (0..m)
                .filter_map(|i| {
                    let x = d.node(i);
                    let on_side = if negative_side { x < 0.0 } else { x > 0.0 };
                    if on_side {
                        Some((x.abs(), d.samples[i]))
                    } else {
                        None
                    }
                })
                .collect();
            if nodes.is_empty() {
                None
            } else {
                nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
                let samples = nodes
                    .iter()
                    .map(|&(r, s)| {
                        if s == 0.0 || r >= r_max {
                            0.0
                        } else {
                            s * weight(r)
                        }
                    })
                    .collect::<Vec<_>>();
                if samples.iter().all(|&s| s == 0.0) || nodes.len() < 2 {
                    None
                } else {
                    Some(GridDensity {
                        lo: nodes[0].0,
                        hi: nodes[nodes.len() - 1].0,
                        samples,
                    })
                }
            }
        }
    };
    let folded = RealMeasure { atoms, density };
    folded.validate().map_err(|e| {
        Error::FiniteActivity(format!("folded radial measure is not finite: {e}"))
    })?;
    if !folded.total_mass().is_finite() {
        return Err(Error::FiniteActivity(
            "radial measure has infinite mass; the pair cannot be simulated without truncation"
                .into(),
        ));
    }
    Ok(folded)
}

/// Build the ensemble parameters for dimension `n` and truncation exponent
/// `alpha` ∈ (0, 1/2).
pub fn build_matrix_params(
    pair: &GeneratingPair,
    n: usize,
    alpha: f64,
) -> Result<MatrixEnsembleParams> {
    pair.validate()?;
    if n < 1 {
        return Err(Error::Domain("n must be >= 1".into()));
    }
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::Domain(format!(
            "alpha must lie in (0, 1/2), got {alpha}"
        )));
    }
    let nf = n as f64;
    let sigma_n2 = pair.sigma2 + (nf - 1.0) / (nf * nf);
    let gamma = pair.eta
        + pair
            .rho_rest
            .integrate(|r| if r.abs() <= 1.0 { r } else { -1.0 / r });
    let r_max = radial_truncation_radius(n, alpha);
    let radial = SignedRadial {
        pos: fold_side(&pair.rho_rest, false, r_max)?,
        neg: fold_side(&pair.rho_rest, true, r_max)?,
    };
    let mass = radial.total_mass();
    if !mass.is_finite() {
        return Err(Error::FiniteActivity("radial mass is not finite".into()));
    }
    let compensator_drift = radial.signed_compensator();
    Ok(MatrixEnsembleParams {
        n,
        alpha,
        sigma_n2,
        gamma,
        jump_rate: nf * mass,
        radial,
        compensator_drift,
        truncation: None,
    })
}

impl MatrixEnsembleParams {
    /// Drop radial mass below `eps` while keeping its compensating drift.
    /// The truncation is recorded in the params metadata.
    pub fn with_small_jump_cutoff(mut self, eps: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::Domain("cutoff must be positive".into()));
        }
        let clip = |keep_above: f64| {
            move |m: &RealMeasure| -> RealMeasure {
                let atoms = m
                    .atoms
                    .iter()
                    .copied()
                    .filter(|&(r, _)| r >= keep_above)
                    .collect();
                let density = m.density.as_ref().map(|d| GridDensity {
                    lo: d.lo,
                    hi: d.hi,
                    samples: d
                        .samples
                        .iter()
                        .enumerate()
                        .map(|(i, &s)| if d.node(i) < keep_above { 0.0 } else { s })
                        .collect(),
                });
                RealMeasure { atoms, density }
            }
        };
        let cut = clip(eps);
        let truncated = SignedRadial {
            pos: cut(&self.radial.pos),
            neg: cut(&self.radial.neg),
        };
        let dropped_mass = self.radial.total_mass() - truncated.total_mass();
        let dropped_drift = self.radial.signed_compensator() - truncated.signed_compensator();
        // The full compensator (including the dropped band) stays in force.
        self.truncation = Some(SmallJumpTruncation {
            eps,
            dropped_mass,
            dropped_drift,
        });
        self.jump_rate = self.n as f64 * truncated.total_mass();
        self.radial = truncated;
        Ok(self)
    }

    /// Effective per-time drift of the diagonal: γ minus the jump
    /// compensator.
    pub fn effective_drift(&self) -> f64 {
        self.gamma - self.compensator_drift
    }
}

/// Haar-distributed unit vector on the sphere of ℂⁿ: normalised vector of
/// i.i.d. standard complex Gaussians.
pub fn sample_haar_vector(n: usize, rng: &mut impl Rng) -> Vec<Complex64> {
    loop {
        let mut v: Vec<Complex64> = (0..n)
            .map(|_| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                Complex64::new(re, im)
            })
            .collect();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            for z in &mut v {
                *z /= norm;
            }
            return v;
        }
    }
}

/// Increment of the Hermitian Brownian motion over a window of length `dt`:
/// diagonal entries N(0, dt), off-diagonal real and imaginary parts each
/// N(0, dt/2), all independent. `dt = 0` yields the zero matrix.
pub fn sample_hermitian_bm_increment(
    n: usize,
    dt: f64,
    rng: &mut impl Rng,
) -> Result<HermitianMatrix> {
    if !(dt >= 0.0) {
        return Err(Error::Domain(format!("dt must be >= 0, got {dt}")));
    }
    let mut m = HermitianMatrix::zeros(n);
    if dt == 0.0 {
        return Ok(m);
    }
    let sd = dt.sqrt();
    let so = (dt / 2.0).sqrt();
    let mut k = 0;
    for i in 0..n {
        let z: f64 = StandardNormal.sample(rng);
        m.data[k] = Complex64::new(sd * z, 0.0);
        k += 1;
        for _ in i + 1..n {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            m.data[k] = Complex64::new(so * re, so * im);
            k += 1;
        }
    }
    Ok(m)
}

/// A single rank-one jump of the path.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    pub r: f64,
    pub sign: i8,
    pub v: Vec<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Grid,
    Jump,
}

/// One recorded state of the path skeleton (value after the event).
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonPoint {
    pub time: f64,
    pub kind: EventKind,
    pub matrix: HermitianMatrix,
}

/// A simulated path: every skeleton state on the uniform grid merged with
/// the exact jump times.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub params: MatrixEnsembleParams,
    pub grid_times: Vec<f64>,
    pub jump_events: Vec<JumpEvent>,
    pub skeleton: Vec<SkeletonPoint>,
    pub seed: u64,
}

/// Event passed to the streaming visitor; `matrix` is the state after the
/// event was applied.
pub struct PathEvent<'a> {
    pub time: f64,
    pub kind: EventKind,
    pub matrix: &'a HermitianMatrix,
    /// Present for jump events.
    pub jump: Option<&'a JumpEvent>,
    /// State X(t−) just before a jump (after the Brownian/drift evolution
    /// over the preceding window), so X(t) − X(t−) is the jump increment.
    pub pre_jump: Option<&'a HermitianMatrix>,
}

/// Draw a value from a folded radial component (atom mixture plus gridded
/// density via inverse-CDF within the chosen cell).
fn sample_radial_value(m: &RealMeasure, rng: &mut impl Rng) -> f64 {
    let atom_mass: f64 = m.atoms.iter().map(|&(_, w)| w).sum();
    let dens_mass = m
        .density
        .as_ref()
        .map(|d| d.integrate(|_| 1.0))
        .unwrap_or(0.0);
    let u: f64 = rng.gen_range(0.0..atom_mass + dens_mass);
    if u < atom_mass {
        let mut acc = 0.0;
        for &(loc, w) in &m.atoms {
            acc += w;
            if u < acc {
                return loc;
            }
        }
        return m.atoms.last().map(|&(loc, _)| loc).unwrap_or(0.0);
    }
    let d = m.density.as_ref().expect("density mass without density");
    // Invert the piecewise-quadratic trapezoid CDF cell by cell.
    let mut target = u - atom_mass;
    let h = d.step();
    for i in 0..d.samples.len() - 1 {
        let s0 = d.samples[i];
        let s1 = d.samples[i + 1];
        let cell = 0.5 * (s0 + s1) * h;
        if target > cell {
            target -= cell;
            continue;
        }
        // Solve s0 ξ + (s1−s0) ξ²/2 = target/h for ξ ∈ [0, 1].
        let a = 0.5 * (s1 - s0);
        let b = s0;
        let c = -target / h;
        let xi = if a.abs() < 1e-300 {
            if b > 0.0 {
                -c / b
            } else {
                0.5
            }
        } else {
            let disc = (b * b - 4.0 * a * c).max(0.0).sqrt();
            let x1 = (-b + disc) / (2.0 * a);
            if (0.0..=1.0).contains(&x1) {
                x1
            } else {
                (-b - disc) / (2.0 * a)
            }
        };
        return d.node(i) + xi.clamp(0.0, 1.0) * h;
    }
    d.hi
}

/// Simulate a path, streaming every skeleton state to `visit` without
/// retaining matrices. `sample_path` builds on this and keeps everything.
pub fn simulate_path_with(
    params: &MatrixEnsembleParams,
    horizon: f64,
    n_grid: usize,
    seed: u64,
    mut visit: impl FnMut(PathEvent<'_>),
) -> Result<()> {
    if !(horizon > 0.0) {
        return Err(Error::Domain("horizon T must be > 0".into()));
    }
    if n_grid < 1 {
        return Err(Error::Domain("n_grid must be >= 1".into()));
    }
    if !params.jump_rate.is_finite() {
        return Err(Error::FiniteActivity(
            "jump rate is not finite; apply a small-jump cutoff first".into(),
        ));
    }
    if params.jump_rate * horizon > MAX_EXPECTED_JUMPS {
        return Err(Error::ResourceGuard(format!(
            "expected jump count {:.3e} exceeds {MAX_EXPECTED_JUMPS:.0e}",
            params.jump_rate * horizon
        )));
    }

    let mut rng = path_rng(seed);

    // Jump times first (exponential gaps), then marks in time order, then
    // Brownian increments in skeleton order: a fixed draw order makes the
    // path a pure function of (params, T, n_grid, seed).
    let mut jump_times = Vec::new();
    if params.jump_rate > 0.0 {
        let mut t = 0.0;
        loop {
            let u: f64 = rng.gen_range(0.0..1.0);
            t += -(1.0 - u).ln() / params.jump_rate;
            debug_assert!(t.is_finite());
            if t > horizon {
                break;
            }
            jump_times.push(t);
        }
    }
    let pos_mass = params.radial.pos.total_mass();
    let neg_mass = params.radial.neg.total_mass();
    let jumps: Vec<JumpEvent> = jump_times
        .iter()
        .map(|&time| {
            let side: f64 = rng.gen_range(0.0..pos_mass + neg_mass);
            let (component, sign) = if side < pos_mass {
                (&params.radial.pos, 1i8)
            } else {
                (&params.radial.neg, -1i8)
            };
            let r = sample_radial_value(component, &mut rng);
            let v = sample_haar_vector(params.n, &mut rng);
            JumpEvent { time, r, sign, v }
        })
        .collect();

    // Skeleton: uniform grid merged with jump times.
    enum Slot {
        Grid(f64),
        Jump(usize),
    }
    let mut slots: Vec<Slot> = (1..=n_grid)
        .map(|k| Slot::Grid(k as f64 * horizon / n_grid as f64))
        .collect();
    slots.extend((0..jumps.len()).map(Slot::Jump));
    slots.sort_by(|a, b| {
        let ta = match a {
            Slot::Grid(t) => *t,
            Slot::Jump(j) => jumps[*j].time,
        };
        let tb = match b {
            Slot::Grid(t) => *t,
            Slot::Jump(j) => jumps[*j].time,
        };
        ta.total_cmp(&tb)
    });

    let drift = params.effective_drift();
    let scale = (params.sigma_n2 / params.n as f64).sqrt();
    let mut x = HermitianMatrix::zeros(params.n);
    let mut pre = HermitianMatrix::zeros(params.n);
    visit(PathEvent {
        time: 0.0,
        kind: EventKind::Grid,
        matrix: &x,
        jump: None,
        pre_jump: None,
    });
    let mut prev_t = 0.0;
    for slot in &slots {
        let (time, kind, jump) = match slot {
            Slot::Grid(t) => (*t, EventKind::Grid, None),
            Slot::Jump(j) => (jumps[*j].time, EventKind::Jump, Some(&jumps[*j])),
        };
        let dt = time - prev_t;
        if dt > 0.0 {
            if params.sigma_n2 > 0.0 {
                let inc = sample_hermitian_bm_increment(params.n, dt, &mut rng)?;
                for (a, b) in x.data.iter_mut().zip(&inc.data) {
                    *a += scale * b;
                }
            }
            if drift != 0.0 {
                x.add_scaled_identity(drift * dt);
            }
        }
        if let Some(j) = jump {
            pre.data.copy_from_slice(&x.data);
            x.add_rank_one(j.sign as f64 * j.r, &j.v);
        }
        visit(PathEvent {
            time,
            kind,
            matrix: &x,
            jump,
            pre_jump: if jump.is_some() { Some(&pre) } else { None },
        });
        prev_t = time;
    }
    Ok(())
}

/// Simulate and retain the full skeleton. Prefer [`simulate_path_with`] for
/// large n where storing every matrix is wasteful.
pub fn sample_path(
    params: &MatrixEnsembleParams,
    horizon: f64,
    n_grid: usize,
    seed: u64,
) -> Result<PathSample> {
    let mut skeleton = Vec::new();
    let mut jump_events = Vec::new();
    simulate_path_with(params, horizon, n_grid, seed, |ev| {
        skeleton.push(SkeletonPoint {
            time: ev.time,
            kind: ev.kind,
            matrix: ev.matrix.clone(),
        });
        if let Some(j) = ev.jump {
            jump_events.push(j.clone());
        }
    })?;
    Ok(PathSample {
        params: params.clone(),
        grid_times: (0..=n_grid)
            .map(|k| k as f64 * horizon / n_grid as f64)
            .collect(),
        jump_events,
        skeleton,
        seed,
    })
}

/// Upper bound on the second singular value of `delta`, computed by
/// deflating the dominant eigenpair and taking the Frobenius norm of the
/// remainder. Exact rank-one matrices give values at rounding level.
pub fn second_singular_value_bound(delta: &HermitianMatrix) -> f64 {
    let n = delta.dim();
    if n == 1 {
        return 0.0;
    }
    // Start from the dominant column; for a numerically rank-one Hermitian
    // matrix this is already proportional to the eigenvector.
    let mut best_col = 0;
    let mut best_norm = -1.0;
    for j in 0..n {
        let norm: f64 = (0..n).map(|i| delta.get(i, j).norm_sqr()).sum();
        if norm > best_norm {
            best_norm = norm;
            best_col = j;
        }
    }
    if best_norm <= 0.0 {
        return 0.0;
    }
    let mut u: Vec<Complex64> = (0..n).map(|i| delta.get(i, best_col)).collect();
    let mut w = vec![Complex64::new(0.0, 0.0); n];
    for _ in 0..4 {
        let norm = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        for z in &mut u {
            *z /= norm;
        }
        delta.mul_vec(&u, &mut w);
        std::mem::swap(&mut u, &mut w);
    }
    let norm = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return 0.0;
    }
    for z in &mut u {
        *z /= norm;
    }
    delta.mul_vec(&u, &mut w);
    let mu: Complex64 = u.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
    // ‖Δ − μ u u*‖_F bounds every singular value beyond the first.
    let mut rem = 0.0;
    for i in 0..n {
        for j in i..n {
            let e = delta.get(i, j) - mu.re * u[i] * u[j].conj();
            let c = e.norm_sqr();
            rem += if i == j { c } else { 2.0 * c };
        }
    }
    rem.sqrt()
}
