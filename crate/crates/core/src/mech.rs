//! Spectrally positive Lévy Laplace exponents.
//!
//! A mechanism is the triplet (σ, γ, π) of the Laplace exponent
//!
//! ```text
//! Ψ(x) = σ²x²/2 − γx + ∫ (e^{−xh} − 1 + xh·1_{(0,1]}(h)) π(dh),
//! ```
//!
//! with π a measure on (0,∞) satisfying ∫(1 ∧ h²)π(dh) < ∞. The jump
//! measure is restricted to parametric families with closed-form Ψ
//! contributions plus a tabulated-tail fallback, so that Ψ, Ψ′ and Ψ″ are
//! evaluated exactly (up to rounding) and downstream quadrature error
//! budgets stay honest.

use crate::error::{CbmError, Result};
use crate::real::{as_f64, r, Real};
use crate::special::gamma;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Jump measure π on (0,∞).
#[derive(Debug, Clone, PartialEq)]
pub enum JumpMeasure<R: Real> {
    /// π = 0.
    NoJumps,
    /// π(dh) = c·h^{−1−β} dh on (0,∞), β ∈ (0,2), c > 0.
    StableTail { beta: R, c: R },
    /// π = rate · Exponential(1/mean), i.e. density rate·(1/mean)·e^{−h/mean}.
    CompoundExponential { rate: R, mean: R },
    /// Finitely many atoms (h_i, mass_i), h_i > 0, mass_i > 0.
    Atoms(Vec<(R, R)>),
    /// Tail table (h_i, π((h_i,∞))) with h_0 > 0 the support lower bound and
    /// nonincreasing tails; between knots the tail is linear (piecewise
    /// constant density), any residual tail mass sits as an atom at the last
    /// knot. `heavy_tail` declares that the table truncates a measure with
    /// ∫_{(1,∞)} h π(dh) = ∞, which forces Ψ′(0+) = −∞ in classifications.
    TabulatedTail { points: Vec<(R, R)>, heavy_tail: bool },
}

/// A spectrally positive Lévy Laplace exponent.
#[derive(Debug, Clone, PartialEq)]
pub struct LevyMechanism<R: Real> {
    sigma: R,
    gamma: R,
    jumps: JumpMeasure<R>,
}

/// Branching mechanism Ψ_b and migration mechanism Ψ_m; construction
/// enforces the standing non-degeneracy assumption (neither driver has a.s.
/// nondecreasing paths).
#[derive(Debug, Clone, PartialEq)]
pub struct MechanismPair<R: Real> {
    branching: LevyMechanism<R>,
    migration: LevyMechanism<R>,
}

// ---------------------------------------------------------------------------
// stable segment primitives: ∫_a^b h^k e^{-xh} dh, cancellation-safe in x
// ---------------------------------------------------------------------------

/// ∫_a^b e^{−xh} dh for 0 ≤ a ≤ b, x ≥ 0.
fn seg_e0<R: Real>(a: R, b: R, x: R) -> R {
    if x == R::zero() {
        return b - a;
    }
    let d = b - a;
    // e^{-xa} − e^{-xb} = −e^{-xa}·expm1(−x d)
    -(-(x * a)).exp() * (-(x * d)).exp_m1() / x
}

/// ∫_a^b h·e^{−xh} dh.
fn seg_e1<R: Real>(a: R, b: R, x: R) -> R {
    if x == R::zero() {
        return (b * b - a * a) / r(2.0);
    }
    let d = b - a;
    let ed = (-(x * d)).exp();
    // (xa+1) − (xb+1)e^{-xd} = −(xa+1)·expm1(−xd) − xd·e^{-xd}
    let core = -(x * a + R::one()) * (-(x * d)).exp_m1() - x * d * ed;
    (-(x * a)).exp() * core / (x * x)
}

/// ∫_a^b h²·e^{−xh} dh.
fn seg_e2<R: Real>(a: R, b: R, x: R) -> R {
    if x == R::zero() {
        return (b * b * b - a * a * a) / r(3.0);
    }
    let d = b - a;
    let ed = (-(x * d)).exp();
    let pa = x * x * a * a + r::<R>(2.0) * x * a + r(2.0);
    let pb = x * x * b * b + r::<R>(2.0) * x * b + r(2.0);
    // pa − pb·e^{-xd} = −pa·expm1(−xd) + (pa − pb)e^{-xd}
    let core = -pa * (-(x * d)).exp_m1() + (pa - pb) * ed;
    (-(x * a)).exp() * core / (x * x * x)
}

impl<R: Real> JumpMeasure<R> {
    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CbmError::InvalidMechanism(msg));
        match self {
            JumpMeasure::NoJumps => Ok(()),
            JumpMeasure::StableTail { beta, c } => {
                if !(*beta > R::zero() && *beta < r(2.0)) {
                    return bad(format!("stable tail exponent must lie in (0,2), got {beta}"));
                }
                if !(*c > R::zero()) {
                    return bad(format!("stable tail coefficient must be positive, got {c}"));
                }
                Ok(())
            }
            JumpMeasure::CompoundExponential { rate, mean } => {
                if !(*rate > R::zero() && *mean > R::zero()) {
                    return bad("compound-exponential rate and mean must be positive".into());
                }
                Ok(())
            }
            JumpMeasure::Atoms(atoms) => {
                for &(h, m) in atoms {
                    if !(h > R::zero() && m > R::zero()) {
                        return bad("atoms require positive sizes and masses".into());
                    }
                }
                Ok(())
            }
            JumpMeasure::TabulatedTail { points, .. } => {
                if points.is_empty() {
                    return bad("tabulated tail requires at least one knot".into());
                }
                if !(points[0].0 > R::zero()) {
                    return bad("tabulated tail support lower bound must be > 0".into());
                }
                for w in points.windows(2) {
                    if !(w[1].0 > w[0].0) {
                        return bad("tabulated tail knots must be strictly increasing".into());
                    }
                    if w[1].1 > w[0].1 {
                        return bad("tabulated tail masses must be nonincreasing".into());
                    }
                }
                if points.iter().any(|&(_, t)| t < R::zero()) {
                    return bad("tabulated tail masses must be nonnegative".into());
                }
                Ok(())
            }
        }
    }

    /// Piecewise-constant densities (a, b, rho) plus the residual atom
    /// (h_last, mass) of a tabulated tail.
    pub(crate) fn tabulated_segments(points: &[(R, R)]) -> (Vec<(R, R, R)>, (R, R)) {
        let mut segs = Vec::with_capacity(points.len());
        for w in points.windows(2) {
            let (a, ta) = w[0];
            let (b, tb) = w[1];
            segs.push((a, b, (ta - tb) / (b - a)));
        }
        let last = *points.last().expect("validated non-empty");
        (segs, last)
    }
}

impl<R: Real> LevyMechanism<R> {
    pub fn new(sigma: R, gamma: R, jumps: JumpMeasure<R>) -> Result<Self> {
        if !(sigma >= R::zero()) {
            return Err(CbmError::InvalidMechanism(format!(
                "diffusion coefficient must be nonnegative, got {sigma}"
            )));
        }
        if !gamma.is_finite() {
            return Err(CbmError::InvalidMechanism("centering must be finite".into()));
        }
        jumps.validate()?;
        Ok(Self { sigma, gamma, jumps })
    }

    /// Ψ(x) = x, the unit-drift mechanism (γ = −1).
    pub fn identity() -> Self {
        Self::linear_drift(R::one())
    }

    /// Ψ(x) = b·x.
    pub fn linear_drift(b: R) -> Self {
        Self { sigma: R::zero(), gamma: -b, jumps: JumpMeasure::NoJumps }
    }

    /// Ψ(x) = x² (σ = √2, no drift, no jumps).
    pub fn brownian_square() -> Self {
        Self { sigma: r::<R>(2.0).sqrt(), gamma: R::zero(), jumps: JumpMeasure::NoJumps }
    }

    /// Ψ(x) = x² − x (σ = √2, γ = 1).
    pub fn brownian_square_minus_id() -> Self {
        Self { sigma: r::<R>(2.0).sqrt(), gamma: R::one(), jumps: JumpMeasure::NoJumps }
    }

    /// Ψ(x) = x² − √x: σ = √2 plus a β = 1/2 stable tail with the √x
    /// coefficient normalized to 1 and γ cancelling the compensation term.
    pub fn explosive_square_minus_sqrt() -> Self {
        let pi = r::<R>(std::f64::consts::PI);
        let c = (r::<R>(2.0) * pi.sqrt()).recip();
        // jump part: c(−2√π √x + 2x); kill the linear term with γ = 2c
        Self {
            sigma: r::<R>(2.0).sqrt(),
            gamma: r::<R>(2.0) * c,
            jumps: JumpMeasure::StableTail { beta: r(0.5), c },
        }
    }

    pub fn sigma(&self) -> R {
        self.sigma
    }

    pub fn gamma(&self) -> R {
        self.gamma
    }

    pub fn jumps(&self) -> &JumpMeasure<R> {
        &self.jumps
    }

    /// The Laplace exponent Ψ(x), x ≥ 0.
    pub fn psi(&self, x: R) -> R {
        debug_assert!(x >= R::zero());
        let half = r::<R>(0.5);
        half * self.sigma * self.sigma * x * x - self.gamma * x + self.jump_psi(x)
    }

    fn jump_psi(&self, x: R) -> R {
        let two = r::<R>(2.0);
        match &self.jumps {
            JumpMeasure::NoJumps => R::zero(),
            JumpMeasure::Atoms(atoms) => atoms
                .iter()
                .map(|&(h, m)| {
                    let comp = if h <= R::one() { x * h } else { R::zero() };
                    m * ((-(x * h)).exp() - R::one() + comp)
                })
                .sum(),
            JumpMeasure::CompoundExponential { rate, mean } => {
                let lam = mean.recip();
                let m1_unit = *mean
                    * (R::one() - (-lam).exp() * (R::one() + lam));
                -*rate * x / (lam + x) + x * *rate * m1_unit
            }
            JumpMeasure::StableTail { beta, c } => {
                let b = *beta;
                if (b - R::one()).abs() < r(1e-12) {
                    if x == R::zero() {
                        R::zero()
                    } else {
                        *c * x * (x.ln() + r::<R>(EULER_GAMMA) - R::one())
                    }
                } else if b < R::one() {
                    *c * (-gamma(R::one() - b) / b * x.powf(b) + x / (R::one() - b))
                } else {
                    *c * (gamma(two - b) / (b * (b - R::one())) * x.powf(b)
                        - x / (b - R::one()))
                }
            }
            JumpMeasure::TabulatedTail { points, .. } => {
                let (segs, (h_last, m_last)) = JumpMeasure::tabulated_segments(points);
                let mut acc = R::zero();
                for (a, b, rho) in segs {
                    if rho == R::zero() {
                        continue;
                    }
                    // split at the compensation cutoff h = 1
                    for (lo, hi) in split_at_one(a, b) {
                        let comp = if hi <= R::one() {
                            x * (hi * hi - lo * lo) / two
                        } else {
                            R::zero()
                        };
                        acc += rho * (seg_e0(lo, hi, x) - (hi - lo) + comp);
                    }
                }
                if m_last > R::zero() {
                    let comp = if h_last <= R::one() { x * h_last } else { R::zero() };
                    acc += m_last * ((-(x * h_last)).exp() - R::one() + comp);
                }
                acc
            }
        }
    }

    /// Ψ′(x) for x > 0 (and x = 0 when finite there).
    pub fn psi_prime(&self, x: R) -> R {
        self.sigma * self.sigma * x - self.gamma + self.jump_psi_prime(x)
    }

    fn jump_psi_prime(&self, x: R) -> R {
        let two = r::<R>(2.0);
        match &self.jumps {
            JumpMeasure::NoJumps => R::zero(),
            JumpMeasure::Atoms(atoms) => atoms
                .iter()
                .map(|&(h, m)| {
                    let comp = if h <= R::one() { h } else { R::zero() };
                    m * (comp - h * (-(x * h)).exp())
                })
                .sum(),
            JumpMeasure::CompoundExponential { rate, mean } => {
                let lam = mean.recip();
                let m1_unit = *mean
                    * (R::one() - (-lam).exp() * (R::one() + lam));
                -*rate * lam / ((lam + x) * (lam + x)) + *rate * m1_unit
            }
            JumpMeasure::StableTail { beta, c } => {
                let b = *beta;
                if (b - R::one()).abs() < r(1e-12) {
                    *c * (x.ln() + r::<R>(EULER_GAMMA))
                } else if b < R::one() {
                    *c * (-gamma(R::one() - b) * x.powf(b - R::one())
                        + (R::one() - b).recip())
                } else {
                    *c / (b - R::one())
                        * (gamma(two - b) * x.powf(b - R::one()) - R::one())
                }
            }
            JumpMeasure::TabulatedTail { points, .. } => {
                let (segs, (h_last, m_last)) = JumpMeasure::tabulated_segments(points);
                let mut acc = R::zero();
                for (a, b, rho) in segs {
                    if rho == R::zero() {
                        continue;
                    }
                    for (lo, hi) in split_at_one(a, b) {
                        let comp = if hi <= R::one() {
                            (hi * hi - lo * lo) / two
                        } else {
                            R::zero()
                        };
                        acc += rho * (comp - seg_e1(lo, hi, x));
                    }
                }
                if m_last > R::zero() {
                    let comp = if h_last <= R::one() { h_last } else { R::zero() };
                    acc += m_last * (comp - h_last * (-(x * h_last)).exp());
                }
                acc
            }
        }
    }

    /// Ψ″(x) = σ² + ∫ h²e^{−xh} π(dh); finite for x > 0, may be +∞ at 0.
    pub fn psi_second(&self, x: R) -> R {
        let two = r::<R>(2.0);
        let jump = match &self.jumps {
            JumpMeasure::NoJumps => R::zero(),
            JumpMeasure::Atoms(atoms) => atoms
                .iter()
                .map(|&(h, m)| m * h * h * (-(x * h)).exp())
                .sum(),
            JumpMeasure::CompoundExponential { rate, mean } => {
                let lam = mean.recip();
                let d = lam + x;
                *rate * two * lam / (d * d * d)
            }
            JumpMeasure::StableTail { beta, c } => {
                if x == R::zero() {
                    R::infinity()
                } else {
                    *c * gamma(two - *beta) * x.powf(*beta - two)
                }
            }
            JumpMeasure::TabulatedTail { points, .. } => {
                let (segs, (h_last, m_last)) = JumpMeasure::tabulated_segments(points);
                let mut acc = R::zero();
                for (a, b, rho) in segs {
                    if rho != R::zero() {
                        acc += rho * seg_e2(a, b, x);
                    }
                }
                acc + m_last * h_last * h_last * (-(x * h_last)).exp()
            }
        };
        self.sigma * self.sigma + jump
    }

    /// Ψ′(0+) = −γ − ∫_{(1,∞)} h π(dh); −∞ when the tail first moment
    /// diverges (stable tails with β ≤ 1, or a declared heavy tabulated tail).
    pub fn psi_prime_at_zero(&self) -> R {
        let tail = self.tail_first_moment();
        if tail.is_infinite() {
            R::neg_infinity()
        } else {
            -self.gamma - tail
        }
    }

    /// ∫_{(1,∞)} h π(dh), possibly +∞.
    pub fn tail_first_moment(&self) -> R {
        match &self.jumps {
            JumpMeasure::NoJumps => R::zero(),
            JumpMeasure::Atoms(atoms) => atoms
                .iter()
                .filter(|&&(h, _)| h > R::one())
                .map(|&(h, m)| h * m)
                .sum(),
            JumpMeasure::CompoundExponential { rate, mean } => {
                let lam = mean.recip();
                *rate * (-lam).exp() * (R::one() + *mean)
            }
            JumpMeasure::StableTail { beta, c } => {
                if *beta <= R::one() {
                    R::infinity()
                } else {
                    *c / (*beta - R::one())
                }
            }
            JumpMeasure::TabulatedTail { heavy_tail, .. } => {
                if *heavy_tail {
                    return R::infinity();
                }
                self.first_moment_between(R::one(), R::infinity())
            }
        }
    }

    /// ∫_{(0,1]} h π(dh), possibly +∞ (stable tails with β ≥ 1).
    pub fn small_jump_first_moment(&self) -> R {
        match &self.jumps {
            JumpMeasure::NoJumps => R::zero(),
            JumpMeasure::Atoms(atoms) => atoms
                .iter()
                .filter(|&&(h, _)| h <= R::one())
                .map(|&(h, m)| h * m)
                .sum(),
            JumpMeasure::CompoundExponential { rate, mean } => {
                let lam = mean.recip();
                *rate * *mean * (R::one() - (-lam).exp() * (R::one() + lam))
            }
            JumpMeasure::StableTail { beta, c } => {
                if *beta >= R::one() {
                    R::infinity()
                } else {
                    *c / (R::one() - *beta)
                }
            }
            JumpMeasure::TabulatedTail { .. } => {
                self.first_moment_between(R::zero(), R::one())
            }
        }
    }

    /// π((eps, ∞)); finite for all admissible variants once eps > 0.
    pub fn tail_mass_above(&self, eps: R) -> R {
        debug_assert!(eps > R::zero());
        match &self.jumps {
            JumpMeasure::NoJumps => R::zero(),
            JumpMeasure::Atoms(atoms) => atoms
                .iter()
                .filter(|&&(h, _)| h > eps)
                .map(|&(_, m)| m)
                .sum(),
            JumpMeasure::CompoundExponential { rate, mean } => {
                *rate * (-(eps / *mean)).exp()
            }
            JumpMeasure::StableTail { beta, c } => *c * eps.powf(-*beta) / *beta,
            JumpMeasure::TabulatedTail { points, .. } => {
                if eps <= points[0].0 {
                    return points[0].1;
                }
                let last = points.last().unwrap();
                if eps >= last.0 {
                    return R::zero();
                }
                for w in points.windows(2) {
                    let (a, ta) = w[0];
                    let (b, tb) = w[1];
                    if eps >= a && eps < b {
                        return ta + (tb - ta) * (eps - a) / (b - a);
                    }
                }
                R::zero()
            }
        }
    }

    /// ∫_{(a,b]} h π(dh); finite whenever a > 0 (or the small-jump moment is).
    pub fn first_moment_between(&self, a: R, b: R) -> R {
        let two = r::<R>(2.0);
        match &self.jumps {
            JumpMeasure::NoJumps => R::zero(),
            JumpMeasure::Atoms(atoms) => atoms
                .iter()
                .filter(|&&(h, _)| h > a && h <= b)
                .map(|&(h, m)| h * m)
                .sum(),
            JumpMeasure::CompoundExponential { rate, mean } => {
                let lam = mean.recip();
                let upper = |t: R| -> R {
                    if t.is_infinite() {
                        R::zero()
                    } else {
                        (-(lam * t)).exp() * (t + *mean)
                    }
                };
                *rate * (upper(a) - upper(b))
            }
            JumpMeasure::StableTail { beta, c } => {
                let e = R::one() - *beta;
                if e.abs() < r(1e-12) {
                    *c * (b.min(r(1e300)) / a).ln()
                } else if b.is_infinite() {
                    if e > R::zero() {
                        R::infinity()
                    } else {
                        -*c * a.powf(e) / e
                    }
                } else {
                    *c * (b.powf(e) - a.powf(e)) / e
                }
            }
            JumpMeasure::TabulatedTail { points, .. } => {
                let (segs, (h_last, m_last)) = JumpMeasure::tabulated_segments(points);
                let mut acc = R::zero();
                for (lo, hi, rho) in segs {
                    let l = lo.max(a);
                    let h = if b.is_infinite() { hi } else { hi.min(b) };
                    if h > l {
                        acc += rho * (h * h - l * l) / two;
                    }
                }
                if h_last > a && (b.is_infinite() || h_last <= b) {
                    acc += m_last * h_last;
                }
                acc
            }
        }
    }

    /// ∫_{(0,eps]} h² π(dh).
    pub fn second_moment_below(&self, eps: R) -> R {
        let three = r::<R>(3.0);
        match &self.jumps {
            JumpMeasure::NoJumps => R::zero(),
            JumpMeasure::Atoms(atoms) => atoms
                .iter()
                .filter(|&&(h, _)| h <= eps)
                .map(|&(h, m)| h * h * m)
                .sum(),
            JumpMeasure::CompoundExponential { rate, mean } => {
                let lam = mean.recip();
                let m = *mean;
                // ∫_0^eps h² λ e^{-λh} dh = 2m² − e^{-eps/m}(eps² + 2 eps m + 2m²)
                *rate
                    * (r::<R>(2.0) * m * m
                        - (-(lam * eps)).exp()
                            * (eps * eps + r::<R>(2.0) * eps * m + r::<R>(2.0) * m * m))
            }
            JumpMeasure::StableTail { beta, c } => {
                *c * eps.powf(r::<R>(2.0) - *beta) / (r::<R>(2.0) - *beta)
            }
            JumpMeasure::TabulatedTail { points, .. } => {
                let (segs, (h_last, m_last)) = JumpMeasure::tabulated_segments(points);
                let mut acc = R::zero();
                for (lo, hi, rho) in segs {
                    let h = hi.min(eps);
                    if h > lo {
                        acc += rho * (h * h * h - lo * lo * lo) / three;
                    }
                }
                if h_last <= eps {
                    acc += m_last * h_last * h_last;
                }
                acc
            }
        }
    }

    /// True iff the associated Lévy process has a.s. nondecreasing paths
    /// (a subordinator): σ = 0, finite small-jump first moment, and true
    /// drift γ − ∫_{(0,1]} h π(dh) ≥ 0.
    pub fn is_nondecreasing(&self) -> bool {
        if self.sigma > R::zero() {
            return false;
        }
        let sjm = self.small_jump_first_moment();
        if sjm.is_infinite() {
            return false;
        }
        self.gamma - sjm >= R::zero()
    }

    /// Right-continuous inverse Ψ^{-1}(t) = inf{z ≥ 0 : Ψ(z) > t}.
    ///
    /// `tol` is relative; bracketing by doubling (the superlevel set of a
    /// convex Ψ with Ψ → ∞ is a right half-line), then bisection.
    pub fn psi_inverse(&self, t: R, tol: R) -> Result<R> {
        if !(t >= R::zero()) || !(tol > R::zero()) {
            return Err(CbmError::InvalidArgument(
                "psi_inverse requires t >= 0 and tol > 0".into(),
            ));
        }
        if self.is_nondecreasing() {
            return Err(CbmError::BracketFailure(
                "mechanism is a subordinator; psi does not diverge".into(),
            ));
        }
        let mut hi = R::one();
        let cap = r::<R>(1e150);
        while self.psi(hi) <= t {
            hi = hi * r(2.0);
            if hi > cap {
                return Err(CbmError::BracketFailure(format!(
                    "psi never exceeded level {t} below {}",
                    as_f64(cap)
                )));
            }
        }
        let mut lo = R::zero();
        // invariant: psi(lo) <= t < psi(hi)
        while hi - lo > tol * R::one().max(hi) {
            let mid = (lo + hi) * r(0.5);
            if self.psi(mid) > t {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        // Newton polish: downstream integrands subtract a pole at this
        // root, so bisection accuracy (≈ tol) is not enough — a residual
        // offset leaves an unresolvable spike in the decomposed integrand.
        let mut z = (lo + hi) * r(0.5);
        for _ in 0..4 {
            let d = self.psi_prime(z);
            if !(d.abs() > R::zero()) || !d.is_finite() {
                break;
            }
            let step = (self.psi(z) - t) / d;
            let next = z - step;
            if !(next >= lo && next <= hi) {
                break;
            }
            z = next;
            if step.abs() <= R::epsilon() * R::one().max(z) {
                break;
            }
        }
        // exact-zero root: subcritical/critical mechanisms cross 0 at 0
        if t == R::zero() && z <= tol && self.psi_prime_at_zero() >= R::zero() {
            z = R::zero();
        }
        Ok(z)
    }

    /// Whether the CSBP with this branching mechanism is explosive, i.e.
    /// ∫_{0+} dz/|Ψ| < ∞, decided by per-variant asymptotics at 0+.
    pub fn csbp_explosive(&self) -> Result<bool> {
        if self.psi_prime_at_zero() > R::neg_infinity() {
            // |Ψ(z)| ≲ C·z near zero: the integral diverges
            return Ok(false);
        }
        match &self.jumps {
            JumpMeasure::StableTail { beta, .. } => {
                if *beta < R::one() {
                    Ok(true)
                } else {
                    // β = 1: |Ψ(z)| ~ c·z·ln(1/z), still a divergent integral
                    Ok(false)
                }
            }
            JumpMeasure::TabulatedTail { .. } => Err(CbmError::Undecided(
                "tabulated heavy tail: small-z exponent of psi not classified".into(),
            )),
            _ => Ok(false),
        }
    }

    /// Leading small-z behavior |Ψ(z)| ≈ coeff·z^β when Ψ′(0+) = −∞ and the
    /// exponent is below one (the explosive regime).
    pub fn small_psi_exponent(&self) -> Option<(R, R)> {
        match &self.jumps {
            JumpMeasure::StableTail { beta, c } if *beta < R::one() => {
                Some((*beta, *c * gamma(R::one() - *beta) / *beta))
            }
            _ => None,
        }
    }
}

fn split_at_one<R: Real>(a: R, b: R) -> Vec<(R, R)> {
    if b <= R::one() || a >= R::one() {
        vec![(a, b)]
    } else {
        vec![(a, R::one()), (R::one(), b)]
    }
}

impl<R: Real> MechanismPair<R> {
    pub fn new(branching: LevyMechanism<R>, migration: LevyMechanism<R>) -> Result<Self> {
        if !Self::check_nondegenerate(&branching, &migration) {
            let which = if branching.is_nondecreasing() {
                "branching driver L"
            } else {
                "migration driver X"
            };
            return Err(CbmError::Degenerate(format!(
                "{which} has a.s. nondecreasing paths"
            )));
        }
        Ok(Self { branching, migration })
    }

    /// The standing assumption: neither driver has a.s. nondecreasing paths.
    pub fn check_nondegenerate(
        branching: &LevyMechanism<R>,
        migration: &LevyMechanism<R>,
    ) -> bool {
        !branching.is_nondecreasing() && !migration.is_nondecreasing()
    }

    pub fn branching(&self) -> &LevyMechanism<R> {
        &self.branching
    }

    pub fn migration(&self) -> &LevyMechanism<R> {
        &self.migration
    }
}
