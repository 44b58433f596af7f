//! Adaptive Gauss–Kronrod quadrature with endpoint-singularity helpers.
//!
//! The workhorse is a 15-point Kronrod rule with embedded 7-point Gauss rule
//! on each panel, refined by interval bisection against a mixed
//! absolute/relative tolerance. All nodes are interior, so integrands may be
//! singular at panel endpoints as long as the singularity is integrable and
//! has been softened by one of the power substitutions below.

use crate::error::{CbmError, Result};
use crate::real::{r, Real};

// Kronrod-15 nodes (nonnegative half) and weights; Gauss-7 weights align
// with the odd-indexed Kronrod nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_2,
    0.949_107_912_342_758_524_5,
    0.864_864_423_359_769_072_8,
    0.741_531_185_599_394_439_9,
    0.586_087_235_467_691_130_3,
    0.405_845_151_377_397_166_9,
    0.207_784_955_007_898_467_6,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_96,
    0.063_092_092_629_978_553_29,
    0.104_790_010_322_250_183_8,
    0.140_653_259_715_525_918_7,
    0.169_004_726_639_267_902_8,
    0.190_350_578_064_785_409_9,
    0.204_432_940_075_298_892_4,
    0.209_482_141_084_727_828_0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_3,
    0.279_705_391_489_276_667_9,
    0.381_830_050_505_118_944_9,
    0.417_959_183_673_469_387_8,
];

/// Value and a (heuristic but conservative) absolute error bound.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult<R> {
    pub value: R,
    pub abs_error: R,
}

/// One GK15(7) panel: returns (kronrod, |kronrod − gauss| based error).
pub fn gk15<R: Real, F: Fn(R) -> R>(f: &F, a: R, b: R) -> (R, R) {
    let half = r::<R>(0.5);
    let center = half * (a + b);
    let hlen = half * (b - a);
    let mut kronrod = R::zero();
    let mut gauss = R::zero();
    let mut resabs = R::zero();
    for (i, (&x, &wk)) in XGK.iter().zip(WGK.iter()).enumerate() {
        let dx = hlen * r::<R>(x);
        let (fl, fr);
        if i == 7 {
            fl = f(center);
            kronrod += r::<R>(wk) * fl;
            resabs += r::<R>(wk) * fl.abs();
            gauss += r::<R>(WG[3]) * fl;
            continue;
        }
        fl = f(center - dx);
        fr = f(center + dx);
        kronrod += r::<R>(wk) * (fl + fr);
        resabs += r::<R>(wk) * (fl.abs() + fr.abs());
        if i % 2 == 1 {
            gauss += r::<R>(WG[i / 2]) * (fl + fr);
        }
    }
    kronrod *= hlen;
    gauss *= hlen;
    resabs *= hlen.abs();
    let diff = (kronrod - gauss).abs();
    // standard QUADPACK-style sharpening of the raw difference
    let err = if resabs > R::zero() && diff > R::zero() {
        let scaled = (r::<R>(200.0) * diff / resabs).powf(r(1.5));
        if scaled < R::one() {
            resabs * scaled
        } else {
            diff
        }
    } else {
        diff
    };
    (kronrod, err)
}

/// Adaptive integration of `f` over the finite interval [a, b].
///
/// Refines the worst panel first until the summed error bound satisfies
/// `abs_tol + rel_tol·|value|`, or errors out after `max_panels` panels.
pub fn integrate<R: Real, F: Fn(R) -> R>(
    f: &F,
    a: R,
    b: R,
    rel_tol: R,
    abs_tol: R,
    max_panels: usize,
) -> Result<QuadResult<R>> {
    let q = integrate_lenient(f, a, b, rel_tol, abs_tol, max_panels)?;
    if !q.value.is_finite() || q.abs_error > abs_tol + rel_tol * q.value.abs() {
        return Err(CbmError::QuadratureAccuracy {
            achieved: q.abs_error.to_f64().unwrap_or(f64::INFINITY),
        });
    }
    Ok(q)
}

/// Like [`integrate`] but never fails on tolerance: when the panel budget
/// runs out, the best available value is returned with its (too-large)
/// error bound, letting the caller decide.
pub fn integrate_lenient<R: Real, F: Fn(R) -> R>(
    f: &F,
    a: R,
    b: R,
    rel_tol: R,
    abs_tol: R,
    max_panels: usize,
) -> Result<QuadResult<R>> {
    if !(b >= a) {
        return Err(CbmError::InvalidArgument(format!(
            "integration bounds out of order: [{a}, {b}]"
        )));
    }
    if a == b {
        return Ok(QuadResult { value: R::zero(), abs_error: R::zero() });
    }
    let (v0, e0) = gk15(f, a, b);
    if !v0.is_finite() {
        return Ok(QuadResult { value: v0, abs_error: R::infinity() });
    }
    // worst-panel-first refinement over a simple vector heap
    let mut panels: Vec<(R, R, R, R)> = vec![(a, b, v0, e0)]; // (lo, hi, val, err)
    loop {
        let value: R = panels.iter().map(|p| p.2).sum();
        let error: R = panels.iter().map(|p| p.3).sum();
        let target = abs_tol + rel_tol * value.abs();
        if error <= target || panels.len() >= max_panels {
            return Ok(QuadResult { value, abs_error: error });
        }
        let (wi, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| {
                x.1 .3
                    .partial_cmp(&y.1 .3)
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .expect("non-empty panel list");
        let (lo, hi, _, _) = panels.swap_remove(wi);
        let mid = (lo + hi) * r(0.5);
        if mid <= lo || mid >= hi {
            // interval at floating-point resolution; keep its estimate
            let (v, e) = gk15(f, lo, hi);
            panels.push((lo, hi, v, e * r(0.1)));
            continue;
        }
        let (v1, e1) = gk15(f, lo, mid);
        let (v2, e2) = gk15(f, mid, hi);
        if !(v1.is_finite() && v2.is_finite()) {
            let value: R = panels.iter().map(|p| p.2).sum::<R>() + v1 + v2;
            return Ok(QuadResult { value, abs_error: R::infinity() });
        }
        panels.push((lo, mid, v1, e1));
        panels.push((mid, hi, v2, e2));
    }
}

/// ∫_a^b f(z) dz where f(z) ~ C·(z − a)^{ρ−1} near a with ρ > 0.
///
/// Substitutes z = a + s^{1/ρ}, which maps the endpoint power to a bounded
/// integrand in s over [0, (b−a)^ρ].
pub fn integrate_power_lower<R: Real, F: Fn(R) -> R>(
    f: &F,
    a: R,
    b: R,
    rho: R,
    rel_tol: R,
    abs_tol: R,
    max_panels: usize,
) -> Result<QuadResult<R>> {
    debug_assert!(rho > R::zero());
    if rho == R::one() {
        return integrate(f, a, b, rel_tol, abs_tol, max_panels);
    }
    let upper = (b - a).powf(rho);
    let inv = rho.recip();
    let g = move |s: R| -> R {
        let z = a + s.powf(inv);
        f(z) * inv * s.powf(inv - R::one())
    };
    integrate(&g, R::zero(), upper, rel_tol, abs_tol, max_panels)
}

/// Lenient counterpart of [`integrate_power_lower`].
pub fn integrate_power_lower_lenient<R: Real, F: Fn(R) -> R>(
    f: &F,
    a: R,
    b: R,
    rho: R,
    rel_tol: R,
    abs_tol: R,
    max_panels: usize,
) -> Result<QuadResult<R>> {
    debug_assert!(rho > R::zero());
    if rho == R::one() {
        return integrate_lenient(f, a, b, rel_tol, abs_tol, max_panels);
    }
    let upper = (b - a).powf(rho);
    let inv = rho.recip();
    let g = move |s: R| -> R {
        let z = a + s.powf(inv);
        f(z) * inv * s.powf(inv - R::one())
    };
    integrate_lenient(&g, R::zero(), upper, rel_tol, abs_tol, max_panels)
}

/// Lenient counterpart of [`integrate_power_upper`].
pub fn integrate_power_upper_lenient<R: Real, F: Fn(R) -> R>(
    f: &F,
    a: R,
    b: R,
    rho: R,
    rel_tol: R,
    abs_tol: R,
    max_panels: usize,
) -> Result<QuadResult<R>> {
    debug_assert!(rho > R::zero());
    if rho == R::one() {
        return integrate_lenient(f, a, b, rel_tol, abs_tol, max_panels);
    }
    let upper = (b - a).powf(rho);
    let inv = rho.recip();
    let g = move |s: R| -> R {
        let z = b - s.powf(inv);
        f(z) * inv * s.powf(inv - R::one())
    };
    integrate_lenient(&g, R::zero(), upper, rel_tol, abs_tol, max_panels)
}

/// ∫_a^b f(z) dz where f(z) ~ C·(b − z)^{ρ−1} near b with ρ > 0.
pub fn integrate_power_upper<R: Real, F: Fn(R) -> R>(
    f: &F,
    a: R,
    b: R,
    rho: R,
    rel_tol: R,
    abs_tol: R,
    max_panels: usize,
) -> Result<QuadResult<R>> {
    debug_assert!(rho > R::zero());
    if rho == R::one() {
        return integrate(f, a, b, rel_tol, abs_tol, max_panels);
    }
    let upper = (b - a).powf(rho);
    let inv = rho.recip();
    let g = move |s: R| -> R {
        let z = b - s.powf(inv);
        f(z) * inv * s.powf(inv - R::one())
    };
    integrate(&g, R::zero(), upper, rel_tol, abs_tol, max_panels)
}
