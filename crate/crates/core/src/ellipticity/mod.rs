//! Algebraic ellipticity quantities of a complex coefficient matrix:
//! uniform ellipticity bounds, `Delta_p`, `mu(A)`, `mu~(A)`, the admissible
//! exponent interval `(p0, p0')` and the real-variable dissipativity forms.

mod matrix;
mod sphere;

pub use matrix::ComplexMatrix;
pub use sphere::{SphereMin, SphereSearch};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{PellError, Result};
use matrix::to_complex;

/// Positivity decisions use `margin > POSITIVITY_TOL`.
pub const POSITIVITY_TOL: f64 = 1e-9;
/// Margins with `|margin| < INDETERMINATE_BAND` are reported as ties.
pub const INDETERMINATE_BAND: f64 = 1e-6;

/// Hoelder conjugate `p / (p - 1)`; infinite at `p = 1`.
pub fn conjugate_exponent(p: f64) -> f64 {
    if p <= 1.0 {
        f64::INFINITY
    } else {
        p / (p - 1.0)
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if !p.is_finite() || p <= 1.0 {
        Err(PellError::InvalidExponent(p))
    } else {
        Ok(())
    }
}

/// Lower ellipticity constant `lambda = min Re<A xi, xi>` over the complex
/// unit sphere and upper bound `Lambda = max |A xi|`.
pub fn check_uniform_ellipticity(a: &ComplexMatrix, search: &SphereSearch) -> Result<(f64, f64)> {
    let n = a.dim();
    let lower = search
        .minimize(2 * n, |x| {
            let xi = to_complex(x);
            a.sesquilinear(&xi, &xi).re
        })
        .value;
    if lower <= POSITIVITY_TOL {
        return Err(PellError::NotElliptic(lower));
    }
    let upper = search
        .maximize(2 * n, |x| {
            let xi = to_complex(x);
            a.apply(&xi).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
        })
        .value;
    Ok((lower, upper))
}

/// `Re<A xi, J_p xi>` with `J_p(alpha + i beta) = alpha/p + i beta/p'`.
pub fn p_form(a: &ComplexMatrix, p: f64, xi: &[Complex64]) -> f64 {
    let q = conjugate_exponent(p);
    let jp: Vec<Complex64> = xi
        .iter()
        .map(|z| Complex64::new(z.re / p, z.im / q))
        .collect();
    a.sesquilinear(xi, &jp).re
}

/// `Delta_p(A)`: minimum of `Re<A xi, J_p xi>` over the complex unit sphere.
pub fn delta_p(a: &ComplexMatrix, p: f64, search: &SphereSearch) -> Result<f64> {
    check_exponent(p)?;
    let n = a.dim();
    Ok(search
        .minimize(2 * n, |x| p_form(a, p, &to_complex(x)))
        .value)
}

fn mu_ratio(a: &ComplexMatrix, xi: &[Complex64]) -> f64 {
    let den = a.bilinear(xi).norm();
    if den <= 1e-13 * a.max_abs().max(1e-300) {
        return f64::INFINITY;
    }
    a.sesquilinear(xi, xi).re / den
}

/// `mu(A) = inf Re<A xi, xi> / |<A xi, conj xi>|` over the complex sphere,
/// restricted to points where the bilinear pairing does not vanish.
pub fn mu_a(a: &ComplexMatrix, search: &SphereSearch) -> Result<f64> {
    let n = a.dim();
    let m = search.minimize(2 * n, |x| mu_ratio(a, &to_complex(x)));
    if m.value.is_finite() {
        Ok(m.value)
    } else {
        Err(PellError::DegenerateDenominator)
    }
}

/// Endpoints of the exponent interval on which `A` is p-elliptic.
#[derive(Clone, Debug, Serialize)]
pub struct PRange {
    pub p0: f64,
    /// `None` encodes `p0' = infinity`.
    pub p0_prime: Option<f64>,
    pub mu: Option<f64>,
    /// `mu` could not be evaluated (empty set of admissible `xi`).
    pub mu_degenerate: bool,
    /// `Delta_p` changes sign at the closed-form endpoints as expected.
    pub sign_checks_passed: bool,
}

impl PRange {
    pub fn upper(&self) -> f64 {
        self.p0_prime.unwrap_or(f64::INFINITY)
    }

    pub fn contains(&self, p: f64) -> bool {
        p > self.p0 && p < self.upper()
    }
}

fn p_pair_from_mu(mu: f64) -> (f64, f64) {
    // mu <= 1 always; rounding in the sphere search must not turn a real
    // matrix into one with a finite p0'.
    if mu >= 1.0 - 1e-12 {
        return (1.0, f64::INFINITY);
    }
    let p0 = (2.0 / (1.0 + mu)).clamp(1.0, 2.0 - f64::EPSILON);
    (p0, conjugate_exponent(p0))
}

/// `p0 = 2/(1 + mu(A))`, `p0' = p0/(p0 - 1)`, cross-checked against the sign
/// of `Delta_p` just inside and just outside the interval.
pub fn p_range(a: &ComplexMatrix, search: &SphereSearch) -> Result<PRange> {
    let (mu, degenerate) = match mu_a(a, search) {
        Ok(mu) => (Some(mu), false),
        Err(PellError::DegenerateDenominator) => (None, true),
        Err(e) => return Err(e),
    };
    let (p0, p0p) = match mu {
        Some(mu) => p_pair_from_mu(mu),
        None => (1.0, f64::INFINITY),
    };
    let probe = 1e-3;
    let mut ok = delta_p(a, 2.0, search)? > POSITIVITY_TOL;
    if p0 > 1.0 + 2.0 * probe {
        ok &= delta_p(a, p0 + probe, search)? > 0.0;
        ok &= delta_p(a, p0 - probe, search)? <= 0.0;
    }
    if p0p.is_finite() {
        ok &= delta_p(a, p0p - probe, search)? > 0.0;
        ok &= delta_p(a, p0p + probe, search)? <= 0.0;
    }
    Ok(PRange {
        p0,
        p0_prime: p0p.is_finite().then_some(p0p),
        mu,
        mu_degenerate: degenerate,
        sign_checks_passed: ok,
    })
}

/// `mu~(A) = inf <Re A xi, xi> / |<Im A xi, xi>|` over real unit `xi` with a
/// nonvanishing denominator. `None` when `<Im A xi, xi>` vanishes identically.
pub fn mu_tilde(a: &ComplexMatrix, search: &SphereSearch) -> Option<f64> {
    let n = a.dim();
    let scale = a.max_abs().max(1e-300);
    let m = search.minimize(n, |x| {
        let den = a.real_form(x, true).abs();
        if den <= 1e-12 * scale {
            f64::INFINITY
        } else {
            a.real_form(x, false) / den
        }
    });
    m.value.is_finite().then_some(m.value)
}

/// Closed-form dissipativity interval for matrices with symmetric imaginary
/// part: `2 + 2 mu~ (mu~ -+ sqrt(mu~^2 + 1))`.
pub fn p_range_symmetric(a: &ComplexMatrix, search: &SphereSearch) -> Result<(f64, f64)> {
    let asym = a.imag_asymmetry();
    if asym > 1e-12 * a.max_abs().max(1.0) {
        return Err(PellError::NotSymmetricImaginaryPart(asym));
    }
    Ok(match mu_tilde(a, search) {
        None => (1.0, f64::INFINITY),
        Some(m) => symmetric_interval(m),
    })
}

/// The interval `[2 + 2m(m - sqrt(m^2+1)), 2 + 2m(m + sqrt(m^2+1))]`.
pub fn symmetric_interval(mu_t: f64) -> (f64, f64) {
    let r = (mu_t * mu_t + 1.0).sqrt();
    (2.0 + 2.0 * mu_t * (mu_t - r), 2.0 + 2.0 * mu_t * (mu_t + r))
}

/// Quadratic form in `(lambda, eta)` whose positivity is equivalent to
/// p-ellipticity:
/// `<Re A l, l> + <Re A e, e> + <(sqrt(p'/p) Im A - sqrt(p/p') Im A^t) l, e>`.
pub fn dissipativity_form(a: &ComplexMatrix, p: f64, lambda: &[f64], eta: &[f64]) -> f64 {
    let n = a.dim();
    let q = conjugate_exponent(p);
    let c1 = (q / p).sqrt();
    let c2 = (p / q).sqrt();
    let mut acc = a.real_form(lambda, false) + a.real_form(eta, false);
    for i in 0..n {
        for j in 0..n {
            let m = c1 * a.im(i, j) - c2 * a.im(j, i);
            acc += m * lambda[j] * eta[i];
        }
    }
    acc
}

#[derive(Clone, Debug, Serialize)]
pub struct DissipativityMargin {
    pub holds: bool,
    /// Minimum of the form over `|lambda|^2 + |eta|^2 = 1`.
    pub margin: f64,
    pub indeterminate: bool,
}

pub fn check_dissipativity_form(
    a: &ComplexMatrix,
    p: f64,
    search: &SphereSearch,
) -> Result<DissipativityMargin> {
    check_exponent(p)?;
    let n = a.dim();
    let margin = search
        .minimize(2 * n, |x| dissipativity_form(a, p, &x[..n], &x[n..]))
        .value;
    Ok(DissipativityMargin {
        holds: margin > POSITIVITY_TOL,
        margin,
        indeterminate: margin.abs() < INDETERMINATE_BAND,
    })
}

/// `|p - 2| |<Im A xi, xi>| <= 2 sqrt(p - 1) <Re A xi, xi>` for all real unit `xi`.
pub fn check_acond(a: &ComplexMatrix, p: f64, search: &SphereSearch) -> Result<bool> {
    check_exponent(p)?;
    let n = a.dim();
    let k = 2.0 * (p - 1.0).sqrt();
    let d = (p - 2.0).abs();
    let worst = search
        .minimize(n, |x| k * a.real_form(x, false) - d * a.real_form(x, true).abs())
        .value;
    Ok(worst >= -1e-12 * a.max_abs().max(1.0))
}

/// Exponents at which `Delta_p` is sampled in reports.
pub const REPORT_EXPONENTS: [f64; 12] = [
    1.05, 1.1, 1.2, 1.35, 1.5, 1.75, 2.0, 2.5, 3.0, 4.0, 6.0, 10.0,
];

#[derive(Clone, Debug, Serialize)]
pub struct EllipticityReport {
    pub n: usize,
    pub lambda: f64,
    #[serde(rename = "Lambda")]
    pub upper: f64,
    pub mu: Option<f64>,
    pub mu_degenerate: bool,
    pub mu_tilde: Option<f64>,
    pub p0: f64,
    /// `None` encodes infinity.
    pub p0_prime: Option<f64>,
    pub sign_checks_passed: bool,
    pub symmetric_imaginary_part: bool,
    pub symmetric_interval: Option<(f64, Option<f64>)>,
    pub delta_p_samples: Vec<(f64, f64)>,
}

/// Full pipeline; fails with `NotElliptic` before computing anything else.
pub fn analyze(a: &ComplexMatrix, search: &SphereSearch) -> Result<EllipticityReport> {
    let (lambda, upper) = check_uniform_ellipticity(a, search)?;
    let range = p_range(a, search)?;
    let mu_t = mu_tilde(a, search);
    let sym = p_range_symmetric(a, search).ok();
    let delta_p_samples = REPORT_EXPONENTS
        .iter()
        .map(|&p| delta_p(a, p, search).map(|d| (p, d)))
        .collect::<Result<Vec<_>>>()?;
    Ok(EllipticityReport {
        n: a.dim(),
        lambda,
        upper,
        mu: range.mu,
        mu_degenerate: range.mu_degenerate,
        mu_tilde: mu_t,
        p0: range.p0,
        p0_prime: range.p0_prime,
        sign_checks_passed: range.sign_checks_passed,
        symmetric_imaginary_part: sym.is_some(),
        symmetric_interval: sym.map(|(lo, hi)| (lo, hi.is_finite().then_some(hi))),
        delta_p_samples,
    })
}

impl EllipticityReport {
    pub fn to_csv(&self) -> String {
        let fmt_opt = |v: Option<f64>| v.map(|x| format!("{x:.12}")).unwrap_or_else(|| "inf".into());
        let mut s = String::from("quantity,value\n");
        s += &format!("n,{}\n", self.n);
        s += &format!("lambda,{:.12}\n", self.lambda);
        s += &format!("Lambda,{:.12}\n", self.upper);
        s += &format!("mu,{}\n", fmt_opt(self.mu));
        s += &format!("mu_tilde,{}\n", self.mu_tilde.map(|v| format!("{v:.12}")).unwrap_or_else(|| "absent".into()));
        s += &format!("p0,{:.12}\n", self.p0);
        s += &format!("p0_prime,{}\n", fmt_opt(self.p0_prime));
        for (p, d) in &self.delta_p_samples {
            s += &format!("delta_p({p}),{d:.12}\n");
        }
        s
    }
}
