//! One-dimensional complexity and the Taylor bound on output change under
//! bounded perturbations.
//!
//! Every smooth function has derivatives of all orders, so the "highest
//! derivative order" `d` is operationalized as the largest `k ≤ d_max` whose
//! sup-magnitude `M_k` exceeds `tol`. Both knobs are recorded on the profile.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_D_MAX: usize = 4;
pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_GRID: usize = 10_001;

/// A real function of one variable, optionally with closed-form derivatives.
pub trait Function1d {
    fn eval(&self, x: f64) -> f64;

    /// `f^{(k)}(x)` when known in closed form.
    fn derivative(&self, _order: usize, _x: f64) -> Option<f64> {
        None
    }
}

impl<F: Fn(f64) -> f64> Function1d for F {
    fn eval(&self, x: f64) -> f64 {
        self(x)
    }
}

/// `Σ c_i x^i`, coefficients lowest order first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    pub coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.iter().rposition(|&c| c != 0.0).unwrap_or(0)
    }

    pub fn derive(&self) -> Polynomial {
        Polynomial {
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * i as f64)
                .collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Polynomial {
        Polynomial {
            coeffs: self.coeffs.iter().map(|v| v * c).collect(),
        }
    }
}

impl Function1d for Polynomial {
    fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    fn derivative(&self, order: usize, x: f64) -> Option<f64> {
        let mut p = self.clone();
        for _ in 0..order {
            p = p.derive();
        }
        Some(p.eval(x))
    }
}

/// `amplitude · sin(frequency · x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sine {
    pub amplitude: f64,
    pub frequency: f64,
}

impl Function1d for Sine {
    fn eval(&self, x: f64) -> f64 {
        self.amplitude * (self.frequency * x).sin()
    }

    fn derivative(&self, order: usize, x: f64) -> Option<f64> {
        let scale = self.amplitude * self.frequency.powi(order as i32);
        let t = self.frequency * x;
        Some(
            scale
                * match order % 4 {
                    0 => t.sin(),
                    1 => t.cos(),
                    2 => -t.sin(),
                    _ => -t.cos(),
                },
        )
    }
}

/// Sup-magnitudes `M_0..M_d` of a function's derivatives over a closed interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeProfile {
    pub domain: (f64, f64),
    pub magnitudes: Vec<f64>,
    pub d_max: usize,
    pub tol: f64,
    /// `M_{d_max+1}` exceeded `tol`, so `d` was capped at `d_max`.
    pub truncated: bool,
    pub notices: Vec<String>,
}

impl DerivativeProfile {
    /// Profile from known magnitudes, `d = magnitudes.len() − 1`.
    pub fn from_magnitudes(domain: (f64, f64), magnitudes: Vec<f64>, tol: f64) -> Result<Self> {
        let d_max = magnitudes.len().saturating_sub(1);
        let p = Self {
            domain,
            magnitudes,
            d_max,
            tol,
            truncated: false,
            notices: Vec::new(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.magnitudes.is_empty() {
            return Err(Error::Domain("profile needs at least M_0".into()));
        }
        if self.magnitudes.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::Domain(
                "derivative magnitudes must be finite and non-negative".into(),
            ));
        }
        let d = self.order();
        if d > 0 && self.magnitudes[d] <= self.tol {
            return Err(Error::Domain(format!(
                "M_{d} = {} is not above tolerance {}; d must index the last significant derivative",
                self.magnitudes[d], self.tol
            )));
        }
        Ok(())
    }

    /// Highest retained derivative order `d`.
    pub fn order(&self) -> usize {
        self.magnitudes.len() - 1
    }
}

/// `(M_d / Σ_{k≤d} M_k) · d`, and 0 for `d = 0`.
///
/// Computed as `d / Σ (M_k / M_d)` so that scaling every `M_k` by the same
/// factor cancels term by term.
pub fn complexity_1d(profile: &DerivativeProfile) -> Result<f64> {
    profile.validate()?;
    let d = profile.order();
    if d == 0 {
        return Ok(0.0);
    }
    let top = profile.magnitudes[d];
    if profile.magnitudes.iter().all(|&m| m == 0.0) || top == 0.0 {
        return Err(Error::Domain("all derivative magnitudes are zero with d > 0".into()));
    }
    let relative: f64 = profile.magnitudes.iter().map(|m| m / top).sum();
    Ok(d as f64 / relative)
}

fn grid(domain: (f64, f64), points: usize) -> impl Iterator<Item = f64> {
    let (a, b) = domain;
    let last = (points - 1) as f64;
    (0..points).map(move |i| {
        if i == points - 1 {
            b
        } else {
            a + (b - a) * i as f64 / last
        }
    })
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Second-order central difference estimate of `f^{(k)}(x)` with step `h`.
pub fn central_difference<F: Function1d + ?Sized>(f: &F, order: usize, x: f64, h: f64) -> f64 {
    if order == 0 {
        return f.eval(x);
    }
    let half = order as f64 / 2.0;
    let mut acc = 0.0;
    for j in 0..=order {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * binomial(order, j) * f.eval(x + (half - j as f64) * h);
    }
    acc / h.powi(order as i32)
}

fn sup_over<G: Fn(f64) -> f64>(domain: (f64, f64), points: usize, g: G) -> f64 {
    grid(domain, points).map(|x| g(x).abs()).fold(0.0, f64::max)
}

/// Options for [`derivative_profile`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileOptions {
    pub d_max: usize,
    pub tol: f64,
    pub grid_points: usize,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            d_max: DEFAULT_D_MAX,
            tol: DEFAULT_TOL,
            grid_points: DEFAULT_GRID,
        }
    }
}

/// Estimates `M_0..M_{d_max+1}` on a uniform grid, then truncates to `d`.
///
/// Uses closed-form derivatives when `f` provides them. Otherwise central
/// differences at steps `h` and `2h` are compared and a disagreement beyond
/// 1e-2 relative is reported as [`Error::UnstableEstimate`]. The
/// finite-difference stencil evaluates `f` up to `(k/2)·2h` outside the domain.
pub fn derivative_profile<F: Function1d + ?Sized>(
    f: &F,
    domain: (f64, f64),
    opts: ProfileOptions,
) -> Result<DerivativeProfile> {
    let (a, b) = domain;
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::Domain(format!("invalid domain [{a}, {b}]")));
    }
    if opts.grid_points < 2 || opts.tol.is_nan() || opts.tol < 0.0 {
        return Err(Error::Domain("profile needs ≥ 2 grid points and tol ≥ 0".into()));
    }
    let analytic = f.derivative(0, a).is_some();
    let scale = a.abs().max(b.abs()).max(1.0);
    let m0 = sup_over(domain, opts.grid_points, |x| f.eval(x));

    let mut all = Vec::with_capacity(opts.d_max + 2);
    let mut floors = Vec::with_capacity(opts.d_max + 2);
    for k in 0..=opts.d_max + 1 {
        if k == 0 {
            all.push(m0);
            floors.push(0.0);
            continue;
        }
        if analytic {
            all.push(sup_over(domain, opts.grid_points, |x| {
                f.derivative(k, x).unwrap_or(f64::NAN)
            }));
            floors.push(0.0);
            continue;
        }
        let h = scale * f64::EPSILON.powf(1.0 / (k as f64 + 2.0));
        let fine = sup_over(domain, opts.grid_points, |x| central_difference(f, k, x, h));
        let coarse = sup_over(domain, opts.grid_points, |x| central_difference(f, k, x, 2.0 * h));
        // Round-off level of a k-th difference quotient of values bounded by M_0.
        let floor = 64.0 * 2f64.powi(k as i32) * f64::EPSILON * m0.max(f64::MIN_POSITIVE) / h.powi(k as i32);
        let significant = fine.max(coarse) > opts.tol + floor;
        if significant && (fine - coarse).abs() > 1e-2 * fine.max(coarse) {
            if k == opts.d_max + 1 {
                // Only used to decide truncation; an unreliable probe is still "non-zero".
                all.push(fine);
                floors.push(floor);
                continue;
            }
            return Err(Error::UnstableEstimate { order: k, coarse, fine });
        }
        all.push(fine);
        floors.push(floor);
    }
    if all.iter().any(|m| !m.is_finite()) {
        return Err(Error::Domain(
            "function or derivative is not finite on the domain".into(),
        ));
    }

    let is_significant = |k: usize| all[k] > opts.tol + floors[k];
    let d = (1..=opts.d_max).rev().find(|&k| is_significant(k)).unwrap_or(0);
    let truncated = is_significant(opts.d_max + 1);
    let mut notices = Vec::new();
    if truncated {
        notices.push(format!(
            "derivative order capped at d_max = {}: M_{} = {:.6e} exceeds tol {:e}",
            opts.d_max,
            opts.d_max + 1,
            all[opts.d_max + 1],
            opts.tol
        ));
    }
    if !analytic {
        notices.push("magnitudes estimated by central finite differences".into());
    }
    let mut magnitudes: Vec<f64> = all[..=d].to_vec();
    if d == 0 {
        magnitudes.truncate(1);
    }
    let profile = DerivativeProfile {
        domain,
        magnitudes,
        d_max: opts.d_max,
        tol: opts.tol,
        truncated,
        notices,
    };
    profile.validate()?;
    Ok(profile)
}

/// Upper bound on `|f(x+δ) − f(x)|` for `|δ| ≤ ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorBound {
    pub bound: f64,
    pub notice: Option<String>,
}

/// `M_1·ε + Σ_{k=2}^{d} (M_k / k!)·ε^k`.
pub fn taylor_bound(profile: &DerivativeProfile, eps: f64) -> Result<TaylorBound> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::Domain(format!("perturbation amplitude must be ≥ 0, got {eps}")));
    }
    let d = profile.order();
    if d == 0 {
        return Ok(TaylorBound {
            bound: 0.0,
            notice: Some("d = 0: no first-order term, bound is 0".into()),
        });
    }
    let mut bound = 0.0;
    let mut factorial = 1.0;
    let mut power = 1.0;
    for k in 1..=d {
        factorial *= k as f64;
        power *= eps;
        bound += profile.magnitudes[k] / factorial * power;
    }
    Ok(TaylorBound { bound, notice: None })
}

/// `δ(x) = ε·φ(x)` with `sup|φ| ≤ 1`, so `sup|δ| ≤ ε`.
pub struct Perturbation<P> {
    shape: P,
    eps: f64,
}

impl<P: Function1d> Perturbation<P> {
    pub fn eval(&self, x: f64) -> f64 {
        self.eps * self.shape.eval(x)
    }

    pub fn amplitude(&self) -> f64 {
        self.eps
    }
}

/// Builds `ε·φ`, checking `sup|φ| ≤ 1` on a dense grid over `domain`.
pub fn make_perturbation<P: Function1d>(shape: P, eps: f64, domain: (f64, f64)) -> Result<Perturbation<P>> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Domain(format!(
            "perturbation amplitude must be positive, got {eps}"
        )));
    }
    let sup = sup_over(domain, DEFAULT_GRID, |x| shape.eval(x));
    if sup.is_nan() || sup > 1.0 + 1e-9 {
        return Err(Error::Domain(format!("perturbation shape has sup|φ| = {sup} > 1")));
    }
    Ok(Perturbation { shape, eps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn poly(c: &[f64]) -> Polynomial {
        Polynomial::new(c.to_vec())
    }

    #[test]
    fn complexity_examples() {
        let constant = DerivativeProfile::from_magnitudes((-1.0, 1.0), vec![3.0], 1e-6).unwrap();
        assert_eq!(complexity_1d(&constant).unwrap(), 0.0);
        let identity = DerivativeProfile::from_magnitudes((-1.0, 1.0), vec![1.0, 1.0], 1e-6).unwrap();
        assert_eq!(complexity_1d(&identity).unwrap(), 0.5);
        let square = DerivativeProfile::from_magnitudes((-1.0, 1.0), vec![1.0, 2.0, 2.0], 1e-6).unwrap();
        assert!((complexity_1d(&square).unwrap() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn profile_rejects_vanishing_top_order() {
        assert!(DerivativeProfile::from_magnitudes((0.0, 1.0), vec![0.0, 0.0], 1e-6).is_err());
        assert!(DerivativeProfile::from_magnitudes((0.0, 1.0), vec![1.0, -1.0], 1e-6).is_err());
    }

    #[test]
    fn analytic_profiles() {
        let opts = ProfileOptions::default();
        let p = derivative_profile(&poly(&[0.0, 0.0, 1.0]), (-1.0, 1.0), opts).unwrap();
        assert_eq!(p.magnitudes, vec![1.0, 2.0, 2.0]);
        assert!(!p.truncated);

        let c = derivative_profile(&poly(&[-2.5]), (-1.0, 1.0), opts).unwrap();
        assert_eq!(c.magnitudes, vec![2.5]);

        let s = Sine {
            amplitude: 1.0,
            frequency: 1.0,
        };
        let p = derivative_profile(&s, (0.0, PI), ProfileOptions { d_max: 2, ..opts }).unwrap();
        assert_eq!(p.order(), 2);
        for m in &p.magnitudes {
            assert!((m - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cubic_is_truncated_at_d_max() {
        let opts = ProfileOptions {
            d_max: 2,
            ..Default::default()
        };
        let p = derivative_profile(&poly(&[0.0, 0.0, 0.0, 1.0]), (-1.0, 1.0), opts).unwrap();
        assert_eq!(p.order(), 2);
        assert!(p.truncated);
        assert!(p.notices.iter().any(|n| n.contains("capped")));
    }

    #[test]
    fn finite_differences_match_analytic() {
        let opts = ProfileOptions::default();
        let f = |x: f64| x * x * x - 2.0 * x;
        let fd = derivative_profile(&f, (-1.0, 1.0), opts).unwrap();
        let exact = derivative_profile(&poly(&[0.0, -2.0, 0.0, 1.0]), (-1.0, 1.0), opts).unwrap();
        assert_eq!(fd.order(), 3);
        for (a, b) in fd.magnitudes.iter().zip(&exact.magnitudes) {
            assert!((a - b).abs() <= 1e-3 * b.max(1.0), "{a} vs {b}");
        }
        let g = |x: f64| x.sin();
        let fd = derivative_profile(&g, (0.0, PI), ProfileOptions { d_max: 2, ..opts }).unwrap();
        for m in &fd.magnitudes {
            assert!((m - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn unstable_estimates_are_reported() {
        // Oscillation far faster than the finite-difference step can resolve.
        let f = |x: f64| (x * 1e6).sin() * 1e-3;
        let err = derivative_profile(&f, (-1.0, 1.0), ProfileOptions::default()).unwrap_err();
        assert!(matches!(err, Error::UnstableEstimate { .. }), "{err:?}");
    }

    #[test]
    fn taylor_examples() {
        let p1 = DerivativeProfile::from_magnitudes((0.0, 1.0), vec![0.0, 3.0], 1e-6).unwrap();
        assert!((taylor_bound(&p1, 0.1).unwrap().bound - 0.3).abs() < 1e-15);
        assert_eq!(taylor_bound(&p1, 0.0).unwrap().bound, 0.0);
        let p3 = DerivativeProfile::from_magnitudes((0.0, 1.0), vec![0.0, 1.0, 2.0, 6.0], 1e-6).unwrap();
        assert!((taylor_bound(&p3, 0.5).unwrap().bound - 0.875).abs() < 1e-15);
        let p0 = DerivativeProfile::from_magnitudes((0.0, 1.0), vec![4.0], 1e-6).unwrap();
        let t = taylor_bound(&p0, 0.3).unwrap();
        assert_eq!(t.bound, 0.0);
        assert!(t.notice.is_some());
        assert!(taylor_bound(&p1, -0.1).is_err());
    }

    #[test]
    fn perturbations() {
        let p = make_perturbation(|x: f64| x.sin(), 0.1, (-10.0, 10.0)).unwrap();
        let sup = grid((-10.0, 10.0), 10_001).map(|x| p.eval(x).abs()).fold(0.0, f64::max);
        assert!(sup <= 0.1 && sup > 0.0999);
        let c = make_perturbation(|_x: f64| 1.0, 0.05, (0.0, 1.0)).unwrap();
        assert_eq!(c.eval(0.3), 0.05);
        assert!(make_perturbation(|x: f64| 2.0 * x.sin(), 0.1, (0.0, 3.0)).is_err());
        assert!(make_perturbation(|x: f64| x.sin(), 0.0, (0.0, 3.0)).is_err());
    }

    #[test]
    fn scale_invariance_of_complexity() {
        let base = poly(&[0.5, -1.0, 0.25, 2.0]);
        let opts = ProfileOptions::default();
        let c0 = complexity_1d(&derivative_profile(&base, (-1.0, 1.0), opts).unwrap()).unwrap();
        for c in [0.1, 3.0, -7.0] {
            let p = derivative_profile(&base.scaled(c), (-1.0, 1.0), opts).unwrap();
            assert!((complexity_1d(&p).unwrap() - c0).abs() < 1e-12);
        }
    }
}
