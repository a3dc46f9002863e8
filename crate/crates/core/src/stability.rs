//! Closed-loop stability of the admittance loop with an imperfect mass estimate.
//!
//! Polynomials are coefficient slices in ascending powers of `s`.

use alloc::vec;
use alloc::vec::Vec;

pub use nalgebra::Complex;
use nalgebra::DMatrix;

use crate::controller::{critical_damping, AdmittanceParams};
use crate::error::ParamError;
use crate::math;

/// Coefficient residue below which the estimation-error factor counts as exactly zero.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// Drops trailing (highest-power) zero coefficients.
pub fn trim(p: &[f64]) -> Vec<f64> {
    let n = p.iter().rposition(|&c| c != 0.0).map_or(0, |i| i + 1);
    p[..n].to_vec()
}

pub fn degree(p: &[f64]) -> Option<usize> {
    p.iter().rposition(|&c| c != 0.0)
}

pub fn poly_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len().max(b.len())];
    for (i, &c) in a.iter().enumerate() {
        out[i] += c;
    }
    for (i, &c) in b.iter().enumerate() {
        out[i] += c;
    }
    out
}

pub fn poly_scale(a: &[f64], k: f64) -> Vec<f64> {
    a.iter().map(|&c| c * k).collect()
}

pub fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Horner evaluation at a complex point.
pub fn poly_eval(p: &[f64], s: Complex<f64>) -> Complex<f64> {
    p.iter().rev().fold(Complex::new(0.0, 0.0), |acc, &c| acc * s + c)
}

/// Builds the monic polynomial with the given roots. Complex roots should come in
/// conjugate pairs for the result to be real; imaginary residue is discarded.
pub fn poly_from_roots(roots: &[Complex<f64>]) -> Vec<f64> {
    let mut acc = vec![Complex::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![Complex::new(0.0, 0.0); acc.len() + 1];
        for (i, &c) in acc.iter().enumerate() {
            next[i + 1] += c;
            next[i] -= c * r;
        }
        acc = next;
    }
    acc.iter().map(|c| c.re).collect()
}

/// A ratio of two polynomials in `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalTransfer {
    num: Vec<f64>,
    den: Vec<f64>,
}

impl RationalTransfer {
    pub fn new(num: &[f64], den: &[f64]) -> Result<Self, ParamError> {
        if num.iter().chain(den).any(|c| !c.is_finite()) {
            return Err(ParamError::Degenerate("transfer function coefficients must be finite"));
        }
        let den = trim(den);
        if den.is_empty() {
            return Err(ParamError::Degenerate("denominator is identically zero"));
        }
        Ok(Self { num: trim(num), den })
    }

    pub fn constant(c: f64) -> Result<Self, ParamError> {
        Self::new(&[c], &[1.0])
    }

    /// `gain / (tau·s + 1)`.
    pub fn first_order_lag(gain: f64, tau: f64) -> Result<Self, ParamError> {
        crate::error::non_negative("tau", tau)?;
        Self::new(&[gain], &[1.0, tau])
    }

    pub fn num(&self) -> &[f64] {
        &self.num
    }

    pub fn den(&self) -> &[f64] {
        &self.den
    }

    pub fn eval(&self, s: Complex<f64>) -> Complex<f64> {
        poly_eval(&self.num, s) / poly_eval(&self.den, s)
    }

    /// Removes any power of `s` common to numerator and denominator.
    pub fn cancel_s(mut self) -> Self {
        while self.num.len() > 1 && self.den.len() > 1 && self.num[0] == 0.0 && self.den[0] == 0.0 {
            self.num.remove(0);
            self.den.remove(0);
        }
        self
    }
}

/// Impedance `Z(s) = M s + B + K/s` and admittance `Y(s) = s/(M s² + B s + K)`.
pub fn transfer_functions(params: &AdmittanceParams) -> (RationalTransfer, RationalTransfer) {
    let quad = [params.k_a, params.b_a, params.m_a];
    let z = RationalTransfer {
        num: trim(&quad),
        den: vec![0.0, 1.0],
    }
    .cancel_s();
    let y = RationalTransfer {
        num: vec![0.0, 1.0],
        den: trim(&quad),
    }
    .cancel_s();
    (z, y)
}

/// Numerator of `(M s² + B s + K)(M_u − M̂_u(s)) s + R(s) = 0` after clearing denominators.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicPolynomial {
    pub coeffs: Vec<f64>,
    /// The estimation-error factor cancelled exactly.
    pub degenerate: bool,
    /// Largest coefficient of `M_u·D_m − N_m`.
    pub residue: f64,
}

pub fn characteristic_polynomial(
    params: &AdmittanceParams,
    m_u: f64,
    m_u_hat: &RationalTransfer,
    r: &RationalTransfer,
) -> CharacteristicPolynomial {
    let a = [params.k_a, params.b_a, params.m_a];
    let err = poly_add(&poly_scale(&m_u_hat.den, m_u), &poly_scale(&m_u_hat.num, -1.0));
    let residue = err.iter().fold(0.0f64, |m, &c| m.max(math::abs(c)));
    let tail = poly_mul(&r.num, &m_u_hat.den);
    if residue < DEGENERACY_TOL {
        return CharacteristicPolynomial {
            coeffs: trim(&tail),
            degenerate: true,
            residue,
        };
    }
    let head = poly_mul(&poly_mul(&poly_mul(&a, &err), &[0.0, 1.0]), &r.den);
    CharacteristicPolynomial {
        coeffs: trim(&poly_add(&head, &tail)),
        degenerate: false,
        residue,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityVerdict {
    pub stable: bool,
    /// Largest real part among the roots; `-inf` when there are none.
    pub max_real_part: f64,
    pub roots: Vec<Complex<f64>>,
    /// No roots to test (constant polynomial). Reported as vacuously stable.
    pub degenerate: bool,
}

/// Roots from the eigenvalues of the companion matrix.
pub fn roots(poly: &[f64]) -> Vec<Complex<f64>> {
    let p = trim(poly);
    let Some(n) = degree(&p) else {
        return Vec::new();
    };
    if n == 0 {
        return Vec::new();
    }
    let lead = p[n];
    let mut c = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        c[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        c[(i, n - 1)] = -p[i] / lead;
    }
    c.complex_eigenvalues().iter().copied().collect()
}

/// Stable iff every root has real part below `-margin`.
pub fn assess(poly: &[f64], margin: f64) -> StabilityVerdict {
    let rs = roots(poly);
    if rs.is_empty() {
        return StabilityVerdict {
            stable: true,
            max_real_part: f64::NEG_INFINITY,
            roots: rs,
            degenerate: true,
        };
    }
    let max_re = rs.iter().fold(f64::NEG_INFINITY, |m, r| m.max(r.re));
    StabilityVerdict {
        stable: max_re < -margin,
        max_real_part: max_re,
        roots: rs,
        degenerate: false,
    }
}

/// First column of the Routh array, with near-zero pivots replaced by a small epsilon.
#[derive(Debug, Clone, PartialEq)]
pub struct RouthTable {
    pub first_column: Vec<f64>,
    /// A pivot had to be replaced by epsilon.
    pub epsilon_used: bool,
    /// A whole row vanished (roots symmetric about the origin, e.g. on the imaginary axis).
    pub zero_row: bool,
}

impl RouthTable {
    pub fn sign_changes(&self) -> usize {
        self.first_column
            .windows(2)
            .filter(|w| (w[0] > 0.0) != (w[1] > 0.0))
            .count()
    }
}

pub fn routh_table(poly: &[f64]) -> Result<RouthTable, ParamError> {
    let p = trim(poly);
    let n = match degree(&p) {
        Some(n) if n >= 1 => n,
        _ => return Err(ParamError::Degenerate("polynomial has no roots")),
    };
    let scale = p.iter().fold(0.0f64, |m, &c| m.max(math::abs(c)));
    let tiny = 1e-12 * scale;
    let eps = 1e-9 * scale;
    // descending coefficients
    let desc: Vec<f64> = p.iter().rev().copied().collect();
    let width = n / 2 + 1;
    let row = |start: usize| -> Vec<f64> {
        let mut r: Vec<f64> = desc.iter().skip(start).step_by(2).copied().collect();
        r.resize(width, 0.0);
        r
    };
    let mut prev = row(0);
    let mut cur = row(1);
    let mut first = vec![prev[0]];
    let mut epsilon_used = false;
    let mut zero_row = false;
    for k in 1..=n {
        if cur.iter().all(|&c| math::abs(c) <= tiny) {
            zero_row = true;
            // replace with the derivative of the auxiliary polynomial built from `prev`
            let order = n + 1 - k;
            for (i, c) in cur.iter_mut().enumerate() {
                let pow = order as f64 - 2.0 * i as f64;
                *c = if pow > 0.0 { prev[i] * pow } else { 0.0 };
            }
        }
        if math::abs(cur[0]) <= tiny {
            cur[0] = eps;
            epsilon_used = true;
        }
        first.push(cur[0]);
        if k == n {
            break;
        }
        let mut next = vec![0.0; width];
        for i in 0..width - 1 {
            next[i] = (cur[0] * prev[i + 1] - prev[0] * cur[i + 1]) / cur[0];
        }
        prev = cur;
        cur = next;
    }
    Ok(RouthTable {
        first_column: first,
        epsilon_used,
        zero_row,
    })
}

/// True iff every root lies in the open left half-plane, decided without finding roots.
pub fn routh_hurwitz(poly: &[f64]) -> Result<bool, ParamError> {
    let p = trim(poly);
    let n = match degree(&p) {
        Some(n) if n >= 1 => n,
        _ => return Err(ParamError::Degenerate("polynomial has no roots")),
    };
    let sign = if p[n] < 0.0 { -1.0 } else { 1.0 };
    // all coefficients of a Hurwitz polynomial share the leading sign
    if p.iter().any(|&c| c * sign <= 0.0) {
        return Ok(false);
    }
    let table = routh_table(&p)?;
    Ok(!table.epsilon_used && !table.zero_row && table.first_column.iter().all(|&c| c * sign > 0.0))
}

/// Estimator lag for a moving average of `window` samples at step `dt`: half the window length.
pub fn moving_average_lag(window: usize, dt: f64) -> f64 {
    window as f64 * dt / 2.0
}

/// One grid point of a stability sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SweepRow {
    pub k_a: f64,
    pub tau_v: f64,
    pub t_f: f64,
    pub m_u_hat_gain: f64,
    pub b_a: f64,
    pub max_real_part: f64,
    pub stable: bool,
    pub degenerate: bool,
    pub method_agreement: bool,
}

/// Axes of a stability sweep. The estimator is `gain·m_u/(t_f·s + 1)`, the robot
/// `1/(tau_v·s + 1)`, and damping is `damping_ratio · 2√(m_a·k_a)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SweepGrid {
    pub m_a: f64,
    pub m_u: f64,
    pub k_a: Vec<f64>,
    pub tau_v: Vec<f64>,
    pub t_f: Vec<f64>,
    pub m_u_hat_gain: Vec<f64>,
    pub damping_ratio: Vec<f64>,
    pub margin: f64,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            m_a: 4.0,
            m_u: 1.5,
            k_a: vec![300.0, 1800.0, 2500.0],
            tau_v: vec![0.01, 0.05, 0.1],
            t_f: vec![0.0, 0.01, 0.05],
            m_u_hat_gain: vec![0.0, 0.5, 1.0],
            damping_ratio: vec![1.0],
            margin: 0.0,
        }
    }
}

impl SweepGrid {
    pub fn validate(&self) -> Result<(), crate::ConfigError> {
        use crate::error::{finite, non_negative, positive};
        use crate::ConfigError;
        positive("m_a", self.m_a).map_err(|e| ConfigError::new("m_a", e))?;
        non_negative("m_u", self.m_u).map_err(|e| ConfigError::new("m_u", e))?;
        non_negative("margin", self.margin).map_err(|e| ConfigError::new("margin", e))?;
        let check = |name: &'static str, xs: &[f64], f: fn(&'static str, f64) -> Result<f64, ParamError>| {
            for (i, &x) in xs.iter().enumerate() {
                f(name, x).map_err(|e| ConfigError::new(alloc::format!("{name}[{i}]"), e))?;
            }
            if xs.is_empty() {
                return Err(ConfigError::new(name, ParamError::Degenerate("axis must not be empty")));
            }
            Ok(())
        };
        check("k_a", &self.k_a, non_negative)?;
        check("tau_v", &self.tau_v, positive)?;
        check("t_f", &self.t_f, non_negative)?;
        check("m_u_hat_gain", &self.m_u_hat_gain, finite)?;
        check("damping_ratio", &self.damping_ratio, finite)?;
        Ok(())
    }

    /// Evaluates every grid point, in row-major order over (k_a, damping_ratio, tau_v, t_f, gain).
    pub fn run(&self) -> Result<Vec<SweepRow>, ParamError> {
        let mut rows = Vec::new();
        for &k_a in &self.k_a {
            let critical = critical_damping(self.m_a, k_a)?;
            for &zeta in &self.damping_ratio {
                let b_a = zeta * critical;
                let params = AdmittanceParams::new_raw(self.m_a, b_a, k_a);
                for &tau_v in &self.tau_v {
                    let r = RationalTransfer::first_order_lag(1.0, tau_v)?;
                    for &t_f in &self.t_f {
                        for &gain in &self.m_u_hat_gain {
                            let est = RationalTransfer::first_order_lag(gain * self.m_u, t_f)?;
                            let cp = characteristic_polynomial(&params, self.m_u, &est, &r);
                            let verdict = assess(&cp.coeffs, self.margin);
                            // Routh-Hurwitz has no margin, so compare against the open half-plane test
                            let rh = routh_hurwitz(&cp.coeffs).unwrap_or(true);
                            let open = assess(&cp.coeffs, 0.0).stable;
                            rows.push(SweepRow {
                                k_a,
                                tau_v,
                                t_f,
                                m_u_hat_gain: gain,
                                b_a,
                                max_real_part: verdict.max_real_part,
                                stable: verdict.stable,
                                degenerate: cp.degenerate || verdict.degenerate,
                                method_agreement: rh == open,
                            });
                        }
                    }
                }
            }
        }
        Ok(rows)
    }
}
