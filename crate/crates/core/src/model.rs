//! Problem exponents, the profile ODE and its three autonomous phase-space forms.
//!
//! A self-similar solution `u = (T-t)^{-alpha} f(|x| (T-t)^beta)` of
//! `u_t = (u^m)_xx + |x|^sigma u^p` has a profile `f` obeying
//! `(f^m)'' - alpha f + beta xi f' + xi^sigma f^p = 0`.
//!
//! The same profile can be followed in three coordinate systems:
//!
//! * `Lower`: `x = f^{m-1}`, `y = f^{m-2} f'`, `z = xi`. Smooth across an interface.
//! * `Upper`: `X = xi^{-2} f^{m-1}`, `Y = xi^{-1} f^{m-2} f'`, `Z = xi^sigma f^{p-1}`.
//! * `BarZ`: `X`, `Y` as above and `Zbar = X Z = xi^{sigma-2} f^{m+p-2}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which special parameter values a [`Params`] was built with.
///
/// `p = 1` and `sigma = 0` lie outside the main range but have closed-form
/// answers, so they are admitted for validation runs only.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationFlags {
    pub allow_p_one: bool,
    pub allow_sigma_zero: bool,
}

impl ValidationFlags {
    pub const NONE: Self = Self {
        allow_p_one: false,
        allow_sigma_zero: false,
    };
    pub const ALL: Self = Self {
        allow_p_one: true,
        allow_sigma_zero: true,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub m: f64,
    pub p: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Set when the triple uses `p = 1` or `sigma = 0`.
    pub validation: bool,
}

/// Builds [`Params`] for `1 < p < m`, `sigma > 0`.
pub fn derive_exponents(m: f64, p: f64, sigma: f64) -> Result<Params> {
    derive_exponents_with(m, p, sigma, ValidationFlags::NONE)
}

/// Like [`derive_exponents`] but admits `p = 1` and/or `sigma = 0` when flagged.
pub fn derive_exponents_with(m: f64, p: f64, sigma: f64, flags: ValidationFlags) -> Result<Params> {
    if !(m.is_finite() && p.is_finite() && sigma.is_finite()) {
        return Err(Error::Domain(format!("non-finite exponent in (m={m}, p={p}, sigma={sigma})")));
    }
    if m <= 1.0 {
        return Err(Error::Domain(format!("m = {m} must exceed 1")));
    }
    if p >= m {
        return Err(Error::Domain(format!("p = {p} must be smaller than m = {m}")));
    }
    let p_one = p == 1.0;
    if p < 1.0 || (p_one && !flags.allow_p_one) {
        return Err(Error::Domain(format!("p = {p} must exceed 1")));
    }
    let sigma_zero = sigma == 0.0;
    if sigma < 0.0 || (sigma_zero && !flags.allow_sigma_zero) {
        return Err(Error::Domain(format!("sigma = {sigma} must be positive")));
    }
    let denom = 2.0 * (p - 1.0) + sigma * (m - 1.0);
    if denom <= 0.0 {
        return Err(Error::Domain("p = 1 together with sigma = 0 is degenerate".into()));
    }
    Ok(Params {
        m,
        p,
        sigma,
        alpha: (sigma + 2.0) / denom,
        beta: (m - p) / denom,
        validation: p_one || sigma_zero,
    })
}

impl Params {
    /// `(p-1)/(m-1)`, the power linking `x` to `Z`.
    pub fn q(&self) -> f64 {
        (self.p - 1.0) / (self.m - 1.0)
    }

    /// Height of the tail attractor on the `Z` axis, `1/(p-1)`.
    pub fn gamma0(&self) -> f64 {
        1.0 / (self.p - 1.0)
    }

    /// `X` coordinate of the point P2.
    pub fn x_p2(&self) -> f64 {
        (self.m - 1.0) / (2.0 * self.m * (self.m + 1.0))
    }

    /// `Y` coordinate of the point P2.
    pub fn y_p2(&self) -> f64 {
        1.0 / (self.m * (self.m + 1.0))
    }

    /// Position of the no-return plane `Y = -Y0`.
    pub fn y0(&self) -> f64 {
        let (m, p, s) = (self.m, self.p, self.sigma);
        (m - 1.0) * (s + 2.0) / (2.0 * m * (s * (m - 1.0) + 2.0 * (p - 1.0)))
    }

    /// Power of `xi` in the origin behaviour `f ~ k xi^{(sigma+2)/(m-p)}`.
    pub fn decay_exponent(&self) -> f64 {
        (self.sigma + 2.0) / (self.m - self.p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Chart {
    Lower,
    Upper,
    BarZ,
}

impl Chart {
    pub fn name(self) -> &'static str {
        match self {
            Chart::Lower => "LOWER",
            Chart::Upper => "UPPER",
            Chart::BarZ => "BARZ",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub chart: Chart,
    pub coords: [f64; 3],
    /// `ln xi`; `-inf` at chart origins. In the lower chart it always equals `ln z`.
    pub logxi: f64,
}

impl PhaseState {
    pub fn lower(x: f64, y: f64, z: f64) -> Self {
        Self {
            chart: Chart::Lower,
            coords: [x, y, z],
            logxi: z.ln(),
        }
    }

    pub fn upper(x: f64, y: f64, z: f64, logxi: f64) -> Self {
        Self {
            chart: Chart::Upper,
            coords: [x, y, z],
            logxi,
        }
    }

    pub fn barz(x: f64, y: f64, zbar: f64, logxi: f64) -> Self {
        Self {
            chart: Chart::BarZ,
            coords: [x, y, zbar],
            logxi,
        }
    }

    pub fn xi(&self) -> f64 {
        match self.chart {
            Chart::Lower => self.coords[2],
            _ => self.logxi.exp(),
        }
    }

    fn check_domain(&self) -> Result<()> {
        let [a, _, c] = self.coords;
        if self.coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::Chart {
                chart: self.chart,
                reason: "non-finite coordinate".into(),
            });
        }
        if a < 0.0 || c < 0.0 {
            return Err(Error::Chart {
                chart: self.chart,
                reason: format!("first and third coordinates must be >= 0, got {a} and {c}"),
            });
        }
        Ok(())
    }
}

/// One point `(xi, f(xi), f'(xi), (f^m)'(xi))` of a profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileSample {
    pub xi: f64,
    pub f: f64,
    pub df: f64,
    pub fm_prime: f64,
}

impl ProfileSample {
    pub fn new(xi: f64, f: f64, df: f64, m: f64) -> Self {
        Self {
            xi,
            f,
            df,
            fm_prime: m * f.powf(m - 1.0) * df,
        }
    }
}

/// `xi, f, df, fm_prime` rows sorted by `xi`, header first.
pub fn profile_csv(samples: &[ProfileSample]) -> String {
    let mut rows: Vec<&ProfileSample> = samples.iter().collect();
    rows.sort_by(|a, b| a.xi.total_cmp(&b.xi));
    let mut out = String::from("xi,f,df,fm_prime\n");
    for s in rows {
        out.push_str(&format!("{},{},{},{}\n", s.xi, s.f, s.df, s.fm_prime));
    }
    out
}

/// `(f^m)'' - alpha f + beta xi f' + xi^sigma f^p`.
pub fn ode_residual(params: &Params, s: &ProfileSample, d2fm: f64) -> f64 {
    d2fm - params.alpha * s.f + params.beta * s.xi * s.df + s.xi.powf(params.sigma) * s.f.powf(params.p)
}

/// `v * |v|^e`; keeps the fields polynomial-like (and odd) on slightly negative round-off.
#[inline]
pub(crate) fn signed_pow(v: f64, e: f64) -> f64 {
    if e == 0.0 {
        v
    } else {
        v * v.abs().powf(e)
    }
}

/// Right-hand side of the chart's autonomous system plus `d(ln xi)/d(time)`.
///
/// No domain checks; used inside the integrator where round-off can push a
/// coordinate a hair below zero.
#[inline]
pub(crate) fn raw_field(params: &Params, chart: Chart, c: &[f64; 3]) -> [f64; 4] {
    let Params {
        m,
        p,
        sigma,
        alpha,
        beta,
        ..
    } = *params;
    match chart {
        Chart::Lower => {
            let [x, y, z] = *c;
            let react = if sigma == 0.0 { 1.0 } else { z.abs().powf(sigma) } * signed_pow(x, params.q());
            [
                m * (m - 1.0) * x * y,
                -m * y * y - beta * y * z + alpha * x - react,
                m * x,
                if z > 0.0 { m * x / z } else { 0.0 },
            ]
        }
        Chart::Upper => {
            let [x, y, z] = *c;
            [
                m * x * ((m - 1.0) * y - 2.0 * x),
                -m * y * y - beta * y + alpha * x - m * x * y - x * z,
                m * z * ((p - 1.0) * y + sigma * x),
                m * x,
            ]
        }
        Chart::BarZ => {
            let [x, y, zb] = *c;
            [
                m * x * ((m - 1.0) * y - 2.0 * x),
                -m * y * y - beta * y + alpha * x - m * x * y - zb,
                m * zb * ((m + p - 2.0) * y + (sigma - 2.0) * x),
                m * x,
            ]
        }
    }
}

/// Jacobian of [`raw_field`] (rows: the three coordinates, then `ln xi`).
pub(crate) fn raw_jacobian(params: &Params, chart: Chart, c: &[f64; 3]) -> [[f64; 4]; 4] {
    let Params {
        m,
        p,
        sigma,
        alpha,
        beta,
        ..
    } = *params;
    let mut j = [[0.0; 4]; 4];
    match chart {
        Chart::Lower => {
            let [x, y, z] = *c;
            let q = params.q();
            let zs = z.abs().powf(sigma);
            j[0] = [m * (m - 1.0) * y, m * (m - 1.0) * x, 0.0, 0.0];
            let dz_react = if sigma > 0.0 && z != 0.0 {
                sigma * z.signum() * z.abs().powf(sigma - 1.0) * signed_pow(x, q)
            } else {
                0.0
            };
            j[1] = [
                alpha - (1.0 + q) * zs * x.abs().powf(q),
                -2.0 * m * y - beta * z,
                -beta * y - dz_react,
                0.0,
            ];
            j[2] = [m, 0.0, 0.0, 0.0];
            if z > 0.0 {
                j[3] = [m / z, 0.0, -m * x / (z * z), 0.0];
            }
        }
        Chart::Upper => {
            let [x, y, z] = *c;
            j[0] = [m * ((m - 1.0) * y - 4.0 * x), m * (m - 1.0) * x, 0.0, 0.0];
            j[1] = [alpha - m * y - z, -2.0 * m * y - beta - m * x, -x, 0.0];
            j[2] = [m * sigma * z, m * (p - 1.0) * z, m * ((p - 1.0) * y + sigma * x), 0.0];
            j[3] = [m, 0.0, 0.0, 0.0];
        }
        Chart::BarZ => {
            let [x, y, zb] = *c;
            let k = m + p - 2.0;
            j[0] = [m * ((m - 1.0) * y - 4.0 * x), m * (m - 1.0) * x, 0.0, 0.0];
            j[1] = [alpha - m * y, -2.0 * m * y - beta - m * x, -1.0, 0.0];
            j[2] = [m * (sigma - 2.0) * zb, m * k * zb, m * (k * y + (sigma - 2.0) * x), 0.0];
            j[3] = [m, 0.0, 0.0, 0.0];
        }
    }
    j
}

/// Vector field of the state's chart and the `ln xi` advection rate.
pub fn vector_field(params: &Params, state: &PhaseState) -> Result<([f64; 3], f64)> {
    state.check_domain()?;
    let r = raw_field(params, state.chart, &state.coords);
    Ok(([r[0], r[1], r[2]], r[3]))
}

fn singular(from: Chart, to: Chart, reason: impl Into<String>) -> Error {
    Error::SingularMap {
        from,
        to,
        reason: reason.into(),
    }
}

/// Lower-chart coordinates of an upper-chart point, with `xi` taken from the
/// algebraic identity `xi^{sigma + 2q} = Z / X^q` when it is usable.
fn upper_to_lower(params: &Params, from: Chart, c: [f64; 3], logxi: f64) -> Result<[f64; 3]> {
    let [x_up, y_up, z_up] = c;
    if x_up <= 0.0 {
        return Err(singular(from, Chart::Lower, "X = 0"));
    }
    let q = params.q();
    let expo = params.sigma + 2.0 * q;
    let xi = if z_up > 0.0 && expo > 0.0 && q > 0.0 {
        ((z_up.ln() - q * x_up.ln()) / expo).exp()
    } else if logxi.is_finite() {
        logxi.exp()
    } else {
        return Err(singular(from, Chart::Lower, "xi cannot be recovered"));
    };
    Ok([x_up * xi * xi, y_up * xi, xi])
}

/// Expresses `state` in the `target` chart. Requires an interior point.
pub fn chart_map(params: &Params, state: &PhaseState, target: Chart) -> Result<PhaseState> {
    state.check_domain()?;
    let from = state.chart;
    if from == target {
        return Ok(*state);
    }
    let [a, b, c] = state.coords;
    if a <= 0.0 || c <= 0.0 {
        return Err(singular(from, target, "boundary point (first or third coordinate is zero)"));
    }
    let q = params.q();
    let lower = match from {
        Chart::Lower => [a, b, c],
        Chart::Upper => upper_to_lower(params, from, [a, b, c], state.logxi)?,
        Chart::BarZ => upper_to_lower(params, from, [a, b, c / a], state.logxi)?,
    };
    let [x, y, z] = lower;
    let logxi = z.ln();
    Ok(match target {
        Chart::Lower => PhaseState::lower(x, y, z),
        Chart::Upper => PhaseState::upper(x / (z * z), y / z, x.powf(q) * z.powf(params.sigma), logxi),
        Chart::BarZ => PhaseState::barz(
            x / (z * z),
            y / z,
            x.powf(1.0 + q) * z.powf(params.sigma - 2.0),
            logxi,
        ),
    })
}

/// Profile point carried by a phase-space state. `None` where `f` is not positive.
pub fn profile_of(params: &Params, state: &PhaseState) -> Option<ProfileSample> {
    let m = params.m;
    let (xi, fm1, y_over) = match state.chart {
        Chart::Lower => {
            let [x, y, z] = state.coords;
            (z, x, y)
        }
        Chart::Upper | Chart::BarZ => {
            let xi = state.logxi.exp();
            let [x, y, _] = state.coords;
            (xi, x * xi * xi, y * xi)
        }
    };
    if !(fm1 > 0.0) || !xi.is_finite() {
        return None;
    }
    let f = fm1.powf(1.0 / (m - 1.0));
    // y = f^{m-2} f'
    let df = y_over * f.powf(2.0 - m);
    Some(ProfileSample {
        xi,
        f,
        df,
        fm_prime: m * f * y_over,
    })
}

/// Closed-form compactly supported profile for `p = 1`, `sigma = sqrt(2(m+1))`.
#[derive(Debug, Clone, Copy)]
pub struct ExplicitSolution {
    pub m: f64,
    pub sigma: f64,
    pub c: f64,
    pub b: f64,
}

impl ExplicitSolution {
    pub fn new(m: f64) -> Self {
        let sigma = (2.0 * (m + 1.0)).sqrt();
        Self {
            m,
            sigma,
            c: (m - 1.0) / (2.0 * m * (m + 1.0)),
            b: (m - 1.0) * (m - 1.0) / (m * (sigma + 2.0) * (m * sigma + m + 1.0)),
        }
    }

    /// Matching exponents (`p = 1` validation mode).
    pub fn params(&self) -> Params {
        derive_exponents_with(
            self.m,
            1.0,
            self.sigma,
            ValidationFlags {
                allow_p_one: true,
                allow_sigma_zero: false,
            },
        )
        .expect("explicit-solution exponents are in range")
    }

    /// Interface point `xi0 = (c/B)^{1/sigma}`.
    pub fn interface(&self) -> f64 {
        (self.c / self.b).powf(1.0 / self.sigma)
    }

    // g = xi^2 (c - B xi^sigma), so f^{m-1} = g on the support.
    fn g_and_derivs(&self, xi: f64) -> (f64, f64, f64) {
        let (c, b, s) = (self.c, self.b, self.sigma);
        let g = xi * xi * (c - b * xi.powf(s));
        let g1 = 2.0 * c * xi - b * (s + 2.0) * xi.powf(s + 1.0);
        let g2 = 2.0 * c - b * (s + 2.0) * (s + 1.0) * xi.powf(s);
        (g, g1, g2)
    }

    pub fn sample(&self, xi: f64) -> ProfileSample {
        let m = self.m;
        let (g, g1, _) = self.g_and_derivs(xi);
        if xi <= 0.0 || g <= 0.0 {
            return ProfileSample {
                xi,
                f: 0.0,
                df: 0.0,
                fm_prime: 0.0,
            };
        }
        let e = 1.0 / (m - 1.0);
        let f = g.powf(e);
        let df = e * g.powf(e - 1.0) * g1;
        ProfileSample::new(xi, f, df, m)
    }

    /// `(f^m)''` on the support; zero outside.
    pub fn second_derivative_fm(&self, xi: f64) -> f64 {
        let m = self.m;
        let (g, g1, g2) = self.g_and_derivs(xi);
        if xi <= 0.0 || g <= 0.0 {
            return 0.0;
        }
        // f^m = g^{m/(m-1)}
        let e = m / (m - 1.0);
        e * ((e - 1.0) * g.powf(e - 2.0) * g1 * g1 + g.powf(e - 1.0) * g2)
    }
}

/// Convenience wrapper: the explicit profile at `xi`.
pub fn explicit_solution(m: f64, xi: f64) -> ProfileSample {
    ExplicitSolution::new(m).sample(xi)
}
