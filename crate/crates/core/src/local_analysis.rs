//! Critical points of the phase-space systems, their linearizations, and
//! starters that launch orbits a small distance off them.

use nalgebra::{Complex, Matrix3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Chart, Params, PhaseState, ProfileSample};

/// Eigenvalues with real part inside this band count as center directions.
pub const CENTER_BAND: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "point", content = "param")]
pub enum PointId {
    P0,
    P1,
    P2,
    Pgamma(f64),
    Q1,
    Q2,
    Q3,
    Q4,
    Q5,
    /// Point `(0, -beta eta / m, eta)` of the lower-chart interface line.
    InterfaceLine(f64),
}

impl std::fmt::Display for PointId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PointId::Pgamma(g) => write!(f, "Pgamma({g})"),
            PointId::InterfaceLine(e) => write!(f, "InterfaceLine({e})"),
            other => write!(f, "{other:?}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPointInfo {
    pub id: PointId,
    pub chart: Chart,
    /// Finite points: chart coordinates. Points at infinity: direction on the
    /// Poincare sphere (first three coordinates).
    pub coords: [f64; 3],
    pub at_infinity: bool,
    pub jacobian: [[f64; 3]; 3],
    pub eigenvalues: [Eigenvalue; 3],
    /// Column `j` pairs with `eigenvalues[j]`. A complex pair is stored as the
    /// real and imaginary parts of one complex eigenvector.
    pub eigenvectors: [[f64; 3]; 3],
    pub stable_dim: usize,
    pub unstable_dim: usize,
    pub center_dim: usize,
}

impl CriticalPointInfo {
    pub fn eigenvector(&self, j: usize) -> [f64; 3] {
        [
            self.eigenvectors[0][j],
            self.eigenvectors[1][j],
            self.eigenvectors[2][j],
        ]
    }
}

/// Linearization matrix at a point, as closed-form entries.
pub fn jacobian(params: &Params, id: PointId) -> Result<[[f64; 3]; 3]> {
    let Params {
        m,
        p,
        sigma,
        alpha,
        beta,
        ..
    } = *params;
    Ok(match id {
        PointId::P0 => pgamma_matrix(params, 0.0),
        PointId::Pgamma(g) => pgamma_matrix(params, g),
        PointId::P1 => [
            [-beta * (m - 1.0), 0.0, 0.0],
            [alpha + beta, beta, 0.0],
            [0.0, 0.0, -(p - 1.0) * beta],
        ],
        PointId::P2 => [
            [
                -(m - 1.0) / (m + 1.0),
                (m - 1.0) * (m - 1.0) / (2.0 * (m + 1.0)),
                0.0,
            ],
            [
                alpha - 1.0 / (m + 1.0),
                -beta - (m + 3.0) / (2.0 * (m + 1.0)),
                -(m - 1.0) / (2.0 * m * (m + 1.0)),
            ],
            [0.0, 0.0, (2.0 * (p - 1.0) + sigma * (m - 1.0)) / (2.0 * (m + 1.0))],
        ],
        PointId::Q1 => [[m, -1.0, alpha], [0.0, m * (sigma + 2.0), 0.0], [0.0, 0.0, 2.0 * m]],
        PointId::Q2 => [[m * m, 0.0, 0.0], [0.0, m * p, 0.0], [0.0, 0.0, m]],
        PointId::Q3 => [[-m * m, 0.0, 0.0], [0.0, -m * p, 0.0], [0.0, 0.0, -m]],
        PointId::Q4 => {
            return Err(Error::UnsupportedPoint(
                id.to_string(),
                "orbits reaching it carry no profiles; Z beyond the divergence cap is only flagged",
            ))
        }
        PointId::Q5 => [
            [-m, -1.0, alpha - beta / m],
            [0.0, m * (sigma + 1.0) + p, 0.0],
            [0.0, 0.0, m + 1.0],
        ],
        PointId::InterfaceLine(eta) => [
            [-(m - 1.0) * beta * eta, 0.0, 0.0],
            // the reaction is linear in x when p = 1
            [if params.p == 1.0 { alpha - eta.powf(sigma) } else { alpha }, beta * eta, beta * beta * eta / m],
            [m, 0.0, 0.0],
        ],
    })
}

fn pgamma_matrix(params: &Params, g: f64) -> [[f64; 3]; 3] {
    let Params {
        m, p, sigma, alpha, beta, ..
    } = *params;
    [
        [0.0, 0.0, 0.0],
        [alpha - g, -beta, 0.0],
        [m * sigma * g, m * (p - 1.0) * g, 0.0],
    ]
}

fn coords_of(params: &Params, id: PointId) -> (Chart, [f64; 3], bool) {
    let m = params.m;
    let r = (1.0 + m * m).sqrt();
    match id {
        PointId::P0 => (Chart::Upper, [0.0; 3], false),
        PointId::P1 => (Chart::Upper, [0.0, -params.beta / m, 0.0], false),
        PointId::P2 => (Chart::Upper, [params.x_p2(), params.y_p2(), 0.0], false),
        PointId::Pgamma(g) => (Chart::Upper, [0.0, 0.0, g], false),
        PointId::Q1 => (Chart::Upper, [1.0, 0.0, 0.0], true),
        PointId::Q2 => (Chart::Upper, [0.0, 1.0, 0.0], true),
        PointId::Q3 => (Chart::Upper, [0.0, -1.0, 0.0], true),
        PointId::Q4 => (Chart::Upper, [0.0, 0.0, 1.0], true),
        PointId::Q5 => (Chart::Upper, [m / r, 1.0 / r, 0.0], true),
        PointId::InterfaceLine(eta) => (Chart::Lower, [0.0, -params.beta * eta / m, eta], false),
    }
}

fn to_matrix(a: &[[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| a[i][j])
}

/// Orthonormal basis of the null space of `a` (singular values below `tol`).
fn null_space(a: Matrix3<Complex<f64>>, count: usize) -> Vec<nalgebra::Vector3<Complex<f64>>> {
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    order
        .into_iter()
        .take(count)
        .map(|i| v_t.row(i).adjoint())
        .collect()
}

/// Eigenvalues (real-Schur based) and eigenvectors (null spaces of `(M - lambda)^k`).
pub fn eigen_decompose(a: &[[f64; 3]; 3]) -> ([Eigenvalue; 3], [[f64; 3]; 3]) {
    let mat = to_matrix(a);
    let mut lambdas: Vec<Complex<f64>> = mat.complex_eigenvalues().iter().copied().collect();
    lambdas.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));

    let scale = mat.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let cluster_tol = 1e-7 * scale;
    let cmat: Matrix3<Complex<f64>> = mat.map(|v| Complex::new(v, 0.0));
    let mut vectors = [[0.0; 3]; 3];
    let mut j = 0;
    while j < 3 {
        let lam = lambdas[j];
        if lam.im.abs() > cluster_tol {
            // complex pair: real and imaginary parts of one eigenvector
            let shifted = cmat - Matrix3::identity() * lam;
            let v = null_space(shifted, 1)[0];
            let pivot = v.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap();
            let v = v / (pivot / pivot.norm());
            for i in 0..3 {
                vectors[i][j] = v[i].re;
                if j + 1 < 3 {
                    vectors[i][j + 1] = v[i].im;
                }
            }
            j += 2;
            continue;
        }
        let mult = (j..3).take_while(|&k| (lambdas[k] - lam).norm() <= cluster_tol).count();
        let mut shifted = cmat - Matrix3::identity() * Complex::new(lam.re, 0.0);
        let base = shifted;
        for _ in 1..mult {
            shifted *= base;
        }
        for (off, v) in null_space(shifted, mult).into_iter().enumerate() {
            let pivot = v.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap();
            let v = v / (pivot / pivot.norm());
            for i in 0..3 {
                vectors[i][j + off] = v[i].re;
            }
        }
        j += mult;
    }
    let vals = [0, 1, 2].map(|k| Eigenvalue {
        re: lambdas[k].re,
        im: lambdas[k].im,
    });
    (vals, vectors)
}

/// Closed-form linearization, numeric eigen-decomposition and manifold dimensions.
pub fn classify_point(params: &Params, id: PointId) -> Result<CriticalPointInfo> {
    let jac = jacobian(params, id)?;
    let (eigenvalues, eigenvectors) = eigen_decompose(&jac);
    let stable_dim = eigenvalues.iter().filter(|e| e.re < -CENTER_BAND).count();
    let unstable_dim = eigenvalues.iter().filter(|e| e.re > CENTER_BAND).count();
    let (chart, coords, at_infinity) = coords_of(params, id);
    Ok(CriticalPointInfo {
        id,
        chart,
        coords,
        at_infinity,
        jacobian: jac,
        eigenvalues,
        eigenvectors,
        stable_dim,
        unstable_dim,
        center_dim: 3 - stable_dim - unstable_dim,
    })
}

/// Unstable direction `(x, -1, z)` of P2 and the coefficient `psi` of the
/// second-order term in the origin behaviour of its orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct P2Direction {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub psi: f64,
}

pub fn p2_eigenvector(params: &Params) -> P2Direction {
    let Params {
        m, p, sigma, alpha, beta, ..
    } = *params;
    let den = 2.0 * (m + p - 2.0) + sigma * (m - 1.0);
    let x = -(m - 1.0) * (m - 1.0) / den;
    let z = 2.0 * m / (m - 1.0)
        * (-(alpha * (m + 1.0) - 1.0) * (m - 1.0) * (m - 1.0) / den
            + (2.0 * (m + 1.0) * beta + m + 2.0 * p + 1.0 + sigma * (m - 1.0)) / 2.0);
    debug_assert!(z > 0.0, "P2 eigenvector z-component must be positive, got {z}");
    P2Direction {
        x,
        y: -1.0,
        z,
        psi: (x / z).abs().powf(1.0 / (m - p)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LocalForm {
    /// `f ~ c xi^{2/(m-1)} - psi xi^{(sigma+2)/(m-p)}` near 0.
    Case1,
    /// `f ~ k' xi^{(sigma+2)/(m-p)}` near 0.
    Case2,
    /// `f^{m-1} ~ beta (m-1)(eta^2 - xi^2)/(2m)` near `eta`.
    Interface,
    /// `f ~ (1/(p-1))^{1/(p-1)} xi^{-sigma/(p-1)}` as `xi -> inf`.
    Tail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Starter {
    pub origin: CriticalPointInfo,
    pub family_param: Option<f64>,
    pub delta: f64,
    pub state: PhaseState,
    pub expected_local_form: LocalForm,
}

impl Starter {
    /// `xi` at which the starter state sits.
    pub fn xi(&self) -> f64 {
        self.state.xi()
    }
}

fn require_family(id: PointId, family_param: Option<f64>) -> Result<f64> {
    match family_param {
        Some(v) if v.is_finite() && v > 0.0 => Ok(v),
        Some(v) => Err(Error::BadFamilyParam(v)),
        None => Err(Error::InvalidInput(format!("{id} starter needs a family parameter"))),
    }
}

/// `ln xi` of an upper-chart point from `xi^{sigma + 2q} = Z / X^q`.
pub(crate) fn logxi_from_upper(params: &Params, x: f64, z: f64) -> f64 {
    let q = params.q();
    (z.ln() - q * x.ln()) / (params.sigma + 2.0 * q)
}

/// Builds a state `delta` away from a critical point on the relevant branch.
///
/// * `P0` with `k`: the center-manifold branch `Z ~ k X`.
/// * `P2`: the outgoing eigen-direction, into `Z > 0`.
/// * `InterfaceLine(eta)` (or `family_param = eta`): off the interface along the
///   stable direction transverse to `x = 0`; integrate it in reverse time.
/// * `Pgamma`: the tail attractor itself, `family_param` optionally fixing `xi`.
pub fn make_starter(params: &Params, id: PointId, family_param: Option<f64>, delta: f64) -> Result<Starter> {
    if !(delta > 0.0 && delta <= 1e-3) {
        return Err(Error::BadDelta(delta));
    }
    let Params { alpha, beta, m, .. } = *params;
    match id {
        PointId::P0 => {
            let k = require_family(id, family_param)?;
            let x = delta;
            let z = k * delta;
            let h = -(m * alpha * (alpha + beta + 1.0) / (beta * beta)) * x * x - x * z;
            let y = (alpha * x + h) / beta;
            Ok(Starter {
                origin: classify_point(params, id)?,
                family_param: Some(k),
                delta,
                state: PhaseState::upper(x, y, z, logxi_from_upper(params, x, z)),
                expected_local_form: LocalForm::Case2,
            })
        }
        PointId::P2 => {
            let d = p2_eigenvector(params);
            let norm = (d.x * d.x + d.y * d.y + d.z * d.z).sqrt();
            let x = params.x_p2() + delta * d.x / norm;
            let y = params.y_p2() + delta * d.y / norm;
            let z = delta * d.z / norm;
            Ok(Starter {
                origin: classify_point(params, id)?,
                family_param: None,
                delta,
                state: PhaseState::upper(x, y, z, logxi_from_upper(params, x, z)),
                expected_local_form: LocalForm::Case1,
            })
        }
        PointId::InterfaceLine(_) => {
            let eta = match id {
                PointId::InterfaceLine(e) if family_param.is_none() => e,
                _ => require_family(id, family_param)?,
            };
            if !(eta.is_finite() && eta > 0.0) {
                return Err(Error::BadFamilyParam(eta));
            }
            let id = PointId::InterfaceLine(eta);
            let info = classify_point(params, id)?;
            // the stable eigenvalue -(m-1) beta eta is the only negative one
            let j = (0..3)
                .min_by(|&a, &b| info.eigenvalues[a].re.total_cmp(&info.eigenvalues[b].re))
                .unwrap();
            let mut v = info.eigenvector(j);
            if v[0] < 0.0 {
                v = v.map(|c| -c);
            }
            let scale = delta / v[0];
            let x = delta;
            let y = info.coords[1] + scale * v[1];
            let z = eta + scale * v[2];
            Ok(Starter {
                origin: info,
                family_param: Some(eta),
                delta,
                state: PhaseState::lower(x, y, z),
                expected_local_form: LocalForm::Interface,
            })
        }
        PointId::Pgamma(_) => {
            let xi = family_param.unwrap_or(1.0);
            if !(xi.is_finite() && xi > 0.0) {
                return Err(Error::BadFamilyParam(xi));
            }
            let g = params.gamma0();
            Ok(Starter {
                origin: classify_point(params, PointId::Pgamma(g))?,
                family_param: Some(xi),
                delta,
                state: PhaseState::upper(0.0, 0.0, g, xi.ln()),
                expected_local_form: LocalForm::Tail,
            })
        }
        other => Err(Error::UnsupportedPoint(
            other.to_string(),
            "no starter is built at this point",
        )),
    }
}

/// Validity window of a starter's local expansion, as multiples of its `xi`.
pub const VALIDITY_WINDOW: (f64, f64) = (0.5, 2.0);

/// Evaluates the starter's asymptotic form at `xi`.
pub fn local_profile(params: &Params, starter: &Starter, xi: f64) -> Result<ProfileSample> {
    local_profile_in(params, starter, xi, VALIDITY_WINDOW)
}

pub fn local_profile_in(params: &Params, starter: &Starter, xi: f64, window: (f64, f64)) -> Result<ProfileSample> {
    let Params { m, p, sigma, beta, .. } = *params;
    let xi_s = starter.xi();
    let (lo, hi) = (window.0 * xi_s, window.1 * xi_s);
    if !(xi >= lo && xi <= hi) {
        return Err(Error::OutOfValidity { xi, lo, hi });
    }
    let sample = |f: f64, df: f64| ProfileSample::new(xi, f, df, m);
    Ok(match starter.expected_local_form {
        LocalForm::Case1 => {
            let c = params.x_p2().powf(1.0 / (m - 1.0));
            let e1 = 2.0 / (m - 1.0);
            let e2 = params.decay_exponent();
            let psi = p2_eigenvector(params).psi;
            sample(
                c * xi.powf(e1) - psi * xi.powf(e2),
                c * e1 * xi.powf(e1 - 1.0) - psi * e2 * xi.powf(e2 - 1.0),
            )
        }
        LocalForm::Case2 => {
            let k = starter.family_param.expect("P0 starter carries k");
            let e = params.decay_exponent();
            let kk = k.powf(-1.0 / (m - p));
            sample(kk * xi.powf(e), kk * e * xi.powf(e - 1.0))
        }
        LocalForm::Interface => {
            let eta = starter.family_param.expect("interface starter carries eta");
            let g = beta * (m - 1.0) * (eta * eta - xi * xi) / (2.0 * m);
            if g <= 0.0 {
                ProfileSample {
                    xi,
                    f: 0.0,
                    df: 0.0,
                    fm_prime: 0.0,
                }
            } else {
                let e = 1.0 / (m - 1.0);
                let dg = -beta * (m - 1.0) * xi / m;
                sample(g.powf(e), e * g.powf(e - 1.0) * dg)
            }
        }
        LocalForm::Tail => {
            let c = params.gamma0().powf(1.0 / (p - 1.0));
            let e = -sigma / (p - 1.0);
            sample(c * xi.powf(e), c * e * xi.powf(e - 1.0))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::derive_exponents;
    use approx::assert_relative_eq;

    fn params() -> Params {
        derive_exponents(3.0, 2.0, 1.0).unwrap()
    }

    fn sorted_re(info: &CriticalPointInfo) -> Vec<f64> {
        let mut v: Vec<f64> = info.eigenvalues.iter().map(|e| e.re).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    #[test]
    fn p1_hand_eigenvalues() {
        let info = classify_point(&params(), PointId::P1).unwrap();
        let re = sorted_re(&info);
        for (a, b) in re.iter().zip([-0.5, -0.25, 0.25]) {
            assert_relative_eq!(*a, b, epsilon = 1e-12);
        }
        assert_eq!((info.stable_dim, info.unstable_dim, info.center_dim), (2, 1, 0));
    }

    #[test]
    fn p2_hand_eigenvalues() {
        let info = classify_point(&params(), PointId::P2).unwrap();
        assert_eq!((info.stable_dim, info.unstable_dim), (2, 1));
        let lam3 = info.eigenvalues.iter().map(|e| e.re).fold(f64::MIN, f64::max);
        assert_relative_eq!(lam3, 0.5, epsilon = 1e-12);
        let others: Vec<_> = info.eigenvalues.iter().filter(|e| e.re < 0.0).collect();
        let prod = Complex::new(others[0].re, others[0].im) * Complex::new(others[1].re, others[1].im);
        assert_relative_eq!(prod.re, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn pgamma_has_double_zero() {
        let p = params();
        for g in [0.0, 0.4, p.gamma0(), 3.0] {
            let info = classify_point(&p, PointId::Pgamma(g)).unwrap();
            let re = sorted_re(&info);
            assert_relative_eq!(re[0], -p.beta, epsilon = 1e-12);
            assert!(re[1].abs() < 1e-12 && re[2].abs() < 1e-12);
            assert_eq!(info.center_dim, 2);
        }
    }

    #[test]
    fn infinity_nodes() {
        let p = params();
        let q2 = classify_point(&p, PointId::Q2).unwrap();
        assert_eq!(q2.unstable_dim, 3);
        let q3 = classify_point(&p, PointId::Q3).unwrap();
        assert_eq!(q3.stable_dim, 3);
        assert!(matches!(
            classify_point(&p, PointId::Q4),
            Err(Error::UnsupportedPoint(..))
        ));
    }

    #[test]
    fn eigenvectors_satisfy_eigen_equation() {
        let p = derive_exponents(2.5, 1.7, 3.3).unwrap();
        for id in [PointId::P1, PointId::P2, PointId::Q1, PointId::Q5, PointId::InterfaceLine(1.3)] {
            let info = classify_point(&p, id).unwrap();
            let a = to_matrix(&info.jacobian);
            for j in 0..3 {
                let e = info.eigenvalues[j];
                if e.im.abs() > 0.0 {
                    continue;
                }
                let v = nalgebra::Vector3::from(info.eigenvector(j));
                let r = a * v - v * e.re;
                assert!(r.norm() < 1e-9, "{id}: residual {}", r.norm());
            }
        }
    }

    #[test]
    fn p2_direction_matches_numeric_eigenvector() {
        let p = params();
        let d = p2_eigenvector(&p);
        let info = classify_point(&p, PointId::P2).unwrap();
        let j = (0..3)
            .max_by(|&a, &b| info.eigenvalues[a].re.total_cmp(&info.eigenvalues[b].re))
            .unwrap();
        let v = info.eigenvector(j);
        let v = v.map(|c| -c / v[1]);
        assert_relative_eq!(v[0], d.x, max_relative = 1e-8);
        assert_relative_eq!(v[2], d.z, max_relative = 1e-8);
    }

    #[test]
    fn p2_direction_signs_and_psi_limit() {
        for s in [0.5, 1.0, 5.0] {
            let d = p2_eigenvector(&derive_exponents(3.0, 2.0, s).unwrap());
            assert!(d.x < 0.0 && d.z > 0.0);
        }
        let psi = |s| p2_eigenvector(&derive_exponents(3.0, 2.0, s).unwrap()).psi;
        assert!(psi(100.0) < psi(10.0) && psi(10.0) < psi(1.0));
    }

    #[test]
    fn p0_starter_leading_order() {
        let p = params();
        let st = make_starter(&p, PointId::P0, Some(1.0), 1e-6).unwrap();
        let lead = p.alpha / p.beta * 1e-6;
        // quadratic center-manifold term: (72 + 1) * 1e-12 / beta
        let quad = -(3.0 * 0.75 * 2.0 / 0.0625 + 1.0) * 1e-12 / 0.25;
        assert_relative_eq!(st.state.coords[1], lead + quad, max_relative = 1e-12);
        assert!((st.state.coords[1] - lead).abs() < 3e-10);
        assert!(matches!(
            make_starter(&p, PointId::P0, Some(0.0), 1e-6),
            Err(Error::BadFamilyParam(_))
        ));
        assert!(matches!(
            make_starter(&p, PointId::P0, Some(1.0), 2e-3),
            Err(Error::BadDelta(_))
        ));
    }

    #[test]
    fn p2_starter_converges_to_p2() {
        let p = params();
        for d in [1e-4, 1e-6, 1e-8] {
            let st = make_starter(&p, PointId::P2, None, d).unwrap();
            let c = st.state.coords;
            let dist = ((c[0] - p.x_p2()).powi(2) + (c[1] - p.y_p2()).powi(2) + c[2].powi(2)).sqrt();
            assert_relative_eq!(dist, d, max_relative = 1e-9);
            assert!(c[2] > 0.0);
        }
    }

    #[test]
    fn interface_starter_geometry() {
        let p = params();
        let st = make_starter(&p, PointId::InterfaceLine(1.0), None, 1e-6).unwrap();
        assert_relative_eq!(st.origin.coords[1], -1.0 / 12.0, epsilon = 1e-15);
        let stable = st.origin.eigenvalues.iter().map(|e| e.re).fold(f64::MAX, f64::min);
        assert_relative_eq!(stable, -0.5, epsilon = 1e-12);
        assert!(st.state.coords[0] > 0.0);
        // f^{m-1} against the Barenblatt-type form at the starter's xi
        let lp = local_profile(&p, &st, st.state.coords[2]).unwrap();
        let x_form = lp.f.powf(p.m - 1.0);
        assert!(((st.state.coords[0] - x_form) / x_form).abs() < 1e-4);
    }

    #[test]
    fn local_forms() {
        let p = params();
        let st = make_starter(&p, PointId::InterfaceLine(2.0), None, 1e-6).unwrap();
        let at = local_profile_in(&p, &st, 2.0, (0.5, 2.0)).unwrap();
        assert_eq!((at.f, at.fm_prime), (0.0, 0.0));

        let st = make_starter(&p, PointId::P0, Some(2.0), 1e-6).unwrap();
        let xi = st.xi();
        let a = local_profile(&p, &st, xi).unwrap();
        let b = local_profile(&p, &st, 1.5 * xi).unwrap();
        assert_relative_eq!((b.f / a.f).ln() / 1.5f64.ln(), p.alpha / p.beta, max_relative = 1e-12);
        assert!(matches!(
            local_profile(&p, &st, 10.0 * xi),
            Err(Error::OutOfValidity { .. })
        ));

        let st = make_starter(&p, PointId::Pgamma(p.gamma0()), Some(10.0), 1e-6).unwrap();
        for xi in [10.0, 20.0] {
            let s = local_profile(&p, &st, xi).unwrap();
            assert_relative_eq!(s.f * xi.powf(p.sigma / (p.p - 1.0)), 1.0, max_relative = 1e-12);
        }
    }
}
