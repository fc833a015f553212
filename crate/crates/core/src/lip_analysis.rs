//! Step-to-step maps of the pendulum on the pre-impact section.
//!
//! Coordinates are `(α, γ, v)` of the pre-impact state. The synchronization
//! measure of the following step start is `L = γ* − γ`, because the reset
//! flips the sign of `ẏ`.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::hybrid::IntegratorConfig;
use crate::linalg::{eigenvalues, Matrix};
use crate::lip::{
    self, from_switch_coords, synchronized_pre_impact, to_switch_coords, LipParams, LipState,
    SwitchCoords, VelocityBranch,
};
use crate::{Error, Result};

/// Default central-difference step for the pendulum maps.
pub const DEFAULT_FD_STEP: f64 = 1e-6;

/// Pre-impact state on the section `r = r0` described by `coords`.
/// The stored radius is ignored: the section fixes it.
pub fn section_state(coords: &SwitchCoords, params: &LipParams) -> Result<LipState> {
    let on_section = SwitchCoords {
        r: params.r0_sq().sqrt(),
        ..*coords
    };
    from_switch_coords(&on_section, VelocityBranch::SagittalDominant)
}

/// Full map `P` on `(α, γ, v)`: reset, flow to the next crossing, chart.
pub fn poincare_map(
    coords: &SwitchCoords,
    params: &LipParams,
    config: &IntegratorConfig,
) -> Result<SwitchCoords> {
    let pre = section_state(coords, params)?;
    let start = lip::reset(&pre, params)?;
    let next = lip::step(&start, params, config)?;
    to_switch_coords(&next.pre_impact)
}

/// The synchronized fixed point `(atan(x0/y0), ω²x0y0, √(2K0))`.
pub fn fixed_point(params: &LipParams, k0: f64) -> Result<SwitchCoords> {
    to_switch_coords(&synchronized_pre_impact(params, k0)?)
}

/// Closed-form contraction factor of the synchronization measure.
///
/// Returns `λ` even when `|λ| ≥ 1`; [`lambda_contracts`] reports whether the
/// synchronized orbit attracts.
pub fn analytic_lambda(params: &LipParams, k0: f64) -> Result<f64> {
    params.validate()?;
    let w2 = params.omega_sq();
    let bound = params.gamma_star();
    if !(k0 > bound) {
        return Err(Error::InfeasibleEnergy { k0, bound });
    }
    let d = w2 * (params.y0 * params.y0 - params.x0 * params.x0);
    let root = (k0 * k0 - bound * bound).sqrt();
    Ok(1.0 - 2.0 * d / (d + 2.0 * root))
}

pub fn lambda_contracts(lambda: f64) -> bool {
    lambda.abs() < 1.0
}

/// Central-difference Jacobian of `map` at `x`, step `h` in every
/// coordinate.
pub fn numeric_jacobian<F>(mut map: F, x: &[f64], h: f64) -> Result<Matrix>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidParameter("difference step must be positive"));
    }
    let n = x.len();
    let mut jac: Option<Matrix> = None;
    let mut probe = x.to_vec();
    for j in 0..n {
        probe[j] = x[j] + h;
        let plus = map(&probe)?;
        probe[j] = x[j] - h;
        let minus = map(&probe)?;
        probe[j] = x[j];
        if plus.len() != minus.len() {
            return Err(Error::InvalidParameter("map changed output dimension"));
        }
        let jm = jac.get_or_insert_with(|| Matrix::zeros(plus.len(), n));
        for i in 0..plus.len() {
            jm[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    Ok(jac.unwrap_or_else(|| Matrix::zeros(0, 0)))
}

/// `P` as a function on plain vectors, for [`numeric_jacobian`].
pub fn poincare_map_vec(x: &[f64], params: &LipParams, config: &IntegratorConfig) -> Result<Vec<f64>> {
    let c = SwitchCoords {
        alpha: x[0],
        gamma: x[1],
        v: x[2],
        r: params.r0_sq().sqrt(),
    };
    Ok(poincare_map(&c, params, config)?.to_array3().to_vec())
}

/// Energy-restricted map on `(α, γ)` at `v = √(2K0)`.
pub fn restricted_map_k0(
    coords2: (f64, f64),
    params: &LipParams,
    k0: f64,
    config: &IntegratorConfig,
) -> Result<(f64, f64)> {
    if !(k0 > 0.0) {
        return Err(Error::InfeasibleEnergy {
            k0,
            bound: params.gamma_star(),
        });
    }
    let c = SwitchCoords {
        alpha: coords2.0,
        gamma: coords2.1,
        v: (2.0 * k0).sqrt(),
        r: params.r0_sq().sqrt(),
    };
    let out = poincare_map(&c, params, config)?;
    Ok((out.alpha, out.gamma))
}

/// One row of a convergence experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConvergenceRow {
    pub n: usize,
    /// Synchronization measure of the step that starts after this impact.
    pub l: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRecord {
    pub rows: Vec<ConvergenceRow>,
    /// Set when the experiment stopped early.
    pub failure: Option<Error>,
}

impl ConvergenceRecord {
    /// `L_{n+1} / L_n` for consecutive rows; skipped where `L_n = 0`.
    pub fn ratios(&self) -> Vec<f64> {
        self.rows
            .windows(2)
            .filter(|w| w[0].l != 0.0)
            .map(|w| w[1].l / w[0].l)
            .collect()
    }
}

/// Iterates `P` from `initial` for `n_steps` steps, recording `L_n`.
pub fn convergence_experiment(
    initial: &SwitchCoords,
    params: &LipParams,
    n_steps: usize,
    config: &IntegratorConfig,
) -> ConvergenceRecord {
    let gamma_star = params.gamma_star();
    let row = |n: usize, c: &SwitchCoords| ConvergenceRow {
        n,
        l: gamma_star - c.gamma,
        alpha: c.alpha,
        gamma: c.gamma,
        v: c.v,
    };
    let mut rows = Vec::with_capacity(n_steps + 1);
    rows.push(row(0, initial));
    let mut c = *initial;
    for n in 1..=n_steps {
        match poincare_map(&c, params, config) {
            Ok(next) => {
                c = next;
                rows.push(row(n, &c));
            }
            Err(e) => {
                return ConvergenceRecord {
                    rows,
                    failure: Some(e),
                }
            }
        }
    }
    ConvergenceRecord {
        rows,
        failure: None,
    }
}

/// Pre-impact coordinates whose following step starts with measure `l0`
/// at kinetic energy `k0`.
pub fn perturbed_start(params: &LipParams, k0: f64, l0: f64) -> Result<SwitchCoords> {
    let mut c = fixed_point(params, k0)?;
    c.gamma -= l0;
    Ok(c)
}

/// Fixed point, Jacobian and convergence summary of the pendulum map.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct LipPoincareReport {
    pub fixed_point: SwitchCoords,
    pub jacobian: Matrix,
    #[cfg_attr(feature = "serde", serde(serialize_with = "crate::complex_pairs"))]
    pub eigenvalues: Vec<Complex64>,
    pub analytic_lambda: f64,
    /// `|λ| < 1`.
    pub contracting: bool,
    #[cfg_attr(feature = "serde", serde(rename = "ratios"))]
    pub convergence_ratios: Vec<f64>,
}

/// Settings for [`lip_poincare_report`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipReportSettings {
    pub k0: f64,
    pub fd_step: f64,
    /// Initial `|L0|` as a fraction of `ω²x0y0`.
    pub relative_perturbation: f64,
    pub n_steps: usize,
}

impl Default for LipReportSettings {
    fn default() -> Self {
        LipReportSettings {
            k0: lip::DEFAULT_K0,
            fd_step: DEFAULT_FD_STEP,
            relative_perturbation: 1e-3,
            n_steps: 10,
        }
    }
}

pub fn lip_poincare_report(
    params: &LipParams,
    settings: &LipReportSettings,
    config: &IntegratorConfig,
) -> Result<LipPoincareReport> {
    let fp = fixed_point(params, settings.k0)?;
    let jacobian = numeric_jacobian(
        |x| poincare_map_vec(x, params, config),
        &fp.to_array3(),
        settings.fd_step,
    )?;
    let eig = eigenvalues(&jacobian)?;
    let lambda = analytic_lambda(params, settings.k0)?;
    let l0 = settings.relative_perturbation * params.gamma_star();
    let start = perturbed_start(params, settings.k0, l0)?;
    let record = convergence_experiment(&start, params, settings.n_steps, config);
    Ok(LipPoincareReport {
        fixed_point: fp,
        jacobian,
        eigenvalues: eig,
        analytic_lambda: lambda,
        contracting: lambda_contracts(lambda),
        convergence_ratios: record.ratios(),
    })
}

/// One point of a `(x0, y0, K0)` sweep comparing analytic and numeric `λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaSample {
    pub x0: f64,
    pub y0: f64,
    pub k0: f64,
    pub lambda_analytic: f64,
    pub lambda_numeric: f64,
    pub abs_diff: f64,
    pub feasible: bool,
}

/// `λ` from the formula and from `−∂P_γ/∂γ`. Infeasible energies yield a
/// sample with `feasible = false` and NaN values.
pub fn lambda_sample(
    base: &LipParams,
    x0: f64,
    y0: f64,
    k0: f64,
    h: f64,
    config: &IntegratorConfig,
) -> LambdaSample {
    let params = base.with_targets(x0, y0);
    let numeric = || -> Result<(f64, f64)> {
        let analytic = analytic_lambda(&params, k0)?;
        let fp = fixed_point(&params, k0)?;
        let x = fp.to_array3();
        let gamma_of = |g: f64| -> Result<f64> {
            Ok(poincare_map_vec(&[x[0], g, x[2]], &params, config)?[1])
        };
        let d = (gamma_of(x[1] + h)? - gamma_of(x[1] - h)?) / (2.0 * h);
        Ok((analytic, -d))
    };
    match numeric() {
        Ok((a, n)) => LambdaSample {
            x0,
            y0,
            k0,
            lambda_analytic: a,
            lambda_numeric: n,
            abs_diff: (a - n).abs(),
            feasible: true,
        },
        Err(_) => LambdaSample {
            x0,
            y0,
            k0,
            lambda_analytic: f64::NAN,
            lambda_numeric: f64::NAN,
            abs_diff: f64::NAN,
            feasible: false,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (LipParams, IntegratorConfig) {
        (LipParams::default(), IntegratorConfig::default())
    }

    #[test]
    fn equal_targets_give_unit_lambda() {
        let p = LipParams::default().with_targets(0.2, 0.2);
        assert_eq!(analytic_lambda(&p, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn lambda_infeasible_energy() {
        let (p, _) = setup();
        assert!(matches!(
            analytic_lambda(&p, 0.1),
            Err(Error::InfeasibleEnergy { .. })
        ));
    }

    #[test]
    fn fixed_point_maps_to_itself() {
        let (p, cfg) = setup();
        let fp = fixed_point(&p, 1.0).unwrap();
        let out = poincare_map(&fp, &p, &cfg).unwrap();
        for (a, b) in fp.to_array3().iter().zip(out.to_array3()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn gamma_perturbation_scales_by_minus_lambda() {
        let (p, cfg) = setup();
        let lambda = analytic_lambda(&p, 1.0).unwrap();
        let mut c = fixed_point(&p, 1.0).unwrap();
        let gs = c.gamma;
        c.gamma += 1e-4;
        let out = poincare_map(&c, &p, &cfg).unwrap();
        assert!((out.gamma - (gs - lambda * 1e-4)).abs() < 1e-6);
    }

    #[test]
    fn identity_and_affine_jacobians() {
        let id = numeric_jacobian(|x| Ok(x.to_vec()), &[0.3, -1.0], 1e-6).unwrap();
        assert!(id.sub(&Matrix::identity(2)).max_abs() < 1e-9);
        let a = Matrix::from_rows(&[&[1.0, 2.0], &[-3.0, 0.5], &[4.0, 1.0]]);
        let f = |x: &[f64]| {
            let mut y = a.mul_vec(x);
            y[0] += 7.0;
            Ok(y)
        };
        let j = numeric_jacobian(f, &[0.1, 0.2], 1e-6).unwrap();
        assert!(j.sub(&a).max_abs() < 1e-8);
    }

    #[test]
    fn zero_measure_start_stays_synchronized() {
        let (p, cfg) = setup();
        let fp = fixed_point(&p, 1.0).unwrap();
        let rec = convergence_experiment(&fp, &p, 5, &cfg);
        assert!(rec.failure.is_none());
        assert!(rec.rows.iter().all(|r| r.l.abs() < 1e-9));
    }

    #[test]
    fn sweep_sample_flags_infeasible() {
        let (p, cfg) = setup();
        let s = lambda_sample(&p, 0.15, 0.2, 0.1, DEFAULT_FD_STEP, &cfg);
        assert!(!s.feasible);
        let s = lambda_sample(&p, 0.15, 0.2, 1.0, DEFAULT_FD_STEP, &cfg);
        assert!(s.feasible && s.abs_diff < 1e-4);
    }
}
