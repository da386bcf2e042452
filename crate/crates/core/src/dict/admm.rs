//! ADMM for non-negative sparse tensor factorization `Y ≈ D * H`.
//!
//! Minimizes `½‖Y − D*H‖²_F + λ‖H‖_sum` over dictionaries `D` in the feasible
//! set and non-negative `H`, with the splitting `D = U`, `H = V`. Each step
//! applies the six updates in their fixed order; the two linear solves are
//! done per frequency in the Fourier domain.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::projection::project_onto_dictionary_set;
use crate::error::{Error, Result};
use crate::tensor::{FourierTensor3, Tensor3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DictLearnConfig {
    /// Number of dictionary elements.
    pub s: usize,
    pub lambda: f64,
    #[serde(default = "defaults::rho")]
    pub rho: f64,
    #[serde(default = "defaults::eps")]
    pub eps: f64,
    #[serde(default = "defaults::max_iter")]
    pub max_iter: usize,
    #[serde(default = "defaults::dykstra_max_iter")]
    pub dykstra_max_iter: usize,
    #[serde(default = "defaults::dykstra_tol")]
    pub dykstra_tol: f64,
    #[serde(default)]
    pub seed: u64,
}

mod defaults {
    pub fn rho() -> f64 {
        1.0
    }
    pub fn eps() -> f64 {
        1e-4
    }
    pub fn max_iter() -> usize {
        1000
    }
    pub fn dykstra_max_iter() -> usize {
        100
    }
    pub fn dykstra_tol() -> f64 {
        1e-10
    }
}

impl DictLearnConfig {
    pub fn new(s: usize, lambda: f64) -> Self {
        DictLearnConfig {
            s,
            lambda,
            rho: defaults::rho(),
            eps: defaults::eps(),
            max_iter: defaults::max_iter(),
            dykstra_max_iter: defaults::dykstra_max_iter(),
            dykstra_tol: defaults::dykstra_tol(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.s == 0 {
            return Err(Error::invalid("dictionary size s must be at least 1"));
        }
        if !(self.rho > 0.0) {
            return Err(Error::invalid(format!(
                "rho must be positive, got {}",
                self.rho
            )));
        }
        if !(self.eps > 0.0) {
            return Err(Error::invalid(format!(
                "eps must be positive, got {}",
                self.eps
            )));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::invalid(format!(
                "lambda must be non-negative, got {}",
                self.lambda
            )));
        }
        if !(self.dykstra_tol > 0.0) {
            return Err(Error::invalid("dykstra_tol must be positive"));
        }
        Ok(())
    }
}

/// Primal, split and dual variables of the ADMM iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct DictLearnState {
    pub d: Tensor3,
    pub h: Tensor3,
    pub u: Tensor3,
    pub v: Tensor3,
    pub lambda: Tensor3,
    pub lambda_bar: Tensor3,
    pub iter: usize,
}

impl DictLearnState {
    /// Starting point: `U` holds `s` seeded-random training patches (with
    /// replacement only when `s > t`), `V = H` is the rectangular identity
    /// (ones on the diagonal of the first frontal slice), multipliers zero.
    pub fn initial(y: &Tensor3, cfg: &DictLearnConfig) -> Result<Self> {
        let (p, t, r) = y.dims();
        if t == 0 {
            return Err(Error::invalid("training tensor has no patches"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let picks: Vec<usize> = if cfg.s <= t {
            sample(&mut rng, t, cfg.s).into_vec()
        } else {
            (0..cfg.s).map(|_| rng.random_range(0..t)).collect()
        };
        let u = y.select_lateral(&picks);
        let mut v = Tensor3::zeros(cfg.s, t, r);
        for i in 0..cfg.s.min(t) {
            v.set(i, i, 0, 1.0);
        }
        Ok(DictLearnState {
            d: u.clone(),
            h: v.clone(),
            u,
            v,
            lambda: Tensor3::zeros(p, cfg.s, r),
            lambda_bar: Tensor3::zeros(cfg.s, t, r),
            iter: 0,
        })
    }
}

#[derive(Debug, Clone)]
pub struct DictLearnResult {
    pub state: DictLearnState,
    pub iterations: usize,
    pub converged: bool,
    /// The four normalized KKT residuals after each iteration.
    pub kkt_history: Vec<[f64; 4]>,
    /// `½‖Y − D*H‖²_F + λ‖H‖_sum` after each iteration.
    pub objective_history: Vec<f64>,
}

impl DictLearnResult {
    pub fn dictionary(&self) -> &Tensor3 {
        &self.state.d
    }

    pub fn coefficients(&self) -> &Tensor3 {
        &self.state.h
    }
}

/// Elementwise `sign(a)·max(|a| − tau, 0)`.
pub fn soft_threshold(t: &Tensor3, tau: f64) -> Tensor3 {
    t.map(|a| a.signum() * (a.abs() - tau).max(0.0))
}

/// One ADMM iteration with the feasible-set projection for the `D` update.
pub fn admm_step(state: &mut DictLearnState, y: &Tensor3, cfg: &DictLearnConfig) -> Result<()> {
    let y_hat = FourierTensor3::forward(y);
    admm_step_fourier(state, y, &y_hat, cfg, &|t| {
        project_onto_dictionary_set(t, cfg.dykstra_max_iter, cfg.dykstra_tol).tensor
    })
}

/// One ADMM iteration with a caller-supplied `D` projection.
pub fn admm_step_with_projection(
    state: &mut DictLearnState,
    y: &Tensor3,
    cfg: &DictLearnConfig,
    project: &dyn Fn(&Tensor3) -> Tensor3,
) -> Result<()> {
    let y_hat = FourierTensor3::forward(y);
    admm_step_fourier(state, y, &y_hat, cfg, project)
}

fn check_shapes(state: &DictLearnState, y: &Tensor3) -> Result<()> {
    let (p, t, r) = y.dims();
    let (p_u, s, r_u) = state.u.dims();
    let ok = (p_u, r_u) == (p, r)
        && state.d.dims() == (p, s, r)
        && state.lambda.dims() == (p, s, r)
        && state.h.dims() == (s, t, r)
        && state.v.dims() == (s, t, r)
        && state.lambda_bar.dims() == (s, t, r);
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "ADMM state shapes are inconsistent with training tensor {:?}",
            y.dims()
        )))
    }
}

fn admm_step_fourier(
    state: &mut DictLearnState,
    y: &Tensor3,
    y_hat: &FourierTensor3,
    cfg: &DictLearnConfig,
    project: &dyn Fn(&Tensor3) -> Tensor3,
) -> Result<()> {
    check_shapes(state, y)?;
    let rho = cfg.rho;
    let inv_rho = 1.0 / rho;

    // D ← P_D(U − Λ/ρ)
    let mut shifted = state.u.clone();
    shifted.axpy(-inv_rho, &state.lambda);
    state.d = project(&shifted);

    // V ← (UᵀU + ρI)⁻¹ (UᵀY + Λ̄ + ρH)
    let u_hat = FourierTensor3::forward(&state.u);
    let u_hat_t = u_hat.conj_transpose();
    let mut gram = u_hat_t.mul(&u_hat)?;
    gram.add_scaled_identity(rho);
    let mut rest = state.lambda_bar.clone();
    rest.axpy(rho, &state.h);
    let rhs = u_hat_t.mul(y_hat)?.add(&FourierTensor3::forward(&rest));
    state.v = gram.solve_spd(&rhs)?.inverse()?;

    // H ← P₊(S_{λ/ρ}(V − Λ̄/ρ))
    let mut shifted = state.v.clone();
    shifted.axpy(-inv_rho, &state.lambda_bar);
    state.h = soft_threshold(&shifted, cfg.lambda * inv_rho);
    state.h.map_inplace(|a| a.max(0.0));

    // U ← (Y Vᵀ + Λ + ρD)(V Vᵀ + ρI)⁻¹
    let v_hat = FourierTensor3::forward(&state.v);
    let v_hat_t = v_hat.conj_transpose();
    let mut gram = v_hat.mul(&v_hat_t)?;
    gram.add_scaled_identity(rho);
    let mut rest = state.lambda.clone();
    rest.axpy(rho, &state.d);
    let rhs = y_hat.mul(&v_hat_t)?.add(&FourierTensor3::forward(&rest));
    state.u = gram.solve_spd_right(&rhs)?.inverse()?;

    // Λ ← Λ + ρ(D − U),  Λ̄ ← Λ̄ + ρ(H − V)
    state.lambda.axpy(rho, &state.d);
    state.lambda.axpy(-rho, &state.u);
    state.lambda_bar.axpy(rho, &state.h);
    state.lambda_bar.axpy(-rho, &state.v);

    state.iter += 1;
    Ok(())
}

/// The four stopping residuals:
///
/// 1. `‖D − U‖_max / max(1, ‖D‖_max)`
/// 2. `‖H − V‖_max / max(1, ‖H‖_max)`
/// 3. `‖Λ̄ − Dᵀ*(D*H − Y)‖_max / max(1, ‖Λ̄‖_max)`
/// 4. `‖Λ − (D*H − Y)*Hᵀ‖_max / max(1, ‖Λ‖_max)`
pub fn kkt_residuals(state: &DictLearnState, y: &Tensor3) -> Result<[f64; 4]> {
    check_shapes(state, y)?;
    let d_hat = FourierTensor3::forward(&state.d);
    let h_hat = FourierTensor3::forward(&state.h);
    let misfit_hat = d_hat.mul(&h_hat)?;
    let mut misfit = misfit_hat.inverse()?;
    misfit.axpy(-1.0, y);
    let misfit_hat = FourierTensor3::forward(&misfit);
    let dual_h = d_hat.conj_transpose().mul(&misfit_hat)?.inverse()?;
    let dual_d = misfit_hat.mul(&h_hat.conj_transpose())?.inverse()?;
    Ok(kkt_from_parts(state, &dual_h, &dual_d))
}

/// Combines the residual terms; shared with tests that compute the t-products
/// by another route.
pub fn kkt_from_parts(state: &DictLearnState, dual_h: &Tensor3, dual_d: &Tensor3) -> [f64; 4] {
    let rel = |num: f64, den: f64| num / den.max(1.0);
    [
        rel((&state.d - &state.u).max_norm(), state.d.max_norm()),
        rel((&state.h - &state.v).max_norm(), state.h.max_norm()),
        rel(
            (&state.lambda_bar - dual_h).max_norm(),
            state.lambda_bar.max_norm(),
        ),
        rel((&state.lambda - dual_d).max_norm(), state.lambda.max_norm()),
    ]
}

/// `½‖Y − D*H‖²_F + λ‖H‖_sum`.
pub fn objective(d: &Tensor3, h: &Tensor3, y: &Tensor3, lambda: f64) -> Result<f64> {
    let fit = crate::tensor::tprod(d, h)?;
    Ok(0.5 * (&fit - y).fro_norm().powi(2) + lambda * h.sum_norm())
}

/// Runs ADMM from the standard initialization until every KKT residual is
/// at most `eps` or `max_iter` iterations have been taken.
pub fn learn_dictionary(y: &Tensor3, cfg: &DictLearnConfig) -> Result<DictLearnResult> {
    learn_dictionary_observed(y, cfg, |_| {})
}

/// [`learn_dictionary`] with a callback invoked on the state after every iteration.
pub fn learn_dictionary_observed(
    y: &Tensor3,
    cfg: &DictLearnConfig,
    mut observe: impl FnMut(&DictLearnState),
) -> Result<DictLearnResult> {
    cfg.validate()?;
    let mut state = DictLearnState::initial(y, cfg)?;
    let y_hat = FourierTensor3::forward(y);
    let project =
        |t: &Tensor3| project_onto_dictionary_set(t, cfg.dykstra_max_iter, cfg.dykstra_tol).tensor;
    let mut kkt_history = Vec::new();
    let mut objective_history = Vec::new();
    let mut converged = false;
    for _ in 0..cfg.max_iter {
        admm_step_fourier(&mut state, y, &y_hat, cfg, &project)?;
        let kkt = kkt_residuals(&state, y)?;
        kkt_history.push(kkt);
        objective_history.push(objective(&state.d, &state.h, y, cfg.lambda)?);
        observe(&state);
        if kkt.iter().all(|&v| v <= cfg.eps) {
            converged = true;
            break;
        }
    }
    Ok(DictLearnResult {
        iterations: state.iter,
        state,
        converged,
        kkt_history,
        objective_history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Tensor3 {
        Tensor3::from_vec(1, 1, 1, vec![v]).unwrap()
    }

    #[test]
    fn soft_threshold_values() {
        let t = Tensor3::from_vec(1, 2, 1, vec![0.5, -0.5]).unwrap();
        let out = soft_threshold(&t, 0.2);
        assert!((out.get(0, 0, 0) - 0.3).abs() < 1e-15);
        assert!((out.get(0, 1, 0) + 0.3).abs() < 1e-15);
        assert_eq!(soft_threshold(&t, 0.0), t);
    }

    #[test]
    fn scalar_v_update_by_hand() {
        // U = 2, Y = 6, Λ̄ = 0, H = 0, ρ = 1: V = 12 / 5
        let cfg = DictLearnConfig {
            rho: 1.0,
            ..DictLearnConfig::new(1, 0.0)
        };
        let mut state = DictLearnState {
            d: scalar(1.0),
            h: scalar(0.0),
            u: scalar(2.0),
            v: scalar(0.0),
            lambda: scalar(0.0),
            lambda_bar: scalar(0.0),
            iter: 0,
        };
        admm_step(&mut state, &scalar(6.0), &cfg).unwrap();
        assert!((state.v.get(0, 0, 0) - 2.4).abs() < 1e-14);
        // H = max(2.4 − 0, 0), D = P_D(2) = 1 (radius √1), U = (6·2.4 + 0 + 1)/(2.4² + 1)
        assert!((state.h.get(0, 0, 0) - 2.4).abs() < 1e-14);
        assert!((state.d.get(0, 0, 0) - 1.0).abs() < 1e-14);
        let u = (6.0 * 2.4 + 1.0) / (2.4 * 2.4 + 1.0);
        assert!((state.u.get(0, 0, 0) - u).abs() < 1e-14);
        assert!((state.lambda.get(0, 0, 0) - (1.0 - u)).abs() < 1e-14);
        assert!(state.lambda_bar.get(0, 0, 0).abs() < 1e-14);
    }

    #[test]
    fn huge_threshold_zeroes_h() {
        let y = Tensor3::from_fn(3, 5, 2, |i, j, k| 0.1 * (1 + i + j + k) as f64);
        let cfg = DictLearnConfig::new(2, 1e6);
        let mut state = DictLearnState::initial(&y, &cfg).unwrap();
        admm_step(&mut state, &y, &cfg).unwrap();
        assert!(state.h.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn kkt_trivial_cases() {
        let cfg = DictLearnConfig::new(2, 0.1);
        let y = Tensor3::zeros(3, 4, 2);
        let mut state = DictLearnState::initial(&y, &cfg).unwrap();
        state.h = Tensor3::zeros(2, 4, 2);
        state.v = state.h.clone();
        let k = kkt_residuals(&state, &y).unwrap();
        assert_eq!(k, [0.0; 4]);

        let y = Tensor3::from_fn(3, 4, 2, |i, j, k| (i + 2 * j + k) as f64 * 0.1);
        let state = DictLearnState::initial(&y, &cfg).unwrap();
        let k = kkt_residuals(&state, &y).unwrap();
        assert_eq!((k[0], k[1]), (0.0, 0.0));
    }

    #[test]
    fn initialization_shapes() {
        let y = Tensor3::from_fn(2, 3, 4, |i, j, k| (i + j + k) as f64);
        let cfg = DictLearnConfig::new(5, 0.1);
        let st = DictLearnState::initial(&y, &cfg).unwrap();
        assert_eq!(st.u.dims(), (2, 5, 4));
        assert_eq!(st.v.dims(), (5, 3, 4));
        // rectangular identity on the first frontal slice
        for i in 0..5 {
            for j in 0..3 {
                assert_eq!(st.v.get(i, j, 0), if i == j { 1.0 } else { 0.0 });
            }
        }
        assert!(st.v.as_slice()[15..].iter().all(|&v| v == 0.0));
        // every initial atom is one of the training patches
        for i in 0..5 {
            let atom = st.u.lateral(i);
            assert!((0..3).any(|j| y.lateral(j) == atom));
        }
    }

    #[test]
    fn config_validation() {
        assert!(DictLearnConfig {
            rho: 0.0,
            ..DictLearnConfig::new(2, 0.1)
        }
        .validate()
        .is_err());
        assert!(DictLearnConfig::new(0, 0.1).validate().is_err());
        assert!(DictLearnConfig {
            eps: -1.0,
            ..DictLearnConfig::new(2, 0.1)
        }
        .validate()
        .is_err());
    }
}
