//! One refinement layer: a damped Gauss-Newton step on the total loss.
//!
//! The step is taken in log coordinates `eta = ln h_cam`,
//! `kappa_i = ln(h_i / h_cam)`. Reprojected tops depend on `kappa_i` alone
//! (the image is invariant along the scale family), while the prior sees
//! `ln h_i = eta + kappa_i`. The absolute reprojection residual is replaced
//! by its quadratic majorizer at the current residual, so each layer solves a
//! weighted least-squares problem whose normal equations are an arrowhead
//! matrix, eliminated through the Schur complement on `eta`.

use super::{SceneProblem, SolveError, SolverState};
use crate::prior::prior_term;

/// Residual magnitude below which the majorizer weight stops growing.
const RESIDUAL_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct RefineOutcome {
    pub state: SolverState,
    /// False when no descent step was found and the state is unchanged.
    pub accepted: bool,
    /// Loss decrease fell below the configured tolerance.
    pub converged: bool,
}

struct NormalEquations {
    /// Diagonal of the `kappa` block.
    kk: Vec<f64>,
    /// Coupling between `eta` and each `kappa_i`.
    ke: Vec<f64>,
    ee: f64,
    b_k: Vec<f64>,
    b_e: f64,
}

fn normal_equations(problem: &SceneProblem, state: &SolverState) -> Result<NormalEquations, SolveError> {
    let config = &problem.config;
    let features = problem.refine_features(state)?;
    let tops = problem.tops(state)?;
    let n = problem.objects.len();
    let mut eq = NormalEquations {
        kk: vec![0.0; n],
        ke: vec![0.0; n],
        ee: 0.0,
        b_k: vec![0.0; n],
        b_e: 0.0,
    };
    for (i, ((o, feat), top)) in problem.objects.iter().zip(&features).zip(&tops).enumerate() {
        let h = feat.height();
        let r = feat.residual();
        // d r / d kappa
        let j = h * top.d_obj_height;
        let a = config.alpha_reprojection * o.weight / r.abs().max(RESIDUAL_FLOOR);
        let p = prior_term(h, &o.prior, config.prior_mode, o.ratio);
        let wp = config.alpha_prior * o.weight;
        // prior gradient and Gauss-Newton curvature with respect to ln h
        let g = wp * p.grad * h;
        let c = wp * p.curvature * h * h;
        eq.kk[i] = a * j * j + c;
        eq.ke[i] = c;
        eq.ee += c;
        eq.b_k[i] = -(a * r * j + g);
        eq.b_e -= g;
    }
    Ok(eq)
}

/// Damped step `(d_eta, d_kappa)`. `eta` stays fixed when the prior carries
/// no scale information.
fn damped_step(eq: &NormalEquations, lambda: f64) -> (f64, Vec<f64>) {
    let kk: Vec<f64> = eq.kk.iter().map(|d| d * (1.0 + lambda)).collect();
    let ee = eq.ee * (1.0 + lambda);
    let mut schur = ee;
    let mut rhs = eq.b_e;
    for ((&k, &ke), &bk) in kk.iter().zip(&eq.ke).zip(&eq.b_k) {
        if k > 0.0 {
            schur -= ke * ke / k;
            rhs -= ke * bk / k;
        }
    }
    let d_eta = if schur > f64::MIN_POSITIVE && ee > 0.0 {
        rhs / schur
    } else {
        0.0
    };
    let d_kappa = (0..kk.len())
        .map(|i| {
            if kk[i] > 0.0 {
                (eq.b_k[i] - eq.ke[i] * d_eta) / kk[i]
            } else {
                0.0
            }
        })
        .collect();
    (d_eta, d_kappa)
}

fn apply(problem: &SceneProblem, state: &SolverState, d_eta: f64, d_kappa: &[f64]) -> SolverState {
    let config = &problem.config;
    let cam = config.clamp_cam_height(state.cam_height_m * d_eta.exp());
    let heights_m = state
        .heights_m
        .iter()
        .zip(d_kappa)
        .map(|(&h, &dk)| {
            let ratio = h / state.cam_height_m * dk.exp();
            config.clamp_object_height(cam * ratio)
        })
        .collect();
    SolverState {
        cam_height_m: cam,
        heights_m,
    }
}

/// One refinement layer. Backtracks by raising the damping tenfold until the
/// total loss does not increase; if no such step is found within the
/// configured number of attempts the state is returned unchanged.
pub fn refine_layer(problem: &SceneProblem, state: &SolverState) -> Result<RefineOutcome, SolveError> {
    let config = &problem.config;
    let current = problem.total_loss(state)?;
    let eq = normal_equations(problem, state)?;
    let mut lambda = config.damping;
    for _ in 0..=config.max_backtracks {
        let (d_eta, d_kappa) = damped_step(&eq, lambda);
        lambda *= 10.0;
        if !d_eta.is_finite() || d_kappa.iter().any(|d| !d.is_finite()) {
            continue;
        }
        let candidate = apply(problem, state, d_eta, &d_kappa);
        let Ok(loss) = problem.total_loss(&candidate) else {
            continue;
        };
        if loss < current {
            return Ok(RefineOutcome {
                state: candidate,
                accepted: true,
                converged: current - loss < config.tolerance,
            });
        }
    }
    Ok(RefineOutcome {
        state: state.clone(),
        accepted: false,
        converged: true,
    })
}
