//! The three-stage update and its ablation variants.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dual::{rectify, RectificationResult, SolverSettings};
use crate::error::{Error, Result};
use crate::grad::{GradVec, GradientSet};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameGradConfig {
    /// Trust-region radius relative to `|mu|`, in `[0, 1)`.
    pub rho: f64,
    /// Magnitude gain, `>= 1`.
    pub kappa: f64,
    /// Fusion coefficient in `[0, 1]`; weight of the gained joint gradient.
    pub nu: f64,
    /// Guard in the magnitude rescale denominator.
    pub epsilon: f64,
    /// Standard deviation of the isotropic noise used by the SGLD variant.
    pub sgld_sigma: f64,
    pub solver: SolverSettings,
}

impl Default for CameGradConfig {
    fn default() -> Self {
        Self {
            rho: 0.5,
            kappa: 1.5,
            nu: 0.2,
            epsilon: 1e-8,
            sgld_sigma: 0.01,
            solver: SolverSettings::default(),
        }
    }
}

impl CameGradConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(0.0..1.0).contains(&self.rho) {
            return bad(format!("rho must lie in [0, 1), got {}", self.rho));
        }
        if !(self.kappa.is_finite() && self.kappa >= 1.0) {
            return bad(format!("kappa must be >= 1, got {}", self.kappa));
        }
        if !(0.0..=1.0).contains(&self.nu) {
            return bad(format!("nu must lie in [0, 1], got {}", self.nu));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad(format!("epsilon must be > 0, got {}", self.epsilon));
        }
        if !(self.sgld_sigma.is_finite() && self.sgld_sigma >= 0.0) {
            return bad(format!("sgld_sigma must be >= 0, got {}", self.sgld_sigma));
        }
        self.solver.validate()
    }
}

/// Which stages of the update are active.
///
/// * S1: conflict-averse rectification
/// * S2: magnitude restoration to `kappa |g_joint|`
/// * S3: fusion with `kappa g_joint`
///
/// `NoS2` and `S1S3` compute the same update (S3 fuses `u_rect` directly);
/// they keep separate tags so ablation output names the column it stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Linear,
    S1Only,
    S1S3,
    S1SgldS3,
    NoS1,
    NoS2,
    NoS3,
    Full,
}

impl Strategy {
    pub const ALL: [Strategy; 8] = [
        Strategy::Linear,
        Strategy::S1Only,
        Strategy::S1S3,
        Strategy::S1SgldS3,
        Strategy::NoS1,
        Strategy::NoS2,
        Strategy::NoS3,
        Strategy::Full,
    ];

    /// Baseline plus the three leave-one-stage-out variants and the full update.
    pub const ABLATION_GRID: [Strategy; 5] = [
        Strategy::Linear,
        Strategy::NoS1,
        Strategy::NoS2,
        Strategy::NoS3,
        Strategy::Full,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Linear => "linear",
            Strategy::S1Only => "s1_only",
            Strategy::S1S3 => "s1_s3",
            Strategy::S1SgldS3 => "s1_sgld_s3",
            Strategy::NoS1 => "no_s1",
            Strategy::NoS2 => "no_s2",
            Strategy::NoS3 => "no_s3",
            Strategy::Full => "full",
        }
    }

    pub fn uses_rectification(self) -> bool {
        !matches!(self, Strategy::Linear | Strategy::NoS1)
    }

    pub fn needs_noise(self) -> bool {
        self == Strategy::S1SgldS3
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown strategy `{s}`")))
    }
}

/// Every intermediate of one update.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepResult {
    pub strategy: Strategy,
    pub g_joint: GradVec,
    pub mu: GradVec,
    pub rectification: Option<RectificationResult>,
    /// `kappa |g_joint|`.
    pub tau_mag: f64,
    pub u_en: Option<GradVec>,
    pub g_final: GradVec,
    /// Rectification was degenerate and `g_final` fell back to `g_joint`.
    pub degenerate_fallback: bool,
}

/// Rescales `u_rect` to magnitude `kappa |g_joint|` (up to the `epsilon`
/// guard in the denominator).
pub fn energy_inject(
    u_rect: &GradVec,
    g_joint: &GradVec,
    kappa: f64,
    epsilon: f64,
) -> Result<GradVec> {
    if u_rect.dim() != g_joint.dim() {
        return Err(Error::DimensionMismatch {
            expected: u_rect.dim(),
            actual: g_joint.dim(),
        });
    }
    if !(kappa.is_finite() && kappa >= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "kappa must be >= 1, got {kappa}"
        )));
    }
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "epsilon must be > 0, got {epsilon}"
        )));
    }
    let tau = kappa * g_joint.norm();
    u_rect.scale(tau / (u_rect.norm() + epsilon)).check_finite()
}

/// `(1 - nu) u_en + nu kappa g_joint`.
pub fn fuse(u_en: &GradVec, g_joint: &GradVec, kappa: f64, nu: f64) -> Result<GradVec> {
    u_en.lin_comb(1.0 - nu, g_joint, nu * kappa)
}

/// `theta - eta g_final`.
pub fn sgd_update(theta: &[f64], g_final: &GradVec, eta: f64) -> Result<Vec<f64>> {
    if theta.len() != g_final.dim() {
        return Err(Error::DimensionMismatch {
            expected: theta.len(),
            actual: g_final.dim(),
        });
    }
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::InvalidConfig(format!("eta must be > 0, got {eta}")));
    }
    Ok(theta
        .iter()
        .zip(g_final.as_slice())
        .map(|(t, g)| t - eta * g)
        .collect())
}

/// One update for strategies that need no randomness.
pub fn came_grad_step(
    gs: &GradientSet,
    cfg: &CameGradConfig,
    strategy: Strategy,
) -> Result<StepResult> {
    step_inner(gs, cfg, strategy, None)
}

/// One update; `noise` feeds the SGLD variant and is ignored otherwise.
pub fn came_grad_step_with_noise(
    gs: &GradientSet,
    cfg: &CameGradConfig,
    strategy: Strategy,
    noise: &mut SeededRng,
) -> Result<StepResult> {
    step_inner(gs, cfg, strategy, Some(noise))
}

fn step_inner(
    gs: &GradientSet,
    cfg: &CameGradConfig,
    strategy: Strategy,
    noise: Option<&mut SeededRng>,
) -> Result<StepResult> {
    cfg.validate()?;
    let g_joint = gs.joint_gradient().check_finite()?;
    let mu = gs.mean_gradient();
    let tau_mag = cfg.kappa * g_joint.norm();

    let mut result = StepResult {
        strategy,
        g_joint: g_joint.clone(),
        mu,
        rectification: None,
        tau_mag,
        u_en: None,
        g_final: g_joint.clone(),
        degenerate_fallback: false,
    };

    match strategy {
        Strategy::Linear => return Ok(result),
        Strategy::NoS1 => {
            let u_en = energy_inject(&g_joint, &g_joint, cfg.kappa, cfg.epsilon)?;
            result.g_final = fuse(&u_en, &g_joint, cfg.kappa, cfg.nu)?.check_finite()?;
            result.u_en = Some(u_en);
            return Ok(result);
        }
        _ => {}
    }

    let sgld_noise = if strategy.needs_noise() {
        let rng = noise.ok_or(Error::MissingNoise(strategy.name()))?;
        Some(rng.gaussian_vec(gs.dim()))
    } else {
        None
    };

    let rect = rectify(gs, cfg.rho, &cfg.solver)?;
    if rect.degenerate {
        result.rectification = Some(rect);
        result.degenerate_fallback = true;
        return Ok(result);
    }
    let u_rect = &rect.u_rect;

    let g_final = match strategy {
        Strategy::S1Only => u_rect.clone(),
        Strategy::S1S3 | Strategy::NoS2 => fuse(u_rect, &g_joint, cfg.kappa, cfg.nu)?,
        Strategy::S1SgldS3 => {
            let z = GradVec::new(sgld_noise.expect("drawn above"))?;
            let noisy = u_rect.lin_comb(1.0, &z, cfg.sgld_sigma)?;
            fuse(&noisy, &g_joint, cfg.kappa, cfg.nu)?
        }
        Strategy::NoS3 | Strategy::Full => {
            let u_en = energy_inject(u_rect, &g_joint, cfg.kappa, cfg.epsilon)?;
            let g_final = if strategy == Strategy::Full {
                fuse(&u_en, &g_joint, cfg.kappa, cfg.nu)?
            } else {
                u_en.clone()
            };
            result.u_en = Some(u_en);
            g_final
        }
        Strategy::Linear | Strategy::NoS1 => unreachable!("handled above"),
    };
    result.g_final = g_final.check_finite()?;
    result.rectification = Some(rect);
    Ok(result)
}
