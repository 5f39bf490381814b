//! Case configuration, read from TOML.
//!
//! Unset case parameters fall back to per-case presets; [`CaseConfig::resolved`]
//! returns the fully populated configuration that a run actually used.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dissipation::C_RHO;
use crate::error::{Error, Result};
use crate::rhs::{Scheme, SchemeOptions, ThetaMode};
use crate::thermo::{Gas, ViscosityLaw};
use crate::time::StepControl;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseId {
    ViscousShock,
    IsentropicVortex,
    Freestream,
    Tgv,
    #[serde(rename = "riemann_1d")]
    Riemann1d,
    ShockDiffractionCoarse,
}

impl CaseId {
    pub fn name(self) -> &'static str {
        match self {
            CaseId::ViscousShock => "viscous_shock",
            CaseId::IsentropicVortex => "isentropic_vortex",
            CaseId::Freestream => "freestream",
            CaseId::Tgv => "tgv",
            CaseId::Riemann1d => "riemann_1d",
            CaseId::ShockDiffractionCoarse => "shock_diffraction_coarse",
        }
    }
}

/// Where element limiter values come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaChoice {
    Limiter,
    /// Uniform random per element, redrawn every stage.
    RandomStage,
    /// Uniform random per element, drawn once.
    RandomElement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct GasConfig {
    pub gamma: Option<f64>,
    /// Reference Mach number; sets `R = 1 / (gamma Ma^2)` unless `r` is given.
    pub ma: Option<f64>,
    pub r: Option<f64>,
    /// Reynolds number; absent means inviscid.
    pub re: Option<f64>,
    pub pr: Option<f64>,
    /// Sutherland `[T_ref, S / T_ref]`; absent means constant viscosity.
    pub sutherland: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub inviscid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AvConfig {
    pub c_rho: f64,
    pub c_av: f64,
    pub delta: f64,
    /// Replace the artificial viscosity by random values in `[0, random]`.
    pub random: Option<f64>,
}

impl Default for AvConfig {
    fn default() -> Self {
        AvConfig { c_rho: C_RHO, c_av: 0.5, delta: 0.0, random: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiemannVariant {
    Sod,
    Blast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct CaseParams {
    /// Viscous shock: 1 for a shock along x, 3 for a shock along `[1, 1, 1]`.
    pub dims: Option<usize>,
    /// Riemann problem variant.
    pub variant: Option<RiemannVariant>,
    /// Riemann problem `[rho, u, p]` left and right states; override the variant.
    pub left: Option<[f64; 3]>,
    pub right: Option<[f64; 3]>,
    /// Vortex strength `beta` (peak swirl about `beta / (2 pi)`).
    pub strength: Option<f64>,
    /// Domain half width (vortex, viscous shock).
    pub half_width: Option<f64>,
    /// Shock Mach number for the diffraction case.
    pub shock_mach: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub k_list: Vec<usize>,
    pub schemes: Vec<Scheme>,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        ConvergenceConfig { k_list: vec![6, 12, 24, 48], schemes: vec![Scheme::Essc, Scheme::Ppesad] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaseConfig {
    pub case: CaseId,
    pub scheme: Option<Scheme>,
    pub p: Option<usize>,
    /// Elements per direction.
    pub k: Option<usize>,
    pub perturbation: Option<f64>,
    pub warp: Option<f64>,
    pub seed: u64,
    pub t_final: Option<f64>,
    pub max_steps: Option<usize>,
    /// History cadence in steps.
    pub output_every: usize,
    pub vtk: bool,
    pub theta: Option<ThetaChoice>,
    pub ec_mode: Option<bool>,
    pub gas: GasConfig,
    pub av: AvConfig,
    pub step: StepControl,
    pub params: CaseParams,
    pub convergence: ConvergenceConfig,
}

impl Default for CaseConfig {
    fn default() -> Self {
        CaseConfig {
            case: CaseId::ViscousShock,
            scheme: None,
            p: None,
            k: None,
            perturbation: None,
            warp: None,
            seed: 0,
            t_final: None,
            max_steps: None,
            output_every: 1,
            vtk: true,
            theta: None,
            ec_mode: None,
            gas: GasConfig::default(),
            av: AvConfig::default(),
            step: StepControl::default(),
            params: CaseParams::default(),
            convergence: ConvergenceConfig::default(),
        }
    }
}

fn fill<T: Copy>(slot: &mut Option<T>, v: T) {
    if slot.is_none() {
        *slot = Some(v);
    }
}

impl CaseConfig {
    pub fn preset(case: CaseId) -> CaseConfig {
        CaseConfig { case, ..Default::default() }.resolved()
    }

    pub fn from_toml_str(text: &str) -> Result<CaseConfig> {
        let cfg: CaseConfig = toml::from_str(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<CaseConfig> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Fill unset parameters from the case preset.
    pub fn resolved(&self) -> CaseConfig {
        let mut c = self.clone();
        let g = &mut c.gas;
        let q = &mut c.params;
        match c.case {
            CaseId::ViscousShock => {
                fill(&mut c.scheme, Scheme::Ppesad);
                fill(&mut c.p, 4);
                fill(&mut c.k, 12);
                fill(&mut c.t_final, 0.1);
                fill(&mut q.dims, 1);
                fill(&mut q.half_width, 0.5);
                fill(&mut g.ma, 2.5);
                fill(&mut g.pr, 0.75);
                if !g.inviscid {
                    fill(&mut g.re, 50.0);
                }
            }
            CaseId::IsentropicVortex => {
                fill(&mut c.scheme, Scheme::Ppes);
                fill(&mut c.p, 4);
                fill(&mut c.k, 8);
                fill(&mut c.perturbation, 0.15);
                fill(&mut c.t_final, 1.0);
                fill(&mut c.theta, ThetaChoice::RandomElement);
                fill(&mut c.ec_mode, true);
                fill(&mut q.strength, 5.0);
                fill(&mut q.half_width, 5.0);
                fill(&mut g.ma, 0.3);
                g.inviscid = true;
            }
            CaseId::Freestream => {
                fill(&mut c.scheme, Scheme::Ppesad);
                fill(&mut c.p, 4);
                fill(&mut c.k, 4);
                fill(&mut c.perturbation, 0.2);
                fill(&mut c.warp, 0.05);
                fill(&mut c.t_final, 1.0);
                fill(&mut c.theta, ThetaChoice::RandomStage);
                fill(&mut c.av.random, 0.01);
                fill(&mut g.ma, 3.5);
                fill(&mut g.pr, 0.7);
                if !g.inviscid {
                    fill(&mut g.re, 500.0);
                }
            }
            CaseId::Tgv => {
                fill(&mut c.scheme, Scheme::Ppesad);
                fill(&mut c.p, 3);
                fill(&mut c.k, 4);
                fill(&mut c.t_final, 1.0);
                fill(&mut g.ma, 0.1);
                fill(&mut g.pr, 0.7);
                if !g.inviscid {
                    fill(&mut g.re, 400.0);
                }
            }
            CaseId::Riemann1d => {
                fill(&mut c.scheme, Scheme::Ppesad);
                fill(&mut c.p, 4);
                fill(&mut c.k, 50);
                fill(&mut q.variant, RiemannVariant::Blast);
                let (l, r, t) = match q.variant.expect("filled") {
                    RiemannVariant::Sod => ([1.0, 0.0, 1.0], [0.125, 0.0, 0.1], 0.2),
                    RiemannVariant::Blast => ([1.0, 0.0, 1000.0], [1.0, 0.0, 0.01], 0.012),
                };
                fill(&mut q.left, l);
                fill(&mut q.right, r);
                fill(&mut c.t_final, t);
                fill(&mut g.r, 1.0);
                g.inviscid = true;
            }
            CaseId::ShockDiffractionCoarse => {
                fill(&mut c.scheme, Scheme::Ppesad);
                fill(&mut c.p, 3);
                fill(&mut c.k, 16);
                fill(&mut c.t_final, 0.04);
                fill(&mut q.shock_mach, 10.0);
                fill(&mut g.r, 1.0);
                g.inviscid = true;
            }
        }
        fill(&mut g.gamma, 1.4);
        fill(&mut g.pr, 0.72);
        fill(&mut c.perturbation, 0.0);
        fill(&mut c.warp, 0.0);
        fill(&mut c.theta, ThetaChoice::Limiter);
        fill(&mut c.ec_mode, false);
        if g.inviscid {
            g.re = None;
        }
        c
    }

    pub fn gas(&self) -> Result<Gas> {
        let c = self.resolved();
        let g = &c.gas;
        let gamma = g.gamma.expect("resolved");
        let r = match (g.r, g.ma) {
            (Some(r), _) => r,
            (None, Some(ma)) if ma > 0.0 => 1.0 / (gamma * ma * ma),
            _ => return Err(Error::Config("gas needs a positive Mach number or R".into())),
        };
        let law = match g.sutherland {
            Some([t_ref, s_const]) => ViscosityLaw::Sutherland { t_ref, s_const },
            None => ViscosityLaw::Constant,
        };
        Gas::new(gamma, r, g.pr.expect("resolved"), g.re, law)
    }

    /// Scheme options for the solver; `ne` is the element count (used to
    /// draw per-element limiter values).
    pub fn scheme_options(&self, ne: usize) -> Result<SchemeOptions> {
        use rand::{Rng, SeedableRng};
        let c = self.resolved();
        if !(c.av.c_rho > 0.0 && c.av.c_av >= 0.0 && (0.0..1.0).contains(&c.av.delta)) {
            return Err(Error::Config("artificial-viscosity constants out of range".into()));
        }
        let theta_mode = match c.theta.expect("resolved") {
            ThetaChoice::Limiter => ThetaMode::Limiter,
            ThetaChoice::RandomStage => ThetaMode::RandomPerStage,
            ThetaChoice::RandomElement => {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(c.seed ^ 0x5eed);
                ThetaMode::Fixed((0..ne).map(|_| rng.gen_range(0.0..=1.0)).collect())
            }
        };
        Ok(SchemeOptions {
            scheme: c.scheme.expect("resolved"),
            ec_mode: c.ec_mode.expect("resolved"),
            c_rho: c.av.c_rho,
            c_av: c.av.c_av,
            delta: c.av.delta,
            theta_mode,
            random_ad: c.av.random,
            seed: c.seed,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.resolved();
        let p = c.p.expect("resolved");
        if !(1..=crate::sbp::MAX_ORDER).contains(&p) {
            return Err(Error::Config(format!("p = {p} outside 1..={}", crate::sbp::MAX_ORDER)));
        }
        if c.k.expect("resolved") == 0 {
            return Err(Error::Config("k must be positive".into()));
        }
        let tf = c.t_final.expect("resolved");
        if !(tf >= 0.0 && tf.is_finite()) {
            return Err(Error::Config(format!("t_final = {tf} must be finite and non-negative")));
        }
        if c.output_every == 0 {
            return Err(Error::Config("output_every must be at least 1".into()));
        }
        if !(c.step.cfl > 0.0) || !(c.step.retry_factor > 0.0 && c.step.retry_factor < 1.0) {
            return Err(Error::Config("step control needs cfl > 0 and retry_factor in (0, 1)".into()));
        }
        if c.case == CaseId::ViscousShock && !matches!(c.params.dims, Some(1 | 3)) {
            return Err(Error::Config("viscous shock dims must be 1 or 3".into()));
        }
        if c.case == CaseId::ViscousShock && c.gas.re.is_some() && (c.gas.pr.expect("resolved") - 0.75).abs() > 1e-12 {
            return Err(Error::Config("the viscous shock solution needs Pr = 3/4".into()));
        }
        self.gas()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip_through_toml() {
        for case in [
            CaseId::ViscousShock,
            CaseId::IsentropicVortex,
            CaseId::Freestream,
            CaseId::Tgv,
            CaseId::Riemann1d,
            CaseId::ShockDiffractionCoarse,
        ] {
            let c = CaseConfig::preset(case);
            c.validate().unwrap();
            let back = CaseConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
            assert_eq!(back, c);
        }
    }

    #[test]
    fn minimal_file_uses_defaults() {
        let c = CaseConfig::from_toml_str("case = \"tgv\"\nk = 2\n").unwrap().resolved();
        assert_eq!(c.k, Some(2));
        assert_eq!(c.p, Some(3));
        assert_eq!(c.av.c_rho, 0.9);
        let gas = c.gas().unwrap();
        assert!((gas.r - 1.0 / (1.4 * 0.01)).abs() < 1e-12);
        assert_eq!(gas.re, Some(400.0));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(CaseConfig::from_toml_str("case = \"tgv\"\nkk = 2\n").is_err());
        assert!(CaseConfig::from_toml_str("case = \"nope\"\n").is_err());
    }
}
