use serde::{Deserialize, Serialize};

use crate::raytrace::{InterfaceSpec, LevelSet};

use super::{FieldError, GridSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    Jump,
    /// Quintic smoothstep across a collar of total width `width`.
    MollifiedJump { width: f64 },
    /// `(min(|φ|, length)/length)^kappa` inside the region: continuous at
    /// the interface with a kink of order `kappa`.
    Power { kappa: f64, length: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// `{φ < 0}` for a planar interface.
    #[default]
    HalfSpace,
    /// `{φ < 0}` for a closed interface (the inside of a sphere).
    Bounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub delta: f64,
    #[serde(default = "jump")]
    pub profile: Profile,
}

fn jump() -> Profile {
    Profile::Jump
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSpec {
    pub interface: InterfaceSpec,
    pub alpha: f64,
    #[serde(default = "jump")]
    pub profile: Profile,
    #[serde(default)]
    pub region: Region,
    #[serde(default)]
    pub potential: Option<PotentialSpec>,
}

impl CoefficientSpec {
    pub fn jump(interface: InterfaceSpec, alpha: f64) -> Self {
        Self { interface, alpha, profile: Profile::Jump, region: Region::HalfSpace, potential: None }
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        Self { alpha, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        match (&self.region, &self.interface.levelset) {
            (Region::HalfSpace, LevelSet::Plane { .. }) | (Region::Bounded, LevelSet::Sphere { .. }) => {}
            _ => return Err(FieldError::invalid("coefficient.region", "region kind does not match the level set")),
        }
        for p in std::iter::once(&self.profile).chain(self.potential.as_ref().map(|q| &q.profile)) {
            match p {
                Profile::Jump => {}
                Profile::MollifiedJump { width } if *width > 0.0 => {}
                Profile::Power { kappa, length } if *kappa > 0.0 && *length > 0.0 => {}
                _ => return Err(FieldError::invalid("coefficient.profile", "profile parameters must be positive")),
            }
        }
        if !self.alpha.is_finite() {
            return Err(FieldError::invalid("coefficient.alpha", "must be finite"));
        }
        Ok(())
    }
}

fn smoothstep5(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * x * (10.0 + x * (-15.0 + 6.0 * x))
}

/// Unit-height profile value as a function of `φ`.
fn shape(profile: &Profile, phi: f64) -> f64 {
    match profile {
        Profile::Jump => {
            if phi < 0.0 {
                1.0
            } else {
                0.0
            }
        }
        Profile::MollifiedJump { width } => {
            let half = 0.5 * width;
            if phi <= -half {
                1.0
            } else if phi >= half {
                0.0
            } else {
                1.0 - smoothstep5((phi + half) / width)
            }
        }
        Profile::Power { kappa, length } => {
            if phi < 0.0 {
                ((-phi).min(*length) / length).powf(*kappa)
            } else {
                0.0
            }
        }
    }
}

fn sample(grid: &GridSpec, iface: &InterfaceSpec, profile: &Profile, scale: f64) -> Vec<f64> {
    (0..grid.len()).map(|k| scale * shape(profile, iface.phi(&grid.center(k)))).collect()
}

/// Nonlinear coefficient `a` at cell centres.
pub fn build_coefficient(grid: &GridSpec, spec: &CoefficientSpec) -> Vec<f64> {
    if spec.alpha == 0.0 {
        return vec![0.0; grid.len()];
    }
    sample(grid, &spec.interface, &spec.profile, spec.alpha)
}

/// Potential `δq` at cell centres, if configured.
pub fn build_potential(grid: &GridSpec, spec: &CoefficientSpec) -> Option<Vec<f64>> {
    spec.potential.as_ref().map(|q| sample(grid, &spec.interface, &q.profile, q.delta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Boundary;
    use crate::geometry::Metric;

    fn grid() -> GridSpec {
        GridSpec::new(vec![-1.0, -1.0], 0.05, vec![40, 40], 1.0, 0.5, &Metric::flat(2), Boundary::Dirichlet).unwrap()
    }

    fn plane() -> InterfaceSpec {
        InterfaceSpec::new(LevelSet::Plane { normal: vec![1.0, 0.0], offset: 0.0 })
    }

    #[test]
    fn jump_takes_two_values() {
        let g = grid();
        let a = build_coefficient(&g, &CoefficientSpec::jump(plane(), 2.0));
        for (k, v) in a.iter().enumerate() {
            let x = g.center(k);
            assert_eq!(*v, if x[0] < 0.0 { 2.0 } else { 0.0 });
        }
        assert!(build_coefficient(&g, &CoefficientSpec::jump(plane(), 0.0)).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn mollified_matches_jump_outside_collar() {
        let g = grid();
        let w = 4.0 * g.h;
        let j = build_coefficient(&g, &CoefficientSpec::jump(plane(), 1.5));
        let spec = CoefficientSpec { profile: Profile::MollifiedJump { width: w }, ..CoefficientSpec::jump(plane(), 1.5) };
        let m = build_coefficient(&g, &spec);
        for k in 0..g.len() {
            let x = g.center(k);
            if x[0].abs() >= 0.5 * w {
                assert_eq!(m[k], j[k]);
            }
        }
        // Monotone non-increasing in x¹ along a row.
        let row: Vec<f64> = (0..40).map(|i| m[i * 40 + 7]).collect();
        assert!(row.windows(2).all(|p| p[1] <= p[0]));
    }

    #[test]
    fn power_profile_is_continuous_at_the_interface() {
        let g = grid();
        let spec = CoefficientSpec { profile: Profile::Power { kappa: 1.0, length: 0.5 }, ..CoefficientSpec::jump(plane(), 1.0) };
        let a = build_coefficient(&g, &spec);
        let near = a.iter().enumerate().filter(|(k, _)| g.center(*k)[0].abs() < 0.03).map(|(_, v)| *v).fold(0.0, f64::max);
        assert!(near <= 0.025 / 0.5 + 1e-12);
        assert!(spec.validate().is_ok());
        let bad = CoefficientSpec { region: Region::Bounded, ..spec };
        assert!(bad.validate().is_err());
    }
}
