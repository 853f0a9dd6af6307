use serde::{Deserialize, Serialize};

use crate::geometry::{Covector, GeometryError, Metric};

/// Time-independent level set `φ(x)`; the interface is `{φ = 0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LevelSet {
    /// `φ = n·x − offset`
    Plane { normal: Vec<f64>, offset: f64 },
    /// `φ = |x − c| − r`, negative inside.
    Sphere { center: Vec<f64>, radius: f64 },
}

impl LevelSet {
    pub fn dim(&self) -> usize {
        match self {
            LevelSet::Plane { normal, .. } => normal.len(),
            LevelSet::Sphere { center, .. } => center.len(),
        }
    }

    pub fn phi(&self, x: &[f64]) -> f64 {
        match self {
            LevelSet::Plane { normal, offset } => normal.iter().zip(x).map(|(n, v)| n * v).sum::<f64>() - offset,
            LevelSet::Sphere { center, radius } => {
                center.iter().zip(x).map(|(c, v)| (v - c) * (v - c)).sum::<f64>().sqrt() - radius
            }
        }
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        match self {
            LevelSet::Plane { normal, .. } => normal.clone(),
            LevelSet::Sphere { center, .. } => {
                let r = center.iter().zip(x).map(|(c, v)| (v - c) * (v - c)).sum::<f64>().sqrt();
                if r == 0.0 {
                    let mut e = vec![0.0; center.len()];
                    e[0] = 1.0;
                    e
                } else {
                    center.iter().zip(x).map(|(c, v)| (v - c) / r).collect()
                }
            }
        }
    }

    /// Same surface moved by `shift` along the unit normal of a plane, or
    /// by growing the radius of a sphere.
    pub fn translated(&self, shift: f64) -> LevelSet {
        match self {
            LevelSet::Plane { normal, offset } => {
                let n = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
                LevelSet::Plane { normal: normal.clone(), offset: offset + shift * n }
            }
            LevelSet::Sphere { center, radius } => LevelSet::Sphere { center: center.clone(), radius: radius + shift },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterfaceSpec {
    pub levelset: LevelSet,
    /// Largest `|φ|` accepted for a point "on" the interface.
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_tol() -> f64 {
    1e-6
}

impl InterfaceSpec {
    pub fn new(levelset: LevelSet) -> Self {
        Self { levelset, tol: default_tol() }
    }

    pub fn phi(&self, x: &[f64]) -> f64 {
        self.levelset.phi(x)
    }

    /// `(s, β) = dφ`; `s = 0` for a static interface.
    pub fn conormal(&self, x: &[f64]) -> Covector {
        Covector::new(0.0, self.levelset.grad(x))
    }

    /// `‖dφ‖` measured with `g*`.
    pub fn conormal_norm(&self, m: &Metric, x: &[f64]) -> Result<f64, GeometryError> {
        let c = self.conormal(x);
        Ok((c.tau * c.tau + m.dual_norm_sq(x, &c.xi)?).sqrt())
    }

    /// Relative margin `|s² − βᵀg*β| / (s² + βᵀg*β)`; the interface is
    /// non-characteristic when this stays away from zero.
    pub fn characteristic_margin(&self, m: &Metric, x: &[f64]) -> Result<f64, GeometryError> {
        let c = self.conormal(x);
        let s2 = c.tau * c.tau;
        let b2 = m.dual_norm_sq(x, &c.xi)?;
        let tot = s2 + b2;
        Ok(if tot == 0.0 { 0.0 } else { (b2 - s2).abs() / tot })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plane_and_sphere() {
        let p = LevelSet::Plane { normal: vec![1.0, 0.0], offset: 0.5 };
        assert_eq!(p.phi(&[1.0, 3.0]), 0.5);
        assert_eq!(p.translated(0.3).phi(&[0.8, 0.0]), 0.0);
        let s = LevelSet::Sphere { center: vec![0.0, 0.0], radius: 1.0 };
        assert!((s.phi(&[0.0, 2.0]) - 1.0).abs() < 1e-15);
        assert_eq!(s.grad(&[0.0, 2.0]), vec![0.0, 1.0]);
    }

    #[test]
    fn static_interfaces_are_non_characteristic() {
        let i = InterfaceSpec::new(LevelSet::Plane { normal: vec![1.0, 0.0], offset: 0.0 });
        assert_eq!(i.characteristic_margin(&Metric::flat(2), &[0.0, 0.0]).unwrap(), 1.0);
    }
}
