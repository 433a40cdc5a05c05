use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::nn::{network_from_container, network_to_container, ModelContainer};

use super::policy_net::{apply_policy_network, PolicyNetwork};
use super::ridge::{apply_ridge, RidgeModel};
use super::static_policy::{fuse_max, fuse_mean};
use super::PredictionMatrix;

/// Fusion policy names as used on the command line and in matrix headers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    Max,
    Mean,
    Ridge,
    Mlp,
}

impl Policy {
    pub fn name(self) -> &'static str {
        match self {
            Policy::Max => "max",
            Policy::Mean => "mean",
            Policy::Ridge => "ridge",
            Policy::Mlp => "mlp",
        }
    }

    pub fn trainable(self) -> bool {
        matches!(self, Policy::Ridge | Policy::Mlp)
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(Policy::Max),
            "mean" => Ok(Policy::Mean),
            "ridge" => Ok(Policy::Ridge),
            "mlp" => Ok(Policy::Mlp),
            _ => Err(Error::Invalid(format!("unknown fusion policy `{s}` (max, mean, ridge, mlp)"))),
        }
    }
}

/// Anything that turns aligned per-modality matrices into one fused matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum FusionModel {
    Max,
    Mean,
    Ridge(RidgeModel),
    Policy(PolicyNetwork),
}

impl FusionModel {
    pub fn policy(&self) -> Policy {
        match self {
            FusionModel::Max => Policy::Max,
            FusionModel::Mean => Policy::Mean,
            FusionModel::Ridge(_) => Policy::Ridge,
            FusionModel::Policy(_) => Policy::Mlp,
        }
    }

    pub fn apply(&self, matrices: &[PredictionMatrix]) -> Result<PredictionMatrix> {
        match self {
            FusionModel::Max => fuse_max(matrices),
            FusionModel::Mean => fuse_mean(matrices),
            FusionModel::Ridge(m) => apply_ridge(m, matrices),
            FusionModel::Policy(m) => apply_policy_network(m, matrices),
        }
    }

    pub fn to_container(&self) -> ModelContainer {
        match self {
            FusionModel::Max | FusionModel::Mean => {
                let mut c = ModelContainer::new("static_policy");
                c.set("policy", self.policy());
                c
            }
            FusionModel::Ridge(m) => {
                let mut c = ModelContainer::new("ridge");
                c.set("alpha", m.alpha)
                    .set("arity", m.arity)
                    .set("labels", m.num_labels)
                    .set("intercept", m.fit_intercept);
                c.push_array("weights", vec![m.num_features(), m.num_labels], m.weights.clone());
                c
            }
            FusionModel::Policy(m) => {
                let mut c = network_to_container(&m.network, "policy_network");
                c.set("arity", m.spec.arity);
                c
            }
        }
    }

    pub fn from_container(c: &ModelContainer) -> Result<Self> {
        match c.kind.as_str() {
            "static_policy" => match c.get_parsed::<Policy>("policy")? {
                Policy::Max => Ok(FusionModel::Max),
                Policy::Mean => Ok(FusionModel::Mean),
                p => Err(Error::Invalid(format!("`{p}` is not a static policy"))),
            },
            "ridge" => {
                let mut m = RidgeModel {
                    alpha: c.get_parsed("alpha")?,
                    arity: c.get_parsed("arity")?,
                    num_labels: c.get_parsed("labels")?,
                    fit_intercept: c.get_parsed("intercept")?,
                    weights: Vec::new(),
                };
                let w = c.array("weights")?;
                if w.shape != [m.num_features(), m.num_labels] {
                    return Err(Error::Shape(format!("ridge weights have shape {:?}", w.shape)));
                }
                if w.data.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Invalid("ridge weights are not finite".into()));
                }
                m.weights = w.data.clone();
                Ok(FusionModel::Ridge(m))
            }
            "policy_network" => {
                let net = network_from_container(c)?;
                Ok(FusionModel::Policy(PolicyNetwork::from_network(c.get_parsed("arity")?, net)?))
            }
            other => Err(Error::Invalid(format!("`{other}` is not a fusion model"))),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_container().write(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_container(&ModelContainer::read(path)?)
    }
}
