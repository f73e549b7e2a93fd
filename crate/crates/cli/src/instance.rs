//! Instance files: a [`InstanceSpec`] plus the weight parameters.
//!
//! ```json
//! {
//!   "form": {"q": 3, "dim": 4, "gram": [["1","0","0","0"], ...]},
//!   "f": "t^8+2*t^4+1", "g": "t", "lambda": ["1","0","0","0"],
//!   "cone": {"Anisotropic": {"slack": 2}},
//!   "alpha0": 4, "x0": ["t^4+1","0","0","0"], "Q": 3
//! }
//! ```

use fq_circle::circle::{make_weight_with, Weight};
use fq_circle::expsums::{Instance, InstanceSpec};
use fq_circle::quadform::{Cone, ConeShape, DEFAULT_SLACK};
use fq_circle::{Poly, TruncLaurent};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstanceFile {
    #[serde(flatten)]
    pub spec: InstanceSpec,
    #[serde(default)]
    pub cone: Option<ConeShape>,
    #[serde(default)]
    pub alpha0: Option<i64>,
    #[serde(default)]
    pub x0: Option<Vec<String>>,
    #[serde(default, rename = "Q")]
    pub big_q: Option<i64>,
}

pub const DEFAULT_ALPHA0: i64 = 4;

/// A parsed instance with its cone and weight.
pub struct Loaded {
    pub file: InstanceFile,
    pub inst: Instance,
    pub cone: Cone,
}

impl InstanceFile {
    /// Inline JSON if the argument starts with `{`, otherwise a path.
    pub fn read(arg: &str) -> Result<Self, CliError> {
        let text = if arg.trim_start().starts_with('{') { arg.to_string() } else { std::fs::read_to_string(arg)? };
        Ok(serde_json::from_str(&text)?)
    }

    pub fn load(self) -> Result<Loaded, CliError> {
        let inst = Instance::from_spec(&self.spec)?;
        let cone = match self.cone.clone().unwrap_or(ConeShape::Anisotropic { slack: DEFAULT_SLACK }) {
            ConeShape::Anisotropic { slack } => Cone::anisotropic(&inst.form, slack)?,
            ConeShape::DominantCoordinate { index } => {
                if index >= inst.dim() {
                    return Err(CliError::Usage(format!("cone index {index} out of range")));
                }
                Cone::dominant_coordinate(index)
            }
        };
        Ok(Loaded { file: self, inst, cone })
    }
}

impl Loaded {
    /// The weight, with `alpha0` and `Q` overridable from the command line.
    pub fn weight(&self, alpha0: Option<i64>, big_q: Option<i64>) -> Result<Weight, CliError> {
        let p = self.inst.p();
        let x0 = match &self.file.x0 {
            Some(v) => Some(v.iter().map(|s| Poly::parse(s, p).map(|x| TruncLaurent::from_poly(&x))).collect::<Result<Vec<_>, _>>()?),
            None => None,
        };
        let alpha0 = alpha0.or(self.file.alpha0).unwrap_or(DEFAULT_ALPHA0);
        let w = make_weight_with(&self.inst, &self.cone, alpha0, x0)?;
        Ok(match big_q.or(self.file.big_q) {
            Some(q) => w.with_q(q)?,
            None => w,
        })
    }
}
