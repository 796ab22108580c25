use std::path::Path;

use nalgebra::DVector;
use polygrpd::field::{Chart, PolyFormField};
use polygrpd::lie::LieAlgebraData;
use polygrpd::structures::{self as st, FoliationVariant, PolyPoissonStructure, TrivialVariant};
use serde::Deserialize;

use crate::CliError;

/// A scenario file. Every subcommand reads the same grammar and ignores
/// the keys it does not need.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub scenario: Option<String>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub grid: Option<usize>,
    pub tolerance_scale: Option<f64>,
    pub order: Option<usize>,
    pub q: Option<usize>,
    pub algebra: Option<String>,
    pub out: Option<String>,
    pub structure: Option<StructureDef>,
    pub classify: Option<ClassifyDef>,
    pub gauge: Option<GaugeDef>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureDef {
    pub constructor: String,
    pub q: Option<usize>,
    pub order: Option<usize>,
    pub dim: Option<usize>,
    pub extra: Option<usize>,
    pub variant: Option<String>,
    pub algebra: Option<String>,
    #[serde(rename = "box")]
    pub sample_box: Option<[f64; 2]>,
    pub fd_step: Option<f64>,
    #[serde(default)]
    pub factors: Vec<StructureDef>,
    pub corrupt_anchor: Option<Corruption>,
    pub drop_frame_element: Option<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Corruption {
    pub element: usize,
    pub shift: Vec<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyDef {
    /// One skew matrix per component, as rows.
    pub form: Vec<Vec<Vec<f64>>>,
    /// Spanning vectors of `L`.
    #[serde(default)]
    pub subspace: Vec<Vec<f64>>,
    pub expect: Option<Expectation>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    pub isotropic: Option<bool>,
    pub coisotropic: Option<bool>,
    pub lagrangian: Option<bool>,
    pub poly_lagrangian: Option<bool>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaugeDef {
    pub flow_time: Option<f64>,
    pub steps: Option<usize>,
    pub amplitude: Option<f64>,
    pub probes: Option<usize>,
}

pub fn load(path: &Path) -> Result<Config, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<Config, CliError> {
    toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
}

fn need<T: Copy>(v: Option<T>, what: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Config(format!("missing `{what}`")))
}

fn lib(e: polygrpd::Error) -> CliError {
    CliError::Config(e.to_string())
}

pub fn algebra(name: &str) -> Result<LieAlgebraData, CliError> {
    match name {
        "so3" => Ok(LieAlgebraData::so3()),
        "aff1" => Ok(LieAlgebraData::aff1()),
        other => match other.strip_prefix("abelian-").map(str::parse::<usize>) {
            Some(Ok(d)) if d > 0 => Ok(LieAlgebraData::abelian(d)),
            _ => Err(CliError::Config(format!("unknown algebra `{other}`"))),
        },
    }
}

pub fn build_structure(def: &StructureDef) -> Result<PolyPoissonStructure, CliError> {
    let [lo, hi] = def.sample_box.unwrap_or([-1.0, 1.0]);
    let chart = |n: usize| -> Result<Chart, CliError> {
        let c = Chart::cube(n, lo, hi).map_err(lib)?;
        Ok(match def.fd_step {
            Some(h) => c.with_fd_step(h),
            None => c,
        })
    };
    let r = def.order.unwrap_or(1);
    let s = match def.constructor.as_str() {
        "covelocity" => {
            let q = need(def.q, "structure.q")?;
            st::covelocity(q, r, chart(q * (1 + r))?).map_err(lib)?
        }
        "trivial" => {
            let variant = match def.variant.as_deref().unwrap_or("S1") {
                "S1" => TrivialVariant::S1,
                "S2" => TrivialVariant::S2,
                "S3" => TrivialVariant::S3,
                "S4" => TrivialVariant::S4,
                v => return Err(CliError::Config(format!("unknown trivial variant `{v}`"))),
            };
            st::trivial(variant, chart(need(def.dim, "structure.dim")?)?, r).map_err(lib)?
        }
        "constant" => {
            let q = need(def.q, "structure.q")?;
            let k = def.extra.unwrap_or(1);
            st::constant(k, &st::covelocity_form(q, r), chart(k + q * (1 + r))?).map_err(lib)?
        }
        "linear-direct-sum" | "linear-product" => {
            let g = algebra(def.algebra.as_deref().unwrap_or("so3"))?;
            let c = chart(r * g.dim())?;
            if def.constructor == "linear-direct-sum" {
                st::linear_direct_sum(&g, r, c).map_err(lib)?
            } else {
                st::linear_product(&g, r, c).map_err(lib)?
            }
        }
        "foliation-family" => {
            let q = need(def.q, "structure.q")?;
            let variant = match def.variant.as_deref().unwrap_or("S1") {
                "S1" => FoliationVariant::S1,
                "S2" => FoliationVariant::S2,
                "S3" => FoliationVariant::S3,
                v => return Err(CliError::Config(format!("unknown foliation variant `{v}`"))),
            };
            let omega = PolyFormField::constant(&st::covelocity_form(q, r));
            st::foliation_family(&omega, variant, chart(q * (1 + r) + 1)?).map_err(lib)?
        }
        "product" => {
            if def.factors.len() < 2 {
                return Err(CliError::Config("a product needs at least two factors".into()));
            }
            let fs = def.factors.iter().map(build_structure).collect::<Result<Vec<_>, _>>()?;
            st::product(&fs).map_err(lib)?
        }
        other => return Err(CliError::Config(format!("unknown constructor `{other}`"))),
    };
    let s = match &def.corrupt_anchor {
        Some(c) => {
            if c.element >= s.frame_size() || c.shift.len() != s.dim() {
                return Err(CliError::Config("corrupt_anchor does not fit the structure".into()));
            }
            s.with_corrupted_anchor(c.element, &DVector::from_vec(c.shift.clone()))
        }
        None => s,
    };
    match def.drop_frame_element {
        Some(a) if a >= s.frame_size() => Err(CliError::Config("drop_frame_element out of range".into())),
        Some(a) => Ok(s.without_frame_element(a)),
        None => Ok(s),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse("seed = 1\nbogus = 2\n").is_err());
        assert!(parse("[structure]\nconstructor = \"covelocity\"\nqq = 1\n").is_err());
    }

    #[test]
    fn product_factors_nest() {
        let c = parse(
            r#"
            [structure]
            constructor = "product"
            [[structure.factors]]
            constructor = "covelocity"
            q = 1
            [[structure.factors]]
            constructor = "trivial"
            dim = 2
            "#,
        )
        .unwrap();
        let s = build_structure(c.structure.as_ref().unwrap()).unwrap();
        assert_eq!(s.dim(), 4);
    }
}
