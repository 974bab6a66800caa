//! Serializable description of a self-affine system, shared by the CLI and
//! the browser demo. Numeric fields accept either JSON numbers or decimal
//! strings (parsed to nearest double).

use crate::affine::{AffineMap2, Matrix2, Vec2};
use crate::ifs::IfsSystem;
use crate::{Error, Result};
use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize};

/// A JSON number or a decimal string.
fn flexible_f64<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }
    match Raw::deserialize(de)? {
        Raw::Num(x) => Ok(x),
        Raw::Text(s) => s
            .trim()
            .parse::<f64>()
            .map_err(|e| de::Error::custom(format!("bad decimal string {s:?}: {e}"))),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlexNum(#[serde(deserialize_with = "flexible_f64")] pub f64);

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapSpec {
    /// Row-major 2x2 linear part [[a11, a12], [a21, a22]].
    #[serde(rename = "A")]
    pub a: Vec<Vec<FlexNum>>,
    /// Translation [b1, b2].
    pub b: Vec<FlexNum>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub maps: Vec<MapSpec>,
    /// Probability vector; omitted means uniform.
    #[serde(default)]
    pub p: Option<Vec<FlexNum>>,
}

impl SystemSpec {
    pub fn parse(text: &str) -> Result<SystemSpec> {
        serde_json::from_str(text).map_err(|e| Error::ParseError {
            location: format!("line {}, column {}", e.line(), e.column()),
            reason: e.to_string(),
        })
    }

    /// Builds the validated runtime system.
    pub fn build(&self) -> Result<IfsSystem> {
        let mut maps = Vec::with_capacity(self.maps.len());
        for (i, m) in self.maps.iter().enumerate() {
            if m.a.len() != 2 || m.a.iter().any(|row| row.len() != 2) {
                return Err(Error::ValidationError {
                    field: format!("maps[{i}].A"),
                    reason: "expected a 2x2 row-major matrix".into(),
                });
            }
            if m.b.len() != 2 {
                return Err(Error::ValidationError {
                    field: format!("maps[{i}].b"),
                    reason: "expected a 2-vector".into(),
                });
            }
            let linear = Matrix2::new(m.a[0][0].0, m.a[0][1].0, m.a[1][0].0, m.a[1][1].0);
            maps.push(AffineMap2::new(linear, Vec2::new(m.b[0].0, m.b[1].0)));
        }
        let probs = match &self.p {
            Some(p) => {
                if p.len() != maps.len() {
                    return Err(Error::ValidationError {
                        field: "p".into(),
                        reason: format!("{} entries for {} maps", p.len(), maps.len()),
                    });
                }
                p.iter().map(|x| x.0).collect()
            }
            None => vec![1.0 / maps.len() as f64; maps.len()],
        };
        IfsSystem::new(maps, probs, self.name.clone())
    }

    /// Round-trips a runtime system back into the JSON schema.
    pub fn from_system(system: &IfsSystem) -> SystemSpec {
        SystemSpec {
            name: system.name().map(str::to_owned),
            maps: system
                .maps()
                .iter()
                .map(|m| MapSpec {
                    a: vec![
                        vec![FlexNum(m.linear.a11), FlexNum(m.linear.a12)],
                        vec![FlexNum(m.linear.a21), FlexNum(m.linear.a22)],
                    ],
                    b: vec![FlexNum(m.translation.x), FlexNum(m.translation.y)],
                })
                .collect(),
            p: Some(system.probs().iter().map(|&p| FlexNum(p)).collect()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_inline_system_with_defaults() {
        let spec = SystemSpec::parse(
            r#"{"maps":[{"A":[[0.5,0],[0,0.5]],"b":[0,0]},
                        {"A":[["0.5","0"],["0","0.5"]],"b":["0.5","0.5"]}]}"#,
        )
        .unwrap();
        let system = spec.build().unwrap();
        assert_eq!(system.alphabet_len(), 2);
        assert_eq!(system.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn reports_malformed_matrix_with_index() {
        let spec = SystemSpec::parse(
            r#"{"maps":[{"A":[[0.5,0],[0]],"b":[0,0]},{"A":[[0.5,0],[0,0.5]],"b":[0.5,0]}]}"#,
        )
        .unwrap();
        let err = spec.build().unwrap_err();
        match err {
            Error::ValidationError { field, .. } => assert_eq!(field, "maps[0].A"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_probability_length() {
        let spec = SystemSpec::parse(
            r#"{"maps":[{"A":[[0.5,0],[0,0.5]],"b":[0,0]},{"A":[[0.5,0],[0,0.5]],"b":[0.5,0]}],"p":[1.0]}"#,
        )
        .unwrap();
        assert!(spec.build().is_err());
    }
}
