//! JSON system documents (`"version": "lipstab-v1"`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::convex::{ConvexFunctionSpec, ConvexSystem};
use crate::error::{Error, Result};
use crate::model::{validate, validate_system, Block, BlockPartition, LinearSystem, NormSpec, Row};

pub const VERSION: &str = "lipstab-v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormName {
    #[default]
    Euclid,
    L1,
    Linf,
}

impl From<NormName> for NormSpec {
    fn from(n: NormName) -> Self {
        match n {
            NormName::Euclid => NormSpec::Euclid,
            NormName::L1 => NormSpec::L1,
            NormName::Linf => NormSpec::LInf,
        }
    }
}

impl From<NormSpec> for NormName {
    fn from(n: NormSpec) -> Self {
        match n {
            NormSpec::Euclid => NormName::Euclid,
            NormSpec::L1 => NormName::L1,
            NormSpec::LInf => NormName::Linf,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowDoc {
    pub label: String,
    pub a: Vec<f64>,
    pub b: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockDoc {
    pub block: String,
    pub labels: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceDoc {
    pub c: Vec<f64>,
    pub d: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ConvexDoc {
    Affine {
        block: String,
        c: Vec<f64>,
        d: f64,
    },
    Quadratic {
        block: String,
        #[serde(rename = "Q")]
        q: Vec<Vec<f64>>,
        c: Vec<f64>,
        r: f64,
    },
    MaxAffine {
        block: String,
        pieces: Vec<PieceDoc>,
    },
    ScaledNorm {
        block: String,
        kappa: f64,
        shift: Vec<f64>,
        offset: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        norm: Option<NormName>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDocument {
    pub version: String,
    pub dimension: usize,
    #[serde(default)]
    pub norm: NormName,
    #[serde(default)]
    pub rows: Vec<RowDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<Vec<BlockDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convex: Option<Vec<ConvexDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<String>,
}

/// A parsed and validated document.
#[derive(Clone, Debug, PartialEq)]
pub enum LoadedSystem {
    Linear {
        system: LinearSystem,
        partition: BlockPartition,
    },
    Convex {
        system: ConvexSystem,
    },
}

impl SystemDocument {
    pub fn from_linear(system: &LinearSystem, partition: Option<&BlockPartition>) -> Self {
        SystemDocument {
            version: VERSION.into(),
            dimension: system.dimension,
            norm: system.norm.into(),
            rows: system
                .rows
                .iter()
                .map(|r| RowDoc {
                    label: r.label.clone(),
                    a: r.a.clone(),
                    b: r.b,
                })
                .collect(),
            partition: partition.map(|p| {
                p.blocks
                    .iter()
                    .map(|b| BlockDoc {
                        block: b.label.clone(),
                        labels: b.members.clone(),
                    })
                    .collect()
            }),
            convex: None,
            truncation: system.truncation.clone(),
        }
    }

    pub fn from_convex(system: &ConvexSystem) -> Self {
        let convex = system
            .blocks
            .iter()
            .map(|b| {
                let block = b.label.clone();
                match &b.f {
                    ConvexFunctionSpec::Affine { c, d } => ConvexDoc::Affine {
                        block,
                        c: c.clone(),
                        d: *d,
                    },
                    ConvexFunctionSpec::Quadratic { q, c, r } => ConvexDoc::Quadratic {
                        block,
                        q: q.clone(),
                        c: c.clone(),
                        r: *r,
                    },
                    ConvexFunctionSpec::MaxAffine { pieces } => ConvexDoc::MaxAffine {
                        block,
                        pieces: pieces
                            .iter()
                            .map(|(c, d)| PieceDoc {
                                c: c.clone(),
                                d: *d,
                            })
                            .collect(),
                    },
                    ConvexFunctionSpec::ScaledNorm {
                        kappa,
                        shift,
                        offset,
                        norm,
                    } => ConvexDoc::ScaledNorm {
                        block,
                        kappa: *kappa,
                        shift: shift.clone(),
                        offset: *offset,
                        norm: Some((*norm).into()),
                    },
                }
            })
            .collect();
        SystemDocument {
            version: VERSION.into(),
            dimension: system.dimension,
            norm: system.norm.into(),
            rows: Vec::new(),
            partition: None,
            convex: Some(convex),
            truncation: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_str(text);
        let doc: SystemDocument = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            Error::Schema {
                path,
                line: inner.line(),
                column: inner.column(),
                message: inner.to_string(),
            }
        })?;
        de.end().map_err(|e| Error::Schema {
            path: ".".into(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        if doc.version != VERSION {
            return Err(Error::Schema {
                path: "version".into(),
                line: 0,
                column: 0,
                message: format!("expected \"{VERSION}\", found \"{}\"", doc.version),
            });
        }
        Ok(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents hold only finite numbers")
    }

    /// Converts to validated model objects. A missing partition means the
    /// maximum partition; convex documents get one block per function.
    pub fn load(&self) -> Result<LoadedSystem> {
        let norm: NormSpec = self.norm.into();
        if let Some(convex) = &self.convex {
            if !self.rows.is_empty() || self.partition.is_some() {
                return Err(Error::Schema {
                    path: "convex".into(),
                    line: 0,
                    column: 0,
                    message: "a convex document carries neither rows nor a partition".into(),
                });
            }
            let mut system = ConvexSystem::new(self.dimension, norm);
            for doc in convex {
                let (label, f) = match doc.clone() {
                    ConvexDoc::Affine { block, c, d } => {
                        (block, ConvexFunctionSpec::Affine { c, d })
                    }
                    ConvexDoc::Quadratic { block, q, c, r } => {
                        (block, ConvexFunctionSpec::Quadratic { q, c, r })
                    }
                    ConvexDoc::MaxAffine { block, pieces } => (
                        block,
                        ConvexFunctionSpec::MaxAffine {
                            pieces: pieces.into_iter().map(|p| (p.c, p.d)).collect(),
                        },
                    ),
                    ConvexDoc::ScaledNorm {
                        block,
                        kappa,
                        shift,
                        offset,
                        norm: own,
                    } => (
                        block,
                        ConvexFunctionSpec::ScaledNorm {
                            kappa,
                            shift,
                            offset,
                            norm: own.map_or(norm, Into::into),
                        },
                    ),
                };
                system.push(label, f);
            }
            system.validate()?;
            return Ok(LoadedSystem::Convex { system });
        }
        let mut system = LinearSystem::with_rows(
            self.dimension,
            norm,
            self.rows
                .iter()
                .map(|r| Row::new(r.label.clone(), r.a.clone(), r.b))
                .collect(),
        );
        system.truncation = self.truncation.clone();
        validate_system(&system).into_result()?;
        let partition = match &self.partition {
            Some(blocks) => BlockPartition::new(
                blocks
                    .iter()
                    .map(|b| Block {
                        label: b.block.clone(),
                        members: b.labels.clone(),
                    })
                    .collect(),
            ),
            None => BlockPartition::maximum(&system),
        };
        validate(&system, &partition).into_result()?;
        Ok(LoadedSystem::Linear { system, partition })
    }
}

pub fn parse_system(text: &str) -> Result<LoadedSystem> {
    SystemDocument::parse(text)?.load()
}

pub fn read_system(path: &Path) -> Result<LoadedSystem> {
    parse_system(&std::fs::read_to_string(path)?)
}
