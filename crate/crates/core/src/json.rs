//! JSON file formats: operators, basis expansions, scenarios.
//!
//! Operator files store the layout and the dense matrix in row-major order
//! with complex entries as `[re, im]` pairs. Scenario files describe
//! parties and their ordered nodes; node sides may be a single label or a
//! list of labels for composite systems.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{HsExpansion, MultiIndex};
use crate::comb::{Node, NodeSeq};
use crate::error::{Error, Result};
use crate::mpm::Scenario;
use crate::operator::{LabeledOperator, Role, Subsystem, SystemLayout};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SubsystemDto {
    pub label: String,
    pub dim: usize,
    pub role: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OperatorFile {
    pub subsystems: Vec<SubsystemDto>,
    pub entries: Vec<[f64; 2]>,
}

fn role_to_str(role: Role) -> &'static str {
    match role {
        Role::Input => "input",
        Role::DualOutput => "dual_output",
        Role::Ancilla => "ancilla",
    }
}

fn role_from_str(s: &str) -> Result<Role> {
    match s {
        "input" => Ok(Role::Input),
        "dual_output" => Ok(Role::DualOutput),
        "ancilla" => Ok(Role::Ancilla),
        other => Err(Error::Parse(format!(
            "unknown role `{other}` (expected input, dual_output, or ancilla)"
        ))),
    }
}

fn layout_to_dtos(layout: &SystemLayout) -> Vec<SubsystemDto> {
    layout
        .subsystems()
        .iter()
        .map(|s| SubsystemDto {
            label: s.label.clone(),
            dim: s.dim,
            role: role_to_str(s.role).to_string(),
        })
        .collect()
}

fn layout_from_dtos(dtos: &[SubsystemDto]) -> Result<SystemLayout> {
    SystemLayout::new(
        dtos.iter()
            .map(|d| Ok(Subsystem::new(&d.label, d.dim, role_from_str(&d.role)?)))
            .collect::<Result<Vec<_>>>()?,
    )
}

impl OperatorFile {
    pub fn from_operator(m: &LabeledOperator) -> Self {
        let d = m.dim();
        let mut entries = Vec::with_capacity(d * d);
        for r in 0..d {
            for c in 0..d {
                let z = m.entries()[(r, c)];
                // negative zeros would leak arithmetic history into the bytes
                entries.push([z.re + 0.0, z.im + 0.0]);
            }
        }
        OperatorFile {
            subsystems: layout_to_dtos(m.layout()),
            entries,
        }
    }

    pub fn into_operator(&self) -> Result<LabeledOperator> {
        let layout = layout_from_dtos(&self.subsystems)?;
        let d = layout.total_dim();
        if self.entries.len() != d * d {
            return Err(Error::BadShape {
                expected: d,
                rows: self.entries.len() / d.max(1),
                cols: d,
            });
        }
        let entries = DMatrix::from_fn(d, d, |r, c| {
            let [re, im] = self.entries[r * d + c];
            Complex64::new(re, im)
        });
        LabeledOperator::new(layout, entries)
    }
}

pub fn operator_to_json(m: &LabeledOperator) -> String {
    serde_json::to_string(&OperatorFile::from_operator(m)).expect("plain data serializes")
}

pub fn operator_from_json(s: &str) -> Result<LabeledOperator> {
    let file: OperatorFile =
        serde_json::from_str(s).map_err(|e| Error::Parse(format!("operator file: {e}")))?;
    file.into_operator()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoeffDto {
    pub index: Vec<usize>,
    pub value: [f64; 2],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExpansionFile {
    pub subsystems: Vec<SubsystemDto>,
    pub coeffs: Vec<CoeffDto>,
}

impl ExpansionFile {
    pub fn from_expansion(e: &HsExpansion) -> Self {
        ExpansionFile {
            subsystems: layout_to_dtos(e.layout()),
            coeffs: e
                .coeffs()
                .iter()
                .map(|(idx, v)| CoeffDto {
                    index: idx.0.clone(),
                    value: [v.re, v.im],
                })
                .collect(),
        }
    }

    pub fn into_expansion(&self) -> Result<HsExpansion> {
        let layout = layout_from_dtos(&self.subsystems)?;
        let mut coeffs = BTreeMap::new();
        for c in &self.coeffs {
            coeffs.insert(
                MultiIndex(c.index.clone()),
                Complex64::new(c.value[0], c.value[1]),
            );
        }
        Ok(HsExpansion::new(layout, coeffs))
    }
}

pub fn expansion_to_json(e: &HsExpansion) -> String {
    serde_json::to_string(&ExpansionFile::from_expansion(e)).expect("plain data serializes")
}

pub fn expansion_from_json(s: &str) -> Result<HsExpansion> {
    let file: ExpansionFile =
        serde_json::from_str(s).map_err(|e| Error::Parse(format!("expansion file: {e}")))?;
    file.into_expansion()
}

/// A single label or a list of labels; node sides are composite after a
/// side-channel extension.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x.clone()],
            OneOrMany::Many(xs) => xs.clone(),
        }
    }

    fn from_vec(mut xs: Vec<T>) -> Self {
        if xs.len() == 1 {
            OneOrMany::One(xs.remove(0))
        } else {
            OneOrMany::Many(xs)
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NodeDto {
    #[serde(rename = "in")]
    pub input: OneOrMany<String>,
    #[serde(rename = "out")]
    pub output: OneOrMany<String>,
    pub din: OneOrMany<usize>,
    pub dout: OneOrMany<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PartyDto {
    pub label: String,
    pub nodes: Vec<NodeDto>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub parties: Vec<PartyDto>,
}

fn side(labels: Vec<String>, dims: Vec<usize>, role: Role) -> Result<Vec<Subsystem>> {
    if labels.len() != dims.len() {
        return Err(Error::Parse(format!(
            "{} labels with {} dims",
            labels.len(),
            dims.len()
        )));
    }
    Ok(labels
        .into_iter()
        .zip(dims)
        .map(|(l, d)| Subsystem::new(l, d, role))
        .collect())
}

impl ScenarioFile {
    pub fn from_scenario(s: &Scenario) -> Self {
        ScenarioFile {
            parties: s
                .parties
                .iter()
                .map(|p| PartyDto {
                    label: p.party.clone(),
                    nodes: p
                        .nodes
                        .iter()
                        .map(|n| NodeDto {
                            input: OneOrMany::from_vec(
                                n.ins.iter().map(|s| s.label.clone()).collect(),
                            ),
                            output: OneOrMany::from_vec(
                                n.outs.iter().map(|s| s.label.clone()).collect(),
                            ),
                            din: OneOrMany::from_vec(n.ins.iter().map(|s| s.dim).collect()),
                            dout: OneOrMany::from_vec(n.outs.iter().map(|s| s.dim).collect()),
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn into_scenario(&self) -> Result<Scenario> {
        let parties = self
            .parties
            .iter()
            .map(|p| {
                let nodes = p
                    .nodes
                    .iter()
                    .map(|n| {
                        Ok(Node::new(
                            side(n.input.to_vec(), n.din.to_vec(), Role::Input)?,
                            side(n.output.to_vec(), n.dout.to_vec(), Role::DualOutput)?,
                        ))
                    })
                    .collect::<Result<Vec<_>>>()?;
                NodeSeq::new(p.label.clone(), nodes)
            })
            .collect::<Result<Vec<_>>>()?;
        Scenario::new(parties)
    }
}

pub fn scenario_to_json(s: &Scenario) -> String {
    serde_json::to_string(&ScenarioFile::from_scenario(s)).expect("plain data serializes")
}

pub fn scenario_from_json(s: &str) -> Result<Scenario> {
    let file: ScenarioFile =
        serde_json::from_str(s).map_err(|e| Error::Parse(format!("scenario file: {e}")))?;
    file.into_scenario()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{activatable_process, activatable_scenario, activated_scenario};
    use crate::process::extend_with_side_channels;

    #[test]
    fn operator_roundtrip_is_exact() {
        let w = activatable_process();
        let text = operator_to_json(&w);
        let back = operator_from_json(&text).unwrap();
        assert_eq!(back.layout(), w.layout());
        assert_eq!(back.entries(), w.entries());
    }

    #[test]
    fn operator_rejects_wrong_entry_count() {
        let w = activatable_process();
        let mut file = OperatorFile::from_operator(&w);
        file.entries.pop();
        assert!(file.into_operator().is_err());
    }

    #[test]
    fn operator_rejects_bad_role() {
        let text = r#"{"subsystems":[{"label":"X","dim":2,"role":"sideways"}],"entries":[[1,0],[0,0],[0,0],[1,0]]}"#;
        assert!(matches!(operator_from_json(text), Err(Error::Parse(_))));
    }

    #[test]
    fn scenario_roundtrip_single_labels() {
        let s = activatable_scenario();
        let text = scenario_to_json(&s);
        assert!(text.contains(r#""in":"A0""#));
        let back = scenario_from_json(&text).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn scenario_roundtrip_composite_node() {
        let s = activated_scenario();
        let text = scenario_to_json(&s);
        assert!(text.contains(r#"["A2","L2"]"#));
        let back = scenario_from_json(&text).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn extended_scenario_roundtrips() {
        let (_, s_ext) = extend_with_side_channels(
            &activatable_process(),
            &activatable_scenario(),
            &[vec![2], vec![]],
        )
        .unwrap();
        let back = scenario_from_json(&scenario_to_json(&s_ext)).unwrap();
        assert_eq!(back, s_ext);
    }

    #[test]
    fn expansion_roundtrip() {
        let layout = activatable_process().layout().clone();
        let basis = crate::basis::HsBasis::default_for(&layout).unwrap();
        let e = crate::basis::expand(&activatable_process(), &basis)
            .unwrap()
            .prune(1e-12);
        assert_eq!(e.len(), 3);
        let back = expansion_from_json(&expansion_to_json(&e)).unwrap();
        assert_eq!(back, e);
    }
}
