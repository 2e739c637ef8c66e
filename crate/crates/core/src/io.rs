//! Model serialization: a JSON document format and an importer for
//! explicit-state text exports.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::MdpModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionDoc {
    pub state: usize,
    pub name: String,
    pub transitions: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardDoc {
    pub name: String,
    /// `[state, action index, reward]` triples; missing entries are 0.
    pub values: Vec<(usize, usize, f64)>,
}

/// JSON model document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDoc {
    pub states: usize,
    pub initial: usize,
    pub end: Vec<usize>,
    pub actions: Vec<ActionDoc>,
    #[serde(default)]
    pub rewards: Vec<RewardDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub names: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub labels: BTreeMap<usize, String>,
}

impl ModelDoc {
    pub fn into_model(self) -> Result<MdpModel> {
        let mut m = MdpModel::new(self.states, self.initial)?;
        if let Some(names) = self.names {
            if names.len() != self.states {
                return Err(Error::DimensionMismatch {
                    expected: self.states,
                    got: names.len(),
                });
            }
            for (s, name) in names.into_iter().enumerate() {
                m.set_state_name(s, name)?;
            }
        }
        for s in self.end {
            m.set_end(s, true)?;
        }
        for a in self.actions {
            m.add_action(a.state, a.name, a.transitions)?;
        }
        for r in self.rewards {
            if m.reward_index(&r.name).is_some() {
                return Err(Error::InvalidModel(format!("duplicate reward `{}`", r.name)));
            }
            let idx = m.add_reward(r.name);
            for (s, a, v) in r.values {
                m.set_reward(idx, s, a, v)?;
            }
        }
        for (s, label) in self.labels {
            m.set_label(s, label)?;
        }
        Ok(m)
    }

    pub fn from_model(m: &MdpModel) -> Self {
        let n = m.num_states();
        let default_names = (0..n).all(|s| m.state_name(s) == format!("s{s}"));
        ModelDoc {
            states: n,
            initial: m.initial(),
            end: m.end_states().collect(),
            actions: (0..n)
                .flat_map(|s| {
                    m.actions(s).iter().map(move |a| ActionDoc {
                        state: s,
                        name: a.name.clone(),
                        transitions: a.transitions.clone(),
                    })
                })
                .collect(),
            rewards: m
                .rewards()
                .iter()
                .map(|r| RewardDoc {
                    name: r.name.clone(),
                    values: (0..n)
                        .flat_map(|s| (0..m.num_actions(s)).map(move |a| (s, a)))
                        .filter(|&(s, a)| r.get(s, a) != 0.0)
                        .map(|(s, a)| (s, a, r.get(s, a)))
                        .collect(),
                })
                .collect(),
            names: (!default_names).then(|| (0..n).map(|s| m.state_name(s).to_string()).collect()),
            labels: (0..n)
                .filter_map(|s| m.label(s).map(|l| (s, l.to_string())))
                .collect(),
        }
    }
}

pub fn model_from_json(text: &str) -> Result<MdpModel> {
    let doc: ModelDoc = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    doc.into_model()
}

pub fn model_to_json(model: &MdpModel) -> String {
    serde_json::to_string_pretty(&ModelDoc::from_model(model)).expect("model document serializes")
}

/// Options for [`import_explicit`].
#[derive(Debug, Clone, Default)]
pub struct ExplicitOptions {
    pub initial: usize,
    /// End states. When `None`, states without choices or whose every
    /// choice is a certain self-loop become end states.
    pub end: Option<Vec<usize>>,
}

fn tokens(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() || line.starts_with("//") {
            None
        } else {
            Some((i + 1, line.split_whitespace().collect()))
        }
    })
}

fn num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid {what} `{tok}`"),
    })
}

/// Imports a transition listing (`s a t p` per line, optional action label
/// as a fifth column, optional `states choices transitions` header) and any
/// number of named reward listings (`s a r` per line, optional two-column
/// header).
pub fn import_explicit(transitions: &str, rewards: &[(&str, &str)], options: &ExplicitOptions) -> Result<MdpModel> {
    let mut header_states = None;
    let mut rows: BTreeMap<(usize, usize), (Option<String>, Vec<(usize, f64)>)> = BTreeMap::new();
    let mut max_state = options.initial;
    for (k, (line, toks)) in tokens(transitions).enumerate() {
        if k == 0 && toks.len() == 3 {
            header_states = Some(num::<usize>(toks[0], line, "state count")?);
            continue;
        }
        if toks.len() != 4 && toks.len() != 5 {
            return Err(Error::Parse {
                line,
                message: format!("expected `s a t p [label]`, got {} fields", toks.len()),
            });
        }
        let s: usize = num(toks[0], line, "state")?;
        let a: usize = num(toks[1], line, "choice")?;
        let t: usize = num(toks[2], line, "target")?;
        let p: f64 = num(toks[3], line, "probability")?;
        max_state = max_state.max(s).max(t);
        let entry = rows.entry((s, a)).or_insert((None, Vec::new()));
        if let Some(label) = toks.get(4) {
            entry.0 = Some(label.to_string());
        }
        entry.1.push((t, p));
    }
    let n = match header_states {
        Some(h) if h <= max_state => {
            return Err(Error::Parse {
                line: 1,
                message: format!("header declares {h} states but state {max_state} is used"),
            })
        }
        Some(h) => h,
        None => max_state + 1,
    };
    let mut m = MdpModel::new(n, options.initial)?;
    let end: Vec<bool> = match &options.end {
        Some(list) => {
            let mut v = vec![false; n];
            for &s in list {
                *v.get_mut(s).ok_or(Error::StateOutOfRange(s))? = true;
            }
            v
        }
        None => (0..n)
            .map(|s| {
                rows.range((s, 0)..(s + 1, 0))
                    .all(|(_, (_, tr))| tr.iter().all(|&(t, p)| t == s && (p - 1.0).abs() <= 1e-12))
            })
            .collect(),
    };
    // Choice indices may be sparse in the file; they are renumbered densely
    // per state in ascending order.
    let mut choice_map: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for ((s, a), (label, tr)) in rows {
        if end[s] {
            continue;
        }
        let name = label.unwrap_or_else(|| format!("a{a}"));
        let idx = m.add_action(s, name, tr)?;
        choice_map.insert((s, a), idx);
    }
    for (s, &e) in end.iter().enumerate() {
        if e {
            m.set_end(s, true)?;
        }
    }
    for &(name, text) in rewards {
        let idx = m.add_reward(name);
        for (k, (line, toks)) in tokens(text).enumerate() {
            if k == 0 && toks.len() == 2 {
                continue;
            }
            if toks.len() != 3 {
                return Err(Error::Parse {
                    line,
                    message: format!("expected `s a r`, got {} fields", toks.len()),
                });
            }
            let s: usize = num(toks[0], line, "state")?;
            let a: usize = num(toks[1], line, "choice")?;
            let r: f64 = num(toks[2], line, "reward")?;
            if s < n && end[s] {
                if r != 0.0 {
                    return Err(Error::Parse {
                        line,
                        message: format!("nonzero reward on end state {s}"),
                    });
                }
                continue;
            }
            let &act = choice_map.get(&(s, a)).ok_or_else(|| Error::Parse {
                line,
                message: format!("reward for unknown choice ({s}, {a})"),
            })?;
            m.set_reward(idx, s, act, r)?;
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::two_road;
    use crate::mdp::validate_model;

    #[test]
    fn json_round_trip() {
        let m = two_road();
        let text = model_to_json(&m);
        assert_eq!(model_from_json(&text).unwrap(), m);
    }

    #[test]
    fn json_schema_example() {
        let text = r#"{"states": 3, "initial": 0, "end": [2],
            "actions": [{"state": 0, "name": "go", "transitions": [[1, 0.5], [2, 0.5]]},
                        {"state": 1, "name": "go", "transitions": [[2, 1.0]]}],
            "rewards": [{"name": "time", "values": [[0, 0, 1.0], [1, 0, 2.0]]}]}"#;
        let m = model_from_json(text).unwrap();
        assert!(validate_model(&m).is_valid());
        assert_eq!(m.reward(0).get(1, 0), 2.0);
        assert!(matches!(model_from_json("{\"states\": 2"), Err(Error::Parse { .. })));
        let bad = r#"{"states": 2, "initial": 0, "end": [1], "actions": [{"state": 0, "name": "x", "transitions": [[5, 1.0]]}]}"#;
        assert_eq!(model_from_json(bad), Err(Error::StateOutOfRange(5)));
    }

    #[test]
    fn explicit_import() {
        let tra = "3 3 4\n0 0 2 1\n0 1 1 1 long\n1 0 2 1\n2 0 2 1\n";
        let dist = "0 0 1\n0 1 1\n1 0 1\n";
        let risk = "# risk\n0 0 1\n";
        let m = import_explicit(tra, &[("dist", dist), ("risk", risk)], &ExplicitOptions::default()).unwrap();
        assert!(validate_model(&m).is_valid());
        assert!(m.is_end(2) && m.num_actions(2) == 0);
        assert_eq!(m.actions(0)[1].name, "long");
        assert_eq!(m.reward(1).get(0, 0), 1.0);
        assert_eq!(m.reward(1).get(0, 1), 0.0);
    }

    #[test]
    fn explicit_import_errors() {
        let opts = ExplicitOptions::default();
        assert!(matches!(import_explicit("0 0 1\n", &[], &opts), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(import_explicit("0 0 1 x\n", &[], &opts), Err(Error::Parse { .. })));
        assert!(matches!(
            import_explicit("0 0 1 1\n", &[("r", "0 3 1\n")], &opts),
            Err(Error::Parse { .. })
        ));
        assert!(import_explicit("2 1 1\n0 0 5 1\n", &[], &opts).is_err());
    }
}
