//! Choreographies: global interaction contracts as flow graphs.
//!
//! A choreography is a directed graph of nodes — one start, at least one
//! end, exclusive gateways, and interaction tasks. Each task names the
//! role that initiates it, the role that receives it, and the message it
//! carries. A run of the choreography is a walk from start to end; at an
//! exclusive gateway any one outgoing edge may be taken, which is also
//! how loops are expressed.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::schema::QName;

use super::SynthesisError;

/// One interaction: `initiator` sends `message` to `recipient` under the
/// given operation name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskNode {
    pub initiator: String,
    pub recipient: String,
    pub operation: String,
    pub message: QName,
}

/// What a choreography node is.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum NodeKind {
    Start,
    End,
    /// Exclusive gateway: exactly one outgoing edge fires per visit.
    Exclusive,
    Task(TaskNode),
}

/// A node with its graph identity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChoreoNode {
    pub id: String,
    #[serde(flatten)]
    pub kind: NodeKind,
}

/// A directed edge between two nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub from: String,
    pub to: String,
}

/// The whole contract: roles, nodes (document order is meaningful — it
/// breaks ties deterministically throughout synthesis), and edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ChoreographySpec {
    pub name: String,
    pub roles: Vec<String>,
    pub nodes: Vec<ChoreoNode>,
    pub edges: Vec<Edge>,
}

impl ChoreographySpec {
    /// Structural validation. Degree rules keep runs single-token walks:
    /// start and tasks have exactly one outgoing edge (branching happens
    /// only at exclusive gateways), ends have none, and every node lies
    /// on some start-to-end walk.
    pub fn validate(&self) -> Result<(), SynthesisError> {
        let err = |detail: String| SynthesisError::Choreography {
            name: self.name.clone(),
            detail,
        };
        let mut ids = BTreeSet::new();
        for node in &self.nodes {
            if !ids.insert(node.id.as_str()) {
                return Err(err(format!("duplicate node id `{}`", node.id)));
            }
        }
        let roles: BTreeSet<&str> = self.roles.iter().map(String::as_str).collect();
        if roles.len() != self.roles.len() {
            return Err(err("duplicate role names".to_string()));
        }
        let starts: Vec<_> = self
            .nodes
            .iter()
            .filter(|n| matches!(n.kind, NodeKind::Start))
            .collect();
        if starts.len() != 1 {
            return Err(err(format!("expected exactly one start node, found {}", starts.len())));
        }
        if !self.nodes.iter().any(|n| matches!(n.kind, NodeKind::End)) {
            return Err(err("no end node".to_string()));
        }
        for edge in &self.edges {
            for endpoint in [&edge.from, &edge.to] {
                if !ids.contains(endpoint.as_str()) {
                    return Err(err(format!("edge references unknown node `{endpoint}`")));
                }
            }
        }
        let mut out_degree: BTreeMap<&str, usize> = BTreeMap::new();
        let mut in_degree: BTreeMap<&str, usize> = BTreeMap::new();
        for edge in &self.edges {
            *out_degree.entry(edge.from.as_str()).or_default() += 1;
            *in_degree.entry(edge.to.as_str()).or_default() += 1;
        }
        for node in &self.nodes {
            let outs = out_degree.get(node.id.as_str()).copied().unwrap_or(0);
            let ins = in_degree.get(node.id.as_str()).copied().unwrap_or(0);
            match &node.kind {
                NodeKind::Start => {
                    if ins != 0 || outs != 1 {
                        return Err(err(format!(
                            "start node `{}` must have no incoming and one outgoing edge",
                            node.id
                        )));
                    }
                }
                NodeKind::End => {
                    if outs != 0 {
                        return Err(err(format!("end node `{}` has outgoing edges", node.id)));
                    }
                }
                NodeKind::Exclusive => {
                    if outs == 0 {
                        return Err(err(format!(
                            "gateway `{}` has no outgoing edge",
                            node.id
                        )));
                    }
                }
                NodeKind::Task(task) => {
                    if outs != 1 {
                        return Err(err(format!(
                            "task `{}` must have exactly one outgoing edge \
                             (branch via an exclusive gateway)",
                            node.id
                        )));
                    }
                    for role in [&task.initiator, &task.recipient] {
                        if !roles.contains(role.as_str()) {
                            return Err(err(format!(
                                "task `{}` references unknown role `{role}`",
                                node.id
                            )));
                        }
                    }
                    if task.initiator == task.recipient {
                        return Err(err(format!(
                            "task `{}` sends `{}` to its own initiator",
                            node.id, task.initiator
                        )));
                    }
                }
            }
        }
        // Every node must be reachable from start and able to reach an end.
        let start = &starts[0].id;
        let forward = self.closure(start, |from| self.successor_ids(from));
        let end_ids: Vec<&str> = self
            .nodes
            .iter()
            .filter(|n| matches!(n.kind, NodeKind::End))
            .map(|n| n.id.as_str())
            .collect();
        let mut backward = BTreeSet::new();
        for end in &end_ids {
            backward.extend(self.closure(end, |to| {
                self.edges
                    .iter()
                    .filter(|e| e.to == to)
                    .map(|e| e.from.as_str())
                    .collect()
            }));
        }
        for node in &self.nodes {
            if !forward.contains(node.id.as_str()) {
                return Err(err(format!("node `{}` is unreachable from start", node.id)));
            }
            if !backward.contains(node.id.as_str()) {
                return Err(err(format!("node `{}` cannot reach an end node", node.id)));
            }
        }
        Ok(())
    }

    fn closure<'a>(
        &'a self,
        seed: &'a str,
        step: impl Fn(&str) -> Vec<&'a str>,
    ) -> BTreeSet<&'a str> {
        let mut seen = BTreeSet::from([seed]);
        let mut queue = VecDeque::from([seed]);
        while let Some(id) = queue.pop_front() {
            for next in step(id) {
                if seen.insert(next) {
                    queue.push_back(next);
                }
            }
        }
        seen
    }

    pub fn node(&self, id: &str) -> Option<&ChoreoNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn start_id(&self) -> &str {
        self.nodes
            .iter()
            .find(|n| matches!(n.kind, NodeKind::Start))
            .map(|n| n.id.as_str())
            .expect("validated choreography has a start node")
    }

    /// Successor node ids, edge-declaration order.
    pub fn successor_ids(&self, id: &str) -> Vec<&str> {
        self.edges
            .iter()
            .filter(|e| e.from == id)
            .map(|e| e.to.as_str())
            .collect()
    }

    /// Tasks in node document order.
    pub fn tasks(&self) -> Vec<(&str, &TaskNode)> {
        self.nodes
            .iter()
            .filter_map(|n| match &n.kind {
                NodeKind::Task(task) => Some((n.id.as_str(), task)),
                _ => None,
            })
            .collect()
    }
}

/// Role pairs that interact, ordered by the document position of each
/// pair's first shared task and oriented `(initiator, recipient)` of that
/// task. This order names the delegates and numbers the adapters, so it
/// must be — and is — deterministic.
pub fn interacting_pairs(choreo: &ChoreographySpec) -> Vec<(String, String)> {
    let mut pairs: Vec<(String, String)> = Vec::new();
    for (_, task) in choreo.tasks() {
        let known = pairs.iter().any(|(a, b)| {
            (a == &task.initiator && b == &task.recipient)
                || (a == &task.recipient && b == &task.initiator)
        });
        if !known {
            pairs.push((task.initiator.clone(), task.recipient.clone()));
        }
    }
    pairs
}
