use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::PlayerId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", content = "order", rename_all = "snake_case")]
pub enum Scheduling {
    #[default]
    Simultaneous,
    Sequential(Vec<PlayerId>),
}

/// Directed "may message" relation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommGraph {
    pub players: usize,
    pub edges: BTreeSet<(PlayerId, PlayerId)>,
}

impl CommGraph {
    pub fn complete(players: usize) -> Self {
        let edges = (0..players)
            .flat_map(|a| (0..players).filter(move |&b| b != a).map(move |b| (PlayerId(a), PlayerId(b))))
            .collect();
        CommGraph { players, edges }
    }

    pub fn from_edges(players: usize, edges: impl IntoIterator<Item = (PlayerId, PlayerId)>) -> Self {
        CommGraph { players, edges: edges.into_iter().collect() }
    }

    pub fn allows(&self, from: PlayerId, to: PlayerId) -> bool {
        self.edges.contains(&(from, to))
    }

    pub fn targets(&self, from: PlayerId) -> Vec<PlayerId> {
        self.edges.iter().filter(|(a, _)| *a == from).map(|(_, b)| *b).collect()
    }

    pub fn is_valid(&self) -> bool {
        self.edges.iter().all(|(a, b)| a.index() < self.players && b.index() < self.players && a != b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommConfig {
    pub rounds: u32,
    #[serde(default)]
    pub scheduling: Scheduling,
    pub graph: CommGraph,
}

impl CommConfig {
    pub fn silent(players: usize) -> Self {
        CommConfig { rounds: 0, scheduling: Scheduling::Simultaneous, graph: CommGraph::complete(players) }
    }

    pub fn with_rounds(players: usize, rounds: u32) -> Self {
        CommConfig { rounds, ..CommConfig::silent(players) }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !self.graph.is_valid() {
            return Err("communication graph references unknown players or self-loops".into());
        }
        if let Scheduling::Sequential(order) = &self.scheduling {
            let mut seen = BTreeSet::new();
            if order.iter().any(|p| p.index() >= self.graph.players || !seen.insert(*p)) {
                return Err("sequential order must list distinct valid players".into());
            }
        }
        Ok(())
    }

    /// Speaking order inside one round.
    pub fn order(&self) -> Vec<PlayerId> {
        match &self.scheduling {
            Scheduling::Simultaneous => (0..self.graph.players).map(PlayerId).collect(),
            Scheduling::Sequential(order) => order.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub sender: PlayerId,
    pub recipients: Vec<PlayerId>,
    pub round: u32,
    pub text: String,
}

/// Outcome of a player's communication turn.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CommTurn {
    Abstain,
    Send(Message),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphViolation {
    pub sender: PlayerId,
    pub recipient: PlayerId,
    pub round: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Delivery {
    /// `inboxes[p]` holds the messages delivered to player `p`.
    pub inboxes: Vec<Vec<Message>>,
    pub violations: Vec<GraphViolation>,
}

/// Deliver one round's messages. A message naming any recipient the graph
/// does not permit is dropped whole and reported.
pub fn route_messages(messages: &[Message], comm: &CommConfig, round: u32) -> Delivery {
    let mut delivery = Delivery { inboxes: vec![Vec::new(); comm.graph.players], violations: Vec::new() };
    for m in messages.iter().filter(|m| m.round == round) {
        let bad: Vec<PlayerId> = m.recipients.iter().copied().filter(|&r| !comm.graph.allows(m.sender, r)).collect();
        if !bad.is_empty() {
            for r in bad {
                warn!(sender = %m.sender, recipient = %r, round, "message dropped: graph violation");
                delivery.violations.push(GraphViolation { sender: m.sender, recipient: r, round });
            }
            continue;
        }
        for r in &m.recipients {
            if let Some(inbox) = delivery.inboxes.get_mut(r.index()) {
                inbox.push(m.clone());
            }
        }
    }
    delivery
}

/// Read a communication reply: `PASS`, or an optional `TO:` line followed
/// by `MESSAGE:` text. Without a `TO:` line the message goes to every
/// permitted recipient.
pub fn parse_comm_response(response: &str, sender: PlayerId, round: u32, comm: &CommConfig) -> CommTurn {
    let trimmed = response.trim();
    if trimmed.is_empty() || trimmed.eq_ignore_ascii_case("pass") {
        return CommTurn::Abstain;
    }
    let mut recipients: Option<Vec<PlayerId>> = None;
    let mut body = Vec::new();
    let mut saw_message = false;
    for line in trimmed.lines() {
        let l = line.trim();
        if let Some(rest) = strip_tag(l, "TO") {
            let r = rest.trim();
            recipients = Some(if r.eq_ignore_ascii_case("all") {
                comm.graph.targets(sender)
            } else {
                r.split([',', ' ', ';'])
                    .filter_map(|t| {
                        let t = t.trim().trim_start_matches("Player").trim();
                        let mut chars = t.chars();
                        match (chars.next(), chars.next()) {
                            (Some(c), None) => PlayerId::from_letter(c),
                            _ => None,
                        }
                    })
                    .collect()
            });
        } else if let Some(rest) = strip_tag(l, "MESSAGE") {
            saw_message = true;
            body.push(rest.trim().to_string());
        } else if l.eq_ignore_ascii_case("pass") && !saw_message {
            return CommTurn::Abstain;
        } else if !l.is_empty() {
            body.push(l.to_string());
        }
    }
    let text = body.join(" ").trim().to_string();
    let mut recipients = recipients.unwrap_or_else(|| comm.graph.targets(sender));
    recipients.dedup();
    if text.is_empty() || recipients.is_empty() {
        return CommTurn::Abstain;
    }
    CommTurn::Send(Message { sender, recipients, round, text })
}

fn strip_tag<'a>(line: &'a str, tag: &str) -> Option<&'a str> {
    let (head, rest) = line.split_once(':')?;
    head.trim().eq_ignore_ascii_case(tag).then_some(rest)
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: PlayerId = PlayerId::A;
    const B: PlayerId = PlayerId::B;

    fn msg(sender: PlayerId, to: &[PlayerId]) -> Message {
        Message { sender, recipients: to.to_vec(), round: 1, text: "hi".into() }
    }

    #[test]
    fn targeted_delivery() {
        let comm = CommConfig::with_rounds(3, 1);
        let d = route_messages(&[msg(A, &[B])], &comm, 1);
        assert_eq!(d.inboxes[1].len(), 1);
        assert!(d.inboxes[0].is_empty() && d.inboxes[2].is_empty());
    }

    #[test]
    fn removed_edge_is_a_violation() {
        let mut comm = CommConfig::with_rounds(2, 1);
        comm.graph.edges.remove(&(A, B));
        let d = route_messages(&[msg(A, &[B])], &comm, 1);
        assert_eq!(d.violations, vec![GraphViolation { sender: A, recipient: B, round: 1 }]);
        assert!(d.inboxes[1].is_empty());
    }

    #[test]
    fn other_rounds_are_ignored() {
        let comm = CommConfig::with_rounds(2, 2);
        let d = route_messages(&[msg(A, &[B])], &comm, 2);
        assert!(d.inboxes[1].is_empty());
    }

    #[test]
    fn parse_replies() {
        let comm = CommConfig::with_rounds(2, 1);
        assert_eq!(parse_comm_response("PASS", A, 1, &comm), CommTurn::Abstain);
        assert_eq!(
            parse_comm_response("TO: B\nMESSAGE: let us cooperate", A, 1, &comm),
            CommTurn::Send(Message { sender: A, recipients: vec![B], round: 1, text: "let us cooperate".into() })
        );
        match parse_comm_response("I will swerve.", B, 1, &comm) {
            CommTurn::Send(m) => assert_eq!(m.recipients, vec![A]),
            other => panic!("{other:?}"),
        }
        match parse_comm_response("TO: Player A, C\nMESSAGE: x", B, 1, &comm) {
            CommTurn::Send(m) => assert_eq!(m.recipients, vec![A, PlayerId(2)]),
            other => panic!("{other:?}"),
        }
    }
}
