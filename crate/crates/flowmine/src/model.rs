//! Messages, traces, and the structural-causality predicate.
//!
//! A message is a quadruple `src:dest:cmd:type` describing one communication
//! event between components. Traces are ordered sequences of message ids,
//! obtained by interleaving concurrent flow executions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stable integer key for a message within a dictionary.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct MsgId(pub u32);

impl fmt::Display for MsgId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Whether a message is a request or a response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MessageKind {
    Request,
    Response,
}

impl MessageKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::Request => "req",
            MessageKind::Response => "resp",
        }
    }
}

/// One communication event type: source, destination, operation, and kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub id: MsgId,
    pub src: String,
    pub dest: String,
    pub cmd: String,
    pub kind: MessageKind,
}

impl Message {
    /// Renders the quadruple as `src:dest:cmd:type`.
    pub fn quadruple(&self) -> String {
        format!("{}:{}:{}:{}", self.src, self.dest, self.cmd, self.kind.as_str())
    }
}

/// Structural causality: `a` can cause `b` when `a`'s destination component
/// is `b`'s source component. Decided from attributes alone; trace data is
/// never consulted.
pub fn causal(a: &Message, b: &Message) -> bool {
    a.dest == b.src
}

/// The message vocabulary plus the user-designated initial and terminal sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageDictionary {
    pub messages: BTreeMap<MsgId, Message>,
    pub initial: BTreeSet<MsgId>,
    pub terminal: BTreeSet<MsgId>,
}

impl MessageDictionary {
    pub fn message(&self, id: MsgId) -> Option<&Message> {
        self.messages.get(&id)
    }

    pub fn is_initial(&self, id: MsgId) -> bool {
        self.initial.contains(&id)
    }

    pub fn is_terminal(&self, id: MsgId) -> bool {
        self.terminal.contains(&id)
    }

    /// Structural causality looked up by id. False when either id is unknown.
    pub fn causal_ids(&self, a: MsgId, b: MsgId) -> bool {
        match (self.messages.get(&a), self.messages.get(&b)) {
            (Some(ma), Some(mb)) => causal(ma, mb),
            _ => false,
        }
    }

    /// Serializes back to the message-definition file format. Reparsing the
    /// output yields an identical dictionary.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for msg in self.messages.values() {
            out.push_str(&format!("{} ({})\n", msg.id, msg.quadruple()));
        }
        out.push_str(&format!("initial = {{{}}}\n", join_ids(&self.initial)));
        out.push_str(&format!("terminal = {{{}}}\n", join_ids(&self.terminal)));
        out
    }
}

fn join_ids(ids: &BTreeSet<MsgId>) -> String {
    ids.iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// One interleaved execution trace: an ordered sequence of message ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub events: Vec<MsgId>,
}

impl Trace {
    pub fn new(events: Vec<MsgId>) -> Self {
        Trace { events }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// The mining input: an ordered list of traces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceSet {
    pub traces: Vec<Trace>,
}

impl TraceSet {
    pub fn new(traces: Vec<Trace>) -> Self {
        TraceSet { traces }
    }

    pub fn total_messages(&self) -> usize {
        self.traces.iter().map(Trace::len).sum()
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for trace in &self.traces {
            let line = trace
                .events
                .iter()
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .join(" ");
            out.push_str(&line);
            out.push('\n');
        }
        out
    }
}

fn valid_token(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(pos) => &line[..pos],
        None => line,
    }
}

/// Parses a message-definition file.
///
/// Format, one declaration per line:
///
/// ```text
/// 1 (cpu0:cache:rd:req)
/// initial = {1,3}
/// terminal = {2,4}
/// ```
///
/// `#` starts a comment to end of line; blank lines are ignored.
pub fn parse_message_definitions(text: &str) -> Result<MessageDictionary> {
    let mut messages: BTreeMap<MsgId, Message> = BTreeMap::new();
    let mut quadruples: BTreeSet<String> = BTreeSet::new();
    let mut initial: Option<Vec<MsgId>> = None;
    let mut terminal: Option<Vec<MsgId>> = None;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("initial") {
            initial = Some(parse_directive(rest, lineno)?);
            continue;
        }
        if let Some(rest) = line.strip_prefix("terminal") {
            terminal = Some(parse_directive(rest, lineno)?);
            continue;
        }
        let msg = parse_message_line(line, lineno)?;
        if messages.contains_key(&msg.id) {
            return Err(Error::DuplicateId {
                line: lineno,
                id: msg.id,
            });
        }
        let quad = msg.quadruple();
        if !quadruples.insert(quad.clone()) {
            return Err(Error::DuplicateQuadruple { line: lineno, quad });
        }
        messages.insert(msg.id, msg);
    }

    if messages.is_empty() {
        return Err(Error::EmptyDictionary);
    }

    let initial: BTreeSet<MsgId> = initial.unwrap_or_default().into_iter().collect();
    let terminal: BTreeSet<MsgId> = terminal.unwrap_or_default().into_iter().collect();
    for &id in &initial {
        if !messages.contains_key(&id) {
            return Err(Error::UndeclaredDirective { set: "initial", id });
        }
    }
    for &id in &terminal {
        if !messages.contains_key(&id) {
            return Err(Error::UndeclaredDirective { set: "terminal", id });
        }
    }
    if let Some(&id) = initial.intersection(&terminal).next() {
        return Err(Error::InitialTerminalOverlap { id });
    }

    Ok(MessageDictionary {
        messages,
        initial,
        terminal,
    })
}

fn parse_directive(rest: &str, lineno: usize) -> Result<Vec<MsgId>> {
    let rest = rest.trim();
    let rest = rest.strip_prefix('=').ok_or_else(|| Error::Malformed {
        line: lineno,
        reason: "expected `= {...}` after directive name".into(),
    })?;
    let rest = rest.trim();
    let inner = rest
        .strip_prefix('{')
        .and_then(|r| r.strip_suffix('}'))
        .ok_or_else(|| Error::Malformed {
            line: lineno,
            reason: "expected id set in braces, e.g. {1,3}".into(),
        })?;
    let mut ids = Vec::new();
    for part in inner.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let id: u32 = part.parse().map_err(|_| Error::Malformed {
            line: lineno,
            reason: format!("invalid message id `{part}`"),
        })?;
        ids.push(MsgId(id));
    }
    Ok(ids)
}

fn parse_message_line(line: &str, lineno: usize) -> Result<Message> {
    let malformed = |reason: &str| Error::Malformed {
        line: lineno,
        reason: reason.to_string(),
    };
    let (id_part, quad_part) = line
        .split_once(char::is_whitespace)
        .ok_or_else(|| malformed("expected `<id> (src:dest:cmd:type)`"))?;
    let id: u32 = id_part
        .parse()
        .map_err(|_| malformed(&format!("invalid message id `{id_part}`")))?;
    if id == 0 {
        return Err(malformed("message ids are positive integers"));
    }
    let quad = quad_part
        .trim()
        .strip_prefix('(')
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| malformed("quadruple must be parenthesized"))?;
    let fields: Vec<&str> = quad.split(':').collect();
    if fields.len() != 4 {
        return Err(malformed("quadruple must have exactly four `:`-separated fields"));
    }
    for field in &fields {
        if !valid_token(field) {
            return Err(malformed(&format!("invalid token `{field}`")));
        }
    }
    let kind = match fields[3] {
        "req" => MessageKind::Request,
        "resp" => MessageKind::Response,
        other => {
            return Err(malformed(&format!(
                "message type must be `req` or `resp`, got `{other}`"
            )))
        }
    };
    Ok(Message {
        id: MsgId(id),
        src: fields[0].to_string(),
        dest: fields[1].to_string(),
        cmd: fields[2].to_string(),
        kind,
    })
}

/// Parses a trace file: one trace per line, ids separated by spaces,
/// `#` comments, blank lines ignored. Ids not present in `dict` are a hard
/// error; silent vocabulary drift would corrupt every downstream statistic.
pub fn parse_traces(text: &str, dict: &MessageDictionary) -> Result<TraceSet> {
    let mut traces = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = strip_comment(raw);
        if line.trim().is_empty() {
            continue;
        }
        let mut events = Vec::new();
        let mut col = 0usize;
        for part in line.split(' ') {
            col += 1; // column counts tokens, 1-based
            let part_t = part.trim();
            if part_t.is_empty() {
                col -= 1;
                continue;
            }
            let id: u32 = part_t.parse().map_err(|_| Error::Malformed {
                line: lineno,
                reason: format!("invalid message id `{part_t}`"),
            })?;
            let id = MsgId(id);
            if !dict.messages.contains_key(&id) {
                return Err(Error::UnknownId {
                    line: lineno,
                    column: col,
                    id,
                });
            }
            events.push(id);
        }
        traces.push(Trace::new(events));
    }
    Ok(TraceSet::new(traces))
}
