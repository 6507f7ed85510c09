//! Line-oriented text format for models.
//!
//! ```text
//! agents: 2
//! states: left right
//! start: 0.5 0.5
//! actions 0: listen open
//! actions 1: listen open
//! observations 0: hear-left hear-right
//! observations 1: hear-left hear-right
//! T: * : listen listen : left : 0.5
//! O: left : * * : hear-left hear-left : 0.25
//! R: left : open open : -10
//! ```
//!
//! `#` starts a comment. `*` matches every value of its slot. Entries are
//! applied in file order, so later entries override earlier ones, except that
//! two wildcard-free entries for the same index tuple are rejected. Missing
//! T/O entries are 0 and missing R entries are 0.

use std::fmt::{self, Write as _};

use thiserror::Error;

use super::{DecPomdp, ModelParts, PROBABILITY_TOLERANCE};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}, column {column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParseErrorKind {
    Syntax(String),
    UnknownName { set: &'static str, name: String },
    Stochasticity { row: String, sum: f64 },
    Duplicate { entry: String },
    Missing(&'static str),
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::Syntax(msg) => write!(f, "syntax error: {msg}"),
            ParseErrorKind::UnknownName { set, name } => write!(f, "unknown {set} `{name}`"),
            ParseErrorKind::Stochasticity { row, sum } => {
                write!(f, "row `{row}` sums to {sum}, expected 1")
            }
            ParseErrorKind::Duplicate { entry } => write!(f, "duplicate entry for `{entry}`"),
            ParseErrorKind::Missing(what) => write!(f, "missing {what} declaration"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Token<'a> {
    text: &'a str,
    column: usize,
}

/// Splits a comment-free line on `:` and then on whitespace, keeping 1-based
/// character columns.
fn tokenize<'a>(line: &'a str) -> Vec<Vec<Token<'a>>> {
    let mut fields = vec![Vec::new()];
    let mut start: Option<(usize, usize)> = None;
    let mut column = 0;
    let flush = |fields: &mut Vec<Vec<Token<'a>>>, start: &mut Option<(usize, usize)>, end: usize| {
        if let Some((b, c)) = start.take() {
            fields.last_mut().unwrap().push(Token { text: &line[b..end], column: c });
        }
    };
    for (byte, ch) in line.char_indices() {
        column += 1;
        if ch == ':' {
            flush(&mut fields, &mut start, byte);
            fields.push(Vec::new());
        } else if ch.is_whitespace() {
            flush(&mut fields, &mut start, byte);
        } else if start.is_none() {
            start = Some((byte, column));
        }
    }
    flush(&mut fields, &mut start, line.len());
    fields
}

#[derive(Clone, Copy, PartialEq)]
enum Origin {
    Unset,
    Wildcard,
    Specific,
}

struct Table {
    values: Vec<f64>,
    origin: Vec<Origin>,
}

impl Table {
    fn new(len: usize) -> Self {
        Table { values: vec![0.0; len], origin: vec![Origin::Unset; len] }
    }
}

struct Tables {
    transition: Table,
    observation: Table,
    reward: Table,
    transition_line: Vec<usize>,
    observation_line: Vec<usize>,
    n_joint_actions: usize,
    n_joint_observations: usize,
}

#[derive(Default)]
struct Parser {
    line: usize,
    agents: Option<usize>,
    states: Option<Vec<String>>,
    start: Option<(Vec<f64>, usize, usize)>,
    actions: Vec<Option<Vec<String>>>,
    observations: Vec<Option<Vec<String>>>,
    tables: Option<Tables>,
}

fn err(line: usize, column: usize, kind: ParseErrorKind) -> ParseError {
    ParseError { line, column, kind }
}

fn syntax(line: usize, column: usize, msg: impl Into<String>) -> ParseError {
    err(line, column, ParseErrorKind::Syntax(msg.into()))
}

/// Parses and validates a model document.
pub fn parse_model(text: &str) -> Result<DecPomdp, ParseError> {
    let mut parser = Parser::default();
    for (idx, raw) in text.lines().enumerate() {
        parser.line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let fields = tokenize(content);
        parser.statement(&fields)?;
    }
    parser.line = text.lines().count().max(1);
    parser.finish()
}

impl Parser {
    fn statement(&mut self, fields: &[Vec<Token<'_>>]) -> Result<(), ParseError> {
        let line = self.line;
        let head = &fields[0];
        let Some(keyword) = head.first() else {
            return Err(syntax(line, 1, "expected a keyword before `:`"));
        };
        if fields.len() < 2 {
            return Err(syntax(line, keyword.column, "expected `:` after keyword"));
        }
        let rest = &fields[1..];
        match (keyword.text, head.len()) {
            ("agents", 1) => self.agents_line(keyword, rest),
            ("states", 1) => self.states_line(keyword, rest),
            ("start", 1) => self.start_line(keyword, rest),
            ("actions", 2) | ("observations", 2) => self.set_line(keyword, &head[1], rest),
            ("T", 1) => self.transition_line(keyword, rest),
            ("O", 1) => self.observation_line(keyword, rest),
            ("R", 1) => self.reward_line(keyword, rest),
            _ => Err(syntax(line, keyword.column, format!("unrecognized statement `{}`", keyword.text))),
        }
    }

    fn single_field<'a, 'b>(&self, key: &Token<'_>, rest: &'b [Vec<Token<'a>>]) -> Result<&'b [Token<'a>], ParseError> {
        match rest {
            [only] if !only.is_empty() => Ok(only),
            [_] => Err(syntax(self.line, key.column, format!("`{}` needs at least one value", key.text))),
            [_, second, ..] => {
                let col = second.first().map_or(key.column, |t| t.column);
                Err(syntax(self.line, col, "unexpected `:`"))
            }
            [] => unreachable!(),
        }
    }

    fn before_entries(&self, key: &Token<'_>) -> Result<(), ParseError> {
        if self.tables.is_some() {
            return Err(syntax(self.line, key.column, format!("`{}` must precede T/O/R entries", key.text)));
        }
        Ok(())
    }

    fn agents_line(&mut self, key: &Token<'_>, rest: &[Vec<Token<'_>>]) -> Result<(), ParseError> {
        self.before_entries(key)?;
        let values = self.single_field(key, rest)?;
        if self.agents.is_some() {
            return Err(syntax(self.line, key.column, "agents declared twice"));
        }
        let [tok] = values else {
            return Err(syntax(self.line, values[1].column, "expected a single agent count"));
        };
        let n: usize = tok
            .text
            .parse()
            .ok()
            .filter(|&n| (1..=64).contains(&n))
            .ok_or_else(|| syntax(self.line, tok.column, format!("invalid agent count `{}`", tok.text)))?;
        self.agents = Some(n);
        self.actions = vec![None; n];
        self.observations = vec![None; n];
        Ok(())
    }

    fn names(&self, values: &[Token<'_>]) -> Result<Vec<String>, ParseError> {
        let mut out: Vec<String> = Vec::with_capacity(values.len());
        for tok in values {
            if tok.text == "*" {
                return Err(syntax(self.line, tok.column, "`*` cannot be used as a name"));
            }
            if out.iter().any(|n| n == tok.text) {
                return Err(syntax(self.line, tok.column, format!("name `{}` declared twice", tok.text)));
            }
            out.push(tok.text.to_string());
        }
        Ok(out)
    }

    fn states_line(&mut self, key: &Token<'_>, rest: &[Vec<Token<'_>>]) -> Result<(), ParseError> {
        self.before_entries(key)?;
        let values = self.single_field(key, rest)?;
        if self.states.is_some() {
            return Err(syntax(self.line, key.column, "states declared twice"));
        }
        self.states = Some(self.names(values)?);
        Ok(())
    }

    fn start_line(&mut self, key: &Token<'_>, rest: &[Vec<Token<'_>>]) -> Result<(), ParseError> {
        let values = self.single_field(key, rest)?;
        let Some(states) = &self.states else {
            return Err(syntax(self.line, key.column, "start must follow the states declaration"));
        };
        if self.start.is_some() {
            return Err(syntax(self.line, key.column, "start declared twice"));
        }
        if values.len() != states.len() {
            return Err(syntax(
                self.line,
                values[0].column,
                format!("start lists {} probabilities for {} states", values.len(), states.len()),
            ));
        }
        let probs = values.iter().map(|t| self.probability(t)).collect::<Result<Vec<_>, _>>()?;
        self.start = Some((probs, self.line, key.column));
        Ok(())
    }

    fn set_line(&mut self, key: &Token<'_>, index: &Token<'_>, rest: &[Vec<Token<'_>>]) -> Result<(), ParseError> {
        self.before_entries(key)?;
        let values = self.single_field(key, rest)?;
        let Some(n) = self.agents else {
            return Err(syntax(self.line, key.column, "agents must be declared first"));
        };
        let agent: usize = index
            .text
            .parse()
            .ok()
            .filter(|&i| i < n)
            .ok_or_else(|| syntax(self.line, index.column, format!("invalid agent index `{}`", index.text)))?;
        let names = self.names(values)?;
        let slot = if key.text == "actions" { &mut self.actions[agent] } else { &mut self.observations[agent] };
        if slot.is_some() {
            return Err(syntax(self.line, key.column, format!("{} {agent} declared twice", key.text)));
        }
        *slot = Some(names);
        Ok(())
    }

    fn number(&self, tok: &Token<'_>) -> Result<f64, ParseError> {
        tok.text
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| syntax(self.line, tok.column, format!("`{}` is not a finite number", tok.text)))
    }

    fn probability(&self, tok: &Token<'_>) -> Result<f64, ParseError> {
        let p = self.number(tok)?;
        if !(0.0..=1.0).contains(&p) {
            return Err(syntax(self.line, tok.column, format!("probability {p} is outside [0, 1]")));
        }
        Ok(p)
    }

    /// Builds the tables on the first T/O/R entry, once every set is known.
    fn ensure_tables(&mut self, key: &Token<'_>) -> Result<(), ParseError> {
        if self.tables.is_some() {
            return Ok(());
        }
        let missing = |what| err(self.line, key.column, ParseErrorKind::Missing(what));
        if self.agents.is_none() {
            return Err(missing("agents"));
        }
        let Some(states) = &self.states else { return Err(missing("states")) };
        if self.actions.iter().any(Option::is_none) {
            return Err(missing("actions"));
        }
        if self.observations.iter().any(Option::is_none) {
            return Err(missing("observations"));
        }
        let s = states.len();
        let product = |sets: &[Option<Vec<String>>]| {
            sets.iter().try_fold(1usize, |acc, set| acc.checked_mul(set.as_ref().unwrap().len()))
        };
        let too_big = || syntax(self.line, key.column, "model tables are too large");
        let ja = product(&self.actions).ok_or_else(too_big)?;
        let jo = product(&self.observations).ok_or_else(too_big)?;
        let size = |a: usize, b: usize, c: usize| a.checked_mul(b).and_then(|x| x.checked_mul(c)).filter(|&n| n <= 1 << 26);
        let t_len = size(s, ja, s).ok_or_else(too_big)?;
        let o_len = size(s, ja, jo).ok_or_else(too_big)?;
        self.tables = Some(Tables {
            transition: Table::new(t_len),
            observation: Table::new(o_len),
            reward: Table::new(s * ja),
            transition_line: vec![0; s * ja],
            observation_line: vec![0; s * ja],
            n_joint_actions: ja,
            n_joint_observations: jo,
        });
        Ok(())
    }

    /// Resolves one token against a name list, `*` yielding every index.
    fn resolve(&self, tok: &Token<'_>, names: &[String], set: &'static str) -> Result<Vec<usize>, ParseError> {
        if tok.text == "*" {
            return Ok((0..names.len()).collect());
        }
        names
            .iter()
            .position(|n| n == tok.text)
            .map(|i| vec![i])
            .ok_or_else(|| err(self.line, tok.column, ParseErrorKind::UnknownName { set, name: tok.text.to_string() }))
    }

    fn resolve_one_field(&self, field: &[Token<'_>], names: &[String], set: &'static str, anchor: usize) -> Result<Vec<usize>, ParseError> {
        match field {
            [tok] => self.resolve(tok, names, set),
            [] => Err(syntax(self.line, anchor, format!("expected a {set}"))),
            [_, extra, ..] => Err(syntax(self.line, extra.column, format!("expected a single {set}"))),
        }
    }

    /// Resolves a per-agent field to every joint index it matches.
    fn resolve_joint(&self, field: &[Token<'_>], sets: &[Option<Vec<String>>], set: &'static str, anchor: usize) -> Result<Vec<usize>, ParseError> {
        if field.len() != sets.len() {
            let col = field.get(sets.len()).or(field.last()).map_or(anchor, |t| t.column);
            return Err(syntax(self.line, col, format!("expected {} {set}s, found {}", sets.len(), field.len())));
        }
        let mut joint = vec![0usize];
        for (tok, names) in field.iter().zip(sets) {
            let names = names.as_ref().unwrap();
            let choices = self.resolve(tok, names, set)?;
            joint = joint
                .iter()
                .flat_map(|&prefix| choices.iter().map(move |&c| prefix * names.len() + c))
                .collect();
        }
        Ok(joint)
    }

    fn expect_fields(&self, key: &Token<'_>, rest: &[Vec<Token<'_>>], n: usize) -> Result<(), ParseError> {
        if rest.len() != n {
            let col = rest.get(n).and_then(|f| f.first()).map_or(key.column, |t| t.column);
            return Err(syntax(self.line, col, format!("`{}` entries need {n} `:`-separated fields, found {}", key.text, rest.len())));
        }
        Ok(())
    }

    fn value_field(&self, key: &Token<'_>, field: &[Token<'_>], probability: bool) -> Result<f64, ParseError> {
        match field {
            [tok] if probability => self.probability(tok),
            [tok] => self.number(tok),
            [] => Err(syntax(self.line, key.column, "missing value")),
            [_, extra, ..] => Err(syntax(self.line, extra.column, "expected a single value")),
        }
    }

    fn transition_line(&mut self, key: &Token<'_>, rest: &[Vec<Token<'_>>]) -> Result<(), ParseError> {
        self.ensure_tables(key)?;
        self.expect_fields(key, rest, 4)?;
        let states = self.states.as_ref().unwrap();
        let from = self.resolve_one_field(&rest[0], states, "state", key.column)?;
        let ja = self.resolve_joint(&rest[1], &self.actions, "action", key.column)?;
        let to = self.resolve_one_field(&rest[2], states, "state", key.column)?;
        let p = self.value_field(key, &rest[3], true)?;
        let specific = !has_wildcard(rest);
        let dup = self.duplicate(key, rest);
        let (line, s_count) = (self.line, states.len());
        let tables = self.tables.as_mut().unwrap();
        let nja = tables.n_joint_actions;
        for &s in &from {
            for &a in &ja {
                tables.transition_line[s * nja + a] = line;
                for &s2 in &to {
                    let idx = (s * nja + a) * s_count + s2;
                    assign(&mut tables.transition, idx, p, specific).map_err(|_| dup.clone())?;
                }
            }
        }
        Ok(())
    }

    fn observation_line(&mut self, key: &Token<'_>, rest: &[Vec<Token<'_>>]) -> Result<(), ParseError> {
        self.ensure_tables(key)?;
        self.expect_fields(key, rest, 4)?;
        let states = self.states.as_ref().unwrap();
        let to = self.resolve_one_field(&rest[0], states, "state", key.column)?;
        let ja = self.resolve_joint(&rest[1], &self.actions, "action", key.column)?;
        let jo = self.resolve_joint(&rest[2], &self.observations, "observation", key.column)?;
        let p = self.value_field(key, &rest[3], true)?;
        let specific = !has_wildcard(rest);
        let dup = self.duplicate(key, rest);
        let line = self.line;
        let tables = self.tables.as_mut().unwrap();
        let (nja, njo) = (tables.n_joint_actions, tables.n_joint_observations);
        for &s2 in &to {
            for &a in &ja {
                tables.observation_line[s2 * nja + a] = line;
                for &o in &jo {
                    let idx = (s2 * nja + a) * njo + o;
                    assign(&mut tables.observation, idx, p, specific).map_err(|_| dup.clone())?;
                }
            }
        }
        Ok(())
    }

    fn reward_line(&mut self, key: &Token<'_>, rest: &[Vec<Token<'_>>]) -> Result<(), ParseError> {
        self.ensure_tables(key)?;
        self.expect_fields(key, rest, 3)?;
        let states = self.states.as_ref().unwrap();
        let from = self.resolve_one_field(&rest[0], states, "state", key.column)?;
        let ja = self.resolve_joint(&rest[1], &self.actions, "action", key.column)?;
        let r = self.value_field(key, &rest[2], false)?;
        let specific = !has_wildcard(rest);
        let dup = self.duplicate(key, rest);
        let tables = self.tables.as_mut().unwrap();
        let nja = tables.n_joint_actions;
        for &s in &from {
            for &a in &ja {
                assign(&mut tables.reward, s * nja + a, r, specific).map_err(|_| dup.clone())?;
            }
        }
        Ok(())
    }

    fn duplicate(&self, key: &Token<'_>, rest: &[Vec<Token<'_>>]) -> ParseError {
        let entry = std::iter::once(key.text.to_string())
            .chain(rest[..rest.len() - 1].iter().map(|f| f.iter().map(|t| t.text).collect::<Vec<_>>().join(" ")))
            .collect::<Vec<_>>()
            .join(" : ");
        err(self.line, key.column, ParseErrorKind::Duplicate { entry })
    }

    fn finish(mut self) -> Result<DecPomdp, ParseError> {
        let end = self.line;
        let missing = |what| err(end, 1, ParseErrorKind::Missing(what));
        if self.agents.is_none() {
            return Err(missing("agents"));
        }
        let Some(states) = self.states.clone() else { return Err(missing("states")) };
        if self.actions.iter().any(Option::is_none) {
            return Err(missing("actions"));
        }
        if self.observations.iter().any(Option::is_none) {
            return Err(missing("observations"));
        }
        let Some((start, start_line, start_col)) = self.start.take() else { return Err(missing("start")) };
        let start_sum: f64 = start.iter().sum();
        if (start_sum - 1.0).abs() > PROBABILITY_TOLERANCE {
            return Err(err(
                start_line,
                start_col,
                ParseErrorKind::Stochasticity { row: "start".into(), sum: start_sum },
            ));
        }
        if self.tables.is_none() {
            let key = Token { text: "end of document", column: 1 };
            self.ensure_tables(&key)?;
        }
        let tables = self.tables.take().unwrap();
        let actions: Vec<Vec<String>> = self.actions.into_iter().map(Option::unwrap).collect();
        let observations: Vec<Vec<String>> = self.observations.into_iter().map(Option::unwrap).collect();
        let label = |names: &[Vec<String>], mut joint: usize| {
            let mut parts = Vec::with_capacity(names.len());
            for set in names.iter().rev() {
                parts.push(set[joint % set.len()].as_str());
                joint /= set.len();
            }
            parts.reverse();
            parts.join(" ")
        };

        let (s_count, nja, njo) = (states.len(), tables.n_joint_actions, tables.n_joint_observations);
        for s in 0..s_count {
            for a in 0..nja {
                let row = &tables.transition.values[(s * nja + a) * s_count..][..s_count];
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
                    let line = match tables.transition_line[s * nja + a] {
                        0 => end,
                        l => l,
                    };
                    let row = format!("T: {} : {}", states[s], label(&actions, a));
                    return Err(err(line, 1, ParseErrorKind::Stochasticity { row, sum }));
                }
            }
        }
        for s2 in 0..s_count {
            for a in 0..nja {
                let row = &tables.observation.values[(s2 * nja + a) * njo..][..njo];
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
                    let line = match tables.observation_line[s2 * nja + a] {
                        0 => end,
                        l => l,
                    };
                    let row = format!("O: {} : {}", states[s2], label(&actions, a));
                    return Err(err(line, 1, ParseErrorKind::Stochasticity { row, sum }));
                }
            }
        }

        DecPomdp::new(ModelParts {
            states,
            actions,
            observations,
            transition: tables.transition.values,
            observation: tables.observation.values,
            reward: tables.reward.values,
            start,
        })
        .map_err(|e| syntax(end, 1, e.to_string()))
    }
}

fn has_wildcard(rest: &[Vec<Token<'_>>]) -> bool {
    rest.iter().flatten().any(|t| t.text == "*")
}

fn assign(table: &mut Table, idx: usize, value: f64, specific: bool) -> Result<(), ()> {
    if specific && table.origin[idx] == Origin::Specific {
        return Err(());
    }
    table.values[idx] = value;
    table.origin[idx] = if specific { Origin::Specific } else { Origin::Wildcard };
    Ok(())
}

/// Writes a model in the text format. Zero-valued T/O/R entries are omitted;
/// numbers use the shortest representation that parses back to the same bits.
pub fn serialize_model(model: &DecPomdp) -> String {
    let mut out = String::new();
    let n = model.n_agents();
    writeln!(out, "agents: {n}").unwrap();
    writeln!(out, "states: {}", model.states().join(" ")).unwrap();
    let start: Vec<String> = model.start().weights().iter().map(|p| format!("{p}")).collect();
    writeln!(out, "start: {}", start.join(" ")).unwrap();
    for i in 0..n {
        writeln!(out, "actions {i}: {}", model.actions(i).join(" ")).unwrap();
    }
    for i in 0..n {
        writeln!(out, "observations {i}: {}", model.observations(i).join(" ")).unwrap();
    }
    let states = model.states();
    for s in 0..model.n_states() {
        for ja in 0..model.n_joint_actions() {
            let label = model.joint_action_label(ja);
            for (s2, &p) in model.transition_row(s, ja).iter().enumerate() {
                if p != 0.0 {
                    writeln!(out, "T: {} : {label} : {} : {p}", states[s], states[s2]).unwrap();
                }
            }
        }
    }
    for s2 in 0..model.n_states() {
        for ja in 0..model.n_joint_actions() {
            let label = model.joint_action_label(ja);
            for (jo, &p) in model.observation_row(s2, ja).iter().enumerate() {
                if p != 0.0 {
                    writeln!(out, "O: {} : {label} : {} : {p}", states[s2], model.joint_observation_label(jo)).unwrap();
                }
            }
        }
    }
    for s in 0..model.n_states() {
        for ja in 0..model.n_joint_actions() {
            let r = model.reward(s, ja);
            if r != 0.0 {
                writeln!(out, "R: {} : {} : {r}", states[s], model.joint_action_label(ja)).unwrap();
            }
        }
    }
    out
}
