//! Canonical command language understood by the oracle backend.
//!
//! ```text
//! command   := sentence+
//! sentence  := ["Then"] ("move" | "go") "to" zone ("and" | "to") "inspect" target ["first"] "."
//! target    := [article] adjective* class modifier*
//! modifier  := ("with" | "without") [article] word+ ["tag"]
//!            | ("blocking" | "carrying" | "carried by" | "on" | "next to") referent
//! edit      := "Add:" sentence+ | "Also" sentence+
//!            | "Cancel" taskref "." | "Do" taskref "first." | "Inspect" target "first."
//!            | "Actually," "inspect" target "instead of" target "."
//!            | "Actually," "move to" zone "instead of" zone "."
//! taskref   := "the last task" | "the first task" | "the current task"
//!            | "the task at" zone | "the" target ("task" | "inspection")
//! ```

use std::collections::BTreeSet;

use crate::world::{Referent, TargetPredicate};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("cannot parse command: {0}")]
pub struct GrammarError(pub String);

fn err<T>(msg: impl Into<String>) -> Result<T, GrammarError> {
    Err(GrammarError(msg.into()))
}

/// Known object classes and proper names (labels, object ids).
#[derive(Debug, Clone, Default)]
pub struct Vocabulary {
    /// (word sequence, class id), longest first.
    classes: Vec<(Vec<String>, String)>,
    names: BTreeSet<String>,
}

impl Vocabulary {
    pub fn new<C, N>(classes: C, names: N) -> Self
    where
        C: IntoIterator<Item = String>,
        N: IntoIterator<Item = String>,
    {
        let mut classes: Vec<(Vec<String>, String)> = classes
            .into_iter()
            .map(|c| (c.split('_').map(str::to_string).collect(), c))
            .collect();
        classes.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.1.cmp(&b.1)));
        classes.dedup_by(|a, b| a.1 == b.1);
        Self { classes, names: names.into_iter().collect() }
    }

    fn canonical_name(&self, word: &str) -> Option<&str> {
        self.names.iter().find(|n| n.eq_ignore_ascii_case(word)).map(String::as_str)
    }

    /// Longest class whose words match `words[at..]`; the last word may be
    /// plural. Returns the class and the number of words consumed.
    fn class_at(&self, words: &[String], at: usize) -> Option<(&str, usize)> {
        self.classes.iter().find_map(|(cw, id)| {
            let n = cw.len();
            if at + n > words.len() {
                return None;
            }
            let ok = cw.iter().enumerate().all(|(k, w)| {
                let got = &words[at + k];
                got == w || (k == n - 1 && is_plural_of(got, w))
            });
            ok.then_some((id.as_str(), n))
        })
    }
}

fn is_plural_of(word: &str, singular: &str) -> bool {
    word.strip_suffix("es") == Some(singular) || word.strip_suffix('s') == Some(singular)
}

const ARTICLES: [&str; 3] = ["the", "a", "an"];

fn is_article(w: &str) -> bool {
    ARTICLES.contains(&w)
}

/// One "move to ... and inspect ..." sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSentence {
    pub zone: String,
    pub target_text: String,
    pub predicate: TargetPredicate,
    /// Sentence ended in "first" (priority insertion).
    pub first: bool,
}

impl TaskSentence {
    pub fn instruction(&self) -> String {
        format!("inspect {}", self.target_text)
    }
}

/// Which task an edit refers to.
#[derive(Debug, Clone, PartialEq)]
pub enum TaskRef {
    First,
    Last,
    Current,
    Zone(String),
    Target(TargetPredicate),
}

#[derive(Debug, Clone, PartialEq)]
pub enum EditCommand {
    Add { tasks: Vec<TaskSentence>, front: bool },
    Cancel(TaskRef),
    Prioritize(TaskRef),
    ReplaceTarget { target_text: String, predicate: TargetPredicate, old: TaskRef },
    ReplaceZone { zone: String, old: TaskRef },
}

/// Splits on `.`, `!`, `?` that end a sentence (not decimal points).
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut cur = String::new();
    for (i, &c) in chars.iter().enumerate() {
        let terminal = matches!(c, '.' | '!' | '?') && chars.get(i + 1).is_none_or(|n| n.is_whitespace());
        if terminal {
            if !cur.trim().is_empty() {
                out.push(cur.trim().to_string());
            }
            cur.clear();
        } else {
            cur.push(c);
        }
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

fn strip_prefix_ci<'a>(s: &'a str, prefix: &str) -> Option<&'a str> {
    (s.len() >= prefix.len() && s[..prefix.len()].eq_ignore_ascii_case(prefix)).then(|| &s[prefix.len()..])
}

fn strip_suffix_ci<'a>(s: &'a str, suffix: &str) -> Option<&'a str> {
    (s.len() >= suffix.len() && s[s.len() - suffix.len()..].eq_ignore_ascii_case(suffix))
        .then(|| &s[..s.len() - suffix.len()])
}

fn find_ci(s: &str, needle: &str) -> Option<usize> {
    s.to_ascii_lowercase().find(&needle.to_ascii_lowercase())
}

fn strip_article(s: &str) -> &str {
    let s = s.trim();
    ARTICLES
        .iter()
        .find_map(|a| strip_prefix_ci(s, &format!("{a} ")))
        .map(str::trim)
        .unwrap_or(s)
}

/// Parses an initial command into its task sentences.
pub fn parse_command(text: &str, vocab: &Vocabulary) -> Result<Vec<TaskSentence>, GrammarError> {
    let sentences = split_sentences(text);
    if sentences.is_empty() {
        return err("empty command");
    }
    sentences.iter().map(|s| parse_task_sentence(s, vocab)).collect()
}

/// `["Then"] move to <zone> (and|to) inspect <target> ["first"]`
pub fn parse_task_sentence(sentence: &str, vocab: &Vocabulary) -> Result<TaskSentence, GrammarError> {
    let mut s = sentence.trim().trim_start_matches(',').trim();
    for p in ["and then ", "then, ", "then "] {
        if let Some(r) = strip_prefix_ci(s, p) {
            s = r.trim_start();
            break;
        }
    }
    let rest = ["move to ", "go to "]
        .iter()
        .find_map(|p| strip_prefix_ci(s, p))
        .ok_or_else(|| GrammarError(format!("expected \"move to ...\" in {sentence:?}")))?;
    let (zone, target) = [" and inspect ", " to inspect ", " and check "]
        .iter()
        .find_map(|sep| find_ci(rest, sep).map(|i| (&rest[..i], &rest[i + sep.len()..])))
        .ok_or_else(|| GrammarError(format!("expected \"and inspect ...\" in {sentence:?}")))?;
    let zone = strip_article(zone).to_string();
    if zone.is_empty() {
        return err(format!("missing zone in {sentence:?}"));
    }
    let (target, first) = match strip_suffix_ci(target.trim(), " first") {
        Some(t) => (t.trim(), true),
        None => (target.trim(), false),
    };
    let predicate = parse_target(target, vocab, None)?;
    Ok(TaskSentence { zone, target_text: target.to_string(), predicate, first })
}

fn words_of(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| matches!(c, ',' | ';' | ':' | '"' | '\'')).to_ascii_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

fn subwords(words: &[String]) -> Vec<String> {
    words
        .iter()
        .flat_map(|w| w.split('-').filter(|s| !s.is_empty()).map(str::to_string))
        .collect()
}

const MODIFIERS: [&str; 7] = ["with", "without", "blocking", "carrying", "carried", "next", "on"];

/// Compiles a target description into a predicate. `default_class` fills in
/// for "one" (as in "the one carrying the brown boxes").
pub fn parse_target(text: &str, vocab: &Vocabulary, default_class: Option<&str>) -> Result<TargetPredicate, GrammarError> {
    let words = words_of(text);
    let split = words.iter().position(|w| MODIFIERS.contains(&w.as_str())).unwrap_or(words.len());
    let head: Vec<String> = subwords(&words[..split]).into_iter().filter(|w| !is_article(w)).collect();

    let (class, class_at, used) = if head.last().map(String::as_str) == Some("one") {
        let class = default_class.ok_or_else(|| GrammarError(format!("\"one\" without a class in {text:?}")))?;
        (class.to_string(), head.len() - 1, 1)
    } else {
        (0..head.len())
            .find_map(|i| vocab.class_at(&head, i).map(|(c, n)| (c.to_string(), i, n)))
            .ok_or_else(|| GrammarError(format!("no known object class in {text:?}")))?
    };
    if class_at + used != head.len() {
        return err(format!("unexpected words after the object class in {text:?}"));
    }
    let mut pred = TargetPredicate::class_only(class);
    for adj in &head[..class_at] {
        pred = pred.require(adj.clone());
    }

    let mut i = split;
    while i < words.len() {
        let kw = words[i].as_str();
        let (kind, skip) = match kw {
            "with" | "without" => ("attribute", 1),
            "blocking" => ("blocking", 1),
            "carrying" => ("carrying", 1),
            "carried" if words.get(i + 1).map(String::as_str) == Some("by") => ("carried_by", 2),
            "on" => ("carried_by", 1),
            "next" if words.get(i + 1).map(String::as_str) == Some("to") => ("next_to", 2),
            _ => return err(format!("unexpected word {kw:?} in {text:?}")),
        };
        let start = i + skip;
        let mut end = start;
        while end < words.len() {
            let w = words[end].as_str();
            let next_is_mod = words.get(end + 1).is_some_and(|n| MODIFIERS.contains(&n.as_str()));
            if MODIFIERS.contains(&w) || (w == "and" && next_is_mod) {
                break;
            }
            end += 1;
        }
        let phrase = &words[start..end];
        if phrase.is_empty() {
            return err(format!("modifier {kw:?} without an object in {text:?}"));
        }
        if kind == "attribute" {
            let mut parts: Vec<String> = subwords(phrase)
                .into_iter()
                .filter(|w| !is_article(w) && w != "inspection")
                .collect();
            if parts.is_empty() {
                return err(format!("empty attribute in {text:?}"));
            }
            if parts.len() > 1 && parts.last().map(String::as_str) == Some("tag") {
                parts.pop();
                parts.push("tag".into());
            }
            let tag = parts.join("_");
            pred = if kw == "with" { pred.require(tag) } else { pred.forbid(tag) };
        } else {
            pred = pred.related(kind, parse_referent(phrase, vocab, text)?);
        }
        i = end;
        if words.get(i).map(String::as_str) == Some("and") {
            i += 1;
        }
    }
    Ok(pred)
}

fn parse_referent(phrase: &[String], vocab: &Vocabulary, text: &str) -> Result<Referent, GrammarError> {
    let content: Vec<String> = phrase.iter().filter(|w| !is_article(w)).cloned().collect();
    if content.len() == 1 {
        if let Some(name) = vocab.canonical_name(&content[0]) {
            return Ok(Referent::Named(name.to_string()));
        }
    }
    let sub = subwords(&content);
    for i in 0..sub.len() {
        if let Some((class, n)) = vocab.class_at(&sub, i) {
            if i + n == sub.len() {
                return Ok(Referent::Kind { class: class.to_string(), attributes: sub[..i].to_vec() });
            }
        }
    }
    err(format!("unknown referent {:?} in {text:?}", content.join(" ")))
}

fn parse_task_ref(text: &str, vocab: &Vocabulary) -> Result<TaskRef, GrammarError> {
    let t = text.trim();
    let lower = t.to_ascii_lowercase();
    match lower.as_str() {
        "the last task" | "the last one" => return Ok(TaskRef::Last),
        "the first task" | "the first one" => return Ok(TaskRef::First),
        "the current task" | "this task" => return Ok(TaskRef::Current),
        _ => {}
    }
    for p in ["the task at ", "the task in "] {
        if let Some(z) = strip_prefix_ci(t, p) {
            return Ok(TaskRef::Zone(strip_article(z).to_string()));
        }
    }
    let body = [" task", " inspection"]
        .iter()
        .find_map(|s| strip_suffix_ci(t, s))
        .or_else(|| strip_prefix_ci(t, "inspecting "))
        .unwrap_or(t);
    Ok(TaskRef::Target(parse_target(body, vocab, None)?))
}

/// Parses a mid-execution command.
pub fn parse_edit(text: &str, vocab: &Vocabulary) -> Result<EditCommand, GrammarError> {
    let t = text.trim();
    for p in ["add a task:", "add:", "also,", "also "] {
        if let Some(rest) = strip_prefix_ci(t, p) {
            let tasks = parse_command(rest.trim(), vocab)?;
            let front = tasks.iter().any(|s| s.first);
            return Ok(EditCommand::Add { tasks, front });
        }
    }
    let sentences = split_sentences(t);
    let [s] = sentences.as_slice() else {
        return err(format!("expected a single edit sentence, got {}", sentences.len()));
    };
    let s = s.as_str();
    if let Some(rest) = strip_prefix_ci(s, "cancel ") {
        return Ok(EditCommand::Cancel(parse_task_ref(rest, vocab)?));
    }
    if let Some(rest) = strip_prefix_ci(s, "do ") {
        let body = strip_suffix_ci(rest.trim(), " first")
            .ok_or_else(|| GrammarError(format!("expected \"do ... first\" in {s:?}")))?;
        return Ok(EditCommand::Prioritize(parse_task_ref(body, vocab)?));
    }
    if let Some(rest) = strip_prefix_ci(s, "inspect ") {
        if let Some(body) = strip_suffix_ci(rest.trim(), " first") {
            return Ok(EditCommand::Prioritize(TaskRef::Target(parse_target(body, vocab, None)?)));
        }
    }
    if let Some(rest) = strip_prefix_ci(s, "actually,").or_else(|| strip_prefix_ci(s, "actually ")) {
        let rest = rest.trim();
        let i = find_ci(rest, " instead of ")
            .ok_or_else(|| GrammarError(format!("expected \"instead of\" in {s:?}")))?;
        let (new, old) = (&rest[..i], &rest[i + " instead of ".len()..]);
        if let Some(target) = strip_prefix_ci(new, "inspect ") {
            let target = target.trim();
            let predicate = parse_target(target, vocab, None)?;
            let old = TaskRef::Target(parse_target(old, vocab, Some(&predicate.class))?);
            return Ok(EditCommand::ReplaceTarget { target_text: target.to_string(), predicate, old });
        }
        if let Some(zone) = strip_prefix_ci(new, "move to ").or_else(|| strip_prefix_ci(new, "go to ")) {
            return Ok(EditCommand::ReplaceZone {
                zone: strip_article(zone).to_string(),
                old: TaskRef::Zone(strip_article(old).to_string()),
            });
        }
        return err(format!("unsupported correction {s:?}"));
    }
    let tasks = parse_command(t, vocab)?;
    let front = tasks.iter().any(|s| s.first);
    Ok(EditCommand::Add { tasks, front })
}

/// True when `reference` names `task`: same class and every literal of the
/// reference also appears in the task's predicate.
pub fn predicate_refers_to(reference: &TargetPredicate, task: &TargetPredicate) -> bool {
    reference.class == task.class
        && reference.attributes.iter().all(|a| task.attributes.contains(a))
        && reference.relations.iter().all(|r| task.relations.contains(r))
}
