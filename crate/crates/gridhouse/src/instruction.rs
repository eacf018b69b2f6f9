//! Goal-statement generation from templates with synonym injection, and the
//! deterministic context predictor that parses statements back into the
//! task-relevant object triple.

use std::collections::BTreeMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::{ObjectCategory, TaskFamily, TaskSpec};

/// A goal statement: an ordered word list, no step-by-step instructions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instruction {
    pub tokens: Vec<String>,
}

impl Instruction {
    pub fn from_text(text: &str) -> Self {
        Instruction {
            tokens: text.split_whitespace().map(|t| t.to_lowercase()).collect(),
        }
    }

    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

impl std::fmt::Display for Instruction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.text())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Seen,
    Unseen,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhraseEntry {
    pub phrase: String,
    pub split: SplitTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plural: Option<String>,
}

impl PhraseEntry {
    fn new(phrase: &str, split: SplitTag) -> Self {
        PhraseEntry {
            phrase: phrase.to_string(),
            split,
            plural: None,
        }
    }

    fn with_plural(phrase: &str, split: SplitTag, plural: &str) -> Self {
        PhraseEntry {
            phrase: phrase.to_string(),
            split,
            plural: Some(plural.to_string()),
        }
    }

    pub fn plural_form(&self) -> String {
        if let Some(p) = &self.plural {
            return p.clone();
        }
        pluralize_phrase(&self.phrase)
    }
}

fn pluralize_phrase(phrase: &str) -> String {
    // "bar of soap" pluralizes its head; everything else its last word
    if let Some(pos) = phrase.find(" of ") {
        let (head, tail) = phrase.split_at(pos);
        return format!("{}{}", pluralize_word(head), tail);
    }
    match phrase.rsplit_once(' ') {
        Some((rest, last)) => format!("{rest} {}", pluralize_word(last)),
        None => pluralize_word(phrase),
    }
}

fn pluralize_word(word: &str) -> String {
    if let Some(stem) = word.strip_suffix("fe") {
        format!("{stem}ves")
    } else if let Some(stem) = word.strip_suffix('f') {
        format!("{stem}ves")
    } else if word.ends_with("ch")
        || word.ends_with("sh")
        || word.ends_with('s')
        || word.ends_with('x')
        || word.ends_with('o')
    {
        format!("{word}es")
    } else {
        format!("{word}s")
    }
}

/// Surface-form table: category to phrases, each tagged with the split it
/// belongs to. Phrase-to-category mapping is unambiguous within a lexicon.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Lexicon {
    pub entries: BTreeMap<ObjectCategory, Vec<PhraseEntry>>,
}

impl Lexicon {
    /// The built-in lexicon used by generated suites.
    pub fn builtin() -> Self {
        use ObjectCategory::*;
        use SplitTag::{Seen, Unseen};
        let mut entries: BTreeMap<ObjectCategory, Vec<PhraseEntry>> = BTreeMap::new();
        let mut add = |cat: ObjectCategory, list: Vec<PhraseEntry>| {
            entries.insert(cat, list);
        };
        add(
            Apple,
            vec![
                PhraseEntry::new("apple", Seen),
                PhraseEntry::new("fruit", Unseen),
                PhraseEntry::new("red one", Unseen),
            ],
        );
        add(
            Bowl,
            vec![
                PhraseEntry::new("bowl", Seen),
                PhraseEntry::new("mixing bowl", Unseen),
            ],
        );
        add(
            Bread,
            vec![
                PhraseEntry::new("bread", Seen),
                PhraseEntry::with_plural("loaf", Unseen, "loaves"),
            ],
        );
        add(
            Cabinet,
            vec![
                PhraseEntry::new("cabinet", Seen),
                PhraseEntry::new("cupboard", Unseen),
            ],
        );
        add(
            CounterTop,
            vec![
                PhraseEntry::new("counter", Seen),
                PhraseEntry::new("countertop", Seen),
                PhraseEntry::new("counter top", Unseen),
            ],
        );
        add(
            Cup,
            vec![
                PhraseEntry::new("cup", Seen),
                PhraseEntry::new("glass", Unseen),
            ],
        );
        add(
            Drawer,
            vec![
                PhraseEntry::new("drawer", Seen),
                PhraseEntry::new("sliding drawer", Unseen),
            ],
        );
        add(
            Egg,
            vec![
                PhraseEntry::new("egg", Seen),
                PhraseEntry::new("hen egg", Unseen),
            ],
        );
        add(
            Faucet,
            vec![
                PhraseEntry::new("faucet", Seen),
                PhraseEntry::new("tap", Unseen),
            ],
        );
        add(
            Fork,
            vec![
                PhraseEntry::new("fork", Seen),
                PhraseEntry::new("dinner fork", Unseen),
            ],
        );
        add(
            Fridge,
            vec![
                PhraseEntry::new("fridge", Seen),
                PhraseEntry::new("refrigerator", Unseen),
            ],
        );
        add(
            GarbageCan,
            vec![
                PhraseEntry::new("trash bin", Seen),
                PhraseEntry::new("garbage can", Seen),
                PhraseEntry::new("trash can", Unseen),
                PhraseEntry::new("bin", Unseen),
            ],
        );
        add(
            Knife,
            vec![
                PhraseEntry::with_plural("knife", Seen, "knives"),
                PhraseEntry::new("blade", Unseen),
            ],
        );
        add(
            Ladle,
            vec![
                PhraseEntry::new("ladle", Seen),
                PhraseEntry::new("soup ladle", Unseen),
            ],
        );
        add(
            Lamp,
            vec![
                PhraseEntry::new("lamp", Seen),
                PhraseEntry::new("desk lamp", Seen),
                PhraseEntry::new("light", Unseen),
            ],
        );
        add(
            Lettuce,
            vec![
                PhraseEntry::new("lettuce", Seen),
                PhraseEntry::new("salad greens", Unseen),
            ],
        );
        add(
            Microwave,
            vec![
                PhraseEntry::new("microwave", Seen),
                PhraseEntry::new("microwave oven", Unseen),
            ],
        );
        add(
            Mug,
            vec![
                PhraseEntry::new("mug", Seen),
                PhraseEntry::new("coffee cup", Unseen),
            ],
        );
        add(
            Pan,
            vec![
                PhraseEntry::new("pan", Seen),
                PhraseEntry::new("frying pan", Unseen),
            ],
        );
        add(
            Plate,
            vec![
                PhraseEntry::new("plate", Seen),
                PhraseEntry::with_plural("dish", Unseen, "dishes"),
            ],
        );
        add(
            Potato,
            vec![
                PhraseEntry::new("potato", Seen),
                PhraseEntry::new("spud", Unseen),
            ],
        );
        add(
            Shelf,
            vec![
                PhraseEntry::with_plural("shelf", Seen, "shelves"),
                PhraseEntry::new("shelving unit", Unseen),
            ],
        );
        add(
            SinkBasin,
            vec![
                PhraseEntry::new("sink", Seen),
                PhraseEntry::new("sink basin", Seen),
                PhraseEntry::new("basin", Unseen),
            ],
        );
        add(
            SoapBar,
            vec![
                PhraseEntry::new("soap bar", Seen),
                PhraseEntry::new("bar of soap", Seen),
                PhraseEntry::new("soap cake", Unseen),
            ],
        );
        add(
            SoapBottle,
            vec![
                PhraseEntry::new("soap bottle", Seen),
                PhraseEntry::new("bottle of soap", Unseen),
            ],
        );
        add(
            Spoon,
            vec![
                PhraseEntry::new("spoon", Seen),
                PhraseEntry::new("teaspoon", Unseen),
            ],
        );
        add(
            Table,
            vec![
                PhraseEntry::new("table", Seen),
                PhraseEntry::new("dining table", Unseen),
            ],
        );
        add(
            TissueBox,
            vec![
                PhraseEntry::new("tissue box", Seen),
                PhraseEntry::new("box of tissues", Unseen),
            ],
        );
        add(
            Tomato,
            vec![
                PhraseEntry::new("tomato", Seen),
                PhraseEntry::new("garden tomato", Unseen),
            ],
        );
        add(
            Watch,
            vec![
                PhraseEntry::new("watch", Seen),
                PhraseEntry::new("wrist watch", Unseen),
                PhraseEntry::new("timepiece", Unseen),
            ],
        );
        Lexicon { entries }
    }

    pub fn phrases(&self, cat: ObjectCategory) -> &[PhraseEntry] {
        self.entries.get(&cat).map(|v| v.as_slice()).unwrap_or(&[])
    }

    /// All surface forms (singular and plural) mapped to their category,
    /// tokenized, longest first.
    pub fn phrase_table(&self) -> Vec<(Vec<String>, ObjectCategory)> {
        let mut table = Vec::new();
        for (cat, list) in &self.entries {
            for entry in list {
                for form in [entry.phrase.clone(), entry.plural_form()] {
                    let toks: Vec<String> =
                        form.split_whitespace().map(|t| t.to_string()).collect();
                    if !table.iter().any(|(t, _)| *t == toks) {
                        table.push((toks, *cat));
                    }
                }
            }
        }
        table.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.0.cmp(&b.0)));
        table
    }

    /// Single-word seen-split surface forms only: the vocabulary a shallow
    /// matcher fit to seen data can recognize. Multi-word phrases and unseen
    /// synonyms are invisible to it.
    pub fn single_token_table(&self) -> BTreeMap<String, ObjectCategory> {
        let mut table = BTreeMap::new();
        for (cat, list) in &self.entries {
            for entry in list {
                if entry.split != SplitTag::Seen {
                    continue;
                }
                for form in [entry.phrase.clone(), entry.plural_form()] {
                    if !form.contains(' ') {
                        table.insert(form, *cat);
                    }
                }
            }
        }
        table
    }
}

/// The task-relevant object triple extracted from an instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Context {
    pub target: ObjectCategory,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub carrier: Option<ObjectCategory>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub destination: Option<ObjectCategory>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum ParseError {
    #[error("no known object mentioned")]
    NoObjectMention,
    #[error("unassignable mention {0:?}")]
    UnassignedMention(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstructionGenError {
    #[error("lexicon lacks a {split:?} phrase for {category}")]
    MissingCoverage {
        category: ObjectCategory,
        split: SplitTag,
    },
}

// ----------------------------------------------------------------------
// Templates
// ----------------------------------------------------------------------

/// Template text uses `{O}` for the target phrase, `{Os}` plural target,
/// `{M}` carrier, `{R}` destination. Articles agree at render time.
pub fn templates(family: TaskFamily, sliced: bool) -> &'static [&'static str] {
    match (family, sliced) {
        (TaskFamily::PickPlace, false) => &[
            "put a {O} on the {R}",
            "place a {O} on the {R}",
            "move a {O} to the {R}",
            "put a {O} in the {R}",
        ],
        (TaskFamily::PickPlace, true) => &[
            "put a {O} slice on the {R}",
            "place a slice of {O} on the {R}",
            "put a sliced {O} in the {R}",
        ],
        (TaskFamily::PickTwoPlace, false) => &[
            "move two {Os} to the {R}",
            "put two {Os} on the {R}",
            "throw two {Os} in the {R}",
        ],
        (TaskFamily::PickTwoPlace, true) => &[
            "move two {O} slices to the {R}",
            "put two slices of {O} on the {R}",
            "move two sliced {Os} to the {R}",
        ],
        (TaskFamily::CleanPlace, _) => &[
            "put a clean {O} in the {R}",
            "wash a {O} and put it in the {R}",
            "clean a {O} and put it on the {R}",
            "rinse a {O} then put it on the {R}",
        ],
        (TaskFamily::HeatPlace, _) => &[
            "put a heated {O} on the {R}",
            "heat a {O} and put it on the {R}",
            "warm a {O} then put it in the {R}",
            "put a hot {O} on the {R}",
        ],
        (TaskFamily::CoolPlace, _) => &[
            "put a chilled {O} on the {R}",
            "cool a {O} and put it on the {R}",
            "chill a {O} then put it in the {R}",
            "put a cold {O} on the {R}",
        ],
        (TaskFamily::ExamineInLight, _) => &[
            "examine a {O} under the {R}",
            "look at a {O} under the {R}",
            "inspect a {O} by the {R}",
        ],
        (TaskFamily::PickPlaceMovableReceptacle, _) => &[
            "place a {O} in a {M} on a {R}",
            "put a {O} in a {M} and put it on the {R}",
            "move a {O} in a {M} to the {R}",
            "put a {M} with a {O} in it in the {R}",
        ],
    }
}

fn choose_phrase<'l>(
    lexicon: &'l Lexicon,
    cat: ObjectCategory,
    split: SplitTag,
    force_unseen: bool,
    rng: &mut ChaCha8Rng,
) -> Result<&'l PhraseEntry, InstructionGenError> {
    let pool: Vec<&PhraseEntry> = lexicon
        .phrases(cat)
        .iter()
        .filter(|p| {
            if force_unseen {
                p.split == SplitTag::Unseen
            } else {
                match split {
                    SplitTag::Seen => p.split == SplitTag::Seen,
                    SplitTag::Unseen => true,
                }
            }
        })
        .collect();
    if pool.is_empty() {
        return Err(InstructionGenError::MissingCoverage {
            category: cat,
            split: if force_unseen { SplitTag::Unseen } else { split },
        });
    }
    Ok(pool[rng.gen_range(0..pool.len())])
}

/// Renders the indexed template for a task with explicit phrase choices.
pub fn render_instruction(
    task: &TaskSpec,
    template_idx: usize,
    target_phrase: &PhraseEntry,
    carrier_phrase: Option<&PhraseEntry>,
    dest_phrase: &PhraseEntry,
) -> Instruction {
    let tmpl = templates(task.family, task.target_sliced)
        [template_idx % templates(task.family, task.target_sliced).len()];
    let mut words: Vec<String> = Vec::new();
    for raw in tmpl.split_whitespace() {
        match raw {
            "{O}" => words.extend(target_phrase.phrase.split_whitespace().map(String::from)),
            "{Os}" => words.extend(
                target_phrase
                    .plural_form()
                    .split_whitespace()
                    .map(String::from),
            ),
            "{M}" => {
                let m = carrier_phrase.expect("carrier phrase for this template");
                words.extend(m.phrase.split_whitespace().map(String::from));
            }
            "{R}" => words.extend(dest_phrase.phrase.split_whitespace().map(String::from)),
            w => words.push(w.to_string()),
        }
    }
    // article agreement: "a apple" -> "an apple"
    for i in 0..words.len().saturating_sub(1) {
        if words[i] == "a"
            && words[i + 1]
                .chars()
                .next()
                .map(|c| "aeiou".contains(c))
                .unwrap_or(false)
        {
            words[i] = "an".to_string();
        }
    }
    Instruction { tokens: words }
}

/// Deterministic goal-statement generation for `(task, seed, split)`.
/// The unseen split always draws at least one unseen-tagged phrase.
pub fn generate_instruction(
    task: &TaskSpec,
    lexicon: &Lexicon,
    seed: u64,
    split: SplitTag,
) -> Result<Instruction, InstructionGenError> {
    let mut h: u64 = seed ^ 0x9e37_79b9_7f4a_7c15;
    h = h
        .wrapping_mul(31)
        .wrapping_add(task.family as u64 + 1)
        .wrapping_mul(31)
        .wrapping_add(task.target as u64 + 1)
        .wrapping_mul(31)
        .wrapping_add(task.destination as u64 + 1)
        .wrapping_mul(31)
        .wrapping_add(task.mrecep.map(|m| m as u64 + 1).unwrap_or(0))
        .wrapping_mul(31)
        .wrapping_add(task.target_sliced as u64)
        .wrapping_mul(31)
        .wrapping_add(split as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(h);
    let tset = templates(task.family, task.target_sliced);
    let template_idx = rng.gen_range(0..tset.len());

    // pick which slot carries the forced unseen phrase, preferring slots
    // whose category actually has one
    let mut slots: Vec<ObjectCategory> = vec![task.target];
    if let Some(m) = task.mrecep {
        slots.push(m);
    }
    slots.push(task.destination);
    let forced_slot = if split == SplitTag::Unseen {
        let candidates: Vec<usize> = (0..slots.len())
            .filter(|&i| {
                lexicon
                    .phrases(slots[i])
                    .iter()
                    .any(|p| p.split == SplitTag::Unseen)
            })
            .collect();
        if candidates.is_empty() {
            return Err(InstructionGenError::MissingCoverage {
                category: task.target,
                split: SplitTag::Unseen,
            });
        }
        Some(candidates[rng.gen_range(0..candidates.len())])
    } else {
        None
    };

    let target_phrase =
        choose_phrase(lexicon, task.target, split, forced_slot == Some(0), &mut rng)?.clone();
    let carrier_phrase = match task.mrecep {
        Some(m) => Some(choose_phrase(lexicon, m, split, forced_slot == Some(1), &mut rng)?.clone()),
        None => None,
    };
    let dest_slot = slots.len() - 1;
    let dest_phrase = choose_phrase(
        lexicon,
        task.destination,
        split,
        forced_slot == Some(dest_slot),
        &mut rng,
    )?
    .clone();
    Ok(render_instruction(
        task,
        template_idx,
        &target_phrase,
        carrier_phrase.as_ref(),
        &dest_phrase,
    ))
}

// ----------------------------------------------------------------------
// Context prediction
// ----------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct Mention {
    pub category: ObjectCategory,
    pub start: usize,
    pub len: usize,
}

/// Longest-match, left-to-right scan for lexicon phrases.
pub fn scan_mentions(instruction: &Instruction, lexicon: &Lexicon) -> Vec<Mention> {
    let table = lexicon.phrase_table();
    let toks = &instruction.tokens;
    let mut mentions = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        let mut hit = None;
        for (phrase, cat) in &table {
            if phrase.len() <= toks.len() - i && toks[i..i + phrase.len()] == phrase[..] {
                hit = Some((phrase.len(), *cat));
                break; // table is longest-first
            }
        }
        match hit {
            Some((len, cat)) => {
                mentions.push(Mention {
                    category: cat,
                    start: i,
                    len,
                });
                i += len;
            }
            None => i += 1,
        }
    }
    mentions
}

const ARTICLES: [&str; 4] = ["a", "an", "the", "two"];

fn preceding_preposition(tokens: &[String], start: usize) -> Option<&str> {
    let mut i = start;
    while i > 0 {
        i -= 1;
        let t = tokens[i].as_str();
        if ARTICLES.contains(&t) {
            continue;
        }
        return match t {
            "in" | "with" | "into" | "on" | "onto" | "to" | "under" | "by" => Some(t),
            _ => None,
        };
    }
    None
}

/// Extracts the context triple: the object of the verb becomes the target,
/// an "in a / with a" movable receptacle becomes the carrier, the final
/// locative becomes the destination. Pure and total: unknown phrasing
/// yields a typed parse failure, never a guess.
pub fn predict_context(
    instruction: &Instruction,
    lexicon: &Lexicon,
) -> Result<Context, ParseError> {
    let mentions = scan_mentions(instruction, lexicon);
    if mentions.is_empty() {
        return Err(ParseError::NoObjectMention);
    }
    let toks = &instruction.tokens;

    // "put a {M} with a {O} in it ..." pattern: the with-marked mention is
    // the target riding inside the first mention
    let with_idx = (1..mentions.len()).find(|&k| {
        preceding_preposition(toks, mentions[k].start) == Some("with")
            && mentions[0].category.movable_receptacle()
            && mentions[k].category.pickupable()
    });
    if let Some(k) = with_idx {
        let destination = if mentions.len() > 2 {
            Some(mentions.last().unwrap().category)
        } else {
            None
        };
        return Ok(Context {
            target: mentions[k].category,
            carrier: Some(mentions[0].category),
            destination,
        });
    }

    let target = mentions[0].category;
    let destination = if mentions.len() >= 2 {
        Some(mentions.last().unwrap().category)
    } else {
        None
    };
    let mut carrier = None;
    let middle = if mentions.len() >= 2 {
        &mentions[1..mentions.len() - 1]
    } else {
        &[]
    };
    for m in middle {
        let prep = preceding_preposition(toks, m.start);
        if matches!(prep, Some("in") | Some("with") | Some("into"))
            && m.category.movable_receptacle()
        {
            carrier = Some(m.category);
        } else {
            return Err(ParseError::UnassignedMention(
                toks[m.start..m.start + m.len].join(" "),
            ));
        }
    }
    Ok(Context {
        target,
        carrier,
        destination,
    })
}
