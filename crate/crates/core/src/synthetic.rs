//! Seeded synthetic corpus: revisions with edit-quality and article-quality
//! labels, lexicons, and change events.
//!
//! The edit-quality set is built so that anonymity correlates with damage
//! while the size of the change is what actually separates damaging from
//! good edits: damaging edits blank most of a page or paste in a long run of
//! junk, good edits are small. A model that can threshold on the magnitude
//! of the change does not need anonymity; a linear model over the signed
//! byte delta cannot use it and leans on anonymity instead.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::datasources::RevisionRecord;
use crate::label::ClassLabel;

pub const DEFAULT_CONTEXT: &str = "enwiki";
/// First revision id of the edit-quality set; 123456 falls inside it.
pub const EDIT_QUALITY_FIRST_ID: u64 = 123_000;
pub const ARTICLE_QUALITY_FIRST_ID: u64 = 300_000;
pub const QUALITY_CLASSES: [&str; 6] = ["FA", "GA", "B", "C", "Start", "Stub"];

pub const INFORMAL_WORDS: [&str; 8] = ["lol", "haha+", "hehe+", "omg", "yolo", "dude", "wtf", "u"];
pub const BADWORDS: [&str; 7] = ["stupid", "idiot", "dumb", "sucks?", "poop", "loser", "fart"];

const VOCABULARY: [&str; 96] = [
    "the", "of", "and", "in", "to", "a", "was", "is", "for", "on", "as", "with", "by", "his", "her", "at",
    "from", "that", "which", "river", "city", "county", "school", "church", "war", "army", "station", "line",
    "album", "band", "song", "film", "series", "season", "team", "league", "club", "player", "coach", "party",
    "election", "council", "district", "village", "population", "census", "bridge", "road", "railway",
    "species", "genus", "family", "plant", "bird", "island", "coast", "mountain", "valley", "lake", "north",
    "south", "east", "west", "early", "later", "history", "century", "government", "court", "law", "article",
    "book", "novel", "author", "published", "released", "founded", "built", "located", "known", "named",
    "became", "served", "received", "award", "museum", "university", "college", "professor", "research",
    "company", "product", "market", "industry", "record", "total",
];

const JUNK: [&str; 14] = [
    "stupid", "idiot", "dumb", "sucks", "poop", "loser", "fart", "lol", "hahaha", "omg", "yolo", "dude", "u",
    "wtf",
];

#[derive(Debug, Clone)]
pub struct CorpusConfig {
    pub context: String,
    pub edit_quality_size: usize,
    pub article_quality_per_class: usize,
    pub damaging_rate: f64,
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            context: DEFAULT_CONTEXT.to_string(),
            edit_quality_size: 2000,
            article_quality_per_class: 100,
            damaging_rate: 0.3,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub context: String,
    pub revisions: Vec<RevisionRecord>,
    /// (revision id, damaging)
    pub damaging: Vec<(u64, bool)>,
    /// (revision id, assessment class)
    pub article_quality: Vec<(u64, ClassLabel)>,
}

impl Corpus {
    pub fn damaging_label_set() -> Vec<ClassLabel> {
        vec![ClassLabel::Bool(true), ClassLabel::Bool(false)]
    }

    pub fn quality_label_set() -> Vec<ClassLabel> {
        QUALITY_CLASSES.iter().map(|c| ClassLabel::from(*c)).collect()
    }

    pub fn informal_lexicon() -> String {
        lexicon_text("informal words", &INFORMAL_WORDS)
    }

    pub fn badwords_lexicon() -> String {
        lexicon_text("bad words", &BADWORDS)
    }

    /// Change events for the edit-quality revisions, in id order, with a
    /// sprinkling of other event types that no model precaches.
    pub fn events(&self, seed: u64) -> Vec<String> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        for (rev, _) in &self.damaging {
            out.push(event_json(&self.context, "revision-create", *rev));
            if rng.gen_bool(0.1) {
                out.push(event_json(&self.context, "page-move", *rev));
            }
        }
        out
    }
}

fn event_json(context: &str, event: &str, rev_id: u64) -> String {
    serde_json::json!({"context": context, "event": event, "rev_id": rev_id}).to_string()
}

fn lexicon_text(title: &str, entries: &[&str]) -> String {
    let mut s = format!("# {title}: one case-insensitive pattern per line, matched against whole tokens\n");
    for e in entries {
        s.push_str(e);
        s.push('\n');
    }
    s
}

fn words(rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    (0..n).map(|_| VOCABULARY.choose(rng).expect("vocabulary").to_string()).collect()
}

fn prose(rng: &mut ChaCha8Rng, n: usize, refs: usize) -> String {
    let ws = words(rng, n.max(1));
    let mut out = String::new();
    let sentence_len = 12;
    let sentences = ws.len().div_ceil(sentence_len);
    let ref_every = if refs == 0 { usize::MAX } else { (sentences / refs).max(1) };
    let mut refs_left = refs;
    for (i, chunk) in ws.chunks(sentence_len).enumerate() {
        let mut sentence = chunk.join(" ");
        if let Some(first) = sentence.get_mut(0..1) {
            first.make_ascii_uppercase();
        }
        out.push_str(&sentence);
        out.push('.');
        if refs_left > 0 && (i + 1) % ref_every == 0 {
            out.push_str(&format!("<ref>Source {}</ref>", rng.gen_range(1..10_000)));
            refs_left -= 1;
        }
        out.push(' ');
    }
    for _ in 0..refs_left {
        out.push_str(&format!("<ref>Source {}</ref> ", rng.gen_range(1..10_000)));
    }
    out.trim_end().to_string()
}

/// An article with the requested amount of structure.
fn article(rng: &mut ChaCha8Rng, n_words: usize, refs: usize, headers: usize, images: usize, categories: usize) -> String {
    let sections = headers + 1;
    let mut out = String::new();
    for s in 0..sections {
        if s > 0 {
            out.push_str(&format!("\n== {} ==\n", words(rng, 2).join(" ")));
        }
        if s < images {
            out.push_str(&format!("[[File:Picture{}.jpg|thumb|{}]]\n", rng.gen_range(1..1000), words(rng, 3).join(" ")));
        }
        let share = n_words / sections + usize::from(s < n_words % sections);
        let section_refs = refs / sections + usize::from(s < refs % sections);
        out.push_str(&prose(rng, share, section_refs));
        out.push('\n');
    }
    for _ in images.min(sections)..images {
        out.push_str(&format!("[[Image:Extra{}.png]]\n", rng.gen_range(1..1000)));
    }
    for _ in 0..categories {
        out.push_str(&format!("[[Category:{}]]\n", words(rng, 2).join(" ")));
    }
    out
}

/// `n` words of noise; `insults` is the share drawn from the lexicons.
fn junk(rng: &mut ChaCha8Rng, n: usize, insults: f64) -> String {
    (0..n)
        .map(|_| {
            let roll: f64 = rng.gen();
            if roll < insults {
                JUNK.choose(rng).expect("junk").to_uppercase()
            } else if roll < insults + (1.0 - insults) * 0.55 {
                VOCABULARY.choose(rng).expect("vocabulary").to_string()
            } else {
                let len = rng.gen_range(3..9);
                (0..len).map(|_| rng.gen_range(b'a'..=b'z') as char).collect()
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn char_boundary(s: &str, mut i: usize) -> usize {
    while !s.is_char_boundary(i) {
        i -= 1;
    }
    i
}

const DAY: u64 = 86_400;

pub fn generate(config: &CorpusConfig) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut revisions = Vec::new();
    let mut damaging = Vec::new();
    let base_time = 1_500_000_000i64;

    for i in 0..config.edit_quality_size {
        let revision_id = EDIT_QUALITY_FIRST_ID + i as u64;
        let is_damaging = rng.gen_bool(config.damaging_rate);
        let parent_words = rng.gen_range(120..400);
        let images = rng.gen_range(0..2);
        let parent = article(&mut rng, parent_words, parent_words / 60, parent_words / 100, images, 2);
        let text = if is_damaging {
            match rng.gen_range(0..10) {
                0..=2 => {
                    // Blank most of the page.
                    let keep = rng.gen_range(0.1..0.4);
                    let cut = char_boundary(&parent, (parent.len() as f64 * keep) as usize);
                    parent[..cut].to_string()
                }
                3..=5 => {
                    let at = char_boundary(&parent, rng.gen_range(0..parent.len()));
                    let n = rng.gen_range(150..400);
                    format!("{} {} {}", &parent[..at], junk(&mut rng, n, 0.0), &parent[at..])
                }
                6 => {
                    // Short vandalism.
                    let n = rng.gen_range(1..6);
                    format!("{} {}", parent, junk(&mut rng, n, 1.0))
                }
                _ => {
                    // Plausible-looking misinformation: indistinguishable by content.
                    let n = rng.gen_range(5..40);
                    let at = char_boundary(&parent, rng.gen_range(0..parent.len()));
                    format!("{} {} {}", &parent[..at], prose(&mut rng, n, 0), &parent[at..])
                }
            }
        } else {
            match rng.gen_range(0..20) {
                0..=11 => {
                    let n = rng.gen_range(5..40);
                    let refs = usize::from(rng.gen_bool(0.4));
                    let at = char_boundary(&parent, rng.gen_range(0..parent.len()));
                    format!("{} {} {}", &parent[..at], prose(&mut rng, n, refs), &parent[at..])
                }
                12..=17 => {
                    let start = char_boundary(&parent, rng.gen_range(0..parent.len()));
                    let end = char_boundary(&parent, (start + rng.gen_range(10..200)).min(parent.len()));
                    format!("{}{}", &parent[..start], &parent[end..])
                }
                _ => {
                    // A substantive new section.
                    let n = rng.gen_range(100..250);
                    format!("{parent}\n== {} ==\n{}\n", words(&mut rng, 2).join(" "), prose(&mut rng, n, 2))
                }
            }
        };
        let anon = if is_damaging { rng.gen_bool(0.9) } else { rng.gen_bool(0.15) };
        let age = if anon {
            0
        } else if is_damaging || rng.gen_bool(0.15) {
            rng.gen_range(0..3 * DAY)
        } else {
            (rng.gen_range((DAY as f64).ln()..(8.0 * 365.0 * DAY as f64).ln())).exp() as u64
        };
        revisions.push(RevisionRecord {
            revision_id,
            context_id: config.context.clone(),
            text,
            parent_text: parent,
            user_is_anon: anon,
            user_account_age_seconds: age,
            timestamp: base_time + 60 * i as i64,
        });
        damaging.push((revision_id, is_damaging));
    }

    let mut article_quality = Vec::new();
    let mut next_id = ARTICLE_QUALITY_FIRST_ID;
    for _ in 0..config.article_quality_per_class {
        for (rank, class) in QUALITY_CLASSES.iter().enumerate() {
            // rank 0 is FA, rank 5 is Stub.
            let level = (5 - rank) as f64;
            let jitter = |rng: &mut ChaCha8Rng| rng.gen_range(0.6..1.5);
            let n_words = (60.0 * 1.9f64.powf(level) * jitter(&mut rng)) as usize;
            let refs = (level * level * 2.5 * jitter(&mut rng)) as usize;
            let headers = (level * 1.6 * jitter(&mut rng)) as usize;
            let images = (level * 0.7 * jitter(&mut rng)) as usize;
            let categories = 1 + (level * 0.8 * jitter(&mut rng)) as usize;
            let text = article(&mut rng, n_words, refs, headers, images, categories);
            let cut = char_boundary(&text, text.len() * 9 / 10);
            let parent_text = text[..cut].to_string();
            let anon = rng.gen_bool(0.1);
            revisions.push(RevisionRecord {
                revision_id: next_id,
                context_id: config.context.clone(),
                text,
                parent_text,
                user_is_anon: anon,
                user_account_age_seconds: if anon { 0 } else { rng.gen_range(DAY..1000 * DAY) },
                timestamp: base_time + 86_400 * 365 + next_id as i64,
            });
            article_quality.push((next_id, ClassLabel::from(*class)));
            next_id += 1;
        }
    }

    Corpus { context: config.context.clone(), revisions, damaging, article_quality }
}
