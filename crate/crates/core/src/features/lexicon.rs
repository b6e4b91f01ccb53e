use std::fs;
use std::path::Path;

use regex::Regex;

/// A per-context word list. Entries are regex fragments matched against
/// whole lowercase tokens, so `hahaha+` matches `hahahaha` but not `ha`.
#[derive(Debug, Clone)]
pub struct Lexicon {
    name: String,
    entries: Vec<String>,
    matcher: Option<Regex>,
}

impl Lexicon {
    pub fn new<S: AsRef<str>>(name: impl Into<String>, entries: &[S]) -> Result<Self, regex::Error> {
        let entries: Vec<String> = entries
            .iter()
            .map(|e| e.as_ref().trim().to_string())
            .filter(|e| !e.is_empty())
            .collect();
        let matcher = if entries.is_empty() {
            None
        } else {
            let alternation: Vec<String> = entries.iter().map(|e| format!("(?:{e})")).collect();
            Some(Regex::new(&format!("(?i)^(?:{})$", alternation.join("|")))?)
        };
        Ok(Self { name: name.into(), entries, matcher })
    }

    pub fn empty(name: impl Into<String>) -> Self {
        Self { name: name.into(), entries: Vec::new(), matcher: None }
    }

    /// Parses the plain-text lexicon format: one entry per line, `#` starts
    /// a comment line.
    pub fn parse(name: impl Into<String>, text: &str) -> Result<Self, regex::Error> {
        let entries: Vec<&str> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect();
        Self::new(name, &entries)
    }

    pub fn load(name: impl Into<String>, path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(name, &text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    pub fn matches(&self, token: &str) -> bool {
        self.matcher.as_ref().is_some_and(|m| m.is_match(token))
    }

    /// Number of tokens in `text` that match an entry.
    pub fn count_matches(&self, text: &str) -> i64 {
        if self.matcher.is_none() {
            return 0;
        }
        super::tokenize(text).filter(|t| self.matches(t)).count() as i64
    }
}

pub fn informal_word_count(text: &str, lexicon: &Lexicon) -> i64 {
    lexicon.count_matches(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn italian_ha_regression() {
        let with_ha = Lexicon::new("informal", &["ha", "hahaha+"]).unwrap();
        assert_eq!(informal_word_count("ha ha article", &with_ha), 2);
        let fixed = Lexicon::new("informal", &["hahaha+"]).unwrap();
        assert_eq!(informal_word_count("ha ha article", &fixed), 0);
        assert_eq!(informal_word_count("Hahahaaa, article", &fixed), 1);
    }

    #[test]
    fn empty_inputs() {
        assert_eq!(informal_word_count("ha ha", &Lexicon::empty("informal")), 0);
        let lex = Lexicon::new("informal", &["lol"]).unwrap();
        assert_eq!(informal_word_count("", &lex), 0);
    }

    #[test]
    fn matches_whole_tokens_only() {
        let lex = Lexicon::new("informal", &["lol"]).unwrap();
        assert_eq!(informal_word_count("LOL lollipop lol.", &lex), 2);
    }

    #[test]
    fn text_format_skips_comments() {
        let lex = Lexicon::parse("badwords", "# words\nidiot\n\n  stupid  \n").unwrap();
        assert_eq!(lex.entries(), ["idiot", "stupid"]);
    }

    #[test]
    fn bad_regex_is_an_error() {
        assert!(Lexicon::new("x", &["(unclosed"]).is_err());
    }
}
