//! Term lists used by the rule engine.
//!
//! File format: UTF-8, one lowercase term per line, `#` starts a comment.
//! Terms may span several tokens ("text field"); matching compares English
//! stems token by token.

use std::io;
use std::path::Path;

use crate::metrics::stem;
use crate::text::tokenize;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    terms: Vec<String>,
    stemmed: Vec<Vec<String>>,
}

impl Lexicon {
    pub fn parse(text: &str) -> Self {
        let mut lex = Lexicon::default();
        for line in text.lines() {
            let term = line.split('#').next().unwrap_or("").trim().to_lowercase();
            if term.is_empty() || lex.terms.contains(&term) {
                continue;
            }
            let stems: Vec<String> = tokenize(&term).iter().map(|t| stem(t)).collect();
            if stems.is_empty() {
                continue;
            }
            lex.terms.push(term);
            lex.stemmed.push(stems);
        }
        lex
    }

    pub fn from_file(path: &Path) -> io::Result<Self> {
        Ok(Self::parse(&std::fs::read_to_string(path)?))
    }

    /// Raw terms in file order.
    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Term whose stems match `stems` starting at position `at`.
    fn match_at(&self, stems: &[String], at: usize) -> Option<&str> {
        self.stemmed.iter().zip(&self.terms).find_map(|(entry, term)| {
            let end = at + entry.len();
            (end <= stems.len() && stems[at..end] == entry[..]).then_some(term.as_str())
        })
    }

    /// First term found anywhere in the stemmed token sequence.
    pub fn find_in(&self, stems: &[String]) -> Option<&str> {
        (0..stems.len()).find_map(|i| self.match_at(stems, i))
    }

    /// Term the stemmed sequence opens with, if any.
    pub fn starts(&self, stems: &[String]) -> Option<&str> {
        self.match_at(stems, 0)
    }
}

/// Stems of every token in `text`.
pub fn stems_of(text: &str) -> Vec<String> {
    tokenize(text).iter().map(|t| stem(t)).collect()
}

/// The lexicons the CTQRS rules consult.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicons {
    pub action_verbs: Lexicon,
    pub ui_nouns: Lexicon,
    pub artifact_nouns: Lexicon,
    pub defect_terms: Lexicon,
}

pub const ACTION_VERBS_FILE: &str = "action_verbs.txt";
pub const UI_NOUNS_FILE: &str = "ui_nouns.txt";
pub const ARTIFACT_NOUNS_FILE: &str = "artifact_nouns.txt";
pub const DEFECTS_FILE: &str = "defects.txt";
pub const MISSING_PHRASES_FILE: &str = "missing_phrases.txt";

pub const BUILTIN_ACTION_VERBS: &str = include_str!("../lexicons/action_verbs.txt");
pub const BUILTIN_UI_NOUNS: &str = include_str!("../lexicons/ui_nouns.txt");
pub const BUILTIN_ARTIFACT_NOUNS: &str = include_str!("../lexicons/artifact_nouns.txt");
pub const BUILTIN_DEFECTS: &str = include_str!("../lexicons/defects.txt");
pub const BUILTIN_MISSING_PHRASES: &str = include_str!("../lexicons/missing_phrases.txt");

impl Default for Lexicons {
    fn default() -> Self {
        Self {
            action_verbs: Lexicon::parse(BUILTIN_ACTION_VERBS),
            ui_nouns: Lexicon::parse(BUILTIN_UI_NOUNS),
            artifact_nouns: Lexicon::parse(BUILTIN_ARTIFACT_NOUNS),
            defect_terms: Lexicon::parse(BUILTIN_DEFECTS),
        }
    }
}

impl Lexicons {
    /// Loads any lexicon files present in `dir`; absent ones keep the
    /// built-in list.
    pub fn load_dir(dir: &Path) -> io::Result<Self> {
        let mut lex = Self::default();
        lex.overlay_dir(dir)?;
        Ok(lex)
    }

    /// Replaces each list for which `dir` has a file.
    pub fn overlay_dir(&mut self, dir: &Path) -> io::Result<()> {
        for (file, slot) in [
            (ACTION_VERBS_FILE, &mut self.action_verbs),
            (UI_NOUNS_FILE, &mut self.ui_nouns),
            (ARTIFACT_NOUNS_FILE, &mut self.artifact_nouns),
            (DEFECTS_FILE, &mut self.defect_terms),
        ] {
            let path = dir.join(file);
            if path.exists() {
                *slot = Lexicon::from_file(&path)?;
            }
        }
        Ok(())
    }
}
