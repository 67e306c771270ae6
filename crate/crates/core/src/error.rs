use std::path::PathBuf;

use thiserror::Error;

/// Structural level of the pseudo-lexicon generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Phoneme,
    Syllable,
    Morph,
    Word,
}

impl std::fmt::Display for Level {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Level::Phoneme => "phoneme",
            Level::Syllable => "syllable",
            Level::Morph => "morph",
            Level::Word => "word",
        })
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty word")]
    EmptyWord,
    #[error("unknown grapheme in {word:?} at character {position}")]
    UnknownGrapheme { word: String, position: usize },
    #[error("invalid grapheme inventory: {0}")]
    InvalidInventory(String),
    #[error("boundary site {site} out of range for {word:?}")]
    InvalidBoundary { word: String, site: usize },
    #[error("morphs do not concatenate to {0:?}")]
    MorphMismatch(String),
    #[error("duplicate word {0:?}")]
    DuplicateWord(String),
    #[error("segmentations refer to different words ({0:?} vs {1:?})")]
    WordMismatch(String, String),
    #[error("no items to average over")]
    EmptyCategory,
    #[error("gold analysis of {0:?} contains no form of affix group {1:?}")]
    GroupMismatch(String, String),
    #[error("no probability for word {0:?}")]
    MissingWord(String),
    #[error("cannot syllabify {0:?} as (C)V syllables")]
    SyllabificationFailure(String),
    #[error("power-law fit diverged")]
    FitDivergence,
    #[error("power-law fit is degenerate (b = {0}): counts do not decay with rank")]
    DegenerateFit(f64),
    #[error("need at least {needed} rank/count points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("retry budget exhausted generating unique {0} types")]
    RetryExhausted(Level),
    #[error("invalid value: {0}")]
    Invalid(String),
    #[error("{}: {message}", location(path, *line))]
    Parse {
        path: PathBuf,
        line: Option<usize>,
        message: String,
    },
    #[error("{}:{line}: {source}", path.display())]
    At {
        path: PathBuf,
        line: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn location(path: &std::path::Path, line: Option<usize>) -> String {
    match line {
        Some(l) => format!("{}:{l}", path.display()),
        None => path.display().to_string(),
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(
        path: impl Into<PathBuf>,
        line: Option<usize>,
        message: impl Into<String>,
    ) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// Attaches a file location to a content error.
    pub(crate) fn at(self, path: &std::path::Path, line: usize) -> Self {
        match self {
            e @ (Error::Io { .. } | Error::Parse { .. } | Error::At { .. }) => e,
            other => Error::At {
                path: path.to_path_buf(),
                line,
                source: Box::new(other),
            },
        }
    }

    /// The innermost error, with file locations stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::At { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code used by the command-line front end: 2 for
    /// validation errors, 3 for infeasible generation, 4 for I/O.
    pub fn exit_code(&self) -> u8 {
        match self.root() {
            Error::Io { .. } => 4,
            Error::RetryExhausted(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
