use serde::{Deserialize, Serialize};

/// Text cleanup toggles. Filters apply in a fixed order:
/// URLs, hashtags, roman characters, punctuation, whitespace collapse.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub strip_punctuation: bool,
    pub strip_urls: bool,
    pub strip_hashtags: bool,
    pub strip_roman: bool,
    pub collapse_whitespace: bool,
}

impl FilterConfig {
    pub fn all() -> Self {
        FilterConfig {
            strip_punctuation: true,
            strip_urls: true,
            strip_hashtags: true,
            strip_roman: true,
            collapse_whitespace: true,
        }
    }
}

fn strip_urls(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    loop {
        let hit = ["http://", "https://", "www."]
            .iter()
            .filter_map(|p| rest.find(p).map(|i| (i, *p)))
            .min_by_key(|(i, _)| *i);
        match hit {
            Some((start, _)) => {
                out.push_str(&rest[..start]);
                let tail = &rest[start..];
                let end = tail
                    .find(char::is_whitespace)
                    .unwrap_or(tail.len());
                rest = &tail[end..];
            }
            None => {
                out.push_str(rest);
                return out;
            }
        }
    }
}

// Removes every '#' plus the alphanumeric run that follows it, so no
// '#' survives and a second pass is a no-op.
fn strip_hashtags(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        if c == '#' {
            while chars.peek().is_some_and(|n| n.is_alphanumeric()) {
                chars.next();
            }
        } else {
            out.push(c);
        }
    }
    out
}

fn strip_roman(text: &str) -> String {
    text.chars().filter(|c| !c.is_ascii_alphabetic()).collect()
}

fn is_punctuation(c: char) -> bool {
    // ASCII punctuation plus marks common in Indic text.
    c.is_ascii_punctuation()
        || matches!(
            c,
            '।' | '॥' | '…' | '—' | '–' | '‘' | '’' | '“' | '”' | '•' | '·'
        )
}

fn strip_punctuation(text: &str) -> String {
    text.chars().filter(|c| !is_punctuation(*c)).collect()
}

fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Apply the configured filters. Idempotent for every config; the
/// result may be empty (the caller decides whether to drop it).
pub fn preprocess(text: &str, cfg: &FilterConfig) -> String {
    let mut t = text.to_string();
    if cfg.strip_urls {
        t = strip_urls(&t);
    }
    if cfg.strip_hashtags {
        t = strip_hashtags(&t);
    }
    if cfg.strip_roman {
        t = strip_roman(&t);
    }
    if cfg.strip_punctuation {
        t = strip_punctuation(&t);
    }
    if cfg.collapse_whitespace {
        t = collapse_whitespace(&t);
    }
    t
}
