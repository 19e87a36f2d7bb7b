//! Token-level text predicates shared by the tagger, the trie and the
//! syntactic embedding.

use alloc::string::String;

/// Case-folds a token by lowercasing each character independently.
pub fn fold(token: &str) -> String {
    if token.is_ascii() {
        return token.to_ascii_lowercase();
    }
    token.chars().flat_map(char::to_lowercase).collect()
}

/// Case-folds a token sequence and joins it with single spaces.
pub fn fold_join<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&fold(t.as_ref()));
    }
    out
}

/// Joins tokens with single spaces.
pub fn join<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(t.as_ref());
    }
    out
}

pub fn is_handle(token: &str) -> bool {
    token.len() > 1 && token.starts_with('@')
}

pub fn is_hashtag(token: &str) -> bool {
    token.len() > 1 && token.starts_with('#')
}

pub fn is_url(token: &str) -> bool {
    let lower = token.get(..8).map(fold).unwrap_or_else(|| fold(token));
    lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.")
}

/// Handles, hashtags and URLs carry no capitalization signal.
pub fn is_stream_markup(token: &str) -> bool {
    is_handle(token) || is_hashtag(token) || is_url(token)
}

pub fn has_alphabetic(token: &str) -> bool {
    token.chars().any(char::is_alphabetic)
}

/// First character is uppercase.
pub fn is_initial_cap(token: &str) -> bool {
    token.chars().next().is_some_and(char::is_uppercase)
}

/// Every alphabetic character is uppercase (and there is at least one).
pub fn is_all_upper(token: &str) -> bool {
    let mut seen = false;
    for c in token.chars().filter(|c| c.is_alphabetic()) {
        if !c.is_uppercase() {
            return false;
        }
        seen = true;
    }
    seen
}

/// No alphabetic character is uppercase.
pub fn is_all_lower(token: &str) -> bool {
    !token.chars().any(char::is_uppercase)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folding() {
        assert_eq!(fold("CORONAVIRUS"), "coronavirus");
        assert_eq!(fold("Ärger"), "ärger");
        assert_eq!(fold_join(&["Andy", "BESHEAR"]), "andy beshear");
    }

    #[test]
    fn markup() {
        assert!(is_handle("@user"));
        assert!(is_hashtag("#COVID19"));
        assert!(is_url("https://t.co/x"));
        assert!(is_url("WWW.example.com"));
        assert!(!is_url("http"));
        assert!(!is_handle("@"));
    }

    #[test]
    fn capitalization() {
        assert!(is_all_upper("UN"));
        assert!(is_all_upper("U.K."));
        assert!(!is_all_upper("..."));
        assert!(is_initial_cap("Italy"));
        assert!(!is_initial_cap("iPhone"));
        assert!(is_all_lower("coronavirus"));
    }
}
