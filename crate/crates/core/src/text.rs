//! Small text helpers shared by the HTML and language stages.

/// Collapses every run of whitespace to a single space and trims the ends.
pub fn collapse_whitespace(input: &str) -> String {
    let mut out = String::with_capacity(input.len());
    for word in input.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Breaks up anything that would read as a markup tag (`<` directly followed
/// by a letter) by inserting a space after the `<`.
pub fn defuse_tags(input: &str) -> String {
    let mut out = String::with_capacity(input.len());
    let mut chars = input.chars().peekable();
    while let Some(c) = chars.next() {
        out.push(c);
        if c == '<'
            && chars
                .peek()
                .is_some_and(|n| n.is_alphabetic() || *n == '/' || *n == '!')
        {
            out.push(' ');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collapses_mixed_whitespace() {
        assert_eq!(collapse_whitespace("  a\n\t b  c "), "a b c");
        assert_eq!(collapse_whitespace(""), "");
    }

    #[test]
    fn defuses_tag_like_text() {
        assert_eq!(defuse_tags("1 < 2 and <b>"), "1 < 2 and < b>");
    }
}
