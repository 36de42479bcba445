/// Lowercases, splits on whitespace and emits each punctuation mark as its
/// own token.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for word in text.split_whitespace() {
        let mut current = String::new();
        for ch in word.chars() {
            if is_punctuation(ch) {
                if !current.is_empty() {
                    tokens.push(std::mem::take(&mut current));
                }
                tokens.push(ch.to_lowercase().collect());
            } else {
                current.extend(ch.to_lowercase());
            }
        }
        if !current.is_empty() {
            tokens.push(current);
        }
    }
    tokens
}

fn is_punctuation(ch: char) -> bool {
    ch.is_ascii_punctuation()
        || matches!(
            ch,
            '\u{2018}' | '\u{2019}' | '\u{201C}' | '\u{201D}' | '\u{2013}' | '\u{2014}' | '\u{2026}' | '\u{00A1}' | '\u{00BF}'
        )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn splits_punctuation() {
        assert_eq!(
            tokenize("The hotel was great!"),
            vec!["the", "hotel", "was", "great", "!"]
        );
        assert_eq!(tokenize("Don't... stay\there"), vec!["don", "'", "t", ".", ".", ".", "stay", "here"]);
    }

    #[test]
    fn empty_text() {
        assert!(tokenize("").is_empty());
        assert!(tokenize(" \n\t ").is_empty());
    }

    proptest! {
        #[test]
        fn join_then_retokenize_is_identity(text in "[A-Za-z0-9 ,.!?'\\-]{0,200}") {
            let tokens = tokenize(&text);
            prop_assert_eq!(tokenize(&tokens.join(" ")), tokens);
        }
    }
}
