pub const NUMBER_TOKEN: &str = "#";

/// Lowercases and tokenizes one line.
///
/// Whitespace separates chunks; inside a chunk, maximal alphanumeric runs are
/// words and every other character is a token of its own. A `.` or `,`
/// sitting between two digits of an all-digit run stays inside the run, so
/// `1,000.5` is one token. Tokens made only of digits (and such separators)
/// become `#`.
pub fn normalize(raw: &str) -> Vec<String> {
    let lowered = raw.to_lowercase();
    let mut tokens = Vec::new();
    for chunk in lowered.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let mut word = String::new();
        let mut all_digits = true;
        for (i, &ch) in chars.iter().enumerate() {
            if ch.is_alphanumeric() {
                all_digits &= ch.is_ascii_digit();
                word.push(ch);
                continue;
            }
            let joins_digits = (ch == '.' || ch == ',')
                && all_digits
                && word.chars().last().is_some_and(|c| c.is_ascii_digit())
                && chars.get(i + 1).is_some_and(|c| c.is_ascii_digit());
            if joins_digits {
                word.push(ch);
                continue;
            }
            flush(&mut word, &mut all_digits, &mut tokens);
            tokens.push(ch.to_string());
        }
        flush(&mut word, &mut all_digits, &mut tokens);
    }
    tokens
}

fn flush(word: &mut String, all_digits: &mut bool, tokens: &mut Vec<String>) {
    if !word.is_empty() {
        if *all_digits {
            tokens.push(NUMBER_TOKEN.to_string());
            word.clear();
        } else {
            tokens.push(std::mem::take(word));
        }
    }
    *all_digits = true;
}

/// Keeps sentences with at most `max_words` tokens, preserving order.
pub fn filter_by_length<T: AsRef<[S]>, S>(corpus: Vec<T>, max_words: usize) -> Vec<T> {
    corpus
        .into_iter()
        .filter(|s| s.as_ref().len() <= max_words)
        .collect()
}
