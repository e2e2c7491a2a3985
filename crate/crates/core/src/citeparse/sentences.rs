use super::{SentenceSpan, Span};

const ABBREVIATIONS: &[&str] = &[
    "al.", "e.g.", "i.e.", "fig.", "figs.", "eq.", "eqs.", "vs.", "cf.", "sec.", "ref.", "refs.", "no.", "approx.",
    "resp.",
];

const CLOSERS: &[char] = &['"', '\'', ')', ']', '”', '’'];

/// Splits a section body into sentences.
///
/// The returned spans partition `body`: trailing whitespace belongs to the
/// sentence it follows, and `text` is the trimmed sentence. A boundary is
/// placed after `.`, `!` or `?` (plus any closing quotes or brackets) when it
/// is followed by whitespace and then an uppercase letter, or by the end of
/// the text. Common abbreviations and name initials never end a sentence.
pub fn segment_sentences(body: &str) -> Vec<SentenceSpan> {
    let chars: Vec<char> = body.chars().collect();
    let n = chars.len();
    if n == 0 {
        return Vec::new();
    }
    let mut spans = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < n {
        let c = chars[i];
        if !matches!(c, '.' | '!' | '?') {
            i += 1;
            continue;
        }
        let mut j = i + 1;
        while j < n && (matches!(chars[j], '.' | '!' | '?') || CLOSERS.contains(&chars[j])) {
            j += 1;
        }
        let mut k = j;
        while k < n && chars[k].is_whitespace() {
            k += 1;
        }
        if k == n {
            break;
        }
        let split = k > j && chars[k].is_uppercase() && !(c == '.' && j == i + 1 && is_guarded(&chars, start, i));
        if split {
            spans.push(make_span(&chars, start, k));
            start = k;
        }
        i = j.max(i + 1);
    }
    spans.push(make_span(&chars, start, n));
    spans
}

fn make_span(chars: &[char], start: usize, end: usize) -> SentenceSpan {
    let raw: String = chars[start..end].iter().collect();
    SentenceSpan { section_index: 0, char_span: Span::new(start, end), text: raw.trim().to_owned() }
}

/// Token ending at `dot` (inclusive), stripped of leading punctuation.
fn token_before(chars: &[char], from: usize, dot: usize) -> (String, usize) {
    let mut s = dot;
    while s > from && !chars[s - 1].is_whitespace() {
        s -= 1;
    }
    let raw: String = chars[s..=dot].iter().collect();
    let trimmed = raw.trim_start_matches(['(', '[', '"', '\'', '“', '‘']);
    (trimmed.to_owned(), s)
}

fn is_initial(token: &str) -> bool {
    let mut it = token.chars();
    matches!((it.next(), it.next(), it.next()), (Some(l), Some('.'), None) if l.is_uppercase())
}

fn is_guarded(chars: &[char], sentence_start: usize, dot: usize) -> bool {
    let (token, token_start) = token_before(chars, sentence_start, dot);
    let lower = token.to_lowercase();
    if ABBREVIATIONS.contains(&lower.as_str()) {
        return true;
    }
    if !is_initial(&token) {
        return false;
    }
    // An initial is only an initial when it does not follow a lowercase word:
    // "by J. R. Smith" keeps "R." guarded through "J.", but "built on X." ends.
    let mut p = token_start;
    while p > sentence_start && chars[p - 1].is_whitespace() {
        p -= 1;
    }
    if p == sentence_start {
        return true;
    }
    let (prev, _) = token_before(chars, sentence_start, p - 1);
    is_initial(&prev) || prev.ends_with(',') || prev.chars().next().is_some_and(char::is_uppercase)
}
