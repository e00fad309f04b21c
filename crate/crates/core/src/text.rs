//! Text normalization shared by dedup, leakage checks and scoring.

use unicode_normalization::UnicodeNormalization;

/// NFC-compose and trim surrounding whitespace. Case and internal
/// whitespace are preserved.
pub fn normalize(text: &str) -> String {
    let composed: String = text.nfc().collect();
    composed.trim().to_string()
}

/// True when a character counts as a letter for the quality rules.
/// Uses the Unicode alphabetic property, so CJK ideographs qualify.
pub fn is_letter(c: char) -> bool {
    c.is_alphabetic()
}

fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3400..=0x4DBF
        | 0x4E00..=0x9FFF
        | 0xF900..=0xFAFF
        | 0x20000..=0x2A6DF
        | 0x2A700..=0x2EBEF
        | 0x30000..=0x3134F
        | 0x3040..=0x30FF
        | 0xAC00..=0xD7AF)
}

/// Something that turns a payload into a token count.
pub trait TokenCounter: Send + Sync {
    fn count(&self, text: &str) -> usize;
}

/// Default approximate counter: one token per whitespace-delimited run of
/// non-CJK characters plus one token per CJK character.
#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceCjkCounter;

impl TokenCounter for WhitespaceCjkCounter {
    fn count(&self, text: &str) -> usize {
        let mut total = 0;
        for word in text.split_whitespace() {
            let mut in_run = false;
            for c in word.chars() {
                if is_cjk(c) {
                    total += 1;
                    in_run = false;
                } else if !in_run {
                    total += 1;
                    in_run = true;
                }
            }
        }
        total
    }
}

/// Sum of per-payload counts.
pub fn count_tokens<S: AsRef<str>>(payloads: &[S], counter: &dyn TokenCounter) -> usize {
    payloads.iter().map(|p| counter.count(p.as_ref())).sum()
}
