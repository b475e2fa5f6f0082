//! Unicode helpers shared by cleaning and emoji scoring.

use unicode_properties::UnicodeEmoji;
use unicode_segmentation::UnicodeSegmentation;

const VARIATION_SELECTOR_16: char = '\u{FE0F}';

/// True when a grapheme cluster renders as an emoji.
///
/// ASCII characters that carry the Emoji property (digits, `#`, `*`) only
/// count as part of keycap sequences, which are not treated as emoji here.
/// A cluster must start with an emoji character: a stray modifier attached
/// to punctuation (`@🏽`) is not an emoji.
pub fn is_emoji_grapheme(grapheme: &str) -> bool {
    grapheme
        .chars()
        .next()
        .is_some_and(|c| !c.is_ascii() && c.is_emoji_char())
}

/// Iterates over the emoji grapheme clusters of `text` in order. Joiner
/// sequences such as families or profession emoji come out as one cluster.
pub fn emoji_graphemes(text: &str) -> impl Iterator<Item = &str> {
    text.graphemes(true).filter(|g| is_emoji_grapheme(g))
}

/// Canonical lookup key for an emoji: the cluster with emoji-presentation
/// selectors removed.
pub fn emoji_key(grapheme: &str) -> String {
    grapheme
        .chars()
        .filter(|&c| c != VARIATION_SELECTOR_16)
        .collect()
}

/// Same as [`emoji_key`] with skin-tone modifiers stripped as well.
pub fn emoji_base_key(grapheme: &str) -> String {
    grapheme
        .chars()
        .filter(|&c| c != VARIATION_SELECTOR_16 && !('\u{1F3FB}'..='\u{1F3FF}').contains(&c))
        .collect()
}
