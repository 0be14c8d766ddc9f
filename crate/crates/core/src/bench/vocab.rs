//! The token alphabet shared by all desk tasks.

use crate::state::{TokenId, Vocabulary};

pub const PLUS: TokenId = 10;
pub const MINUS: TokenId = 11;
pub const TIMES: TokenId = 12;
pub const DIVIDE: TokenId = 13;
pub const EQUALS: TokenId = 14;
pub const BAR: TokenId = 15;
pub const BLANK: TokenId = 16;
/// Number of content tokens.
pub const DESK_SIZE: usize = 17;
pub const DESK_MASK: TokenId = DESK_SIZE as TokenId;

const NAMES: [&str; DESK_SIZE] = ["0", "1", "2", "3", "4", "5", "6", "7", "8", "9", "+", "-", "*", "/", "=", "|", "_"];

/// Digits 0-9, the four operators, `=`, `|` and `_`, with the mask last.
pub fn desk_vocabulary() -> Vocabulary {
    Vocabulary::new(DESK_SIZE, DESK_MASK)
        .expect("desk vocabulary is well formed")
        .with_names(NAMES.iter().map(|s| s.to_string()).collect())
}

pub fn is_digit(t: TokenId) -> bool {
    t < 10
}

/// Zero-padded big-endian digits of `value`.
pub fn digits(value: u64, width: usize) -> Vec<TokenId> {
    let mut out = vec![0; width];
    let mut v = value;
    for slot in out.iter_mut().rev() {
        *slot = (v % 10) as TokenId;
        v /= 10;
    }
    out
}
