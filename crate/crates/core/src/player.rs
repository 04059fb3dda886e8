use std::fmt;

use serde::{Deserialize, Serialize};

/// A seat at the table. Seat 0 is Player A (the row player), seat 1 is
/// Player B (the column player).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlayerId(pub usize);

impl PlayerId {
    pub const A: PlayerId = PlayerId(0);
    pub const B: PlayerId = PlayerId(1);

    pub fn index(self) -> usize {
        self.0
    }

    /// The other seat of a two-player game.
    pub fn opponent(self) -> PlayerId {
        PlayerId(1 - self.0.min(1))
    }

    /// Letter used in prompts and directives: `A`, `B`, ...
    pub fn letter(self) -> char {
        (b'A' + (self.0 % 26) as u8) as char
    }

    pub fn from_letter(c: char) -> Option<PlayerId> {
        let c = c.to_ascii_uppercase();
        c.is_ascii_uppercase().then(|| PlayerId((c as u8 - b'A') as usize))
    }

    pub fn both() -> [PlayerId; 2] {
        [PlayerId::A, PlayerId::B]
    }
}

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Player {}", self.letter())
    }
}
