use serde::{Deserialize, Serialize};

/// The eight king moves, in the fixed order used for labels, network output
/// channels and neighbor expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum Action {
    N = 0,
    NE = 1,
    E = 2,
    SE = 3,
    S = 4,
    SW = 5,
    W = 6,
    NW = 7,
}

impl Action {
    pub const COUNT: usize = 8;

    pub const ALL: [Action; 8] = [
        Action::N,
        Action::NE,
        Action::E,
        Action::SE,
        Action::S,
        Action::SW,
        Action::W,
        Action::NW,
    ];

    /// (row delta, col delta); rows grow southwards.
    pub const fn offset(self) -> (isize, isize) {
        match self {
            Action::N => (-1, 0),
            Action::NE => (-1, 1),
            Action::E => (0, 1),
            Action::SE => (1, 1),
            Action::S => (1, 0),
            Action::SW => (1, -1),
            Action::W => (0, -1),
            Action::NW => (-1, -1),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Self::ALL.get(i).copied()
    }

    pub fn from_offset(dr: isize, dc: isize) -> Option<Action> {
        Self::ALL.into_iter().find(|a| a.offset() == (dr, dc))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn eight_distinct_unit_offsets() {
        let offsets: HashSet<_> = Action::ALL.iter().map(|a| a.offset()).collect();
        assert_eq!(offsets.len(), 8);
        for (dr, dc) in offsets {
            assert!((-1..=1).contains(&dr) && (-1..=1).contains(&dc));
            assert!((dr, dc) != (0, 0));
        }
    }

    #[test]
    fn index_round_trip() {
        for (i, a) in Action::ALL.iter().enumerate() {
            assert_eq!(a.index(), i);
            assert_eq!(Action::from_index(i), Some(*a));
            let (dr, dc) = a.offset();
            assert_eq!(Action::from_offset(dr, dc), Some(*a));
        }
        assert_eq!(Action::from_index(8), None);
    }
}
