//! Keyboard-style binary actions, shared by the live recorder and the scripted pilot.

use crate::env2d::Action;
use crate::scalar::Scalar;

/// Arrow keys currently held. Any combination is allowed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct KeySet {
    pub up: bool,
    pub down: bool,
    pub left: bool,
    pub right: bool,
}

impl KeySet {
    pub const NONE: KeySet = KeySet { up: false, down: false, left: false, right: false };

    pub fn any(&self) -> bool {
        self.up || self.down || self.left || self.right
    }

    /// Packs into the low four bits: right, left, up, down.
    pub fn to_bits(self) -> u8 {
        (self.right as u8) | (self.left as u8) << 1 | (self.up as u8) << 2 | (self.down as u8) << 3
    }

    pub fn from_bits(bits: u8) -> Self {
        Self { right: bits & 1 != 0, left: bits & 2 != 0, up: bits & 4 != 0, down: bits & 8 != 0 }
    }
}

/// `[no-op, +x, -x, +y, -y]`, with the no-op channel set only when no key is held.
pub fn keys_to_action<S: Scalar>(keys: KeySet) -> Action<S> {
    let bit = |b: bool| if b { S::one() } else { S::zero() };
    Action::new([bit(!keys.any()), bit(keys.right), bit(keys.left), bit(keys.up), bit(keys.down)])
        .expect("binary components are valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(keys_to_action::<f64>(KeySet::NONE).values(), &[1.0, 0.0, 0.0, 0.0, 0.0]);
        let right = KeySet { right: true, ..KeySet::NONE };
        assert_eq!(keys_to_action::<f64>(right).values(), &[0.0, 1.0, 0.0, 0.0, 0.0]);
        let up_right = KeySet { right: true, up: true, ..KeySet::NONE };
        assert_eq!(keys_to_action::<f64>(up_right).values(), &[0.0, 1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn bits_round_trip_all_combinations() {
        for bits in 0..16u8 {
            let k = KeySet::from_bits(bits);
            assert_eq!(k.to_bits(), bits);
            assert!(keys_to_action::<f32>(k).is_binary());
        }
    }
}
