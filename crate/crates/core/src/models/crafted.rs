//! Hand-set value-iteration kernels with known behaviour.

use super::ModelError;
use crate::gridworld::Action;
use crate::tensor::{Dims, Tensor};

/// (8, 2, f, f) kernel computing `Q_a(s) = R(s) + gamma * V(s + delta_a)`:
/// a unit center tap on the reward channel and `gamma` at the move offset on
/// the value channel. With zero padding, moves off the map see value 0.
pub fn move_kernel(f: usize, gamma: f64) -> Result<Tensor, ModelError> {
    if f < 3 || f.is_multiple_of(2) {
        return Err(ModelError::Config(format!(
            "move kernel needs odd f >= 3, got {f}"
        )));
    }
    let p = (f - 1) / 2;
    let mut k = Tensor::zeros(Dims::new(Action::COUNT, 2, f, f));
    for a in Action::ALL {
        let (dr, dc) = a.offset();
        *k.at_mut(a.index(), 0, p, p) = 1.0;
        let (i, j) = ((p as isize + dr) as usize, (p as isize + dc) as usize);
        *k.at_mut(a.index(), 1, i, j) = gamma;
    }
    Ok(k)
}

/// (8, 2, f, f) kernel with every tap strictly positive, deterministic in
/// `(a, c, i, j)`. Value mass spreads a full radius `(f - 1) / 2` per sweep.
pub fn spreading_kernel(f: usize) -> Result<Tensor, ModelError> {
    if f.is_multiple_of(2) {
        return Err(ModelError::Config(format!("kernel size {f} must be odd")));
    }
    let scale = 1.0 / (2 * f * f) as f64;
    Ok(Tensor::from_fn(
        Dims::new(Action::COUNT, 2, f, f),
        |a, c, i, j| scale * (1.0 + 0.1 * ((a + 3 * c + 5 * i + 7 * j) % 4) as f64),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn move_kernel_taps() {
        let k = move_kernel(5, 0.9).unwrap();
        let total: f64 = k.data().iter().sum();
        assert!((total - 8.0 * 1.9).abs() < 1e-12);
        // N reads the cell above: offset (-1, 0) from the center (2, 2)
        assert_eq!(k.at(Action::N.index(), 1, 1, 2), 0.9);
        assert_eq!(k.at(Action::SE.index(), 1, 3, 3), 0.9);
        assert!(move_kernel(1, 0.9).is_err());
    }

    #[test]
    fn spreading_kernel_is_positive() {
        let k = spreading_kernel(7).unwrap();
        assert!(k.data().iter().all(|&x| x > 0.0));
    }
}
